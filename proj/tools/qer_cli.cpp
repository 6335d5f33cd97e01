#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qer/config.hpp"
#include "qer/harness.hpp"
#include "qer/metrics.hpp"
#include "qer/testing/checks.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
            const std::string& replay) {
    qer::ExperimentConfig cfg = qer::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!replay.empty()) cfg.replay = qer::parse_replay_kind(replay);
    const auto result = qer::run_experiment(cfg, out);
    std::cout << "wrote " << result.records.size() << " records to " << out;
    if (result.frames_to_solve) std::cout << " (solved at frame " << *result.frames_to_solve << ")";
    std::cout << "\n";
    return 0;
}

int cmd_compare(const std::string& out, const std::vector<std::string>& inputs, std::optional<double> threshold) {
    std::vector<std::filesystem::path> files(inputs.begin(), inputs.end());
    const auto report = qer::compare_runs(files, out, threshold);
    for (const auto& s : report.summaries) {
        std::cout << s.mechanism << ": " << s.solved_runs << "/" << s.runs << " solved, median frames-to-solve "
                  << (s.median_frames_to_solve ? qer::format_double(*s.median_frames_to_solve) : "unsolved") << "\n";
    }
    std::cout << "summary: " << report.summary_path.string() << "\ncurves: " << report.curves_path.string()
              << "\nruns: " << report.runs_path.string() << "\n";
    return 0;
}

int cmd_selftest() {
    using namespace qer::testing;
    const std::vector<CheckResult> results = {
        check_schedule_arithmetic(), check_unitarity(),           check_sum_tree(),
        check_sampling_statistics(), check_oracle_equivalence(), check_gradients(),
    };
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.seconds << " s) " << r.detail << "\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum-inspired experience replay experiments"};
    app.require_subcommand(1);

    std::string config_path, run_out, replay;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Train one agent and write a metrics file");
    run->add_option("--config", config_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Metrics output path")->required();
    run->add_option("--seed", seed, "Override the configured seed");
    run->add_option("--replay", replay, "Override the replay kind")->check(CLI::IsMember({"qer", "per", "uniform"}));

    std::string compare_out;
    std::vector<std::string> inputs;
    std::optional<double> threshold;
    auto* compare = app.add_subcommand("compare", "Aggregate metrics files across seeds");
    compare->add_option("--out", compare_out, "Summary table path")->required();
    compare->add_option("--return-threshold", threshold, "Count a run solved once eval_return reaches this value");
    compare->add_option("metrics", inputs, "Metrics files")->required()->check(CLI::ExistingFile);

    auto* selftest = app.add_subcommand("selftest", "Run the invariant and oracle-equivalence suites");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, run_out, seed, replay);
        if (*compare) return cmd_compare(compare_out, inputs, threshold);
        if (*selftest) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
