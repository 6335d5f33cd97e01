#pragma once

// Metrics files: '#'-prefixed provenance lines (`# key=value`, one per
// configuration setting), one CSV column header, then one record per
// evaluation point. Numbers use shortest round-trip formatting, so equal
// runs produce byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "qer/config.hpp"

namespace qer {

struct MetricsRecord {
    std::uint64_t frame = 0;
    std::uint64_t episodes = 0;
    double episode_return = 0.0;  // last completed training episode
    double mean_return = 0.0;     // sliding window over training episodes
    double eval_return = 0.0;     // greedy evaluation
    double mean_max_q = 0.0;      // over the held-out state set
    double loss = 0.0;            // mean over learning steps since the last record
    std::uint64_t rt_max = 0;
    double delta_max = 0.0;
    int policy_optimal = -1;  // 1/0 against value iteration, -1 when not enumerable
    double wall_time_s = 0.0;
};

inline constexpr const char* kMetricsColumns =
    "frame,episodes,episode_return,mean_return,eval_return,mean_max_q,loss,rt_max,delta_max,policy_optimal,wall_time_s";

class MetricsWriter {
public:
    MetricsWriter(const std::filesystem::path& path, const ExperimentConfig& cfg) : out_(path, std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open metrics file '" + path.string() + "' for writing");
        out_ << "# qer-metrics v1\n";
        for (const auto& [k, v] : cfg.key_values()) out_ << "# " << k << "=" << v << "\n";
        out_ << kMetricsColumns << "\n";
        check(path);
    }

    void write(const MetricsRecord& r) {
        if (last_frame_ && r.frame <= *last_frame_) throw std::logic_error("metrics: frames must be strictly increasing");
        last_frame_ = r.frame;
        out_ << r.frame << ',' << r.episodes << ',' << format_double(r.episode_return) << ','
             << format_double(r.mean_return) << ',' << format_double(r.eval_return) << ','
             << format_double(r.mean_max_q) << ',' << format_double(r.loss) << ',' << r.rt_max << ','
             << format_double(r.delta_max) << ',' << r.policy_optimal << ',' << format_double(r.wall_time_s) << '\n';
        out_.flush();
        if (!out_) throw std::runtime_error("metrics: write failed");
    }

private:
    void check(const std::filesystem::path& path) {
        out_.flush();
        if (!out_) throw std::runtime_error("metrics: cannot write '" + path.string() + "'");
    }

    std::ofstream out_;
    std::optional<std::uint64_t> last_frame_;
};

struct MetricsFile {
    std::filesystem::path path;
    std::map<std::string, std::string> settings;
    std::vector<MetricsRecord> records;

    std::string setting(const std::string& key, const std::string& fallback = "") const {
        const auto it = settings.find(key);
        return it == settings.end() ? fallback : it->second;
    }

    /// Replay kind plus network variant, e.g. "qer", "per+double", "qer+dueling".
    std::string mechanism() const {
        std::string m = setting("replay", "unknown");
        if (setting("double_q") == "true") m += "+double";
        if (setting("head") == "dueling") m += "+dueling";
        return m;
    }
};

inline MetricsFile read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file '" + path.string() + "'");
    MetricsFile f{path, {}, {}};
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) f.settings[detail::trim(line.substr(1, eq - 1))] = detail::trim(line.substr(eq + 1));
            continue;
        }
        if (!header_seen) {
            if (line != kMetricsColumns) fail("unexpected column header");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() != 11) fail("expected 11 columns");
        try {
            MetricsRecord r;
            r.frame = std::stoull(cols[0]);
            r.episodes = std::stoull(cols[1]);
            r.episode_return = std::stod(cols[2]);
            r.mean_return = std::stod(cols[3]);
            r.eval_return = std::stod(cols[4]);
            r.mean_max_q = std::stod(cols[5]);
            r.loss = std::stod(cols[6]);
            r.rt_max = std::stoull(cols[7]);
            r.delta_max = std::stod(cols[8]);
            r.policy_optimal = std::stoi(cols[9]);
            r.wall_time_s = std::stod(cols[10]);
            f.records.push_back(r);
        } catch (const std::logic_error&) {
            fail("malformed number");
        }
    }
    if (!header_seen) fail("missing column header");
    return f;
}

/// First evaluation frame at which the run counts as solved: the greedy
/// policy matches value iteration, or (when a threshold is given) the
/// evaluation return reaches it.
inline std::optional<std::uint64_t> frames_to_solve(const MetricsFile& f, std::optional<double> return_threshold = {}) {
    for (const auto& r : f.records) {
        const bool solved = return_threshold ? r.eval_return >= *return_threshold : r.policy_optimal == 1;
        if (solved) return r.frame;
    }
    return std::nullopt;
}

/// Median with unsolved runs ordered after every solved one.
inline std::optional<double> median_frames_to_solve(std::vector<std::optional<std::uint64_t>> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (!a) return false;
        if (!b) return true;
        return *a < *b;
    });
    const std::size_t n = v.size();
    if (n % 2 == 1) {
        const auto& mid = v[n / 2];
        return mid ? std::optional<double>(static_cast<double>(*mid)) : std::nullopt;
    }
    const auto& a = v[n / 2 - 1];
    const auto& b = v[n / 2];
    if (!a || !b) return std::nullopt;
    return 0.5 * (static_cast<double>(*a) + static_cast<double>(*b));
}

struct MechanismSummary {
    std::string mechanism;
    std::size_t runs = 0;
    std::size_t solved_runs = 0;
    std::optional<double> median_frames_to_solve;
    double final_eval_return_mean = 0.0;
    double final_eval_return_std = 0.0;
    double final_mean_max_q_mean = 0.0;
    double final_mean_max_q_std = 0.0;
};

struct ComparisonReport {
    std::vector<MechanismSummary> summaries;
    std::filesystem::path summary_path, curves_path, runs_path;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
    auto p = out;
    p.replace_extension();
    p += suffix;
    return p;
}

}  // namespace detail

/// Aggregates runs by mechanism across seeds. Writes the summary table to
/// `out`, a long-format curve table (mechanism, frame, metric, mean, std,
/// runs) to `<out stem>.curves.csv`, and per-run frames-to-solve to
/// `<out stem>.runs.csv`.
inline ComparisonReport compare_runs(const std::vector<std::filesystem::path>& files, const std::filesystem::path& out,
                                     std::optional<double> return_threshold = {}) {
    if (files.size() < 2) throw std::invalid_argument("compare: need at least two metrics files");
    std::vector<MetricsFile> runs;
    for (const auto& f : files) runs.push_back(read_metrics(f));
    const auto grid_of = [](const MetricsFile& m) {
        std::vector<std::uint64_t> g;
        for (const auto& r : m.records) g.push_back(r.frame);
        return g;
    };
    const auto grid = grid_of(runs.front());
    for (const auto& r : runs)
        if (grid_of(r) != grid)
            throw std::invalid_argument("compare: frame grids differ between '" + runs.front().path.string() +
                                        "' and '" + r.path.string() + "'");

    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricsFile*>> groups;
    for (const auto& r : runs) {
        const auto m = r.mechanism();
        if (!groups.count(m)) order.push_back(m);
        groups[m].push_back(&r);
    }

    ComparisonReport report;
    report.summary_path = out;
    report.curves_path = detail::sibling(out, ".curves.csv");
    report.runs_path = detail::sibling(out, ".runs.csv");

    std::ofstream runs_out(report.runs_path);
    std::ofstream curves(report.curves_path);
    std::ofstream summary(out);
    if (!runs_out || !curves || !summary) throw std::runtime_error("compare: cannot write '" + out.string() + "'");
    runs_out << "file,mechanism,seed,frames_to_solve\n";
    curves << "mechanism,frame,metric,mean,std,runs\n";
    summary << "mechanism,runs,solved_runs,frames_to_solve_median,final_eval_return_mean,final_eval_return_std,"
               "final_mean_max_q_mean,final_mean_max_q_std\n";

    using Getter = double (*)(const MetricsRecord&);
    const std::vector<std::pair<const char*, Getter>> metrics = {
        {"eval_return", [](const MetricsRecord& r) { return r.eval_return; }},
        {"mean_max_q", [](const MetricsRecord& r) { return r.mean_max_q; }},
        {"mean_return", [](const MetricsRecord& r) { return r.mean_return; }},
        {"loss", [](const MetricsRecord& r) { return r.loss; }},
    };

    for (const auto& name : order) {
        const auto& members = groups[name];
        MechanismSummary s;
        s.mechanism = name;
        s.runs = members.size();
        std::vector<std::optional<std::uint64_t>> solve;
        std::vector<double> final_ret, final_q;
        for (const auto* m : members) {
            const auto fts = frames_to_solve(*m, return_threshold);
            solve.push_back(fts);
            if (fts) ++s.solved_runs;
            runs_out << m->path.string() << ',' << name << ',' << m->setting("seed") << ','
                     << (fts ? std::to_string(*fts) : std::string("unsolved")) << '\n';
            if (!m->records.empty()) {
                final_ret.push_back(m->records.back().eval_return);
                final_q.push_back(m->records.back().mean_max_q);
            }
        }
        s.median_frames_to_solve = median_frames_to_solve(solve);
        std::tie(s.final_eval_return_mean, s.final_eval_return_std) = detail::mean_std(final_ret);
        std::tie(s.final_mean_max_q_mean, s.final_mean_max_q_std) = detail::mean_std(final_q);
        summary << name << ',' << s.runs << ',' << s.solved_runs << ','
                << (s.median_frames_to_solve ? format_double(*s.median_frames_to_solve) : std::string("unsolved"))
                << ',' << format_double(s.final_eval_return_mean) << ',' << format_double(s.final_eval_return_std)
                << ',' << format_double(s.final_mean_max_q_mean) << ',' << format_double(s.final_mean_max_q_std)
                << '\n';

        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (const auto& [metric, get] : metrics) {
                std::vector<double> vals;
                for (const auto* m : members) vals.push_back(get(m->records[i]));
                const auto [mean, sd] = detail::mean_std(vals);
                curves << name << ',' << grid[i] << ',' << metric << ',' << format_double(mean) << ','
                       << format_double(sd) << ',' << vals.size() << '\n';
            }
        }
        report.summaries.push_back(s);
    }
    if (!runs_out || !curves || !summary) throw std::runtime_error("compare: write failed");
    return report;
}

}  // namespace qer
