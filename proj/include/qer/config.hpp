#pragma once

// Experiment configuration: a flat `key = value` text format. Lines
// starting with '#' are comments. Angles accept a `pi` suffix ("0.03pi").

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qer/amplitude.hpp"

namespace qer {

enum class ReplayKind { qer, per, uniform };
enum class EnvKind { chain, grid, pole };

inline std::string to_string(ReplayKind k) {
    switch (k) {
        case ReplayKind::qer: return "qer";
        case ReplayKind::per: return "per";
        case ReplayKind::uniform: return "uniform";
    }
    return "?";
}

inline ReplayKind parse_replay_kind(std::string_view s) {
    if (s == "qer") return ReplayKind::qer;
    if (s == "per") return ReplayKind::per;
    if (s == "uniform") return ReplayKind::uniform;
    throw std::invalid_argument("unknown replay kind '" + std::string(s) + "' (expected qer, per or uniform)");
}

inline std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::chain: return "chain";
        case EnvKind::grid: return "grid";
        case EnvKind::pole: return "pole";
    }
    return "?";
}

/// Formats a double as its shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct ExperimentConfig {
    // environment
    EnvKind env = EnvKind::chain;
    std::size_t chain_length = 8;
    std::uint64_t chain_seed = 0;
    std::size_t max_episode_steps = 0;  // 0: environment default

    // agent
    ReplayKind replay = ReplayKind::qer;
    std::size_t capacity = 10'000;
    std::size_t batch_size = 32;
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    std::uint64_t epsilon_decay_frames = 50'000;
    double lr = 1e-3;
    std::string optimizer = "sgd";
    std::vector<std::size_t> hidden{64, 64};
    std::string head = "plain";
    bool double_q = false;
    bool clip_reward = false;
    std::uint64_t target_sync = 500;
    std::uint64_t train_interval = 1;

    // run
    std::uint64_t frames = 200'000;
    std::uint64_t eval_interval = 5'000;
    std::size_t eval_episodes = 10;
    std::size_t held_out_states = 32;
    std::uint64_t seed = 1;
    bool record_wall_time = false;

    // QER schedule; zeta2/tau2 default to 0.4 and 0.2 of the frame budget
    double zeta1 = 0.03 * kPi;
    std::optional<double> zeta2;
    double tau1 = kPi;
    std::optional<double> tau2;
    double mu = 100.0;
    double iota = 0.25 * kPi;
    double priority_epsilon = 1e-6;

    // PER
    double per_alpha = 0.6;
    double per_beta0 = 0.4;

    ScheduleParams schedule() const {
        const double budget = static_cast<double>(frames > 0 ? frames : 1);
        return {zeta1, zeta2.value_or(0.4 * budget), tau1, tau2.value_or(0.2 * budget), mu, iota};
    }

    double epsilon_at(std::uint64_t frame) const noexcept {
        if (epsilon_decay_frames == 0) return epsilon_end;
        const double frac = static_cast<double>(frame) / static_cast<double>(epsilon_decay_frames);
        return frac >= 1.0 ? epsilon_end : epsilon_start + (epsilon_end - epsilon_start) * frac;
    }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("config: ") + what);
        };
        require(chain_length >= 2, "chain_length must be >= 2");
        require(capacity >= 1, "capacity must be >= 1");
        require(batch_size >= 1 && batch_size <= capacity, "batch_size must be in [1, capacity]");
        require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
        require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must be in [0, 1]");
        require(epsilon_end >= 0.0 && epsilon_end <= 1.0, "epsilon_end must be in [0, 1]");
        require(lr > 0.0, "lr must be positive");
        require(optimizer == "sgd" || optimizer == "adam", "optimizer must be sgd or adam");
        require(head == "plain" || head == "dueling", "head must be plain or dueling");
        for (auto h : hidden) require(h >= 1, "hidden layer widths must be >= 1");
        require(target_sync >= 1, "target_sync must be >= 1");
        require(train_interval >= 1, "train_interval must be >= 1");
        require(eval_interval >= 1, "eval_interval must be >= 1");
        require(eval_episodes >= 1, "eval_episodes must be >= 1");
        require(held_out_states >= 1, "held_out_states must be >= 1");
        require(priority_epsilon >= 0.0, "priority_epsilon must be >= 0");
        require(per_alpha >= 0.0 && per_alpha <= 1.0, "per_alpha must be in [0, 1]");
        require(per_beta0 > 0.0 && per_beta0 <= 1.0, "per_beta0 must be in (0, 1]");
        schedule().validate();
    }

    /// Every setting with its effective value, in a fixed order.
    std::vector<std::pair<std::string, std::string>> key_values() const {
        const auto s = schedule();
        std::string hid;
        for (std::size_t i = 0; i < hidden.size(); ++i) hid += (i ? "," : "") + std::to_string(hidden[i]);
        return {
            {"env", to_string(env)},
            {"chain_length", std::to_string(chain_length)},
            {"chain_seed", std::to_string(chain_seed)},
            {"max_episode_steps", std::to_string(max_episode_steps)},
            {"replay", to_string(replay)},
            {"capacity", std::to_string(capacity)},
            {"batch_size", std::to_string(batch_size)},
            {"gamma", format_double(gamma)},
            {"epsilon_start", format_double(epsilon_start)},
            {"epsilon_end", format_double(epsilon_end)},
            {"epsilon_decay_frames", std::to_string(epsilon_decay_frames)},
            {"lr", format_double(lr)},
            {"optimizer", optimizer},
            {"hidden", hid},
            {"head", head},
            {"double_q", double_q ? "true" : "false"},
            {"clip_reward", clip_reward ? "true" : "false"},
            {"target_sync", std::to_string(target_sync)},
            {"train_interval", std::to_string(train_interval)},
            {"frames", std::to_string(frames)},
            {"eval_interval", std::to_string(eval_interval)},
            {"eval_episodes", std::to_string(eval_episodes)},
            {"held_out_states", std::to_string(held_out_states)},
            {"seed", std::to_string(seed)},
            {"record_wall_time", record_wall_time ? "true" : "false"},
            {"zeta1", format_double(s.zeta1)},
            {"zeta2", format_double(s.zeta2)},
            {"tau1", format_double(s.tau1)},
            {"tau2", format_double(s.tau2)},
            {"mu", format_double(s.mu)},
            {"iota", format_double(s.iota)},
            {"priority_epsilon", format_double(priority_epsilon)},
            {"per_alpha", format_double(per_alpha)},
            {"per_beta0", format_double(per_beta0)},
        };
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::string body = v;
    double scale = 1.0;
    if (body.size() >= 2 && body.compare(body.size() - 2, 2, "pi") == 0) {
        body = trim(body.substr(0, body.size() - 2));
        scale = kPi;
        if (body.empty()) return kPi;
        if (body.back() == '*') body = trim(body.substr(0, body.size() - 1));
    }
    double out = 0.0;
    const auto res = std::from_chars(body.data(), body.data() + body.size(), out);
    if (res.ec != std::errc{} || res.ptr != body.data() + body.size())
        throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
    return out * scale;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
    // Accept scientific notation for integral values, e.g. 2e5.
    const double d = parse_real(key, v);
    if (d < 0.0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
        throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "env") {
        if (v == "chain") c.env = EnvKind::chain;
        else if (v == "grid") c.env = EnvKind::grid;
        else if (v == "pole") c.env = EnvKind::pole;
        else throw std::invalid_argument("config: unknown env '" + v + "'");
    } else if (key == "chain_length") c.chain_length = parse_count(key, v);
    else if (key == "chain_seed") c.chain_seed = parse_count(key, v);
    else if (key == "max_episode_steps") c.max_episode_steps = parse_count(key, v);
    else if (key == "replay") c.replay = parse_replay_kind(v);
    else if (key == "capacity") c.capacity = parse_count(key, v);
    else if (key == "batch_size") c.batch_size = parse_count(key, v);
    else if (key == "gamma") c.gamma = parse_real(key, v);
    else if (key == "epsilon_start") c.epsilon_start = parse_real(key, v);
    else if (key == "epsilon_end") c.epsilon_end = parse_real(key, v);
    else if (key == "epsilon_decay_frames") c.epsilon_decay_frames = parse_count(key, v);
    else if (key == "lr") c.lr = parse_real(key, v);
    else if (key == "optimizer") c.optimizer = v;
    else if (key == "hidden") {
        c.hidden.clear();
        std::stringstream ss(v);
        for (std::string part; std::getline(ss, part, ',');) {
            part = trim(part);
            if (!part.empty()) c.hidden.push_back(parse_count(key, part));
        }
    } else if (key == "head") c.head = v;
    else if (key == "double_q") c.double_q = parse_bool(key, v);
    else if (key == "clip_reward") c.clip_reward = parse_bool(key, v);
    else if (key == "target_sync") c.target_sync = parse_count(key, v);
    else if (key == "train_interval") c.train_interval = parse_count(key, v);
    else if (key == "frames") c.frames = parse_count(key, v);
    else if (key == "eval_interval") c.eval_interval = parse_count(key, v);
    else if (key == "eval_episodes") c.eval_episodes = parse_count(key, v);
    else if (key == "held_out_states") c.held_out_states = parse_count(key, v);
    else if (key == "seed") c.seed = parse_count(key, v);
    else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, v);
    else if (key == "zeta1") c.zeta1 = parse_real(key, v);
    else if (key == "zeta2") c.zeta2 = parse_real(key, v);
    else if (key == "tau1") c.tau1 = parse_real(key, v);
    else if (key == "tau2") c.tau2 = parse_real(key, v);
    else if (key == "mu") c.mu = parse_real(key, v);
    else if (key == "iota") c.iota = parse_real(key, v);
    else if (key == "priority_epsilon") c.priority_epsilon = parse_real(key, v);
    else if (key == "per_alpha") c.per_alpha = parse_real(key, v);
    else if (key == "per_beta0") c.per_beta0 = parse_real(key, v);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    return parse_config(in);
}

}  // namespace qer
