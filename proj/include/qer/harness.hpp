#pragma once

// Experiment runner: the act / store / sample / learn / re-prioritize loop
// over a chosen environment and replay memory. A run is a pure function of
// its configuration (seed included).

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "qer/baseline_replays.hpp"
#include "qer/config.hpp"
#include "qer/environments.hpp"
#include "qer/metrics.hpp"
#include "qer/qer_buffer.hpp"
#include "qer/qnetwork.hpp"
#include "qer/random.hpp"

namespace qer {

using Environment = std::variant<ChainMdp, GridWorld, PoleBalance>;

/// Independent random streams derived from the run seed.
enum class Stream : std::uint64_t { init = 1, act = 2, env = 3, eval = 4, held_out = 5, replay = 6 };

inline Rng stream_rng(std::uint64_t seed, Stream s) { return Rng(derive_seed(seed, static_cast<std::uint64_t>(s))); }

inline Environment make_environment(const ExperimentConfig& cfg) {
    switch (cfg.env) {
        case EnvKind::chain: return ChainMdp(cfg.chain_length, cfg.chain_seed, cfg.max_episode_steps);
        case EnvKind::grid: return GridWorld::standard(cfg.max_episode_steps, cfg.seed);
        case EnvKind::pole: return PoleBalance(cfg.max_episode_steps ? cfg.max_episode_steps : 500, cfg.seed);
    }
    throw std::invalid_argument("unknown environment");
}

inline EnvSpec spec_of(const Environment& env) {
    return std::visit([](const auto& e) { return e.spec(); }, env);
}

/// Q* for enumerable environments; nullopt otherwise.
inline std::optional<QTable> optimal_q_of(const Environment& env, double gamma) {
    return std::visit(
        [gamma](const auto& e) -> std::optional<QTable> {
            if constexpr (TabularEnvironment<std::decay_t<decltype(e)>>) return optimal_q(e, gamma);
            else return std::nullopt;
        },
        env);
}

/// Whether the network's greedy action is optimal at every valid
/// non-terminal state.
template <TabularEnvironment E>
bool greedy_policy_optimal(const QNetwork& net, const E& env, const QTable& q) {
    for (std::size_t s = 0; s < env.state_count(); ++s) {
        if (!env.is_valid(s) || env.is_terminal(s)) continue;
        const auto best = q.optimal_actions(s);
        const auto a = greedy_action(net.forward(env.observe(s)));
        if (std::find(best.begin(), best.end(), a) == best.end()) return false;
    }
    return true;
}

struct EvalResult {
    double mean_return = 0.0;
    double mean_max_q = 0.0;
};

/// Greedy rollouts (no exploration) on a copy of the environment, and the
/// mean over held-out states of max_a Q(s, a).
template <class Env, UniformSource G>
EvalResult evaluate(const QNetwork& net, Env env, std::size_t episodes, std::span<const Observation> held_out, G& rng) {
    if (episodes == 0) throw std::invalid_argument("evaluate: episodes must be >= 1");
    EvalResult out;
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation obs = env.reset(rng);
        for (;;) {
            const auto step = env.step(greedy_action(net.forward(obs)));
            total += step.reward;
            if (step.done) break;
            obs = step.observation;
        }
    }
    out.mean_return = total / static_cast<double>(episodes);
    if (!held_out.empty()) {
        const auto dim = static_cast<Eigen::Index>(held_out.front().size());
        Eigen::MatrixXd states(dim, static_cast<Eigen::Index>(held_out.size()));
        for (std::size_t i = 0; i < held_out.size(); ++i)
            states.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(held_out[i].data(), dim);
        out.mean_max_q = net.forward_batch(states).colwise().maxCoeff().mean();
    }
    return out;
}

/// States visited by a uniform random policy at run start, from a stream
/// of their own.
template <class Env>
std::vector<Observation> collect_held_out_states(Env env, std::size_t count, Rng& rng) {
    std::vector<Observation> states;
    Observation obs = env.reset(rng);
    const std::size_t actions = env.spec().action_count;
    while (states.size() < count) {
        states.push_back(obs);
        const auto step = env.step(rng.below(actions));
        obs = step.done ? env.reset(rng) : step.observation;
    }
    return states;
}

/// Optional observation points into a run, used by tests.
struct RunHooks {
    std::function<void(std::uint64_t frame, const Transition&)> on_transition;
    std::function<void(std::uint64_t frame)> on_first_learning_step;
};

struct RunResult {
    std::filesystem::path metrics_path;
    std::vector<MetricsRecord> records;
    std::optional<std::uint64_t> frames_to_solve;
    std::vector<double> final_parameters;
};

namespace detail {

inline QerConfig qer_config(const ExperimentConfig& cfg) {
    QerConfig q;
    q.capacity = cfg.capacity;
    q.schedule = cfg.schedule();
    q.priority_epsilon = cfg.priority_epsilon;
    return q;
}

inline PerConfig per_config(const ExperimentConfig& cfg) {
    PerConfig p;
    p.alpha = cfg.per_alpha;
    p.beta0 = cfg.per_beta0;
    p.epsilon = cfg.priority_epsilon;
    p.anneal_frames = cfg.frames;
    return p;
}

template <class Env, class Replay>
RunResult run_loop(const ExperimentConfig& cfg, Env env, Replay replay, const std::filesystem::path& out,
                   const RunHooks& hooks) {
    const auto t0 = std::chrono::steady_clock::now();
    const EnvSpec spec = env.spec();
    Rng init_rng = stream_rng(cfg.seed, Stream::init);
    Rng act_rng = stream_rng(cfg.seed, Stream::act);
    Rng env_rng = stream_rng(cfg.seed, Stream::env);
    Rng replay_rng = stream_rng(cfg.seed, Stream::replay);
    Rng held_rng = stream_rng(cfg.seed, Stream::held_out);

    NetworkShape shape{spec.observation_dim, cfg.hidden, spec.action_count,
                       cfg.head == "dueling" ? HeadKind::dueling : HeadKind::plain};
    QNetwork online(shape, init_rng);
    QNetwork target = online;
    Optimizer optimizer({cfg.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd, cfg.lr});
    const TdOptions td{cfg.gamma, cfg.double_q, cfg.clip_reward};

    std::optional<QTable> qstar;
    if constexpr (TabularEnvironment<Env>) qstar = optimal_q(env, cfg.gamma);
    const auto held_out = collect_held_out_states(env, cfg.held_out_states, held_rng);

    MetricsWriter writer(out, cfg);
    RunResult result;
    result.metrics_path = out;

    std::deque<double> window;
    constexpr std::size_t kWindow = 100;
    double episode_return = 0.0, last_return = 0.0;
    std::uint64_t episodes = 0, learn_steps = 0;
    double loss_sum = 0.0;
    std::uint64_t loss_count = 0;
    std::vector<const Transition*> batch_ptrs;

    Observation obs = env.reset(env_rng);
    for (std::uint64_t frame = 1; frame <= cfg.frames; ++frame) {
        const std::size_t action = act_epsilon_greedy(online, obs, cfg.epsilon_at(frame), act_rng);
        StepResult step = env.step(action);
        episode_return += step.reward;
        Transition t{obs, action, step.reward, step.observation, step.terminal};
        if (hooks.on_transition) hooks.on_transition(frame, t);
        replay.insert(std::move(t), frame);

        if (replay.learning_started() && frame % cfg.train_interval == 0) {
            if (learn_steps == 0 && hooks.on_first_learning_step) hooks.on_first_learning_step(frame);
            const SampledBatch batch = replay.sample_minibatch(cfg.batch_size, replay_rng, frame);
            batch_ptrs.clear();
            for (auto s : batch.slots) batch_ptrs.push_back(&replay.transition(s));
            const TrainResult tr = train_step(online, target, batch_ptrs, batch.weights, td, optimizer);
            replay.update_after_learn(batch.slots, tr.td_errors, frame);
            loss_sum += tr.mean_loss;
            ++loss_count;
            if (++learn_steps % cfg.target_sync == 0) sync_target(online, target);
        }

        if (step.done) {
            last_return = episode_return;
            window.push_back(episode_return);
            if (window.size() > kWindow) window.pop_front();
            episode_return = 0.0;
            ++episodes;
            obs = env.reset(env_rng);
        } else {
            obs = std::move(step.observation);
        }

        if (frame % cfg.eval_interval == 0) {
            Rng eval_rng = stream_rng(cfg.seed, Stream::eval);
            const auto ev = evaluate(online, env, cfg.eval_episodes, held_out, eval_rng);
            MetricsRecord r;
            r.frame = frame;
            r.episodes = episodes;
            r.episode_return = last_return;
            double wsum = 0.0;
            for (double v : window) wsum += v;
            r.mean_return = window.empty() ? 0.0 : wsum / static_cast<double>(window.size());
            r.eval_return = ev.mean_return;
            r.mean_max_q = ev.mean_max_q;
            r.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
            const ReplayStats st = replay.stats();
            r.rt_max = st.rt_max;
            r.delta_max = st.delta_max;
            if constexpr (TabularEnvironment<Env>) r.policy_optimal = greedy_policy_optimal(online, env, *qstar) ? 1 : 0;
            if (cfg.record_wall_time)
                r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            writer.write(r);
            result.records.push_back(r);
            if (!result.frames_to_solve && r.policy_optimal == 1) result.frames_to_solve = frame;
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    const Eigen::VectorXd flat = online.parameters().flatten();
    result.final_parameters.assign(flat.data(), flat.data() + flat.size());
    return result;
}

}  // namespace detail

/// Runs one experiment and writes its metrics file to `out`.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                const RunHooks& hooks = {}) {
    cfg.validate();
    return std::visit(
        [&](auto env) -> RunResult {
            switch (cfg.replay) {
                case ReplayKind::qer: return detail::run_loop(cfg, std::move(env), QerBuffer(detail::qer_config(cfg)), out, hooks);
                case ReplayKind::per:
                    return detail::run_loop(cfg, std::move(env), PerReplay(cfg.capacity, detail::per_config(cfg)), out, hooks);
                case ReplayKind::uniform: return detail::run_loop(cfg, std::move(env), UniformReplay(cfg.capacity), out, hooks);
            }
            throw std::invalid_argument("unknown replay kind");
        },
        make_environment(cfg));
}

}  // namespace qer
