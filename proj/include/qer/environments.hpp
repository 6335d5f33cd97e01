#pragma once

// Deterministic desk-scale environments with a reset/step contract, plus a
// value-iteration ground truth for the enumerable ones.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qer/random.hpp"
#include "qer/transition.hpp"

namespace qer {

struct EnvSpec {
    std::size_t observation_dim = 0;
    std::size_t action_count = 0;
    std::size_t max_episode_length = 0;
    std::uint64_t seed = 0;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;      // episode over: terminal or step limit
    bool terminal = false;  // true terminal state; no bootstrap past it
};

/// Deterministic dynamics of an enumerable environment.
struct Outcome {
    std::size_t next = 0;
    double reward = 0.0;
    bool terminal = false;
};

namespace detail {

/// Step counter and done-latch shared by all environments.
class EpisodeClock {
public:
    explicit EpisodeClock(std::size_t limit) : limit_(limit) {}
    void reset() noexcept {
        steps_ = 0;
        done_ = false;
    }
    void begin_step(const char* who) const {
        if (done_) throw std::logic_error(std::string(who) + ": step called on a finished episode");
    }
    bool finish_step(bool terminal) noexcept {
        ++steps_;
        done_ = terminal || steps_ >= limit_;
        return done_;
    }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t limit() const noexcept { return limit_; }

private:
    std::size_t limit_;
    std::size_t steps_ = 0;
    bool done_ = false;
};

inline void check_action(std::size_t action, std::size_t count) {
    if (action >= count) throw std::out_of_range("environment: action " + std::to_string(action) + " out of range");
}

}  // namespace detail

/// Linear chain of n states with one correct action per state. The correct
/// action advances, a wrong one sends the agent back to state 0. Reaching
/// state n-1 pays 1 and ends the episode; every other step pays 0. By
/// default an episode lasts at most n-1 steps, so a uniform random policy
/// succeeds with probability 2^-(n-1).
class ChainMdp {
public:
    explicit ChainMdp(std::size_t n, std::uint64_t seed = 0, std::size_t max_steps = 0)
        : n_(n), seed_(seed), clock_(max_steps ? max_steps : (n > 1 ? n - 1 : 1)) {
        if (n < 2) throw std::invalid_argument("ChainMdp: need at least 2 states");
        // The correct action at state 0 is always 1, so the constant
        // action-0 policy never reaches the goal.
        std::uint64_t s = seed;
        const std::uint64_t bits = splitmix64(s);
        correct_.resize(n - 1);
        for (std::size_t i = 0; i < n - 1; ++i) correct_[i] = (bits >> (i % 64)) & 1U;
        correct_[0] = 1;
    }

    EnvSpec spec() const noexcept { return {n_, 2, clock_.limit(), seed_}; }
    std::size_t length() const noexcept { return n_; }
    const std::vector<std::size_t>& correct_actions() const noexcept { return correct_; }
    std::size_t position() const noexcept { return pos_; }

    template <UniformSource G>
    Observation reset(G& /*rng*/) {
        clock_.reset();
        pos_ = 0;
        return observe(pos_);
    }

    StepResult step(std::size_t action) {
        clock_.begin_step("ChainMdp");
        detail::check_action(action, 2);
        const Outcome o = outcome(pos_, action);
        pos_ = o.next;
        const bool done = clock_.finish_step(o.terminal);
        return {observe(pos_), o.reward, done, o.terminal};
    }

    // Enumerable model.
    std::size_t state_count() const noexcept { return n_; }
    std::size_t action_count() const noexcept { return 2; }
    std::size_t initial_state() const noexcept { return 0; }
    bool is_terminal(std::size_t s) const noexcept { return s == n_ - 1; }
    bool is_valid(std::size_t s) const noexcept { return s < n_; }
    Observation observe(std::size_t s) const {
        Observation o(n_, 0.0);
        o[s] = 1.0;
        return o;
    }
    Outcome outcome(std::size_t s, std::size_t a) const {
        if (a != correct_[s]) return {0, 0.0, false};
        const std::size_t next = s + 1;
        return {next, next == n_ - 1 ? 1.0 : 0.0, next == n_ - 1};
    }

private:
    std::size_t n_;
    std::uint64_t seed_;
    detail::EpisodeClock clock_;
    std::vector<std::size_t> correct_;
    std::size_t pos_ = 0;
};

/// Grid with walls. Actions: 0 up, 1 down, 2 left, 3 right. Moving into a
/// wall or the border leaves the agent in place. Each step pays -0.01;
/// entering the goal pays +1 and ends the episode.
class GridWorld {
public:
    struct Cell {
        std::size_t x = 0, y = 0;
        bool operator==(const Cell&) const = default;
    };

    static constexpr double kStepReward = -0.01;
    static constexpr double kGoalReward = 1.0;

    GridWorld(std::size_t width, std::size_t height, std::vector<Cell> walls, Cell start, Cell goal,
              std::size_t max_steps = 0, std::uint64_t seed = 0)
        : w_(width), h_(height), start_(start), goal_(goal), seed_(seed),
          clock_(max_steps ? max_steps : 4 * width * height) {
        if (w_ < 2 || h_ < 1) throw std::invalid_argument("GridWorld: grid must be at least 2x1");
        wall_.assign(w_ * h_, false);
        for (const auto& c : walls) {
            if (!inside(c)) throw std::invalid_argument("GridWorld: wall outside grid");
            wall_[index(c)] = true;
        }
        if (!inside(start) || !inside(goal) || wall_[index(start)] || wall_[index(goal)])
            throw std::invalid_argument("GridWorld: start and goal must be free cells inside the grid");
        if (start == goal) throw std::invalid_argument("GridWorld: start equals goal");
        if (!reachable()) throw std::invalid_argument("GridWorld: goal not reachable from start");
    }

    /// 5x5 grid with two wall bars, start in one corner and goal in the other.
    static GridWorld standard(std::size_t max_steps = 0, std::uint64_t seed = 0) {
        return GridWorld(5, 5, {{1, 1}, {2, 1}, {3, 1}, {1, 3}, {2, 3}, {3, 3}}, {0, 0}, {4, 4}, max_steps, seed);
    }

    EnvSpec spec() const noexcept { return {2, 4, clock_.limit(), seed_}; }
    Cell position() const noexcept { return cell(pos_); }

    template <UniformSource G>
    Observation reset(G& /*rng*/) {
        clock_.reset();
        pos_ = index(start_);
        return observe(pos_);
    }

    StepResult step(std::size_t action) {
        clock_.begin_step("GridWorld");
        detail::check_action(action, 4);
        const Outcome o = outcome(pos_, action);
        pos_ = o.next;
        const bool done = clock_.finish_step(o.terminal);
        return {observe(pos_), o.reward, done, o.terminal};
    }

    std::size_t state_count() const noexcept { return w_ * h_; }
    std::size_t action_count() const noexcept { return 4; }
    std::size_t initial_state() const noexcept { return index(start_); }
    bool is_terminal(std::size_t s) const noexcept { return s == index(goal_); }
    bool is_valid(std::size_t s) const noexcept { return s < w_ * h_ && !wall_[s]; }
    Observation observe(std::size_t s) const {
        const Cell c = cell(s);
        return {static_cast<double>(c.x) / static_cast<double>(w_ - 1),
                h_ > 1 ? static_cast<double>(c.y) / static_cast<double>(h_ - 1) : 0.0};
    }
    Outcome outcome(std::size_t s, std::size_t a) const {
        const std::size_t next = move(s, a);
        if (is_terminal(next)) return {next, kGoalReward, true};
        return {next, kStepReward, false};
    }

private:
    bool inside(const Cell& c) const noexcept { return c.x < w_ && c.y < h_; }
    std::size_t index(const Cell& c) const noexcept { return c.y * w_ + c.x; }
    Cell cell(std::size_t s) const noexcept { return {s % w_, s / w_}; }

    std::size_t move(std::size_t s, std::size_t a) const {
        Cell c = cell(s);
        switch (a) {
            case 0: if (c.y > 0) --c.y; break;
            case 1: if (c.y + 1 < h_) ++c.y; break;
            case 2: if (c.x > 0) --c.x; break;
            case 3: if (c.x + 1 < w_) ++c.x; break;
            default: throw std::out_of_range("GridWorld: bad action");
        }
        return wall_[index(c)] ? s : index(c);
    }

    bool reachable() const {
        std::vector<bool> seen(w_ * h_, false);
        std::queue<std::size_t> q;
        q.push(index(start_));
        seen[index(start_)] = true;
        while (!q.empty()) {
            const auto s = q.front();
            q.pop();
            if (s == index(goal_)) return true;
            for (std::size_t a = 0; a < 4; ++a) {
                const auto t = move(s, a);
                if (!seen[t]) {
                    seen[t] = true;
                    q.push(t);
                }
            }
        }
        return false;
    }

    std::size_t w_, h_;
    Cell start_, goal_;
    std::uint64_t seed_;
    detail::EpisodeClock clock_;
    std::vector<bool> wall_;
    std::size_t pos_ = 0;
};

/// Cart-pole balancing with explicit Euler integration. Observation is
/// (x, x_dot, angle, angle_dot); action 0 pushes left, 1 right. Every step
/// pays +1; the episode fails when |angle| > 12 degrees or |x| > 2.4.
class PoleBalance {
public:
    static constexpr double kGravity = 9.8;
    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kForce = 10.0;
    static constexpr double kDt = 0.02;
    static constexpr double kAngleLimit = 12.0 * 2.0 * 3.141592653589793 / 360.0;
    static constexpr double kPositionLimit = 2.4;

    explicit PoleBalance(std::size_t max_steps = 500, std::uint64_t seed = 0) : seed_(seed), clock_(max_steps) {
        if (max_steps == 0) throw std::invalid_argument("PoleBalance: max_steps must be >= 1");
    }

    EnvSpec spec() const noexcept { return {4, 2, clock_.limit(), seed_}; }
    const std::array<double, 4>& physical_state() const noexcept { return s_; }

    template <UniformSource G>
    Observation reset(G& rng) {
        clock_.reset();
        for (auto& v : s_) v = -0.05 + 0.1 * rng.uniform();
        return observe();
    }

    StepResult step(std::size_t action) {
        clock_.begin_step("PoleBalance");
        detail::check_action(action, 2);
        s_ = dynamics(s_, action);
        const bool failed = std::abs(s_[0]) > kPositionLimit || std::abs(s_[2]) > kAngleLimit;
        const bool done = clock_.finish_step(failed);
        return {observe(), 1.0, done, failed};
    }

    static std::array<double, 4> dynamics(const std::array<double, 4>& s, std::size_t action) {
        const double total_mass = kCartMass + kPoleMass;
        const double pole_ml = kPoleMass * kHalfLength;
        const double force = action == 1 ? kForce : -kForce;
        const double cos_t = std::cos(s[2]);
        const double sin_t = std::sin(s[2]);
        const double temp = (force + pole_ml * s[3] * s[3] * sin_t) / total_mass;
        const double theta_acc =
            (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
        const double x_acc = temp - pole_ml * theta_acc * cos_t / total_mass;
        return {s[0] + kDt * s[1], s[1] + kDt * x_acc, s[2] + kDt * s[3], s[3] + kDt * theta_acc};
    }

private:
    Observation observe() const { return {s_[0], s_[1], s_[2], s_[3]}; }

    std::uint64_t seed_;
    detail::EpisodeClock clock_;
    std::array<double, 4> s_{};
};

/// Environments whose state space can be enumerated for value iteration.
template <class E>
concept TabularEnvironment = requires(const E& e, std::size_t s, std::size_t a) {
    { e.state_count() } -> std::convertible_to<std::size_t>;
    { e.action_count() } -> std::convertible_to<std::size_t>;
    { e.is_terminal(s) } -> std::convertible_to<bool>;
    { e.is_valid(s) } -> std::convertible_to<bool>;
    { e.outcome(s, a) } -> std::same_as<Outcome>;
    { e.observe(s) } -> std::convertible_to<Observation>;
};

struct QTable {
    std::size_t states = 0;
    std::size_t actions = 0;
    std::vector<double> values;

    double operator()(std::size_t s, std::size_t a) const { return values[s * actions + a]; }
    double& operator()(std::size_t s, std::size_t a) { return values[s * actions + a]; }

    double max_value(std::size_t s) const {
        double best = (*this)(s, 0);
        for (std::size_t a = 1; a < actions; ++a) best = std::max(best, (*this)(s, a));
        return best;
    }

    /// Actions within `tol` of the best value at s.
    std::vector<std::size_t> optimal_actions(std::size_t s, double tol = 1e-9) const {
        const double best = max_value(s);
        std::vector<std::size_t> out;
        for (std::size_t a = 0; a < actions; ++a)
            if ((*this)(s, a) >= best - tol) out.push_back(a);
        return out;
    }
};

/// Bellman backup of Q at (s, a); terminal successors contribute no future value.
template <TabularEnvironment E>
double bellman_backup(const E& env, const QTable& q, std::size_t s, std::size_t a, double gamma) {
    const Outcome o = env.outcome(s, a);
    return o.reward + (o.terminal ? 0.0 : gamma * q.max_value(o.next));
}

/// Q* by synchronous value iteration until the sup-norm update is below
/// 1e-12. Terminal and invalid states keep Q = 0.
template <TabularEnvironment E>
QTable optimal_q(const E& env, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("optimal_q: gamma must be in [0, 1]");
    QTable q{env.state_count(), env.action_count(), std::vector<double>(env.state_count() * env.action_count(), 0.0)};
    constexpr std::size_t kMaxSweeps = 1'000'000;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        QTable next = q;
        double change = 0.0;
        for (std::size_t s = 0; s < q.states; ++s) {
            if (!env.is_valid(s) || env.is_terminal(s)) continue;
            for (std::size_t a = 0; a < q.actions; ++a) {
                next(s, a) = bellman_backup(env, q, s, a, gamma);
                change = std::max(change, std::abs(next(s, a) - q(s, a)));
            }
        }
        q = std::move(next);
        if (change < 1e-12) return q;
    }
    throw std::runtime_error("optimal_q: value iteration did not converge");
}

}  // namespace qer
