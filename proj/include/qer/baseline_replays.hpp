#pragma once

// Reference replay memories: uniform sampling and proportional prioritized
// replay with importance-sampling correction. Both sit on the same circular
// store and sum tree as QerBuffer, so only the sampling rule differs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qer/random.hpp"
#include "qer/replay_store.hpp"
#include "qer/transition.hpp"

namespace qer {

struct PerConfig {
    double alpha = 0.6;
    double beta0 = 0.4;
    double beta_final = 1.0;
    double epsilon = 1e-6;
    /// Frames over which beta is annealed linearly from beta0 to beta_final.
    std::uint64_t anneal_frames = 200'000;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("PER: alpha must be in [0, 1]");
        if (!(beta0 > 0.0 && beta0 <= 1.0)) throw std::invalid_argument("PER: beta0 must be in (0, 1]");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("PER: epsilon must be >= 0");
    }

    double beta(std::uint64_t te) const noexcept {
        if (anneal_frames == 0) return beta_final;
        const double frac = std::min(1.0, static_cast<double>(te) / static_cast<double>(anneal_frames));
        return beta0 + (beta_final - beta0) * frac;
    }
};

/// (|delta| + epsilon)^alpha.
inline double per_priority(double delta, const PerConfig& cfg) {
    return std::pow(std::abs(delta) + cfg.epsilon, cfg.alpha);
}

/// (n_live * prob)^(-beta), before normalization by the batch maximum.
inline double per_is_weight(double prob, std::size_t n_live, double beta) {
    if (!(prob > 0.0)) throw std::invalid_argument("per_is_weight: probability must be positive");
    return std::pow(static_cast<double>(n_live) * prob, -beta);
}

class UniformReplay {
public:
    explicit UniformReplay(std::size_t capacity) : store_(capacity) {}

    std::size_t capacity() const noexcept { return store_.capacity(); }
    std::size_t size() const noexcept { return store_.size(); }
    bool learning_started() const noexcept { return store_.learning_started(); }
    const Transition& transition(std::size_t slot) const { return store_.transition(slot); }
    std::uint64_t replay_count(std::size_t slot) const { return store_.replay_count(slot); }
    ReplayStats stats() const noexcept { return {delta_max_, rt_max_}; }
    const SumTree& tree() const noexcept { return store_.tree(); }

    std::size_t insert(Transition t, std::uint64_t /*te*/) {
        const std::size_t slot = store_.place(std::move(t));
        store_.tree().set(slot, 1.0);
        return slot;
    }

    /// I.i.d. uniform slots over the live entries, with replacement.
    template <UniformSource G>
    std::vector<std::size_t> uniform_sample(std::size_t n, G& rng) const {
        if (store_.empty()) throw std::logic_error("UniformReplay::uniform_sample: buffer is empty");
        return store_.tree().sample_with_replacement(rng, n);
    }

    template <UniformSource G>
    SampledBatch sample_minibatch(std::size_t n, G& rng, std::uint64_t /*te*/ = 0) {
        store_.require_learning_started("UniformReplay::sample_minibatch");
        SampledBatch batch{uniform_sample(n, rng), std::vector<double>(n, 1.0)};
        store_.mark_pending(batch.slots);
        return batch;
    }

    void update_after_learn(std::span<const std::size_t> slots, std::span<const double> deltas, std::uint64_t /*te*/) {
        const auto last = store_.final_occurrences(slots, deltas.size());
        for (double d : deltas) delta_max_ = std::max(delta_max_, std::abs(d));
        for (std::size_t j = 0; j < slots.size(); ++j)
            if (last[j]) rt_max_ = std::max(rt_max_, store_.bump_replay_count(slots[j]));
        store_.clear_pending();
    }

private:
    detail::CircularStore store_;
    double delta_max_ = 0.0;
    std::uint64_t rt_max_ = 0;
};

class PerReplay {
public:
    PerReplay(std::size_t capacity, const PerConfig& cfg) : store_(capacity), cfg_(cfg) { cfg.validate(); }

    std::size_t capacity() const noexcept { return store_.capacity(); }
    std::size_t size() const noexcept { return store_.size(); }
    bool learning_started() const noexcept { return store_.learning_started(); }
    const Transition& transition(std::size_t slot) const { return store_.transition(slot); }
    std::uint64_t replay_count(std::size_t slot) const { return store_.replay_count(slot); }
    ReplayStats stats() const noexcept { return {delta_max_, rt_max_}; }
    const SumTree& tree() const noexcept { return store_.tree(); }
    const PerConfig& config() const noexcept { return cfg_; }

    double priority(std::size_t slot) const {
        store_.check_live(slot);
        return store_.tree().weight(slot);
    }

    /// New transitions enter with the largest priority seen so far.
    std::size_t insert(Transition t, std::uint64_t /*te*/) {
        const std::size_t slot = store_.place(std::move(t));
        store_.tree().set(slot, max_priority_);
        return slot;
    }

    template <UniformSource G>
    SampledBatch sample_minibatch(std::size_t n, G& rng, std::uint64_t te = 0) {
        store_.require_learning_started("PerReplay::sample_minibatch");
        SampledBatch batch;
        batch.slots = store_.tree().sample_with_replacement(rng, n);
        batch.weights.resize(n);
        const double total = store_.tree().total();
        const double beta = cfg_.beta(te);
        double wmax = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double prob = store_.tree().weight(batch.slots[j]) / total;
            batch.weights[j] = per_is_weight(prob, size(), beta);
            wmax = std::max(wmax, batch.weights[j]);
        }
        for (auto& w : batch.weights) w /= wmax;
        store_.mark_pending(batch.slots);
        return batch;
    }

    void update_after_learn(std::span<const std::size_t> slots, std::span<const double> deltas, std::uint64_t /*te*/) {
        const auto last = store_.final_occurrences(slots, deltas.size());
        for (std::size_t j = 0; j < slots.size(); ++j) {
            if (!std::isfinite(deltas[j])) throw std::invalid_argument("PerReplay::update_after_learn: non-finite TD-error");
            delta_max_ = std::max(delta_max_, std::abs(deltas[j]));
            if (!last[j]) continue;
            const double p = per_priority(deltas[j], cfg_);
            store_.tree().set(slots[j], p);
            max_priority_ = std::max(max_priority_, p);
            rt_max_ = std::max(rt_max_, store_.bump_replay_count(slots[j]));
        }
        store_.clear_pending();
    }

private:
    detail::CircularStore store_;
    PerConfig cfg_;
    double max_priority_ = 1.0;
    double delta_max_ = 0.0;
    std::uint64_t rt_max_ = 0;
};

}  // namespace qer
