#pragma once

// Quantum-inspired experience replay buffer.
//
// Every stored transition carries one qubit, encoded as an angle theta.
// Inserting prepares the qubit from the uniform state with the running
// maximum priority. Sampling observes the qubits: slots are drawn with
// probability sin^2(theta_k) / sum_i sin^2(theta_i), and every drawn qubit
// collapses back to the uniform state. After learning, each drawn slot is
// re-prepared from the uniform state with its new TD-error and then
// depreciated by its cumulative replay count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "qer/amplitude.hpp"
#include "qer/binary_io.hpp"
#include "qer/random.hpp"
#include "qer/replay_store.hpp"
#include "qer/transition.hpp"

namespace qer {

struct QerConfig {
    std::size_t capacity = 10'000;
    ScheduleParams schedule{};
    double priority_epsilon = 1e-6;
    double initial_delta_max = 1.0;
};

class QerBuffer {
public:
    static constexpr char kSnapshotMagic[] = "QERB";
    static constexpr std::uint32_t kSnapshotVersion = 1;

    explicit QerBuffer(const QerConfig& cfg) : store_(cfg.capacity), eps_(cfg.priority_epsilon), theta_(cfg.capacity, 0.0) {
        cfg.schedule.validate();
        if (!(cfg.initial_delta_max > 0.0)) throw std::invalid_argument("QerBuffer: initial delta_max must be positive");
        if (!(cfg.priority_epsilon >= 0.0)) throw std::invalid_argument("QerBuffer: priority epsilon must be >= 0");
        schedule_.params = cfg.schedule;
        schedule_.delta_max = cfg.initial_delta_max;
    }

    std::size_t capacity() const noexcept { return store_.capacity(); }
    std::size_t size() const noexcept { return store_.size(); }
    bool learning_started() const noexcept { return store_.learning_started(); }
    std::size_t write_head() const noexcept { return store_.write_head(); }
    const RotationSchedule& schedule() const noexcept { return schedule_; }
    const SumTree& tree() const noexcept { return store_.tree(); }

    const Transition& transition(std::size_t slot) const { return store_.transition(slot); }
    std::uint64_t replay_count(std::size_t slot) const { return store_.replay_count(slot); }
    double theta(std::size_t slot) const {
        store_.check_live(slot);
        return theta_[slot];
    }

    ReplayStats stats() const noexcept { return {schedule_.delta_max, schedule_.rt_max}; }

    /// Overwrites the angle of a live slot, e.g. to freeze a known
    /// distribution. theta must lie in [kThetaFloor, pi/2].
    void assign_angle(std::size_t slot, double theta) {
        store_.check_live(slot);
        if (!(theta >= kThetaFloor && theta <= kThetaCeil))
            throw std::invalid_argument("QerBuffer::assign_angle: theta outside [floor, pi/2]");
        set_theta(slot, theta);
    }

    /// Stores a transition with maximum priority: P_k = delta_max, prepared
    /// from the uniform state with sigma(te). Evicts the oldest slot once full.
    std::size_t insert(Transition t, std::uint64_t te) {
        schedule_.te = te;
        const double sigma = schedule_.sigma(te);
        const std::int64_t m = schedule_.count(schedule_.delta_max, sigma);
        const std::size_t slot = store_.place(std::move(t));
        set_theta(slot, compose_angle(m, sigma, 0, 0.0));
        return slot;
    }

    /// Draws n slots with replacement from the current observation
    /// probabilities (fixed for the whole batch), then collapses every drawn
    /// qubit to the uniform state. One variate is consumed per draw.
    template <UniformSource G>
    SampledBatch sample_minibatch(std::size_t n, G& rng, std::uint64_t /*te*/ = 0) {
        store_.require_learning_started("QerBuffer::sample_minibatch");
        if (n == 0) throw std::invalid_argument("QerBuffer::sample_minibatch: n must be >= 1");
        SampledBatch batch;
        batch.slots = store_.tree().sample_with_replacement(rng, n);
        batch.weights.assign(n, 1.0);
        for (auto slot : batch.slots) set_theta(slot, uniform_angle());
        store_.mark_pending(batch.slots);
        return batch;
    }

    /// Re-prepares the slots of the last minibatch from their new TD-errors.
    ///
    /// sigma and omega are fixed for the batch from the schedule state before
    /// the update. delta_max is raised by the batch first, so every ratio
    /// P_d / delta_max stays within [0, 1] and larger errors never rotate
    /// less. A slot drawn several times is updated once, with the TD-error of
    /// its last draw, and its replay count grows by one.
    void update_after_learn(std::span<const std::size_t> slots, std::span<const double> deltas, std::uint64_t te) {
        const auto last = store_.final_occurrences(slots, deltas.size());
        for (double d : deltas) {
            if (!std::isfinite(d)) throw std::invalid_argument("QerBuffer::update_after_learn: non-finite TD-error");
        }
        schedule_.te = te;
        const double sigma = schedule_.sigma(te);
        const double omega = schedule_.omega(te);
        for (double d : deltas) schedule_.delta_max = std::max(schedule_.delta_max, std::abs(d));

        std::uint64_t rt = schedule_.rt_max;
        for (std::size_t j = 0; j < slots.size(); ++j) {
            if (!last[j]) continue;
            const std::size_t slot = slots[j];
            const double priority = std::abs(deltas[j]) + eps_;
            const std::int64_t m = schedule_.count(priority, sigma);
            const std::uint64_t cn = store_.bump_replay_count(slot);
            set_theta(slot, compose_angle(m, sigma, cn, omega));
            rt = std::max(rt, cn);
        }
        schedule_.rt_max = rt;
        store_.clear_pending();
    }

    void update_after_learn(std::size_t slot, double delta, std::uint64_t te) {
        update_after_learn(std::span<const std::size_t>(&slot, 1), std::span<const double>(&delta, 1), te);
    }

    /// b_k = sin^2(theta_k) / sum_i sin^2(theta_i) over the live slots.
    std::vector<double> replaying_probabilities() const {
        if (store_.empty()) throw std::logic_error("QerBuffer::replaying_probabilities: buffer is empty");
        std::vector<double> p(size());
        double total = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) total += p[k] = accept_probability(theta_[k]);
        for (auto& v : p) v /= total;
        return p;
    }

    /// Writes entries, angles, replay counts and schedule state to a
    /// versioned little-endian file.
    void save(const std::filesystem::path& path) const {
        io::LeWriter w(path);
        w.magic({kSnapshotMagic, 4});
        w.u32(kSnapshotVersion);
        w.u64(capacity());
        w.u64(size());
        w.u64(write_head());
        w.u8(learning_started() ? 1 : 0);
        const std::size_t obs_dim = size() ? store_.transition(0).state.size() : 0;
        w.u64(obs_dim);
        const auto& p = schedule_.params;
        for (double v : {p.zeta1, p.zeta2, p.tau1, p.tau2, p.mu, p.iota, eps_, schedule_.delta_max}) w.f64(v);
        w.u64(schedule_.rt_max);
        w.u64(schedule_.te);
        for (std::size_t k = 0; k < size(); ++k) {
            const auto& t = store_.transition(k);
            if (t.state.size() != obs_dim || t.next_state.size() != obs_dim)
                throw std::runtime_error("QerBuffer::save: observation dimensions differ between entries");
            for (double v : t.state) w.f64(v);
            w.u64(t.action);
            w.f64(t.reward);
            for (double v : t.next_state) w.f64(v);
            w.u8(t.done ? 1 : 0);
            w.f64(theta_[k]);
            w.u64(store_.replay_count(k));
        }
        w.finish();
    }

    static QerBuffer load(const std::filesystem::path& path) {
        io::LeReader r(path);
        r.expect_magic({kSnapshotMagic, 4});
        if (const auto v = r.u32(); v != kSnapshotVersion)
            throw std::runtime_error("QerBuffer::load: unsupported snapshot version " + std::to_string(v));
        QerConfig cfg;
        cfg.capacity = r.u64();
        const std::size_t n = r.u64();
        const std::size_t head = r.u64();
        const bool lf = r.u8() != 0;
        const std::size_t obs_dim = r.u64();
        auto& p = cfg.schedule;
        p.zeta1 = r.f64();
        p.zeta2 = r.f64();
        p.tau1 = r.f64();
        p.tau2 = r.f64();
        p.mu = r.f64();
        p.iota = r.f64();
        cfg.priority_epsilon = r.f64();
        cfg.initial_delta_max = r.f64();
        QerBuffer buf(cfg);
        buf.schedule_.rt_max = r.u64();
        buf.schedule_.te = r.u64();

        std::vector<Transition> entries(n);
        std::vector<std::uint64_t> cn(cfg.capacity, 0);
        for (std::size_t k = 0; k < n; ++k) {
            auto& t = entries[k];
            t.state.resize(obs_dim);
            for (auto& v : t.state) v = r.f64();
            t.action = r.u64();
            t.reward = r.f64();
            t.next_state.resize(obs_dim);
            for (auto& v : t.next_state) v = r.f64();
            t.done = r.u8() != 0;
            buf.theta_[k] = r.f64();
            cn[k] = r.u64();
        }
        r.expect_end();
        buf.store_.restore(std::move(entries), std::move(cn), head, lf);
        for (std::size_t k = 0; k < n; ++k) buf.set_theta(k, buf.theta_[k]);
        return buf;
    }

private:
    void set_theta(std::size_t slot, double theta) {
        theta_[slot] = theta;
        store_.tree().set(slot, accept_probability(theta));
    }

    detail::CircularStore store_;
    double eps_;
    std::vector<double> theta_;
    RotationSchedule schedule_;
};

}  // namespace qer
