#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace qer {

using Observation = std::vector<double>;

/// One environment step (s, a, r, s', done). `done` marks a true terminal
/// state; episodes cut by a step limit are stored with done = false so the
/// bootstrap term is kept.
struct Transition {
    Observation state;
    std::size_t action = 0;
    double reward = 0.0;
    Observation next_state;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

/// Slots drawn for one learning step, in draw order (duplicates allowed),
/// with the per-sample loss weights the learner should apply.
struct SampledBatch {
    std::vector<std::size_t> slots;
    std::vector<double> weights;

    std::size_t size() const noexcept { return slots.size(); }
};

/// Running statistics every replay memory reports to the harness.
struct ReplayStats {
    double delta_max = 0.0;
    std::uint64_t rt_max = 0;
};

}  // namespace qer
