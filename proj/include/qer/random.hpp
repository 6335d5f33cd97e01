#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace qer {

/// Anything that hands out uniform variates in [0, 1). Replay buffers draw
/// exactly one variate per sampled slot so a recorded stream replays them
/// bit for bit.
template <class G>
concept UniformSource = requires(G& g) {
    { g.uniform() } -> std::convertible_to<double>;
};

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a run seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t s = seed ^ (stream * 0xd1342543de82ef95ULL);
    splitmix64(s);
    return splitmix64(s);
}

/// mt19937_64 with a portable double conversion (53 high bits), so sequences
/// do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: empty range");
        auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    /// Uniform real in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() noexcept { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Replays a pre-recorded list of variates.
class RecordedStream {
public:
    explicit RecordedStream(std::span<const double> values) : values_(values) {}

    double uniform() {
        if (pos_ >= values_.size()) throw std::out_of_range("RecordedStream exhausted");
        return values_[pos_++];
    }
    std::size_t consumed() const noexcept { return pos_; }

private:
    std::span<const double> values_;
    std::size_t pos_ = 0;
};

}  // namespace qer
