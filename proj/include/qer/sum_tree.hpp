#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qer/random.hpp"

namespace qer {

/// Complete binary tree of 2M-1 prefix sums over M non-negative leaf weights.
///
/// Nodes use the implicit heap layout (children of i at 2i+1, 2i+2). For M
/// not a power of two the leaves straddle two levels; leaf ids are mapped so
/// that an in-order walk visits them as 0..M-1, which keeps find_prefix
/// consistent with a left-to-right cumulative scan.
class SumTree {
public:
    static constexpr std::uint64_t kRebuildPeriod = 1'000'000;

    explicit SumTree(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("SumTree: capacity must be at least 1");
        nodes_.assign(2 * capacity - 1, 0.0);
        const std::size_t level_start = std::bit_floor(2 * capacity - 1);  // 2^d
        deep_leaves_ = 2 * capacity - level_start;
        deep_offset_ = level_start - 1;
    }

    std::size_t capacity() const noexcept { return capacity_; }
    double total() const noexcept { return nodes_[0]; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    double weight(std::size_t leaf) const {
        check_leaf(leaf);
        return nodes_[position(leaf)];
    }

    void set(std::size_t leaf, double weight) {
        check_leaf(leaf);
        if (!std::isfinite(weight) || weight < 0.0)
            throw std::invalid_argument("SumTree::set: weight must be finite and non-negative");
        std::size_t i = position(leaf);
        nodes_[i] = weight;
        while (i > 0) {
            i = (i - 1) / 2;
            nodes_[i] = nodes_[2 * i + 1] + nodes_[2 * i + 2];
        }
        if (++sets_since_rebuild_ >= kRebuildPeriod) rebuild();
    }

    /// Recomputes every internal node from the leaves.
    void rebuild() noexcept {
        for (std::size_t i = capacity_ - 1; i-- > 0;) nodes_[i] = nodes_[2 * i + 1] + nodes_[2 * i + 2];
        sets_since_rebuild_ = 0;
    }

    /// Leaf i with sum(w[0..i)) <= u < sum(w[0..i]). A value on a boundary
    /// selects the right-hand leaf.
    std::size_t find_prefix(double u) const {
        if (!(total() > 0.0)) throw std::logic_error("SumTree::find_prefix: tree has no weight");
        if (!(u >= 0.0 && u < total())) throw std::out_of_range("SumTree::find_prefix: u outside [0, total)");
        std::size_t i = 0;
        const std::size_t first_leaf = capacity_ - 1;
        while (i < first_leaf) {
            const std::size_t left = 2 * i + 1;
            const std::size_t right = left + 1;
            if (u < nodes_[left] || !(nodes_[right] > 0.0)) {
                // Rounding can push u past the left sum when the right side is empty.
                if (u >= nodes_[left]) u = std::nextafter(nodes_[left], 0.0);
                i = left;
            } else {
                u -= nodes_[left];
                i = right;
            }
        }
        return leaf_of(i);
    }

    /// Maps a uniform variate in [0, 1) to a leaf, proportional to weight.
    std::size_t draw(double variate) const {
        double u = variate * total();
        if (u >= total()) u = std::nextafter(total(), 0.0);
        return find_prefix(u);
    }

    template <UniformSource G>
    std::vector<std::size_t> sample_with_replacement(G& rng, std::size_t n) const {
        if (!(total() > 0.0)) throw std::logic_error("SumTree::sample_with_replacement: empty support");
        std::vector<std::size_t> out;
        out.reserve(n);
        for (std::size_t k = 0; k < n; ++k) out.push_back(draw(rng.uniform()));
        return out;
    }

private:
    void check_leaf(std::size_t leaf) const {
        if (leaf >= capacity_)
            throw std::out_of_range("SumTree: leaf " + std::to_string(leaf) + " out of range");
    }
    std::size_t position(std::size_t leaf) const noexcept {
        return leaf < deep_leaves_ ? deep_offset_ + leaf : capacity_ - 1 + (leaf - deep_leaves_);
    }
    std::size_t leaf_of(std::size_t pos) const noexcept {
        return pos >= deep_offset_ ? pos - deep_offset_ : deep_leaves_ + (pos - (capacity_ - 1));
    }

    std::size_t capacity_;
    std::size_t deep_leaves_;  // leaves on the bottom level, visited first in order
    std::size_t deep_offset_;
    std::vector<double> nodes_;
    std::uint64_t sets_since_rebuild_ = 0;
};

}  // namespace qer
