#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qer/sum_tree.hpp"
#include "qer/transition.hpp"

namespace qer::detail {

/// Fixed-capacity circular transition store shared by every replay memory:
/// FIFO slot eviction, per-slot replay counts, the learning-started latch,
/// a sum tree over sampling weights, and bookkeeping of the slots handed
/// out by the most recent minibatch.
class CircularStore {
public:
    explicit CircularStore(std::size_t capacity) : tree_(capacity), cn_(capacity, 0), pending_(capacity, 0) {
        entries_.reserve(capacity);
    }

    std::size_t capacity() const noexcept { return tree_.capacity(); }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool learning_started() const noexcept { return lf_; }
    std::size_t write_head() const noexcept { return head_; }

    const Transition& transition(std::size_t slot) const {
        check_live(slot);
        return entries_[slot];
    }
    std::uint64_t replay_count(std::size_t slot) const {
        check_live(slot);
        return cn_[slot];
    }

    const SumTree& tree() const noexcept { return tree_; }
    SumTree& tree() noexcept { return tree_; }

    /// Writes into the slot at the head, evicting its previous occupant and
    /// zeroing its replay count. Returns the slot.
    std::size_t place(Transition t) {
        const std::size_t slot = head_;
        if (slot < entries_.size()) {
            entries_[slot] = std::move(t);
        } else {
            entries_.push_back(std::move(t));
        }
        cn_[slot] = 0;
        pending_[slot] = 0;
        if (++head_ == capacity()) {
            head_ = 0;
            lf_ = true;
        }
        return slot;
    }

    void check_live(std::size_t slot) const {
        if (slot >= entries_.size())
            throw std::out_of_range("replay: unknown slot " + std::to_string(slot));
    }

    void require_learning_started(const char* who) const {
        if (!lf_) throw std::logic_error(std::string(who) + ": sampling before the buffer has filled");
    }

    /// Marks the slots of a freshly drawn minibatch as awaiting an update.
    void mark_pending(std::span<const std::size_t> slots) {
        for (auto s : pending_list_) pending_[s] = 0;
        pending_list_.assign(slots.begin(), slots.end());
        for (auto s : slots) pending_[s] = 1;
    }

    /// Validates an update against the last minibatch and returns, for each
    /// position, whether it is the final occurrence of its slot in the batch.
    std::vector<bool> final_occurrences(std::span<const std::size_t> slots, std::size_t n_deltas) const {
        if (slots.size() != n_deltas) throw std::invalid_argument("replay update: slot/TD-error count mismatch");
        std::vector<bool> last(slots.size(), true);
        for (std::size_t j = 0; j < slots.size(); ++j) {
            const auto s = slots[j];
            check_live(s);
            if (!pending_[s])
                throw std::invalid_argument("replay update: slot " + std::to_string(s) +
                                            " was not part of the most recent minibatch");
            for (std::size_t k = j + 1; k < slots.size(); ++k) {
                if (slots[k] == s) {
                    last[j] = false;
                    break;
                }
            }
        }
        return last;
    }

    void clear_pending() {
        for (auto s : pending_list_) pending_[s] = 0;
        pending_list_.clear();
    }

    std::uint64_t bump_replay_count(std::size_t slot) { return ++cn_[slot]; }

    // Restoration hooks for snapshot loading.
    void restore(std::vector<Transition> entries, std::vector<std::uint64_t> cn, std::size_t head, bool lf) {
        if (entries.size() > capacity() || cn.size() != capacity() || head >= capacity())
            throw std::runtime_error("replay snapshot: inconsistent sizes");
        entries_ = std::move(entries);
        cn_ = std::move(cn);
        head_ = head;
        lf_ = lf;
        std::fill(pending_.begin(), pending_.end(), std::uint8_t{0});
        pending_list_.clear();
    }
    std::span<const std::uint64_t> replay_counts() const noexcept { return cn_; }

private:
    SumTree tree_;
    std::vector<Transition> entries_;
    std::vector<std::uint64_t> cn_;
    std::vector<std::uint8_t> pending_;
    std::vector<std::size_t> pending_list_;
    std::size_t head_ = 0;
    bool lf_ = false;
};

}  // namespace qer::detail
