#pragma once

// Replay environment over an impression/click log.
//
// Log schema (CSV, header required):
//   timestamp,user_id,item_id,impressions
// `impressions` is a '|'-separated list of item ids shown with the click
// (may be empty, in which case the whole catalog is the candidate set).
// Timestamps are integer seconds. Raw user/item ids are remapped to dense
// indices in ascending raw-id order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ren/gru.hpp"

namespace ren {

struct ReplayEvent {
    std::int64_t timestamp = 0;
    std::size_t user = 0;
    ItemId clicked = 0;
    std::vector<ItemId> impressions;  // dense ids; empty = full catalog
    std::size_t interval = 0;
};

struct ReplayOutcome {
    double reward = 0.0;          // 1 when the click is on the slate
    double optimal_reward = 0.0;  // 1 when the click is in the candidate set
    double reciprocal_rank = 0.0; // 1/position of the click on the slate, 0 if absent
    bool hit = false;
};

class ReplayEnv {
public:
    /// Parses the log and splits it into `n_intervals` equal-duration buckets
    /// [T_0, T_1), ..., [T_{M-1}, T_M]. Throws ParseError with the offending
    /// line number on malformed rows.
    static ReplayEnv from_log(const std::filesystem::path& path, std::size_t n_intervals);

    std::size_t n_items() const noexcept { return raw_items_.size(); }
    std::size_t n_users() const noexcept { return raw_users_.size(); }
    std::size_t n_intervals() const noexcept { return n_intervals_; }
    const std::vector<ReplayEvent>& events() const noexcept { return events_; }

    std::uint64_t raw_item_id(ItemId k) const { return raw_items_.at(k); }
    std::uint64_t raw_user_id(std::size_t u) const { return raw_users_.at(u); }

    /// Candidate items for an event.
    std::vector<ItemId> candidates(const ReplayEvent& e) const;

    /// Scores a slate against the logged click. Pure.
    ReplayOutcome evaluate(const ReplayEvent& e, std::span<const ItemId> slate) const;

    /// Clicked items consumed so far for `user`, oldest first.
    const std::vector<ItemId>& history(std::size_t user) const { return histories_.at(user); }

    /// Appends the event's click to its user's history.
    void consume(const ReplayEvent& e);

private:
    std::vector<ReplayEvent> events_;
    std::vector<std::uint64_t> raw_items_;
    std::vector<std::uint64_t> raw_users_;
    std::vector<std::vector<ItemId>> histories_;
    std::size_t n_intervals_ = 1;
};

}  // namespace ren
