#pragma once

// Synthetic recommendation environments with known latent vectors.
//
// Users have `user_active_entries` coordinates set to 1/sqrt(a), items have
// `item_active_entries` coordinates set to 1/sqrt(b); every combination of
// item coordinates appears once and the whole base set is repeated
// `replication` times (SYN-S/M/L: 1/10/50). The simulated user always picks
// the slate item with the largest true reward.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ren/gru.hpp"
#include "ren/precision.hpp"
#include "ren/rng.hpp"

namespace ren {

struct EnvironmentSpec {
    std::size_t dim = 8;
    std::size_t n_users = 15;
    std::size_t user_active_entries = 3;
    std::size_t item_active_entries = 2;
    std::size_t replication = 1;
    std::size_t slate_size = 4;
    std::size_t history_length = kDefaultHistoryLength;
    std::uint64_t rng_seed = 0;

    /// "syn-s", "syn-m", "syn-l". Throws InvalidArgument otherwise.
    static EnvironmentSpec named(std::string_view name, std::uint64_t seed = 0);
};

struct Feedback {
    std::size_t user_id = 0;
    ItemId item = 0;
    double reward = 0.0;
};

struct StepOutcome {
    ItemId chosen = 0;
    double reward = 0.0;
    double optimal_reward = 0.0;
};

class SynEnv {
public:
    std::size_t n_items() const noexcept { return items_.size(); }
    std::size_t n_users() const noexcept { return users_.size(); }
    std::size_t n_base_items() const noexcept { return n_base_; }
    const EnvironmentSpec& spec() const noexcept { return spec_; }

    const Vec& user_latent(std::size_t u) const { return users_.at(u); }
    const Vec& item_latent(ItemId k) const { return items_.at(k); }

    double true_reward(std::size_t user, ItemId item) const;
    std::vector<double> true_rewards(std::size_t user) const;
    /// Max true reward over all items for this user.
    double optimal_reward(std::size_t user) const;

    /// User's interaction history, oldest first (warm start included).
    const std::vector<ItemId>& history(std::size_t user) const { return histories_.at(user); }

    /// (prefix, next item) pairs from the warm-start phase, for pretraining.
    const std::vector<TrainingExample>& warm_start_examples() const noexcept { return warm_start_; }

    /// Argmax true reward over the slate (ties to the lowest id). Pure.
    StepOutcome evaluate(std::size_t user, std::span<const ItemId> slate) const;

    /// evaluate() + append the choice to the user's history and to the
    /// feedback buffer.
    StepOutcome step(std::size_t user, std::span<const ItemId> slate);

    /// Uniform user draw.
    std::size_t draw_user(Rng& rng) const { return uniform_index(rng, users_.size()); }

    const std::vector<Feedback>& feedback() const noexcept { return feedback_; }

private:
    friend SynEnv generate_syn(const EnvironmentSpec& spec);
    SynEnv() = default;

    void check_user(std::size_t u) const;

    EnvironmentSpec spec_;
    std::size_t n_base_ = 0;
    std::vector<Vec> users_;
    std::vector<Vec> items_;
    std::vector<std::vector<ItemId>> histories_;
    std::vector<TrainingExample> warm_start_;
    std::vector<Feedback> feedback_;
};

/// Builds the environment, including every user's warm-start history
/// (history_length steps against uniformly random slates). Warm-start
/// choices are not part of feedback().
SynEnv generate_syn(const EnvironmentSpec& spec);

}  // namespace ren
