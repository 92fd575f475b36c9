#include "ren/syn_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ren/error.hpp"
#include "ren/policies.hpp"

namespace ren {
namespace {

// All size-`choose` subsets of [0, n) in lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t choose) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> idx(choose);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (choose > n) return out;
    while (true) {
        out.push_back(idx);
        std::size_t i = choose;
        while (i > 0 && idx[i - 1] == n - choose + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < choose; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

Vec indicator(std::size_t dim, std::span<const std::size_t> active) {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(dim));
    const double value = 1.0 / std::sqrt(static_cast<double>(active.size()));
    for (const std::size_t i : active) v(static_cast<Eigen::Index>(i)) = value;
    return v;
}

}  // namespace

EnvironmentSpec EnvironmentSpec::named(std::string_view name, std::uint64_t seed) {
    EnvironmentSpec spec;
    spec.rng_seed = seed;
    if (name == "syn-s") spec.replication = 1;
    else if (name == "syn-m") spec.replication = 10;
    else if (name == "syn-l") spec.replication = 50;
    else throw InvalidArgument("unknown synthetic environment '" + std::string(name) + "' (syn-s, syn-m, syn-l)");
    return spec;
}

SynEnv generate_syn(const EnvironmentSpec& spec) {
    if (spec.dim == 0 || spec.n_users == 0 || spec.replication == 0 || spec.slate_size == 0)
        throw InvalidArgument("syn env: dim, n_users, replication and slate_size must be >= 1");
    if (spec.item_active_entries == 0 || spec.dim < spec.item_active_entries)
        throw InvalidArgument("syn env: dim must be >= item_active_entries >= 1");
    if (spec.user_active_entries == 0 || spec.dim < spec.user_active_entries)
        throw InvalidArgument("syn env: dim must be >= user_active_entries >= 1");

    SynEnv env;
    env.spec_ = spec;
    Rng rng = make_stream(spec.rng_seed, "env");

    const auto base = combinations(spec.dim, spec.item_active_entries);
    env.n_base_ = base.size();
    const std::size_t k_items = env.n_base_ * spec.replication;
    if (spec.slate_size > k_items) throw InvalidArgument("syn env: slate larger than catalog");
    env.items_.reserve(k_items);
    for (std::size_t k = 0; k < k_items; ++k) env.items_.push_back(indicator(spec.dim, base[k % env.n_base_]));

    for (std::size_t u = 0; u < spec.n_users; ++u) {
        const auto picks = random_slate(spec.dim, spec.user_active_entries, rng);
        std::vector<std::size_t> active(picks.begin(), picks.end());
        env.users_.push_back(indicator(spec.dim, active));
    }

    env.histories_.assign(spec.n_users, {});
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        for (std::size_t step = 0; step < spec.history_length; ++step) {
            const auto slate = random_slate(k_items, spec.slate_size, rng);
            const StepOutcome o = env.evaluate(u, slate);
            env.warm_start_.push_back(TrainingExample{env.histories_[u], o.chosen});
            env.histories_[u].push_back(o.chosen);
        }
    }
    return env;
}

void SynEnv::check_user(std::size_t u) const {
    if (u >= users_.size()) throw InvalidArgument("syn env: invalid user " + std::to_string(u));
}

double SynEnv::true_reward(std::size_t user, ItemId item) const {
    check_user(user);
    if (item >= items_.size()) throw InvalidArgument("syn env: invalid item " + std::to_string(item));
    return users_[user].dot(items_[item]);
}

std::vector<double> SynEnv::true_rewards(std::size_t user) const {
    check_user(user);
    std::vector<double> r(items_.size());
    for (std::size_t k = 0; k < items_.size(); ++k) r[k] = users_[user].dot(items_[k]);
    return r;
}

double SynEnv::optimal_reward(std::size_t user) const {
    check_user(user);
    // Duplicates share latents, so the base block is enough.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_base_; ++k) best = std::max(best, users_[user].dot(items_[k]));
    return best;
}

StepOutcome SynEnv::evaluate(std::size_t user, std::span<const ItemId> slate) const {
    check_user(user);
    if (slate.empty()) throw InvalidArgument("syn env: empty slate");
    StepOutcome o;
    bool first = true;
    for (const ItemId k : slate) {
        const double r = true_reward(user, k);
        if (first || r > o.reward || (r == o.reward && k < o.chosen)) {
            o.chosen = k;
            o.reward = r;
            first = false;
        }
    }
    o.optimal_reward = optimal_reward(user);
    return o;
}

StepOutcome SynEnv::step(std::size_t user, std::span<const ItemId> slate) {
    const StepOutcome o = evaluate(user, slate);
    histories_[user].push_back(o.chosen);
    feedback_.push_back(Feedback{user, o.chosen, o.reward});
    return o;
}

}  // namespace ren
