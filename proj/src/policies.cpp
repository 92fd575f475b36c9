#include "ren/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ren/error.hpp"

namespace ren {

RenParams RenParams::tied_default(double lambda_d, std::size_t horizon, std::size_t n_items, double delta) {
    RenParams p;
    p.lambda_d = lambda_d;
    p.lambda_u = std::sqrt(10.0) * lambda_d;
    p.horizon = horizon;
    p.n_items = n_items;
    p.delta = delta;
    p.validate();
    return p;
}

RenParams RenParams::theory(std::size_t horizon, std::size_t n_items, double delta, std::size_t dim) {
    RenParams p;
    p.horizon = horizon;
    p.n_items = n_items;
    p.delta = delta;
    p.validate();
    const double tk = static_cast<double>(horizon) * static_cast<double>(n_items);
    p.alpha = std::sqrt(0.5 * std::log(2.0 * tk / delta));
    p.lambda_d = 1.0 + p.alpha;
    p.lambda_u = p.uncertainty_coefficient(dim);
    return p;
}

double RenParams::uncertainty_coefficient(std::size_t dim) const {
    const double tk = static_cast<double>(horizon) * static_cast<double>(n_items);
    return 4.0 * std::sqrt(static_cast<double>(dim)) + 2.0 * std::sqrt(std::log(tk / delta));
}

void RenParams::validate() const {
    if (!(lambda_d >= 0.0) || !(lambda_u >= 0.0) || !(alpha >= 0.0))
        throw InvalidArgument("ren params: lambda_d, lambda_u and alpha must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("ren params: delta must lie in (0, 1)");
    if (horizon == 0 || n_items == 0) throw InvalidArgument("ren params: horizon and n_items must be >= 1");
}

std::size_t argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("argmax of an empty range");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

namespace {

void check_theta(const Vec& theta, std::size_t dim) {
    if (static_cast<std::size_t>(theta.size()) != dim)
        throw InvalidArgument("policy: theta has length " + std::to_string(theta.size()) + ", expected " +
                              std::to_string(dim));
}

}  // namespace

double ren_score(const Vec& theta, const ItemRecord& item, const PrecisionState& state, const RenParams& params) {
    check_theta(theta, state.dim());
    check_theta(item.mu, state.dim());
    double score = item.mu.dot(theta);
    if (params.lambda_d != 0.0) score += params.lambda_d * state.quad_width(item.mu);
    if (params.lambda_u != 0.0) score += params.lambda_u * sigma_inf(item);
    return score;
}

double ablation_score_12(const Vec& theta, const ItemRecord& item, const PrecisionState& state,
                         const RenParams& params) {
    RenParams p = params;
    p.lambda_u = 0.0;
    return ren_score(theta, item, state, p);
}

double ablation_score_13(const Vec& theta, const ItemRecord& item, const RenParams& params) {
    check_theta(theta, static_cast<std::size_t>(item.mu.size()));
    return item.mu.dot(theta) + params.lambda_u * sigma_inf(item);
}

std::vector<ItemId> ren_recommend(const Vec& theta, const Catalog& catalog, const PrecisionState& state,
                                  const RenParams& params, std::size_t slate_size,
                                  std::span<const ItemId> candidates) {
    const std::size_t n = candidates.size();
    if (slate_size > n)
        throw InvalidArgument("ren_recommend: slate size " + std::to_string(slate_size) + " exceeds candidate count " +
                              std::to_string(n));
    if (state.dim() != catalog.dim()) throw InvalidArgument("ren_recommend: state/catalog dimension mismatch");
    check_theta(theta, catalog.dim());
    for (const ItemId k : candidates)
        if (k >= catalog.size()) throw InvalidArgument("ren_recommend: candidate id out of range");

    // Relevance and uncertainty do not change within a slate.
    std::vector<double> fixed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& item = catalog[candidates[i]];
        fixed[i] = item.mu.dot(theta);
        if (params.lambda_u != 0.0) fixed[i] += params.lambda_u * sigma_inf(item);
    }

    std::vector<ItemId> slate;
    slate.reserve(slate_size);
    std::vector<bool> taken(n, false);
    PrecisionState scratch = state;
    for (std::size_t pick = 0; pick < slate_size; ++pick) {
        std::size_t best = n;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            double score = fixed[i];
            if (params.lambda_d != 0.0) score += params.lambda_d * scratch.quad_width(catalog[candidates[i]].mu);
            if (best == n || score > best_score || (score == best_score && candidates[i] < candidates[best])) {
                best = i;
                best_score = score;
            }
        }
        taken[best] = true;
        slate.push_back(candidates[best]);
        if (params.lambda_d != 0.0 && pick + 1 < slate_size) scratch.add_direction(catalog[candidates[best]].mu);
    }
    return slate;
}

std::vector<ItemId> ren_recommend(const Vec& theta, const Catalog& catalog, const PrecisionState& state,
                                  const RenParams& params, std::size_t slate_size) {
    std::vector<ItemId> all(catalog.size());
    std::iota(all.begin(), all.end(), ItemId{0});
    return ren_recommend(theta, catalog, state, params, slate_size, all);
}

ArmSet ArmSet::from_catalog(const Catalog& catalog) {
    ArmSet arms;
    arms.mu.reserve(catalog.size());
    arms.sigma.reserve(catalog.size());
    for (const auto& item : catalog.items()) {
        arms.mu.push_back(item.mu);
        arms.sigma.push_back(sigma_inf(item));
    }
    return arms;
}

BaseRenResult base_ren_round(const Vec& theta, const ArmSet& arms, const PrecisionState& state,
                             const RenParams& params, std::span<const ItemId> candidates) {
    if (candidates.empty()) throw InvalidArgument("base_ren_round: empty candidate set");
    if (arms.mu.size() != arms.sigma.size()) throw InvalidArgument("base_ren_round: arm set is inconsistent");
    check_theta(theta, state.dim());
    const double coef = params.uncertainty_coefficient(state.dim());

    BaseRenResult out;
    out.r_hat.reserve(candidates.size());
    out.s.reserve(candidates.size());
    out.w.reserve(candidates.size());
    std::vector<double> ucb;
    ucb.reserve(candidates.size());
    for (const ItemId k : candidates) {
        if (k >= arms.size()) throw InvalidArgument("base_ren_round: arm id out of range");
        const double s = state.quad_width(arms.mu[k]);
        const double w = (params.alpha + 1.0) * s + coef * arms.sigma[k];
        const double r = theta.dot(arms.mu[k]);
        out.r_hat.push_back(r);
        out.s.push_back(s);
        out.w.push_back(w);
        ucb.push_back(r + w);
    }
    out.chosen = candidates[argmax_lowest(ucb)];
    return out;
}

BaseRenResult base_ren_round(const Vec& theta, const ArmSet& arms, const PrecisionState& state,
                             const RenParams& params) {
    if (arms.size() == 0) throw InvalidArgument("base_ren_round: empty catalog");
    std::vector<ItemId> all(arms.size());
    std::iota(all.begin(), all.end(), ItemId{0});
    return base_ren_round(theta, arms, state, params, all);
}

SupRenState::SupRenState(std::size_t dim, const RenParams& params) : params_(params) {
    params_.validate();
    const double log_t = std::log(static_cast<double>(params_.horizon));
    const auto s = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(log_t)));
    levels_.assign(s, PrecisionState(dim));
    psi_.assign(s, {});
}

SupRenState::Decision SupRenState::select(std::size_t t, const ArmSet& arms, const std::optional<Vec>& theta) const {
    if (arms.size() == 0) throw InvalidArgument("supren: empty catalog");
    const double exploit_width = 1.0 / std::sqrt(static_cast<double>(params_.horizon));

    Decision d;
    d.round = t;
    std::vector<ItemId> active(arms.size());
    std::iota(active.begin(), active.end(), ItemId{0});

    for (std::size_t s = 1;; ++s) {
        if (s > levels_.size()) throw InvalidState("supren: descended past the last elimination level");
        d.visited.push_back(s);
        const PrecisionState& level_state = levels_[s - 1];
        const Vec level_theta = theta ? *theta : level_state.ridge_estimate();
        const BaseRenResult base = base_ren_round(level_theta, arms, level_state, params_, active);
        const double level_width = std::ldexp(1.0, -static_cast<int>(s));

        const bool all_tiny = std::all_of(base.w.begin(), base.w.end(), [&](double w) { return w <= exploit_width; });
        if (all_tiny) {
            d.chosen = base.chosen;
            d.branch = Branch::exploit;
            d.level = s;
            d.candidates = active;
            return d;
        }
        const bool all_narrow = std::all_of(base.w.begin(), base.w.end(), [&](double w) { return w <= level_width; });
        if (all_narrow) {
            double best_ucb = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < active.size(); ++i) best_ucb = std::max(best_ucb, base.r_hat[i] + base.w[i]);
            const double slack = 2.0 * level_width;  // 2^{1-s}
            std::vector<ItemId> next;
            for (std::size_t i = 0; i < active.size(); ++i)
                if (base.r_hat[i] + base.w[i] >= best_ucb - slack) next.push_back(active[i]);
            active = std::move(next);
            continue;
        }
        // Some width exceeds 2^-s: explore the lowest such id.
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (base.w[i] > level_width) {
                d.chosen = active[i];
                break;
            }
        }
        d.branch = Branch::explore;
        d.level = s;
        d.candidates = active;
        return d;
    }
}

void SupRenState::observe(const Decision& decision, const Vec& chosen_mu, double reward) {
    if (decision.branch == Branch::exploit) return;
    levels_.at(decision.level - 1).rank_one_update(chosen_mu, reward);
    psi_.at(decision.level - 1).push_back(decision.round);
}

std::vector<ItemId> random_slate(std::size_t n_items, std::size_t slate_size, Rng& rng) {
    if (slate_size > n_items) throw InvalidArgument("random_slate: slate larger than catalog");
    // Partial Fisher-Yates.
    std::vector<ItemId> ids(n_items);
    std::iota(ids.begin(), ids.end(), ItemId{0});
    for (std::size_t i = 0; i < slate_size; ++i) {
        const std::size_t j = i + uniform_index(rng, n_items - i);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(slate_size);
    return ids;
}

namespace {

std::vector<ItemId> top_by_score(std::span<const double> scores, std::size_t slate_size) {
    if (slate_size > scores.size()) throw InvalidArgument("slate larger than catalog");
    std::vector<ItemId> ids(scores.size());
    std::iota(ids.begin(), ids.end(), ItemId{0});
    std::stable_sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) { return scores[a] > scores[b]; });
    ids.resize(slate_size);
    return ids;
}

}  // namespace

std::vector<ItemId> oracle_slate(std::span<const double> true_rewards, std::size_t slate_size) {
    if (true_rewards.empty()) throw InvalidArgument("oracle: ground-truth rewards unavailable");
    return top_by_score(true_rewards, slate_size);
}

std::vector<ItemId> relevance_slate(const Vec& theta, const Catalog& catalog, std::size_t slate_size) {
    check_theta(theta, catalog.dim());
    std::vector<double> scores(catalog.size());
    for (std::size_t k = 0; k < catalog.size(); ++k) scores[k] = catalog[k].mu.dot(theta);
    return top_by_score(scores, slate_size);
}

PolicyKind parse_policy(std::string_view name) {
    if (name == "ren") return PolicyKind::ren;
    if (name == "ren-12") return PolicyKind::ren_12;
    if (name == "ren-13") return PolicyKind::ren_13;
    if (name == "relevance") return PolicyKind::relevance;
    if (name == "random") return PolicyKind::random;
    if (name == "oracle") return PolicyKind::oracle;
    if (name == "ren-theory") return PolicyKind::ren_theory;
    throw InvalidArgument("unknown policy '" + std::string(name) +
                          "' (expected ren, ren-12, ren-13, relevance, random, oracle, ren-theory)");
}

std::string_view policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::ren: return "ren";
        case PolicyKind::ren_12: return "ren-12";
        case PolicyKind::ren_13: return "ren-13";
        case PolicyKind::relevance: return "relevance";
        case PolicyKind::random: return "random";
        case PolicyKind::oracle: return "oracle";
        case PolicyKind::ren_theory: return "ren-theory";
    }
    return "?";
}

RenParams effective_params(PolicyKind kind, const RenParams& params) {
    RenParams p = params;
    switch (kind) {
        case PolicyKind::ren_12: p.lambda_u = 0.0; break;
        case PolicyKind::ren_13: p.lambda_d = 0.0; break;
        case PolicyKind::relevance:
        case PolicyKind::random:
        case PolicyKind::oracle:
            p.lambda_d = 0.0;
            p.lambda_u = 0.0;
            break;
        case PolicyKind::ren:
        case PolicyKind::ren_theory: break;
    }
    return p;
}

}  // namespace ren
