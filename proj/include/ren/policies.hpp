#pragma once

// Decision rules built on the precision state:
//
//   score_k = mu_k^T theta + lambda_d * sqrt(mu_k^T A^-1 mu_k) + lambda_u * ||sigma_k||_inf
//
// plus the BaseREN width rule, the SupREN elimination loop, the two
// ablations and the reference policies (relevance-only, Random, Oracle).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ren/catalog.hpp"
#include "ren/precision.hpp"
#include "ren/rng.hpp"

namespace ren {

struct RenParams {
    double lambda_d = 0.0;
    double lambda_u = 0.0;
    double alpha = 0.0;
    double delta = 0.1;
    std::size_t horizon = 1;  // T
    std::size_t n_items = 1;  // K

    /// Empirical regime: lambda_u = sqrt(10) * lambda_d.
    static RenParams tied_default(double lambda_d, std::size_t horizon = 1, std::size_t n_items = 1,
                                   double delta = 0.1);

    /// Confidence-bound regime: alpha = sqrt(ln(2TK/delta) / 2),
    /// lambda_d = 1 + alpha, lambda_u = 4 sqrt(d) + 2 sqrt(ln(TK/delta)).
    static RenParams theory(std::size_t horizon, std::size_t n_items, double delta, std::size_t dim);

    /// 4 sqrt(d) + 2 sqrt(ln(TK/delta)), the slope of the width in ||sigma||_inf.
    double uncertainty_coefficient(std::size_t dim) const;

    /// Throws InvalidArgument on negative weights, delta outside (0,1),
    /// or zero horizon / item count.
    void validate() const;
};

/// mu^T theta + lambda_d * quad_width + lambda_u * sigma_inf.
double ren_score(const Vec& theta, const ItemRecord& item, const PrecisionState& state, const RenParams& params);

/// REN-1,2: relevance + diversity (lambda_u forced to 0).
double ablation_score_12(const Vec& theta, const ItemRecord& item, const PrecisionState& state,
                         const RenParams& params);
/// REN-1,3: relevance + uncertainty (lambda_d forced to 0); ignores `state`.
double ablation_score_13(const Vec& theta, const ItemRecord& item, const RenParams& params);

/// Greedy slate of `slate_size` distinct items. After each pick the chosen
/// mu is folded into a private copy of `state`, so later picks are pushed
/// away from directions already on the slate. Ties go to the lowest id.
std::vector<ItemId> ren_recommend(const Vec& theta, const Catalog& catalog, const PrecisionState& state,
                                  const RenParams& params, std::size_t slate_size);

/// Same, restricted to `candidates` (distinct ids; replay impression lists).
std::vector<ItemId> ren_recommend(const Vec& theta, const Catalog& catalog, const PrecisionState& state,
                                  const RenParams& params, std::size_t slate_size,
                                  std::span<const ItemId> candidates);

/// Arms as seen by the confidence-bound rules: mean embedding plus
/// ||sigma||_inf. Decoupled from Catalog so that the pure-bandit benchmarks
/// can supply their own sigma schedule.
struct ArmSet {
    std::vector<Vec> mu;
    std::vector<double> sigma;

    std::size_t size() const noexcept { return mu.size(); }
    static ArmSet from_catalog(const Catalog& catalog);
};

struct BaseRenResult {
    ItemId chosen = 0;
    std::vector<double> r_hat;  // theta^T mu_k
    std::vector<double> s;      // sqrt(mu_k^T A^-1 mu_k)
    std::vector<double> w;      // (alpha + 1) s + coef * sigma
};

/// One BaseREN decision over `candidates` (all arms when empty span is not
/// given). Result vectors are indexed like `candidates`.
BaseRenResult base_ren_round(const Vec& theta, const ArmSet& arms, const PrecisionState& state,
                             const RenParams& params, std::span<const ItemId> candidates);
BaseRenResult base_ren_round(const Vec& theta, const ArmSet& arms, const PrecisionState& state,
                             const RenParams& params);

/// SupREN: S = ceil(ln T) BaseREN levels, each with its own precision state
/// accumulated only over the rounds it explored.
class SupRenState {
public:
    enum class Branch { exploit, explore };

    struct Decision {
        std::size_t round = 0;
        ItemId chosen = 0;
        Branch branch = Branch::exploit;
        std::size_t level = 1;               // 1-based level where the loop stopped
        std::vector<ItemId> candidates;      // A_s at that level
        std::vector<std::size_t> visited;    // levels passed through, in order
    };

    SupRenState(std::size_t dim, const RenParams& params);

    std::size_t level_count() const noexcept { return levels_.size(); }
    const PrecisionState& level(std::size_t s) const { return levels_.at(s - 1); }
    /// Psi^(s): rounds that explored at level s.
    const std::vector<std::size_t>& psi(std::size_t s) const { return psi_.at(s - 1); }
    const RenParams& params() const noexcept { return params_; }

    /// Runs the elimination loop for round `t`. With `theta` empty each
    /// level uses its own ridge estimate A_s^-1 b_s (pure-bandit mode);
    /// otherwise the supplied user embedding is used at every level.
    Decision select(std::size_t t, const ArmSet& arms, const std::optional<Vec>& theta = std::nullopt) const;

    /// Records the outcome. Only exploring rounds touch a level.
    void observe(const Decision& decision, const Vec& chosen_mu, double reward);

private:
    RenParams params_;
    std::vector<PrecisionState> levels_;
    std::vector<std::vector<std::size_t>> psi_;
};

/// Uniform slate without replacement.
std::vector<ItemId> random_slate(std::size_t n_items, std::size_t slate_size, Rng& rng);

/// Top-`slate_size` items by true reward (ties to lowest id). Throws
/// InvalidArgument when `true_rewards` is empty.
std::vector<ItemId> oracle_slate(std::span<const double> true_rewards, std::size_t slate_size);

/// Top-`slate_size` items by mu^T theta alone.
std::vector<ItemId> relevance_slate(const Vec& theta, const Catalog& catalog, std::size_t slate_size);

enum class PolicyKind { ren, ren_12, ren_13, relevance, random, oracle, ren_theory };

PolicyKind parse_policy(std::string_view name);
std::string_view policy_name(PolicyKind kind);

/// Effective score weights for the REN-family policies.
RenParams effective_params(PolicyKind kind, const RenParams& params);

/// Index of the largest value, lowest index on ties.
std::size_t argmax_lowest(std::span<const double> values);

}  // namespace ren
