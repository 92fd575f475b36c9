#pragma once

// Joint learning-and-exploration protocol, metrics and benchmarks.
//
// Synthetic runs, per round t = 1..T:
//   draw user -> theta_t = GRU(history) -> policy slate -> env step
//   -> impressions, reward, regret -> feedback buffer
//   -> every `finetune_every` rounds: train_step + catalog refresh.
//
// Replay runs walk the logged events interval by interval: interval 0
// pretrains, every later interval is first served (recommend + score) with
// the model as it stood at the interval start, then used for finetuning.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ren/gru.hpp"
#include "ren/policies.hpp"
#include "ren/syn_env.hpp"

namespace ren {

/// Which feedback events form a finetuning minibatch: the most recent
/// `train_window` ones, or `train_window` drawn uniformly (with
/// replacement) from the whole buffer.
enum class TrainSampling { recent, uniform };

struct ExperimentConfig {
    std::string env = "syn-s";  // syn-s | syn-m | syn-l | replay
    std::string replay_path;
    std::size_t intervals = 10;  // replay only

    PolicyKind policy = PolicyKind::ren;
    double lambda_d = 0.1;
    std::optional<double> lambda_u;  // default sqrt(10) * lambda_d
    double delta = 0.1;              // ren-theory only

    std::size_t slate_size = 4;
    std::size_t rounds = 3000;
    std::size_t finetune_every = 1;
    std::size_t train_window = 32;  // examples per train step
    TrainSampling train_sampling = TrainSampling::recent;
    std::size_t train_steps = 1;    // SGD steps per finetune
    std::size_t rolling_window = 100;
    std::size_t n_seeds = 3;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    std::size_t dim = 8;
    double learning_rate = 0.05;
    double grad_clip = 0.0;
    double max_norm = 0.0;  // embedding row norm cap, 0 = off
    CellMode cell = CellMode::gated;
    std::size_t history_length = kDefaultHistoryLength;
    std::size_t pretrain_epochs = 0;  // passes over warm-start / first-interval data
    std::size_t replay_epochs = 1;    // finetuning passes per replay interval

    /// Throws InvalidArgument listing every violation.
    void validate() const;
    /// Per-seed master seed.
    std::uint64_t seed_for(std::size_t index) const { return seed + index; }
    /// Parameters the policy actually scores with (lambda_u default, theory
    /// constructor for ren-theory).
    RenParams ren_params(std::size_t n_items) const;
};

struct RoundLog {
    std::size_t t = 0;  // 1-based
    std::size_t user = 0;
    std::vector<ItemId> slate;
    std::optional<ItemId> chosen;  // empty for replay misses
    double reward = 0.0;
    double optimal_reward = 0.0;
    double reciprocal_rank = 0.0;
};

struct MetricSeries {
    std::vector<double> reward;
    std::vector<double> rolling_reward;
    std::vector<double> regret;
    std::vector<double> cumulative_regret;

    std::size_t size() const noexcept { return reward.size(); }
};

/// Per-round metrics: trailing rolling mean (partial windows average what is
/// available) and cumulative regret sum(optimal - achieved).
MetricSeries compute_metrics(const std::vector<RoundLog>& logs, std::size_t rolling_window);

/// Element-wise mean of equally long series.
MetricSeries average_series(const std::vector<MetricSeries>& series);

/// Instrumentation of the sigma-decay premise: sigma starts at 1 for every
/// item and sigma_k <= 1/sqrt(c_k) where c_k counts the rounds item k was
/// slated; items slated in every round up to t satisfy sigma <= 1/sqrt(t).
struct SigmaAudit {
    bool initial_all_one = false;
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::size_t always_slated_checks = 0;
    std::size_t always_slated_violations = 0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<RoundLog> logs;
    MetricSeries metrics;
    SigmaAudit sigma;
    std::optional<std::string> error;  // set when training diverged mid-run
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SeedRun> runs;
    MetricSeries mean;
};

/// One seed of the online protocol. Deterministic given (config, index).
/// A training failure stops the run; the rounds completed so far are kept
/// and `error` is set.
SeedRun run_online(const ExperimentConfig& config, std::size_t seed_index);

/// All seeds (fanned out over `config.threads` workers), merged in seed
/// order.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Full REN, REN-1,2 and REN-1,3 on identical seeds and environments.
struct AblationResult {
    ExperimentResult full;
    ExperimentResult without_uncertainty;  // REN-1,2
    ExperimentResult without_diversity;    // REN-1,3
};
AblationResult run_ablation(const ExperimentConfig& config);

/// Writes `seed,t,policy,reward,rolling_reward,regret,cumulative_regret`,
/// one row per seed and round; numbers use the shortest round-trip form.
/// `labels`, when given, replaces the policy column per result.
void emit_csv(const std::vector<const ExperimentResult*>& results, const std::filesystem::path& path,
              const std::vector<std::string>& labels = {});
void emit_csv(const ExperimentResult& result, const std::filesystem::path& path);

/// Least-squares slope of y against x.
double ls_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Pure linear-bandit benchmarks (ridge estimates, no sequence model).

/// Linear instance with context uncertainty: at round t the true context of
/// arm k is x*_{t,k} ~ N(mu_k, sigma_t^2 I) with sigma_t = noise_sigma/sqrt(t);
/// the expected reward is x*^T theta*.
struct LinearInstance {
    std::vector<Vec> mu;
    Vec theta_star;
    double noise_sigma = 0.1;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(theta_star.size()); }
    std::size_t size() const noexcept { return mu.size(); }

    /// Unit-norm theta* and unit-norm arm means, isotropic directions.
    static LinearInstance random(std::size_t dim, std::size_t n_arms, double noise_sigma, Rng& rng);

    /// Arm 0 is a tempting but suboptimal direction; the best arm is
    /// orthogonal to it, and every other arm has a smaller first coordinate
    /// than arm 0. A purely greedy ridge learner locks onto arm 0.
    static LinearInstance deceptive(std::size_t dim, std::size_t n_arms, double noise_sigma, Rng& rng);
};

enum class BanditPolicy { supren, greedy };

/// Cumulative regret curve B(1..T) of one run.
std::vector<double> run_bandit(const LinearInstance& instance, BanditPolicy policy, std::size_t horizon,
                               double delta, Rng& rng);

struct RegretBenchConfig {
    std::size_t dim = 8;
    std::size_t n_arms = 20;
    std::vector<std::size_t> t_grid = {1000, 10000, 100000};
    double delta = 0.1;
    double noise_sigma = 0.1;
    std::size_t n_instances = 3;
    std::uint64_t seed = 0;
    BanditPolicy policy = BanditPolicy::supren;
    bool deceptive = false;
};

struct RegretBenchResult {
    std::vector<std::size_t> t_grid;
    std::vector<double> mean_regret;                 // B(T) averaged over instances
    std::vector<std::vector<double>> regret;         // [instance][grid point]
    bool monotone = true;                            // every curve non-decreasing
    double slope = 0.0;                              // d log B / d log T
};

/// Runs a fresh learner per (instance, T) and fits log B(T) against log T.
/// Throws InvalidArgument for grids with fewer than 3 points or not
/// strictly ascending.
RegretBenchResult regret_bench(const RegretBenchConfig& config);

struct BoundCheckConfig {
    std::size_t dim = 8;
    std::size_t n_arms = 10;
    std::size_t horizon = 100;
    double delta = 0.1;
    std::size_t trials = 2000;
    std::uint64_t seed = 0;
};

struct BoundCheckResult {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double rate = 0.0;
    double budget = 0.0;  // 2 delta / T
    double slack = 0.0;   // 3 binomial standard errors at the budget rate
    bool passed = false;
};

/// Monte Carlo check of the confidence bound
///   |r_hat_k - x*_k^T theta*| <= (alpha+1) s_k + (4 sqrt d + 2 sqrt(ln(TK/delta))) ||sigma_k||_inf
/// at round T after T-1 uniformly random observations, with
/// alpha = sqrt(ln(2TK/delta)/2). A trial violates when any arm breaks it.
BoundCheckResult bound_check(const BoundCheckConfig& config);

}  // namespace ren
