#include "ren/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ren/catalog.hpp"
#include "ren/error.hpp"
#include "ren/replay_env.hpp"

namespace ren {

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    const bool replay = env == "replay";
    if (!replay && env != "syn-s" && env != "syn-m" && env != "syn-l")
        errors.push_back("env must be one of syn-s, syn-m, syn-l, replay (got '" + env + "')");
    if (replay && replay_path.empty()) errors.push_back("replay env requires replay_path");
    if (replay && intervals < 2) errors.push_back("replay needs at least 2 intervals");
    if (!(lambda_d >= 0.0)) errors.push_back("lambda_d must be >= 0");
    if (lambda_u && !(*lambda_u >= 0.0)) errors.push_back("lambda_u must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) errors.push_back("delta must lie in (0, 1)");
    if (slate_size == 0) errors.push_back("slate_size must be >= 1");
    if (rounds == 0 && !replay) errors.push_back("rounds must be >= 1");
    if (finetune_every == 0) errors.push_back("finetune_every must be >= 1");
    if (train_window == 0) errors.push_back("train_window must be >= 1");
    if (rolling_window == 0) errors.push_back("rolling_window must be >= 1");
    if (!replay && rolling_window > rounds) errors.push_back("rolling_window must not exceed rounds");
    if (n_seeds == 0) errors.push_back("n_seeds must be >= 1");
    if (threads == 0) errors.push_back("threads must be >= 1");
    if (dim == 0) errors.push_back("dim must be >= 1");
    if (!(learning_rate >= 0.0)) errors.push_back("learning_rate must be >= 0");
    if (!(grad_clip >= 0.0)) errors.push_back("grad_clip must be >= 0");
    if (history_length == 0) errors.push_back("history_length must be >= 1");
    if (train_steps == 0) errors.push_back("train_steps must be >= 1");
    if (!(max_norm >= 0.0)) errors.push_back("max_norm must be >= 0");
    if (!errors.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw InvalidArgument(msg);
    }
}

RenParams ExperimentConfig::ren_params(std::size_t n_items) const {
    if (policy == PolicyKind::ren_theory) return RenParams::theory(std::max<std::size_t>(rounds, 1), n_items, delta, dim);
    RenParams p = RenParams::tied_default(lambda_d, std::max<std::size_t>(rounds, 1), n_items, delta);
    if (lambda_u) p.lambda_u = *lambda_u;
    return effective_params(policy, p);
}

// ---------------------------------------------------------------------------
// Metrics

MetricSeries compute_metrics(const std::vector<RoundLog>& logs, std::size_t rolling_window) {
    if (rolling_window == 0) throw InvalidArgument("rolling window must be >= 1");
    MetricSeries m;
    const std::size_t n = logs.size();
    m.reward.resize(n);
    m.rolling_reward.resize(n);
    m.regret.resize(n);
    m.cumulative_regret.resize(n);
    double window_sum = 0.0;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m.reward[i] = logs[i].reward;
        window_sum += logs[i].reward;
        if (i >= rolling_window) window_sum -= logs[i - rolling_window].reward;
        // Re-sum periodically so that long runs do not accumulate drift.
        if (i % 4096 == 4095) {
            const std::size_t lo = i + 1 >= rolling_window ? i + 1 - rolling_window : 0;
            window_sum = 0.0;
            for (std::size_t j = lo; j <= i; ++j) window_sum += logs[j].reward;
        }
        const std::size_t len = std::min(i + 1, rolling_window);
        m.rolling_reward[i] = window_sum / static_cast<double>(len);
        m.regret[i] = logs[i].optimal_reward - logs[i].reward;
        cumulative += m.regret[i];
        m.cumulative_regret[i] = cumulative;
    }
    return m;
}

MetricSeries average_series(const std::vector<MetricSeries>& series) {
    MetricSeries out;
    if (series.empty()) return out;
    const std::size_t n = series.front().size();
    for (const auto& s : series)
        if (s.size() != n) throw InvalidArgument("average_series: series lengths differ");
    const auto avg = [&](auto member) {
        std::vector<double> v(n, 0.0);
        for (const auto& s : series)
            for (std::size_t i = 0; i < n; ++i) v[i] += (s.*member)[i];
        for (double& x : v) x /= static_cast<double>(series.size());
        return v;
    };
    out.reward = avg(&MetricSeries::reward);
    out.rolling_reward = avg(&MetricSeries::rolling_reward);
    out.regret = avg(&MetricSeries::regret);
    out.cumulative_regret = avg(&MetricSeries::cumulative_regret);
    return out;
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ls_slope: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw InvalidArgument("ls_slope: degenerate x values");
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Online protocol

namespace {

bool uses_model(PolicyKind p) { return p != PolicyKind::random && p != PolicyKind::oracle; }

class SigmaAuditor {
public:
    explicit SigmaAuditor(const Catalog& catalog) : slated_(catalog.size(), 0), always_(catalog.size(), true) {
        audit_.initial_all_one = std::all_of(catalog.items().begin(), catalog.items().end(),
                                             [](const ItemRecord& r) { return sigma_inf(r) == 1.0; });
    }

    void after_round(const Catalog& catalog, std::span<const ItemId> slate, std::size_t t) {
        std::vector<bool> on_slate(slated_.size(), false);
        for (const ItemId k : slate) on_slate[k] = true;
        for (std::size_t k = 0; k < slated_.size(); ++k) {
            if (on_slate[k]) ++slated_[k];
            else always_[k] = false;
            if (slated_[k] == 0) continue;
            const double sigma = catalog.sigma_inf(k);
            ++audit_.checks;
            if (!(sigma <= 1.0 / std::sqrt(static_cast<double>(slated_[k])))) ++audit_.violations;
            if (always_[k]) {
                ++audit_.always_slated_checks;
                if (!(sigma <= 1.0 / std::sqrt(static_cast<double>(t)))) ++audit_.always_slated_violations;
            }
        }
    }

    const SigmaAudit& audit() const { return audit_; }

private:
    std::vector<std::size_t> slated_;
    std::vector<bool> always_;
    SigmaAudit audit_;
};

void train_minibatches(GruModel& model, std::vector<TrainingExample> examples, std::size_t batch, std::size_t epochs,
                       Rng& rng) {
    if (examples.empty()) return;
    for (std::size_t e = 0; e < epochs; ++e) {
        for (std::size_t i = examples.size(); i > 1; --i) std::swap(examples[i - 1], examples[uniform_index(rng, i)]);
        for (std::size_t lo = 0; lo < examples.size(); lo += batch) {
            const std::size_t hi = std::min(examples.size(), lo + batch);
            model.train_step(std::span<const TrainingExample>(examples).subspan(lo, hi - lo));
        }
    }
}

std::span<const ItemId> tail(const std::vector<ItemId>& v, std::size_t n) {
    std::span<const ItemId> s(v);
    return s.size() > n ? s.subspan(s.size() - n) : s;
}

PrecisionState history_precision(const Catalog& catalog, std::span<const ItemId> history) {
    PrecisionState state(catalog.dim());
    for (const ItemId k : history) state.add_direction(catalog[k].mu);
    return state;
}

SeedRun run_synthetic(const ExperimentConfig& cfg, std::size_t seed_index) {
    SeedRun run;
    run.seed = cfg.seed_for(seed_index);
    EnvironmentSpec spec = EnvironmentSpec::named(cfg.env, run.seed);
    spec.slate_size = cfg.slate_size;
    spec.history_length = cfg.history_length;
    SynEnv env = generate_syn(spec);

    Rng init_rng = make_stream(run.seed, "model-init");
    Rng policy_rng = make_stream(run.seed, "policy");
    Rng user_rng = make_stream(run.seed, "user-draws");
    Rng train_rng = make_stream(run.seed, "train");

    GruOptions opt;
    opt.learning_rate = cfg.learning_rate;
    opt.grad_clip = cfg.grad_clip;
    opt.max_history = cfg.history_length;
    opt.mode = cfg.cell;
    opt.max_norm = cfg.max_norm;
    GruModel model(env.n_items(), cfg.dim, init_rng, opt);
    const bool model_based = uses_model(cfg.policy);
    const RenParams params = cfg.ren_params(env.n_items());

    try {
        if (model_based && cfg.pretrain_epochs > 0)
            train_minibatches(model, env.warm_start_examples(), cfg.train_window, cfg.pretrain_epochs, train_rng);
    } catch (const NumericalError& e) {
        run.error = e.what();
        run.metrics = compute_metrics(run.logs, cfg.rolling_window);
        return run;
    }
    Catalog catalog(model);
    SigmaAuditor auditor(catalog);
    std::vector<TrainingExample> feedback;
    run.logs.reserve(cfg.rounds);

    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        const std::size_t user = env.draw_user(user_rng);
        const auto history = tail(env.history(user), cfg.history_length);

        std::vector<ItemId> slate;
        switch (cfg.policy) {
            // Random recommends a single uniformly drawn item.
            case PolicyKind::random: slate = random_slate(env.n_items(), 1, policy_rng); break;
            case PolicyKind::oracle: slate = oracle_slate(env.true_rewards(user), cfg.slate_size); break;
            case PolicyKind::relevance:
                slate = relevance_slate(model.user_embedding(history), catalog, cfg.slate_size);
                break;
            default: {
                const Vec theta = model.user_embedding(history);
                const PrecisionState state = history_precision(catalog, history);
                slate = ren_recommend(theta, catalog, state, params, cfg.slate_size);
            }
        }

        std::vector<ItemId> history_copy(history.begin(), history.end());
        const StepOutcome outcome = env.step(user, slate);
        catalog.record_impressions(slate);
        auditor.after_round(catalog, slate, t);

        RoundLog log;
        log.t = t;
        log.user = user;
        log.slate = std::move(slate);
        log.chosen = outcome.chosen;
        log.reward = outcome.reward;
        log.optimal_reward = outcome.optimal_reward;
        run.logs.push_back(std::move(log));

        if (!model_based) continue;
        feedback.push_back(TrainingExample{std::move(history_copy), outcome.chosen});
        if (t % cfg.finetune_every == 0) {
            const std::size_t n = std::min(cfg.train_window, feedback.size());
            try {
                for (std::size_t step = 0; step < cfg.train_steps; ++step) {
                    if (cfg.train_sampling == TrainSampling::recent) {
                        model.train_step(std::span<const TrainingExample>(feedback).subspan(feedback.size() - n, n));
                        continue;
                    }
                    std::vector<TrainingExample> batch;
                    batch.reserve(cfg.train_window);
                    for (std::size_t j = 0; j < cfg.train_window; ++j)
                        batch.push_back(feedback[uniform_index(train_rng, feedback.size())]);
                    model.train_step(batch);
                }
            } catch (const NumericalError& e) {
                run.error = e.what();
                break;
            }
            catalog.refresh_mu(model);
        }
    }
    run.sigma = auditor.audit();
    run.metrics = compute_metrics(run.logs, cfg.rolling_window);
    return run;
}

SeedRun run_replay(const ExperimentConfig& cfg, std::size_t seed_index) {
    SeedRun run;
    run.seed = cfg.seed_for(seed_index);
    ReplayEnv env = ReplayEnv::from_log(cfg.replay_path, cfg.intervals);
    if (env.n_items() == 0) {
        run.metrics = compute_metrics(run.logs, cfg.rolling_window);
        return run;
    }

    Rng init_rng = make_stream(run.seed, "model-init");
    Rng policy_rng = make_stream(run.seed, "policy");
    Rng train_rng = make_stream(run.seed, "train");
    GruOptions opt;
    opt.learning_rate = cfg.learning_rate;
    opt.grad_clip = cfg.grad_clip;
    opt.max_history = cfg.history_length;
    opt.mode = cfg.cell;
    opt.max_norm = cfg.max_norm;
    GruModel model(env.n_items(), cfg.dim, init_rng, opt);
    const bool model_based = uses_model(cfg.policy);
    const RenParams params = cfg.ren_params(env.n_items());
    Catalog catalog(model);
    SigmaAuditor auditor(catalog);

    const auto& events = env.events();
    std::size_t i = 0;
    std::size_t t = 0;
    try {
        for (std::size_t interval = 0; interval < env.n_intervals(); ++interval) {
            std::vector<TrainingExample> examples;
            for (; i < events.size() && events[i].interval == interval; ++i) {
                const ReplayEvent& e = events[i];
                const auto history = tail(env.history(e.user), cfg.history_length);
                examples.push_back(TrainingExample{{history.begin(), history.end()}, e.clicked});
                if (interval > 0) {
                    const auto candidates = env.candidates(e);
                    const std::size_t m = std::min(cfg.slate_size, candidates.size());
                    std::vector<ItemId> slate;
                    switch (cfg.policy) {
                        case PolicyKind::random: {
                            const auto pick = random_slate(candidates.size(), 1, policy_rng);
                            for (const auto j : pick) slate.push_back(candidates[j]);
                            break;
                        }
                        case PolicyKind::oracle: {
                            std::vector<double> truth(candidates.size(), 0.0);
                            for (std::size_t j = 0; j < candidates.size(); ++j)
                                truth[j] = candidates[j] == e.clicked ? 1.0 : 0.0;
                            for (const auto j : oracle_slate(truth, m)) slate.push_back(candidates[j]);
                            break;
                        }
                        default: {
                            const Vec theta = model.user_embedding(history);
                            const PrecisionState state = history_precision(catalog, history);
                            slate = ren_recommend(theta, catalog, state, params, m, candidates);
                        }
                    }
                    const ReplayOutcome o = env.evaluate(e, slate);
                    catalog.record_impressions(slate);
                    auditor.after_round(catalog, slate, ++t);
                    RoundLog log;
                    log.t = t;
                    log.user = e.user;
                    log.slate = std::move(slate);
                    if (o.hit) log.chosen = e.clicked;
                    log.reward = o.reward;
                    log.optimal_reward = o.optimal_reward;
                    log.reciprocal_rank = o.reciprocal_rank;
                    run.logs.push_back(std::move(log));
                }
                env.consume(e);
            }
            if (model_based) {
                const std::size_t epochs = interval == 0 ? std::max<std::size_t>(cfg.pretrain_epochs, 1) : cfg.replay_epochs;
                train_minibatches(model, std::move(examples), cfg.train_window, epochs, train_rng);
                catalog.refresh_mu(model);
            }
        }
    } catch (const NumericalError& e) {
        run.error = e.what();
    }
    run.sigma = auditor.audit();
    run.metrics = compute_metrics(run.logs, cfg.rolling_window);
    return run;
}

}  // namespace

SeedRun run_online(const ExperimentConfig& config, std::size_t seed_index) {
    config.validate();
    return config.env == "replay" ? run_replay(config, seed_index) : run_synthetic(config, seed_index);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    result.config = config;
    result.runs.resize(config.n_seeds);
    std::vector<std::exception_ptr> failures(config.n_seeds);
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t i = next++; i < config.n_seeds; i = next++) {
            try {
                result.runs[i] = run_online(config, i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::min(config.threads, config.n_seeds);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    // Aborted seeds are shorter; average over the common prefix.
    std::size_t common = result.runs.front().metrics.size();
    for (const auto& r : result.runs) common = std::min(common, r.metrics.size());
    std::vector<MetricSeries> trimmed;
    for (const auto& r : result.runs) {
        MetricSeries m = r.metrics;
        m.reward.resize(common);
        m.rolling_reward.resize(common);
        m.regret.resize(common);
        m.cumulative_regret.resize(common);
        trimmed.push_back(std::move(m));
    }
    result.mean = average_series(trimmed);
    return result;
}

AblationResult run_ablation(const ExperimentConfig& config) {
    AblationResult out;
    ExperimentConfig c = config;
    c.policy = PolicyKind::ren;
    out.full = run_experiment(c);
    c.policy = PolicyKind::ren_12;
    out.without_uncertainty = run_experiment(c);
    c.policy = PolicyKind::ren_13;
    out.without_diversity = run_experiment(c);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void put_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

void emit_csv(const std::vector<const ExperimentResult*>& results, const std::filesystem::path& path,
              const std::vector<std::string>& labels) {
    if (!labels.empty() && labels.size() != results.size())
        throw InvalidArgument("emit_csv: one label per result required");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
    std::string buf = "seed,t,policy,reward,rolling_reward,regret,cumulative_regret\n";
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto* result = results[r];
        const std::string policy = labels.empty() ? std::string(policy_name(result->config.policy)) : labels[r];
        for (const auto& run : result->runs) {
            const auto& m = run.metrics;
            for (std::size_t i = 0; i < m.size(); ++i) {
                buf += std::to_string(run.seed);
                buf += ',';
                buf += std::to_string(run.logs[i].t);
                buf += ',';
                buf += policy;
                buf += ',';
                put_number(buf, m.reward[i]);
                buf += ',';
                put_number(buf, m.rolling_reward[i]);
                buf += ',';
                put_number(buf, m.regret[i]);
                buf += ',';
                put_number(buf, m.cumulative_regret[i]);
                buf += '\n';
            }
            out << buf;
            buf.clear();
        }
    }
    out << buf;
    if (!out) throw InvalidArgument("write failed for " + path.string());
}

void emit_csv(const ExperimentResult& result, const std::filesystem::path& path) {
    emit_csv(std::vector<const ExperimentResult*>{&result}, path);
}

// ---------------------------------------------------------------------------
// Linear bandit benchmarks

namespace {

Vec random_unit(std::size_t dim, Rng& rng) {
    Vec v(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = standard_normal(rng);
    } while (v.norm() < 1e-12);
    return v.normalized();
}

}  // namespace

LinearInstance LinearInstance::random(std::size_t dim, std::size_t n_arms, double noise_sigma, Rng& rng) {
    if (dim == 0 || n_arms == 0) throw InvalidArgument("linear instance: dim and n_arms must be >= 1");
    LinearInstance inst;
    inst.noise_sigma = noise_sigma;
    inst.theta_star = random_unit(dim, rng);
    for (std::size_t k = 0; k < n_arms; ++k) inst.mu.push_back(random_unit(dim, rng));
    return inst;
}

LinearInstance LinearInstance::deceptive(std::size_t dim, std::size_t n_arms, double noise_sigma, Rng& rng) {
    if (dim < 2 || n_arms < 2) throw InvalidArgument("deceptive instance: need dim >= 2 and n_arms >= 2");
    LinearInstance inst;
    inst.noise_sigma = noise_sigma;
    const auto d = static_cast<Eigen::Index>(dim);
    inst.theta_star = Vec::Zero(d);
    inst.theta_star(0) = 0.3;
    inst.theta_star(1) = std::sqrt(1.0 - 0.09);
    inst.mu.push_back(Vec::Unit(d, 0));  // tempting: reward 0.3
    inst.mu.push_back(Vec::Unit(d, 1));  // optimal: reward ~0.954
    for (std::size_t k = 2; k < n_arms; ++k) {
        // Orthogonal to the optimal direction, first coordinate negative.
        Vec v = random_unit(dim, rng);
        v(1) = 0.0;
        v(0) = -std::abs(v(0)) - 1e-3;
        inst.mu.push_back(v.normalized());
    }
    return inst;
}

std::vector<double> run_bandit(const LinearInstance& inst, BanditPolicy policy, std::size_t horizon, double delta,
                               Rng& rng) {
    const std::size_t d = inst.dim();
    const std::size_t k_arms = inst.size();
    const RenParams params = RenParams::theory(horizon, k_arms, delta, d);
    SupRenState sup(d, params);
    PrecisionState greedy_state(d);

    ArmSet arms;
    arms.mu = inst.mu;
    arms.sigma.assign(k_arms, 0.0);
    std::vector<double> truth(k_arms);
    std::vector<double> curve;
    curve.reserve(horizon);
    double cumulative = 0.0;
    Vec x(static_cast<Eigen::Index>(d));

    for (std::size_t t = 1; t <= horizon; ++t) {
        const double sigma = inst.noise_sigma / std::sqrt(static_cast<double>(t));
        std::fill(arms.sigma.begin(), arms.sigma.end(), sigma);
        for (std::size_t k = 0; k < k_arms; ++k) {
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = inst.mu[k](i) + sigma * standard_normal(rng);
            truth[k] = x.dot(inst.theta_star);
        }
        const double best = *std::max_element(truth.begin(), truth.end());

        ItemId chosen = 0;
        if (policy == BanditPolicy::supren) {
            const auto decision = sup.select(t, arms);
            chosen = decision.chosen;
            sup.observe(decision, inst.mu[chosen], truth[chosen]);
        } else {
            const Vec theta_hat = greedy_state.ridge_estimate();
            std::vector<double> est(k_arms);
            for (std::size_t k = 0; k < k_arms; ++k) est[k] = inst.mu[k].dot(theta_hat);
            chosen = argmax_lowest(est);
            greedy_state.rank_one_update(inst.mu[chosen], truth[chosen]);
        }
        cumulative += best - truth[chosen];
        curve.push_back(cumulative);
    }
    return curve;
}

RegretBenchResult regret_bench(const RegretBenchConfig& cfg) {
    if (cfg.t_grid.size() < 3) throw InvalidArgument("regret_bench: T grid needs at least 3 points");
    for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
        if (cfg.t_grid[i] == 0 || (i > 0 && cfg.t_grid[i] <= cfg.t_grid[i - 1]))
            throw InvalidArgument("regret_bench: T grid must be positive and strictly ascending");
    }
    if (cfg.n_instances == 0) throw InvalidArgument("regret_bench: need at least one instance");

    RegretBenchResult out;
    out.t_grid = cfg.t_grid;
    out.mean_regret.assign(cfg.t_grid.size(), 0.0);
    for (std::size_t inst_i = 0; inst_i < cfg.n_instances; ++inst_i) {
        Rng inst_rng = make_stream(cfg.seed + inst_i, "bandit-instance");
        const LinearInstance inst = cfg.deceptive
                                        ? LinearInstance::deceptive(cfg.dim, cfg.n_arms, cfg.noise_sigma, inst_rng)
                                        : LinearInstance::random(cfg.dim, cfg.n_arms, cfg.noise_sigma, inst_rng);
        std::vector<double> row;
        for (const std::size_t horizon : cfg.t_grid) {
            Rng run_rng = make_stream(cfg.seed + inst_i, "bandit-contexts");
            const auto curve = run_bandit(inst, cfg.policy, horizon, cfg.delta, run_rng);
            out.monotone = out.monotone && std::is_sorted(curve.begin(), curve.end());
            row.push_back(curve.back());
        }
        for (std::size_t j = 0; j < row.size(); ++j) out.mean_regret[j] += row[j] / static_cast<double>(cfg.n_instances);
        out.regret.push_back(std::move(row));
    }
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t j = 0; j < cfg.t_grid.size(); ++j) {
        lx.push_back(std::log(static_cast<double>(cfg.t_grid[j])));
        // Zero regret (perfect play) would be -inf; floor at one round's worth of epsilon.
        ly.push_back(std::log(std::max(out.mean_regret[j], 1e-12)));
    }
    out.slope = ls_slope(lx, ly);
    return out;
}

BoundCheckResult bound_check(const BoundCheckConfig& cfg) {
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InvalidArgument("bound_check: delta must lie in (0, 1)");
    if (cfg.trials < 100) throw InvalidArgument("bound_check: need at least 100 trials");
    if (cfg.dim == 0 || cfg.n_arms == 0 || cfg.horizon < 2)
        throw InvalidArgument("bound_check: dim, n_arms >= 1 and horizon >= 2 required");

    const RenParams params = RenParams::theory(cfg.horizon, cfg.n_arms, cfg.delta, cfg.dim);
    const double coef = params.uncertainty_coefficient(cfg.dim);
    Rng rng = make_stream(cfg.seed, "bound-check");

    BoundCheckResult out;
    out.trials = cfg.trials;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const LinearInstance inst = LinearInstance::random(cfg.dim, cfg.n_arms, 1.0, rng);
        PrecisionState state(cfg.dim);
        std::vector<std::size_t> impressions(cfg.n_arms, 1);
        Vec x(static_cast<Eigen::Index>(cfg.dim));
        const auto draw_reward = [&](std::size_t k) {
            const double sigma = 1.0 / std::sqrt(static_cast<double>(impressions[k]));
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = inst.mu[k](i) + sigma * standard_normal(rng);
            return x.dot(inst.theta_star);
        };
        for (std::size_t tau = 1; tau < cfg.horizon; ++tau) {
            const std::size_t k = uniform_index(rng, cfg.n_arms);
            state.rank_one_update(inst.mu[k], draw_reward(k));
            ++impressions[k];
        }
        const Vec theta_hat = state.ridge_estimate();
        bool violated = false;
        for (std::size_t k = 0; k < cfg.n_arms; ++k) {
            const double sigma = 1.0 / std::sqrt(static_cast<double>(impressions[k]));
            const double truth = draw_reward(k);
            const double width = (params.alpha + 1.0) * state.quad_width(inst.mu[k]) + coef * sigma;
            if (std::abs(inst.mu[k].dot(theta_hat) - truth) > width) violated = true;
        }
        if (violated) ++out.violations;
    }
    out.rate = static_cast<double>(out.violations) / static_cast<double>(out.trials);
    out.budget = 2.0 * cfg.delta / static_cast<double>(cfg.horizon);
    out.slack = 3.0 * std::sqrt(out.budget * (1.0 - out.budget) / static_cast<double>(out.trials));
    out.passed = out.rate <= out.budget + out.slack;
    return out;
}

}  // namespace ren
