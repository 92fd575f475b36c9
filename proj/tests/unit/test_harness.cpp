#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "ren/error.hpp"
#include "ren/harness.hpp"

using ren::ExperimentConfig;
using ren::PolicyKind;
using ren::RoundLog;

namespace {

ExperimentConfig tiny(PolicyKind policy, std::size_t rounds = 60) {
    ExperimentConfig c;
    c.policy = policy;
    c.rounds = rounds;
    c.rolling_window = 10;
    c.n_seeds = 2;
    c.seed = 5;
    c.train_window = 4;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path tmp(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "ren_harness_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("config validation lists every violation") {
    ExperimentConfig c;
    c.slate_size = 0;
    c.delta = 2.0;
    c.env = "syn-q";
    try {
        c.validate();
        FAIL("expected InvalidArgument");
    } catch (const ren::InvalidArgument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("slate_size") != std::string::npos);
        CHECK(msg.find("delta") != std::string::npos);
        CHECK(msg.find("syn-q") != std::string::npos);
    }
    ExperimentConfig r;
    r.env = "replay";
    CHECK_THROWS_AS(r.validate(), ren::InvalidArgument);
}

TEST_CASE("ren_params: lambda_u default, override and ablations") {
    ExperimentConfig c;
    c.lambda_d = 0.2;
    CHECK(c.ren_params(28).lambda_u == doctest::Approx(0.2 * std::sqrt(10.0)));
    c.lambda_u = 0.05;
    CHECK(c.ren_params(28).lambda_u == 0.05);
    c.policy = PolicyKind::ren_13;
    CHECK(c.ren_params(28).lambda_d == 0.0);
    c.policy = PolicyKind::ren_theory;
    c.rounds = 100;
    CHECK(c.ren_params(28).lambda_d == doctest::Approx(1.0 + std::sqrt(0.5 * std::log(2.0 * 2800 / 0.1))));
}

TEST_CASE("metrics: rolling mean and cumulative regret against naive sums") {
    oracle::Gen g(3);
    std::vector<RoundLog> logs(9000);
    for (std::size_t i = 0; i < logs.size(); ++i) {
        logs[i].t = i + 1;
        logs[i].optimal_reward = 1.0;
        logs[i].reward = g.uniform(0.0, 1.0);
    }
    const std::size_t w = 100;
    const auto m = ren::compute_metrics(logs, w);
    double cum = 0.0;
    double worst_roll = 0.0;
    double worst_cum = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        cum += logs[i].optimal_reward - logs[i].reward;
        worst_cum = std::max(worst_cum, std::abs(m.cumulative_regret[i] - cum));
        const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= i; ++j) s += logs[j].reward;
        worst_roll = std::max(worst_roll, std::abs(m.rolling_reward[i] - s / static_cast<double>(i + 1 - lo)));
        CHECK(m.regret[i] == logs[i].optimal_reward - logs[i].reward);
    }
    CHECK(worst_cum <= 1e-9);
    CHECK(worst_roll <= 1e-12);
    CHECK_THROWS_AS(ren::compute_metrics(logs, 0), ren::InvalidArgument);
}

TEST_CASE("least-squares slope") {
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> y = {3, 5, 7, 9};
    CHECK(ren::ls_slope(x, y) == doctest::Approx(2.0));
    CHECK_THROWS_AS(ren::ls_slope(std::vector<double>{1, 1}, std::vector<double>{0, 1}), ren::InvalidArgument);
}

TEST_CASE("oracle policy has zero regret throughout") {
    const auto r = ren::run_experiment(tiny(PolicyKind::oracle));
    for (const auto& run : r.runs) {
        CHECK_FALSE(run.error);
        CHECK(run.metrics.cumulative_regret.back() == 0.0);
    }
    CHECK(r.mean.rolling_reward.back() == doctest::Approx(2.0 / std::sqrt(6.0)));
}

TEST_CASE("REN run: regret identity, slate shape and sigma audit") {
    const auto run = ren::run_online(tiny(PolicyKind::ren, 80), 0);
    REQUIRE_FALSE(run.error);
    REQUIRE(run.logs.size() == 80);
    double cum = 0.0;
    for (std::size_t i = 0; i < run.logs.size(); ++i) {
        const auto& l = run.logs[i];
        CHECK(l.t == i + 1);
        CHECK(l.slate.size() == 4);
        CHECK(std::set<ren::ItemId>(l.slate.begin(), l.slate.end()).size() == 4);
        cum += l.optimal_reward - l.reward;
        CHECK(std::abs(run.metrics.cumulative_regret[i] - cum) <= 1e-9);
    }
    CHECK(run.sigma.initial_all_one);
    CHECK(run.sigma.checks > 0);
    CHECK(run.sigma.violations == 0);
    CHECK(run.sigma.always_slated_violations == 0);
}

TEST_CASE("seeds are isolated and thread count does not change results") {
    auto c = tiny(PolicyKind::ren, 40);
    const auto both = ren::run_experiment(c);
    auto single = c;
    single.seed = c.seed + 1;
    single.n_seeds = 1;
    const auto alone = ren::run_experiment(single);
    CHECK(alone.runs[0].metrics.reward == both.runs[1].metrics.reward);
    auto threaded = c;
    threaded.threads = 2;
    const auto par = ren::run_experiment(threaded);
    CHECK(par.runs[0].metrics.reward == both.runs[0].metrics.reward);
    CHECK(par.runs[1].metrics.reward == both.runs[1].metrics.reward);
    CHECK(both.runs[0].metrics.reward != both.runs[1].metrics.reward);
}

TEST_CASE("CSV: header only, exact rows, byte-identical reruns") {
    ren::ExperimentResult empty;
    const auto p0 = tmp("empty.csv");
    ren::emit_csv(empty, p0);
    CHECK(slurp(p0) == "seed,t,policy,reward,rolling_reward,regret,cumulative_regret\n");

    ren::ExperimentResult three;
    three.config.policy = PolicyKind::random;
    ren::SeedRun run;
    run.seed = 9;
    const std::vector<double> rewards = {0.5, 0.25, 0.1};
    for (std::size_t i = 0; i < 3; ++i) {
        RoundLog l;
        l.t = i + 1;
        l.reward = rewards[i];
        l.optimal_reward = 1.0;
        run.logs.push_back(l);
    }
    run.metrics = ren::compute_metrics(run.logs, 2);
    three.runs.push_back(run);
    const auto p1 = tmp("three.csv");
    ren::emit_csv(three, p1);
    CHECK(slurp(p1) ==
          "seed,t,policy,reward,rolling_reward,regret,cumulative_regret\n"
          "9,1,random,0.5,0.5,0.5,0.5\n"
          "9,2,random,0.25,0.375,0.75,1.25\n"
          "9,3,random,0.1,0.175,0.9,2.15\n");
    CHECK_THROWS_AS(ren::emit_csv(std::vector<const ren::ExperimentResult*>{&three}, p1, {"a", "b"}),
                    ren::InvalidArgument);

    const auto c = tiny(PolicyKind::relevance, 30);
    const auto p2 = tmp("a.csv");
    const auto p3 = tmp("b.csv");
    ren::emit_csv(ren::run_experiment(c), p2);
    ren::emit_csv(ren::run_experiment(c), p3);
    CHECK(slurp(p2) == slurp(p3));
    std::filesystem::remove_all(p0.parent_path());
}

TEST_CASE("ablation runs the three variants on the same seeds") {
    const auto a = ren::run_ablation(tiny(PolicyKind::relevance, 20));
    CHECK(a.full.config.policy == PolicyKind::ren);
    CHECK(a.without_uncertainty.config.policy == PolicyKind::ren_12);
    CHECK(a.without_diversity.config.policy == PolicyKind::ren_13);
    CHECK(a.full.runs[1].seed == a.without_diversity.runs[1].seed);
}

TEST_CASE("linear instances are normalized; the deceptive one traps greedy") {
    ren::Rng rng = ren::make_stream(1, "bandit-instance");
    const auto inst = ren::LinearInstance::random(8, 20, 0.1, rng);
    CHECK(inst.theta_star.norm() == doctest::Approx(1.0));
    for (const auto& m : inst.mu) CHECK(m.norm() == doctest::Approx(1.0));

    const auto dec = ren::LinearInstance::deceptive(8, 20, 0.1, rng);
    std::size_t best = 0;
    for (std::size_t k = 1; k < dec.size(); ++k)
        if (dec.mu[k].dot(dec.theta_star) > dec.mu[best].dot(dec.theta_star)) best = k;
    CHECK(best == 1);
    for (std::size_t k = 1; k < dec.size(); ++k) CHECK(dec.mu[k](0) < dec.mu[0](0));
    CHECK(std::abs(dec.mu[0].dot(dec.mu[1])) < 1e-12);
}

TEST_CASE("bandit regret curves are non-decreasing") {
    ren::Rng rng = ren::make_stream(2, "bandit-instance");
    const auto inst = ren::LinearInstance::random(4, 5, 0.1, rng);
    ren::Rng ctx = ren::make_stream(2, "bandit-contexts");
    const auto curve = ren::run_bandit(inst, ren::BanditPolicy::supren, 300, 0.1, ctx);
    REQUIRE(curve.size() == 300);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
}

TEST_CASE("benchmark argument validation") {
    ren::RegretBenchConfig rb;
    rb.t_grid = {1000, 10000};
    CHECK_THROWS_AS(ren::regret_bench(rb), ren::InvalidArgument);
    rb.t_grid = {100, 50, 200};
    CHECK_THROWS_AS(ren::regret_bench(rb), ren::InvalidArgument);

    ren::BoundCheckConfig bc;
    bc.trials = 50;
    CHECK_THROWS_AS(ren::bound_check(bc), ren::InvalidArgument);
    bc.trials = 200;
    bc.delta = 0.0;
    CHECK_THROWS_AS(ren::bound_check(bc), ren::InvalidArgument);
}

TEST_CASE("small bound check passes and reports its budget") {
    ren::BoundCheckConfig bc;
    bc.trials = 200;
    bc.horizon = 30;
    const auto r = ren::bound_check(bc);
    CHECK(r.trials == 200);
    CHECK(r.budget == doctest::Approx(2 * 0.1 / 30));
    CHECK(r.rate == doctest::Approx(static_cast<double>(r.violations) / 200));
    CHECK(r.passed);
}
