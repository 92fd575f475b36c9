#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ren/error.hpp"
#include "ren/policies.hpp"
#include "ren/replay_env.hpp"
#include "ren/syn_env.hpp"

using ren::EnvironmentSpec;
using ren::ItemId;

namespace {

const double kBoth = 2.0 / std::sqrt(6.0);  // two shared coordinates
const double kOne = 1.0 / std::sqrt(6.0);   // one shared coordinate

std::filesystem::path write_log(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "ren_env_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << text;
    return path;
}

std::size_t parse_error_line(const std::filesystem::path& path) {
    try {
        (void)ren::ReplayEnv::from_log(path, 2);
    } catch (const ren::ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("SYN-S: 28 items, each user sees 3 / 15 / 10 items at 0.8165 / 0.408 / 0") {
    const auto env = ren::generate_syn(EnvironmentSpec::named("syn-s", 3));
    CHECK(env.n_items() == 28);
    CHECK(env.n_users() == 15);
    std::set<std::vector<double>> distinct_items;
    for (ItemId k = 0; k < 28; ++k) {
        const auto& v = env.item_latent(k);
        CHECK(v.norm() == doctest::Approx(1.0));
        CHECK((v.array() != 0.0).count() == 2);
        distinct_items.insert(std::vector<double>(v.data(), v.data() + v.size()));
    }
    CHECK(distinct_items.size() == 28);
    for (std::size_t u = 0; u < 15; ++u) {
        CHECK((env.user_latent(u).array() != 0.0).count() == 3);
        std::map<int, int> levels;
        for (const double r : env.true_rewards(u)) {
            if (std::abs(r - kBoth) < 1e-12) ++levels[2];
            else if (std::abs(r - kOne) < 1e-12) ++levels[1];
            else if (r == 0.0) ++levels[0];
            else ++levels[-1];
        }
        CHECK(levels[2] == 3);
        CHECK(levels[1] == 15);
        CHECK(levels[0] == 10);
        CHECK(levels[-1] == 0);
        CHECK(env.optimal_reward(u) == doctest::Approx(kBoth));
    }
    CHECK(kBoth == doctest::Approx(0.8165).epsilon(1e-4));
}

TEST_CASE("random slate baselines on SYN-S match enumeration") {
    const auto env = ren::generate_syn(EnvironmentSpec::named("syn-s", 0));
    // Single item: (3 kBoth + 15 kOne) / 28.
    double single = 0.0;
    for (const double r : env.true_rewards(0)) single += r;
    single /= 28.0;
    CHECK(single == doctest::Approx((3 * kBoth + 15 * kOne) / 28.0));
    CHECK(single == doctest::Approx(0.306).epsilon(2e-3));

    // Best of a uniformly random 4-slate, by enumerating all C(28,4) slates.
    const auto r = env.true_rewards(0);
    double total = 0.0;
    std::size_t count = 0;
    for (ItemId a = 0; a < 28; ++a)
        for (ItemId b = a + 1; b < 28; ++b)
            for (ItemId c = b + 1; c < 28; ++c)
                for (ItemId d = c + 1; d < 28; ++d) {
                    total += std::max({r[a], r[b], r[c], r[d]});
                    ++count;
                }
    CHECK(count == 20475);
    const double exact = total / static_cast<double>(count);

    ren::Rng rng = ren::make_stream(5, "policy");
    double sampled = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto slate = ren::random_slate(28, 4, rng);
        sampled += env.evaluate(0, slate).reward;
    }
    CHECK(std::abs(sampled / n - exact) < 0.01);
}

TEST_CASE("replicated environments repeat the base catalog") {
    const auto m = ren::generate_syn(EnvironmentSpec::named("syn-m", 1));
    CHECK(m.n_items() == 280);
    CHECK(m.n_base_items() == 28);
    for (ItemId k = 0; k < 280; ++k) CHECK(m.item_latent(k) == m.item_latent(k % 28));
    CHECK(EnvironmentSpec::named("syn-l").replication == 50);
    CHECK_THROWS_AS(EnvironmentSpec::named("syn-xl"), ren::InvalidArgument);
}

TEST_CASE("warm start: 60 choices per user, 900 examples, no feedback") {
    const auto env = ren::generate_syn(EnvironmentSpec::named("syn-s", 2));
    CHECK(env.warm_start_examples().size() == 15 * 60);
    CHECK(env.feedback().empty());
    for (std::size_t u = 0; u < 15; ++u) CHECK(env.history(u).size() == 60);
    // Example i of user 0 is (first i choices, choice i).
    const auto& ex = env.warm_start_examples();
    for (std::size_t i = 0; i < 60; ++i) {
        CHECK(ex[i].history.size() == i);
        CHECK(ex[i].target == env.history(0)[i]);
    }
}

TEST_CASE("environment generation is seed-deterministic") {
    const auto a = ren::generate_syn(EnvironmentSpec::named("syn-s", 11));
    const auto b = ren::generate_syn(EnvironmentSpec::named("syn-s", 11));
    const auto c = ren::generate_syn(EnvironmentSpec::named("syn-s", 12));
    bool any_diff = false;
    for (std::size_t u = 0; u < 15; ++u) {
        CHECK(a.user_latent(u) == b.user_latent(u));
        CHECK(a.history(u) == b.history(u));
        any_diff = any_diff || a.history(u) != c.history(u);
    }
    CHECK(any_diff);
}

TEST_CASE("step picks the best slate item, ties to the lowest id, and logs it") {
    auto env = ren::generate_syn(EnvironmentSpec::named("syn-s", 4));
    const auto r = env.true_rewards(0);
    std::vector<ItemId> best;
    for (ItemId k = 0; k < 28; ++k)
        if (std::abs(r[k] - kBoth) < 1e-12) best.push_back(k);
    REQUIRE(best.size() == 3);
    const std::vector<ItemId> slate = {best[2], best[0], best[1]};
    const auto o = env.step(0, slate);
    CHECK(o.chosen == best[0]);
    CHECK(o.reward == doctest::Approx(kBoth));
    CHECK(o.optimal_reward == doctest::Approx(kBoth));
    CHECK(env.history(0).size() == 61);
    CHECK(env.history(0).back() == best[0]);
    CHECK(env.feedback().size() == 1);
    CHECK_THROWS_AS(env.step(15, slate), ren::InvalidArgument);
    CHECK_THROWS_AS(env.step(0, std::vector<ItemId>{}), ren::InvalidArgument);
}

TEST_CASE("replay log: hand trace of ids, intervals and scoring") {
    const auto path = write_log("ok.csv",
                                "timestamp,user_id,item_id,impressions\n"
                                "100,7,50,50|60|70\n"
                                "130,3,60,\n"
                                "110,7,70,70|50\n"
                                "\n"
                                "139,3,50,60|70\n");
    const auto env = ren::ReplayEnv::from_log(path, 2);
    CHECK(env.n_items() == 3);
    CHECK(env.n_users() == 2);
    CHECK(env.raw_item_id(0) == 50);
    CHECK(env.raw_user_id(1) == 7);
    const auto& ev = env.events();
    REQUIRE(ev.size() == 4);
    // Sorted by time; span [100, 139] split into two 20-second buckets.
    CHECK(ev[0].timestamp == 100);
    CHECK(ev[1].timestamp == 110);
    CHECK(ev[0].interval == 0);
    CHECK(ev[1].interval == 0);
    CHECK(ev[2].interval == 1);
    CHECK(ev[3].interval == 1);
    CHECK(ev[1].impressions == std::vector<ItemId>{2, 0});
    CHECK(env.candidates(ev[2]) == std::vector<ItemId>{0, 1, 2});

    const auto hit = env.evaluate(ev[0], std::vector<ItemId>{1, 0});
    CHECK(hit.hit);
    CHECK(hit.reward == 1.0);
    CHECK(hit.reciprocal_rank == 0.5);
    CHECK(hit.optimal_reward == 1.0);
    const auto miss = env.evaluate(ev[0], std::vector<ItemId>{2});
    CHECK_FALSE(miss.hit);
    CHECK(miss.reciprocal_rank == 0.0);
    // Click outside its own impression list: unattainable.
    CHECK(env.evaluate(ev[3], std::vector<ItemId>{0}).optimal_reward == 0.0);

    auto consumed = env;
    consumed.consume(ev[0]);
    consumed.consume(ev[1]);
    CHECK(consumed.history(1) == std::vector<ItemId>{0, 2});
}

TEST_CASE("replay log: malformed rows report their line") {
    CHECK(parse_error_line(write_log("hdr.csv", "time,user,item\n1,2,3,\n")) == 1);
    CHECK(parse_error_line(write_log("cols.csv", "timestamp,user_id,item_id,impressions\n1,2,3,\n4,5,6\n")) == 3);
    CHECK(parse_error_line(write_log("num.csv", "timestamp,user_id,item_id,impressions\n1,x,3,\n")) == 2);
    CHECK(parse_error_line(write_log("dup.csv", "timestamp,user_id,item_id,impressions\n1,2,3,\n2,2,3,4|4\n")) == 3);
    CHECK(parse_error_line(write_log("empty.csv", "")) == 1);
    CHECK_THROWS_AS(ren::ReplayEnv::from_log("/nonexistent/log.csv", 2), ren::InvalidArgument);
    CHECK_THROWS_AS(ren::ReplayEnv::from_log(write_log("z.csv", "timestamp,user_id,item_id,impressions\n"), 0),
                    ren::InvalidArgument);
}
