#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ren/error.hpp"
#include "ren/gru.hpp"

using ren::CellMode;
using ren::GruModel;
using ren::GruOptions;
using ren::GruParams;
using ren::ItemId;
using ren::TrainingExample;
using ren::Vec;

namespace {

GruModel small_model(CellMode mode, std::uint64_t seed = 1, std::size_t k = 6, std::size_t d = 4) {
    ren::Rng rng = ren::make_stream(seed, "model-init");
    GruOptions opt;
    opt.mode = mode;
    return GruModel(k, d, rng, opt);
}

std::vector<TrainingExample> small_batch() {
    return {{{0, 3, 1, 5, 2}, 4}, {{2, 2}, 0}, {{5}, 3}, {{1, 4, 0, 3, 3, 2, 5, 1}, 1}};
}

}  // namespace

TEST_CASE("user_embedding: empty history is the zero vector") {
    const auto m = small_model(CellMode::gated);
    CHECK(m.user_embedding(std::vector<ItemId>{}).isZero());
    CHECK_THROWS_AS(m.user_embedding(std::vector<ItemId>{6}), ren::InvalidArgument);
}

TEST_CASE("user_embedding is deterministic") {
    const auto a = small_model(CellMode::gated, 9);
    const auto b = small_model(CellMode::gated, 9);
    const std::vector<ItemId> h = {1, 2, 3, 4, 5};
    const Vec ta = a.user_embedding(h);
    CHECK(ta == a.user_embedding(h));
    CHECK(ta == b.user_embedding(h));
}

TEST_CASE("linear cell, single step, is an affine map of mu") {
    const auto m = small_model(CellMode::linear, 4);
    const auto& p = m.params();
    for (ItemId k = 0; k < 6; ++k) {
        const Vec expected = p.w_n * m.item_embedding(k) + p.b_n;
        CHECK((m.user_embedding(std::vector<ItemId>{k}) - expected).norm() <= 1e-14);
    }
}

TEST_CASE("gated cell matches a scalar reference implementation") {
    const auto m = small_model(CellMode::gated, 21);
    const auto& p = m.params();
    const std::vector<ItemId> hist = {3, 0, 5, 5, 1};
    std::vector<double> h(4, 0.0);
    const auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    for (const ItemId k : hist) {
        std::vector<double> z(4), r(4), n(4);
        for (int i = 0; i < 4; ++i) {
            double az = p.b_z(i), ar = p.b_r(i);
            for (int j = 0; j < 4; ++j) {
                az += p.w_z(i, j) * p.embed(static_cast<Eigen::Index>(k), j) + p.u_z(i, j) * h[j];
                ar += p.w_r(i, j) * p.embed(static_cast<Eigen::Index>(k), j) + p.u_r(i, j) * h[j];
            }
            z[i] = sig(az);
            r[i] = sig(ar);
        }
        for (int i = 0; i < 4; ++i) {
            double an = p.b_n(i);
            for (int j = 0; j < 4; ++j)
                an += p.w_n(i, j) * p.embed(static_cast<Eigen::Index>(k), j) + p.u_n(i, j) * r[j] * h[j];
            n[i] = std::tanh(an);
        }
        for (int i = 0; i < 4; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * n[i];
    }
    const Vec theta = m.user_embedding(hist);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(theta(i) - h[i]) <= 1e-12);
}

TEST_CASE("history is truncated to the most recent max_history items") {
    ren::Rng rng = ren::make_stream(0, "model-init");
    GruOptions opt;
    opt.max_history = 3;
    const GruModel m(6, 4, rng, opt);
    CHECK(m.user_embedding(std::vector<ItemId>{0, 1, 2, 3, 4}) == m.user_embedding(std::vector<ItemId>{2, 3, 4}));
}

TEST_CASE("relevance_scores equals per-item dot products") {
    ren::Rng rng = ren::make_stream(5, "model-init");
    const GruModel m(28, 8, rng);
    oracle::Gen g(2);
    const Vec theta = g.vec(8);
    const Vec scores = m.relevance_scores(theta);
    for (ItemId k = 0; k < 28; ++k) {
        double dot = 0.0;
        for (int i = 0; i < 8; ++i) dot += m.embedding_table()(static_cast<Eigen::Index>(k), i) * theta(i);
        CHECK(std::abs(scores(static_cast<Eigen::Index>(k)) - dot) <= 1e-12);
    }
    CHECK(m.relevance_scores(Vec::Zero(8)).isZero());
}

TEST_CASE("orthonormal embedding rows: theta = row k ranks k first") {
    auto m = small_model(CellMode::gated, 3, 4, 4);
    m.mutable_params().embed = ren::Mat::Identity(4, 4);
    for (ItemId k = 0; k < 4; ++k) {
        const Vec s = m.relevance_scores(m.item_embedding(k));
        Eigen::Index best = 0;
        s.maxCoeff(&best);
        CHECK(static_cast<ItemId>(best) == k);
    }
}

TEST_CASE("initialization lies in [-1/sqrt(d), 1/sqrt(d)]") {
    ren::Rng rng = ren::make_stream(8, "model-init");
    const GruModel m(30, 16, rng);
    const double bound = 1.0 / std::sqrt(16.0);
    m.params().for_each([&](std::span<const double> s) {
        for (const double v : s) CHECK(std::abs(v) <= bound);
    });
}

TEST_CASE("analytic gradient matches central finite differences") {
    for (const CellMode mode : {CellMode::gated, CellMode::linear}) {
        CAPTURE(static_cast<int>(mode));
        auto m = small_model(mode, 17);
        const auto batch = small_batch();
        const GruParams analytic = m.gradient(batch);
        std::vector<std::vector<double>> a_groups;
        analytic.for_each([&](std::span<const double> s) { a_groups.emplace_back(s.begin(), s.end()); });

        double worst = 0.0;
        std::size_t group = 0;
        m.mutable_params().for_each([&](std::span<double> s) {
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double numeric = oracle::central_difference([&] { return m.loss(batch); }, s[j], 1e-5);
                const double a = a_groups[group][j];
                const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(a - numeric) / denom);
            }
            ++group;
        });
        CHECK(group == 10);
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("overfitting a single example drives its probability above 0.9") {
    auto m = small_model(CellMode::gated, 2);
    ren::Rng rng = ren::make_stream(2, "x");
    GruOptions opt;
    opt.learning_rate = 0.5;
    m = GruModel(m.params(), opt);
    const std::vector<TrainingExample> one = {{{1, 2, 3}, 5}};
    double p = 0.0;
    for (int step = 0; step < 200 && p <= 0.9; ++step) {
        m.train_step(one);
        p = std::exp(-m.loss(one));
    }
    CHECK(p > 0.9);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    ren::Rng rng = ren::make_stream(1, "model-init");
    GruOptions opt;
    opt.learning_rate = 0.0;
    GruModel m(6, 4, rng, opt);
    const GruParams before = m.params();
    m.train_step(small_batch());
    CHECK(m.params().embed == before.embed);
    CHECK(m.params().u_n == before.u_n);
}

TEST_CASE("max_norm projects only the rows that leave the ball") {
    ren::Rng rng = ren::make_stream(1, "model-init");
    GruOptions opt;
    opt.learning_rate = 50.0;
    opt.max_norm = 0.3;
    GruModel m(6, 4, rng, opt);
    GruModel free_model(m.params(), GruOptions{50.0, CellMode::gated, ren::kDefaultHistoryLength, 0.0, 0.0});
    m.train_step(small_batch());
    free_model.train_step(small_batch());
    std::size_t projected = 0;
    for (Eigen::Index k = 0; k < 6; ++k) {
        const Vec free_row = free_model.params().embed.row(k);
        const Vec row = m.params().embed.row(k);
        if (free_row.norm() > 0.3) {
            ++projected;
            CHECK(row.norm() == doctest::Approx(0.3));
            CHECK((row - free_row * (0.3 / free_row.norm())).norm() < 1e-12);
        } else {
            CHECK(row == free_row);
        }
    }
    CHECK(projected > 0);
}

TEST_CASE("train_step rejects empty batches and non-finite states") {
    auto m = small_model(CellMode::gated);
    CHECK_THROWS_AS(m.train_step(std::vector<TrainingExample>{}), ren::InvalidArgument);
    m.mutable_params().b_n(0) = std::numeric_limits<double>::quiet_NaN();
    const GruParams before = m.params();
    CHECK_THROWS_AS(m.train_step(small_batch()), ren::NumericalError);
    CHECK(m.params().embed == before.embed);
}

TEST_CASE("training loss trends down on a fixed dataset at the default rate") {
    ren::Rng rng = ren::make_stream(12, "model-init");
    GruModel m(10, 8, rng);
    oracle::Gen g(12);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 40; ++i) {
        TrainingExample ex;
        const std::size_t len = 1 + g.index(10);
        for (std::size_t j = 0; j < len; ++j) ex.history.push_back(g.index(10));
        ex.target = ex.history.back() % 5;
        data.push_back(ex);
    }
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step) losses.push_back(m.train_step(data));
    const auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + 5, v.end());
        return v[5];
    };
    const double first = median({losses.begin(), losses.begin() + 10});
    const double last = median({losses.end() - 10, losses.end()});
    CHECK(last < first);
}

TEST_CASE("tied weights: the encoder and decoder share one table") {
    auto m = small_model(CellMode::gated, 6);
    const std::vector<ItemId> h = {2};
    const Vec before = m.user_embedding(h);
    m.mutable_params().embed(2, 0) += 0.5;
    CHECK(m.item_embedding(2)(0) == m.embedding_table()(2, 0));
    CHECK(m.user_embedding(h) != before);
}

TEST_CASE("checkpoint round trip is exact and corrupt files are rejected") {
    const auto dir = std::filesystem::temp_directory_path() / "ren_gru_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.bin";
    auto m = small_model(CellMode::linear, 31);
    m.train_step(small_batch());
    m.save(path);
    const GruModel back = GruModel::load(path);
    CHECK(back.params().embed == m.params().embed);
    CHECK(back.params().b_z == m.params().b_z);
    CHECK(back.options().mode == CellMode::linear);
    CHECK(back.options().learning_rate == m.options().learning_rate);
    CHECK(std::filesystem::file_size(path) == 8 + 5 * 4 + 3 * 8 + 8 * m.params().size());

    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.put('x');
    }
    CHECK_THROWS_AS(GruModel::load(path), ren::ParseError);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOTAMODEL";
    }
    CHECK_THROWS_AS(GruModel::load(path), ren::ParseError);
    std::filesystem::remove_all(dir);
}
