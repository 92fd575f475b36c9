#pragma once

// Base recommender: a single-layer GRU whose item embedding table is shared
// between the encoder (inputs) and the decoder (scores = embed * theta).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ren/precision.hpp"
#include "ren/rng.hpp"

namespace ren {

using ItemId = std::size_t;

/// Most recent interactions fed to the recurrent cell.
inline constexpr std::size_t kDefaultHistoryLength = 60;

enum class CellMode : std::uint32_t {
    gated = 0,   ///< standard GRU
    linear = 1,  ///< gates pinned open, identity activation: h' = W x + U h + b
};

/// A user's interaction sequence, oldest first.
struct History {
    std::size_t user_id = 0;
    std::vector<ItemId> items;
};

struct TrainingExample {
    std::vector<ItemId> history;
    ItemId target = 0;
};

/// Every trainable tensor. Also used to hold gradients.
struct GruParams {
    Mat embed;  // K x d, row k is mu_k
    Mat w_z, u_z, w_r, u_r, w_n, u_n;
    Vec b_z, b_r, b_n;

    static GruParams zeros_like(const GruParams& other);

    /// Visits every tensor as a flat mutable span (fixed order, also the
    /// checkpoint order).
    void for_each(const std::function<void(std::span<double>)>& fn);
    void for_each(const std::function<void(std::span<const double>)>& fn) const;
    std::size_t size() const;
};

struct GruOptions {
    double learning_rate = 0.05;
    CellMode mode = CellMode::gated;
    std::size_t max_history = kDefaultHistoryLength;
    /// Global gradient-norm cap; 0 disables clipping.
    double grad_clip = 0.0;
    /// Embedding rows are projected back onto this L2 ball after each
    /// step; 0 disables.
    double max_norm = 0.0;
};

class GruModel {
public:
    /// Parameters drawn uniformly from [-1/sqrt(d), 1/sqrt(d)].
    GruModel(std::size_t n_items, std::size_t dim, Rng& init_rng, GruOptions options = {});
    /// Adopts explicit parameters (checkpoint load, tests).
    GruModel(GruParams params, GruOptions options);

    std::size_t n_items() const noexcept { return static_cast<std::size_t>(params_.embed.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(params_.embed.cols()); }
    const GruOptions& options() const noexcept { return options_; }
    void set_learning_rate(double lr) { options_.learning_rate = lr; }

    const GruParams& params() const noexcept { return params_; }
    GruParams& mutable_params() noexcept { return params_; }

    /// Encoder output f_e(e_k): row k of the tied table.
    Vec item_embedding(ItemId k) const;
    const Mat& embedding_table() const noexcept { return params_.embed; }

    /// Final hidden state after folding the last `max_history` items; zero
    /// for an empty history.
    Vec user_embedding(std::span<const ItemId> history) const;
    Vec user_embedding(const History& history) const { return user_embedding(history.items); }

    /// embed * theta.
    Vec relevance_scores(const Vec& theta) const;

    /// Mean softmax cross-entropy over the batch.
    double loss(std::span<const TrainingExample> batch) const;

    /// Gradient of loss() with respect to every parameter.
    GruParams gradient(std::span<const TrainingExample> batch, double* loss_out = nullptr) const;

    /// One SGD step. Returns the batch loss before the step. Throws
    /// NumericalError (and leaves the model untouched) on a non-finite
    /// loss or gradient.
    double train_step(std::span<const TrainingExample> batch);

    bool all_finite() const;

    /// Binary checkpoint, layout in docs/checkpoint_format.md.
    void save(const std::filesystem::path& path) const;
    static GruModel load(const std::filesystem::path& path);

private:
    void check_item(ItemId k) const;
    std::span<const ItemId> truncate(std::span<const ItemId> history) const;

    GruParams params_;
    GruOptions options_;
};

}  // namespace ren
