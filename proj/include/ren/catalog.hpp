#pragma once

// Item store: current mean embedding mu_k (read from the encoder) and the
// impression count n_k behind the isotropic uncertainty sigma_k = 1/sqrt(n_k).

#include <filesystem>
#include <span>
#include <vector>

#include "ren/gru.hpp"
#include "ren/precision.hpp"

namespace ren {

struct ItemRecord {
    ItemId item_id = 0;
    Vec mu;
    /// Starts at 1 so that sigma starts at exactly 1.
    std::size_t impressions = 1;
};

/// ||sigma_k||_inf = 1/sqrt(n_k). Throws InvalidState for n_k == 0.
double sigma_inf(const ItemRecord& item);

class Catalog {
public:
    /// K items with zero embeddings and n_k = 1.
    Catalog(std::size_t n_items, std::size_t dim);
    /// Embeddings taken from the encoder, n_k = 1.
    explicit Catalog(const GruModel& encoder);

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    const ItemRecord& operator[](ItemId k) const { return items_.at(k); }
    const std::vector<ItemRecord>& items() const noexcept { return items_; }

    double sigma_inf(ItemId k) const { return ren::sigma_inf(items_.at(k)); }

    /// n_k += 1 for every slated item. Throws on duplicate or out-of-range
    /// ids without modifying anything.
    void record_impressions(std::span<const ItemId> slate);

    /// mu_k <- encoder row k for every item.
    void refresh_mu(const GruModel& encoder);

    /// Overwrites one embedding (environments without an encoder, tests).
    void set_mu(ItemId k, const Vec& mu);

    /// CSV: item_id,impressions,mu_0,...,mu_{d-1}; values printed with 17
    /// significant digits so that load(save(c)) == c.
    void save_csv(const std::filesystem::path& path) const;
    static Catalog load_csv(const std::filesystem::path& path);

private:
    std::size_t dim_;
    std::vector<ItemRecord> items_;
};

}  // namespace ren
