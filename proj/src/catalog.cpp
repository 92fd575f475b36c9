#include "ren/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "ren/error.hpp"

namespace ren {

double sigma_inf(const ItemRecord& item) {
    if (item.impressions == 0) {
        throw InvalidState("catalog: item " + std::to_string(item.item_id) + " has zero impressions");
    }
    return 1.0 / std::sqrt(static_cast<double>(item.impressions));
}

Catalog::Catalog(std::size_t n_items, std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidArgument("catalog: dimension must be >= 1");
    items_.reserve(n_items);
    for (std::size_t k = 0; k < n_items; ++k)
        items_.push_back(ItemRecord{k, Vec::Zero(static_cast<Eigen::Index>(dim)), 1});
}

Catalog::Catalog(const GruModel& encoder) : Catalog(encoder.n_items(), encoder.dim()) { refresh_mu(encoder); }

void Catalog::record_impressions(std::span<const ItemId> slate) {
    std::vector<bool> seen(items_.size(), false);
    for (const ItemId k : slate) {
        if (k >= items_.size()) throw InvalidArgument("catalog: item id " + std::to_string(k) + " out of range");
        if (seen[k]) throw InvalidArgument("catalog: duplicate item id " + std::to_string(k) + " in slate");
        seen[k] = true;
    }
    for (const ItemId k : slate) ++items_[k].impressions;
}

void Catalog::refresh_mu(const GruModel& encoder) {
    if (encoder.dim() != dim_ || encoder.n_items() != items_.size())
        throw InvalidArgument("catalog: encoder shape does not match catalog");
    const Mat& table = encoder.embedding_table();
    for (auto& item : items_) item.mu = table.row(static_cast<Eigen::Index>(item.item_id)).transpose();
}

void Catalog::set_mu(ItemId k, const Vec& mu) {
    if (static_cast<std::size_t>(mu.size()) != dim_) throw InvalidArgument("catalog: mu dimension mismatch");
    items_.at(k).mu = mu;
}

void Catalog::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("catalog: cannot open " + path.string() + " for writing");
    out << "item_id,impressions";
    for (std::size_t i = 0; i < dim_; ++i) out << ",mu_" << i;
    out << '\n' << std::setprecision(17);
    for (const auto& item : items_) {
        out << item.item_id << ',' << item.impressions;
        for (Eigen::Index i = 0; i < item.mu.size(); ++i) out << ',' << item.mu(i);
        out << '\n';
    }
}

Catalog Catalog::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("catalog: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("item_id,impressions", 0) != 0)
        throw ParseError("catalog: missing header", 1);
    const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
    if (dim == 0) throw ParseError("catalog: header has no mu columns", 1);

    std::vector<ItemRecord> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != dim + 2) throw ParseError("catalog: wrong column count", lineno);
        ItemRecord rec;
        rec.mu = Vec(static_cast<Eigen::Index>(dim));
        try {
            rec.item_id = std::stoull(cells[0]);
            rec.impressions = std::stoull(cells[1]);
            for (std::size_t i = 0; i < dim; ++i) rec.mu(static_cast<Eigen::Index>(i)) = std::stod(cells[i + 2]);
        } catch (const std::exception&) {
            throw ParseError("catalog: malformed number", lineno);
        }
        if (rec.item_id != rows.size()) throw ParseError("catalog: item ids must be 0..K-1 in order", lineno);
        if (rec.impressions == 0) throw ParseError("catalog: impressions must be >= 1", lineno);
        rows.push_back(std::move(rec));
    }
    Catalog c(rows.size(), dim);
    c.items_ = std::move(rows);
    return c;
}

}  // namespace ren
