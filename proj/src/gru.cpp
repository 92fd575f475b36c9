#include "ren/gru.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ren/error.hpp"

namespace ren {
namespace {

constexpr std::array<char, 8> kMagic = {'R', 'E', 'N', 'G', 'R', 'U', '\0', '\1'};
constexpr std::uint32_t kFormatVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    Mat m(rows, cols);
    // Row-major fill order keeps initialization independent of Eigen storage.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * (2.0 * uniform_unit(rng) - 1.0);
    return m;
}

/// Activations cached for backpropagation, one column per step.
struct Trace {
    std::vector<ItemId> items;
    Mat x, h_prev, z, r, n;

    void resize(Eigen::Index d, Eigen::Index len) {
        for (Mat* m : {&x, &h_prev, &z, &r, &n}) m->resize(d, len);
    }
};

template <class F>
void visit_tensors(GruParams& p, F&& fn) {
    fn(p.embed);
    fn(p.w_z), fn(p.u_z), fn(p.b_z);
    fn(p.w_r), fn(p.u_r), fn(p.b_r);
    fn(p.w_n), fn(p.u_n), fn(p.b_n);
}

template <class F>
void visit_tensors(const GruParams& p, F&& fn) {
    fn(p.embed);
    fn(p.w_z), fn(p.u_z), fn(p.b_z);
    fn(p.w_r), fn(p.u_r), fn(p.b_r);
    fn(p.w_n), fn(p.u_n), fn(p.b_n);
}

// Eigen matrices are column-major; the checkpoint and the flat views are
// row-major, so matrices go through a transposed copy.
template <class Derived>
std::vector<double> row_major(const Eigen::MatrixBase<Derived>& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[idx++] = m(i, j);
    return out;
}

template <class Derived>
void assign_row_major(Eigen::MatrixBase<Derived>& m, std::span<const double> v) {
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[idx++];
}

class Forward {
public:
    Forward(const GruParams& p, CellMode mode) : p_(p), mode_(mode) {}

    Vec run(std::span<const ItemId> seq, Trace* trace) const {
        const auto d = p_.embed.cols();
        const auto len = static_cast<Eigen::Index>(seq.size());
        Vec h = Vec::Zero(d);
        Vec x(d), z(d), r(d), n(d);
        if (trace) {
            trace->items.assign(seq.begin(), seq.end());
            trace->resize(d, len);
        }
        for (Eigen::Index t = 0; t < len; ++t) {
            x = p_.embed.row(static_cast<Eigen::Index>(seq[static_cast<std::size_t>(t)])).transpose();
            if (trace) {
                trace->x.col(t) = x;
                trace->h_prev.col(t) = h;
            }
            if (mode_ == CellMode::gated) {
                z.noalias() = p_.w_z * x;
                z.noalias() += p_.u_z * h;
                z = (z + p_.b_z).unaryExpr(&sigmoid);
                r.noalias() = p_.w_r * x;
                r.noalias() += p_.u_r * h;
                r = (r + p_.b_r).unaryExpr(&sigmoid);
                n.noalias() = p_.w_n * x;
                n.noalias() += p_.u_n * r.cwiseProduct(h);
                n = (n + p_.b_n).array().tanh().matrix();
                h += z.cwiseProduct(n - h);
            } else {
                z.setOnes();
                r.setOnes();
                n.noalias() = p_.w_n * x;
                n.noalias() += p_.u_n * h;
                n += p_.b_n;
                h = n;
            }
            if (trace) {
                trace->z.col(t) = z;
                trace->r.col(t) = r;
                trace->n.col(t) = n;
            }
        }
        return h;
    }

private:
    const GruParams& p_;
    CellMode mode_;
};

double log_sum_exp(const Vec& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

GruParams GruParams::zeros_like(const GruParams& o) {
    GruParams g;
    g.embed = Mat::Zero(o.embed.rows(), o.embed.cols());
    g.w_z = Mat::Zero(o.w_z.rows(), o.w_z.cols());
    g.u_z = Mat::Zero(o.u_z.rows(), o.u_z.cols());
    g.w_r = Mat::Zero(o.w_r.rows(), o.w_r.cols());
    g.u_r = Mat::Zero(o.u_r.rows(), o.u_r.cols());
    g.w_n = Mat::Zero(o.w_n.rows(), o.w_n.cols());
    g.u_n = Mat::Zero(o.u_n.rows(), o.u_n.cols());
    g.b_z = Vec::Zero(o.b_z.size());
    g.b_r = Vec::Zero(o.b_r.size());
    g.b_n = Vec::Zero(o.b_n.size());
    return g;
}

void GruParams::for_each(const std::function<void(std::span<double>)>& fn) {
    // Eigen storage is contiguous; the order inside a tensor is storage order,
    // which is all that element-wise visitors need.
    visit_tensors(*this, [&](auto& t) { fn(std::span<double>(t.data(), static_cast<std::size_t>(t.size()))); });
}

void GruParams::for_each(const std::function<void(std::span<const double>)>& fn) const {
    visit_tensors(*this,
                  [&](const auto& t) { fn(std::span<const double>(t.data(), static_cast<std::size_t>(t.size()))); });
}

std::size_t GruParams::size() const {
    std::size_t n = 0;
    for_each([&](std::span<const double> s) { n += s.size(); });
    return n;
}

GruModel::GruModel(std::size_t n_items, std::size_t dim, Rng& init_rng, GruOptions options)
    : options_(options) {
    if (n_items == 0 || dim == 0) throw InvalidArgument("gru: n_items and dim must be >= 1");
    if (!(options.learning_rate >= 0.0)) throw InvalidArgument("gru: learning rate must be >= 0");
    const auto k = static_cast<Eigen::Index>(n_items);
    const auto d = static_cast<Eigen::Index>(dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    params_.embed = uniform_matrix(k, d, scale, init_rng);
    params_.w_z = uniform_matrix(d, d, scale, init_rng);
    params_.u_z = uniform_matrix(d, d, scale, init_rng);
    params_.b_z = uniform_matrix(d, 1, scale, init_rng);
    params_.w_r = uniform_matrix(d, d, scale, init_rng);
    params_.u_r = uniform_matrix(d, d, scale, init_rng);
    params_.b_r = uniform_matrix(d, 1, scale, init_rng);
    params_.w_n = uniform_matrix(d, d, scale, init_rng);
    params_.u_n = uniform_matrix(d, d, scale, init_rng);
    params_.b_n = uniform_matrix(d, 1, scale, init_rng);
}

GruModel::GruModel(GruParams params, GruOptions options) : params_(std::move(params)), options_(options) {
    const auto d = params_.embed.cols();
    if (params_.embed.rows() == 0 || d == 0) throw InvalidArgument("gru: empty embedding table");
    bool ok = true;
    for (const Mat* m : {&params_.w_z, &params_.u_z, &params_.w_r, &params_.u_r, &params_.w_n, &params_.u_n})
        ok = ok && m->rows() == d && m->cols() == d;
    for (const Vec* v : {&params_.b_z, &params_.b_r, &params_.b_n}) ok = ok && v->size() == d;
    if (!ok) throw InvalidArgument("gru: hidden size must equal embedding size");
}

void GruModel::check_item(ItemId k) const {
    if (k >= n_items()) {
        throw InvalidArgument("gru: item id " + std::to_string(k) + " out of range [0, " +
                              std::to_string(n_items()) + ")");
    }
}

std::span<const ItemId> GruModel::truncate(std::span<const ItemId> history) const {
    for (const ItemId k : history) check_item(k);
    if (options_.max_history > 0 && history.size() > options_.max_history)
        return history.subspan(history.size() - options_.max_history);
    return history;
}

Vec GruModel::item_embedding(ItemId k) const {
    check_item(k);
    return params_.embed.row(static_cast<Eigen::Index>(k)).transpose();
}

Vec GruModel::user_embedding(std::span<const ItemId> history) const {
    return Forward(params_, options_.mode).run(truncate(history), nullptr);
}

Vec GruModel::relevance_scores(const Vec& theta) const {
    if (theta.size() != params_.embed.cols()) throw InvalidArgument("gru: theta dimension mismatch");
    return params_.embed * theta;
}

double GruModel::loss(std::span<const TrainingExample> batch) const {
    if (batch.empty()) throw InvalidArgument("gru: empty batch");
    double total = 0.0;
    const Forward fwd(params_, options_.mode);
    for (const auto& ex : batch) {
        check_item(ex.target);
        const Vec h = fwd.run(truncate(ex.history), nullptr);
        const Vec logits = params_.embed * h;
        total += log_sum_exp(logits) - logits(static_cast<Eigen::Index>(ex.target));
    }
    return total / static_cast<double>(batch.size());
}

GruParams GruModel::gradient(std::span<const TrainingExample> batch, double* loss_out) const {
    if (batch.empty()) throw InvalidArgument("gru: empty batch");
    const bool gated = options_.mode == CellMode::gated;
    const auto& p = params_;
    GruParams g = GruParams::zeros_like(p);
    const Forward fwd(p, options_.mode);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    Trace trace;
    const auto d = p.embed.cols();
    Vec dh(d), dh_prev(d), da_n(d), da_r(d), da_z(d), drh(d), dx(d);

    for (const auto& ex : batch) {
        check_item(ex.target);
        const Vec h_last = fwd.run(truncate(ex.history), &trace);
        const Vec logits = p.embed * h_last;
        const double lse = log_sum_exp(logits);
        total += lse - logits(static_cast<Eigen::Index>(ex.target));

        Vec dlogits = (logits.array() - lse).exp().matrix();
        dlogits(static_cast<Eigen::Index>(ex.target)) -= 1.0;
        dlogits *= scale;
        g.embed.noalias() += dlogits * h_last.transpose();
        dh.noalias() = p.embed.transpose() * dlogits;

        for (auto t = static_cast<Eigen::Index>(trace.items.size()) - 1; t >= 0; --t) {
            const auto x = trace.x.col(t);
            const auto h_prev = trace.h_prev.col(t);
            if (gated) {
                const auto z = trace.z.col(t);
                const auto r = trace.r.col(t);
                const auto n = trace.n.col(t);
                da_n = dh.cwiseProduct(z).cwiseProduct((1.0 - n.array().square()).matrix());
                da_z = dh.cwiseProduct(n - h_prev).cwiseProduct((z.array() * (1.0 - z.array())).matrix());
                dh_prev = dh - dh.cwiseProduct(z);
                g.w_n.noalias() += da_n * x.transpose();
                g.u_n.noalias() += da_n * r.cwiseProduct(h_prev).transpose();
                g.b_n += da_n;
                drh.noalias() = p.u_n.transpose() * da_n;
                dh_prev += drh.cwiseProduct(r);
                da_r = drh.cwiseProduct(h_prev).cwiseProduct((r.array() * (1.0 - r.array())).matrix());
                g.w_r.noalias() += da_r * x.transpose();
                g.u_r.noalias() += da_r * h_prev.transpose();
                g.b_r += da_r;
                g.w_z.noalias() += da_z * x.transpose();
                g.u_z.noalias() += da_z * h_prev.transpose();
                g.b_z += da_z;
                dh_prev.noalias() += p.u_r.transpose() * da_r;
                dh_prev.noalias() += p.u_z.transpose() * da_z;
                dx.noalias() = p.w_n.transpose() * da_n;
                dx.noalias() += p.w_r.transpose() * da_r;
                dx.noalias() += p.w_z.transpose() * da_z;
            } else {
                g.w_n.noalias() += dh * x.transpose();
                g.u_n.noalias() += dh * h_prev.transpose();
                g.b_n += dh;
                dh_prev.noalias() = p.u_n.transpose() * dh;
                dx.noalias() = p.w_n.transpose() * dh;
            }
            g.embed.row(static_cast<Eigen::Index>(trace.items[static_cast<std::size_t>(t)])) += dx.transpose();
            dh.swap(dh_prev);
        }
    }
    if (loss_out) *loss_out = total * scale;
    return g;
}

double GruModel::train_step(std::span<const TrainingExample> batch) {
    double loss_value = 0.0;
    GruParams g = gradient(batch, &loss_value);

    double sq = 0.0;
    bool finite = std::isfinite(loss_value);
    g.for_each([&](std::span<const double> s) {
        for (const double v : s) {
            finite = finite && std::isfinite(v);
            sq += v * v;
        }
    });
    if (!finite) {
        std::ostringstream msg;
        msg << "gru: non-finite loss or gradient (loss=" << loss_value << ", batch=" << batch.size()
            << ", grad_norm^2=" << sq << ")";
        throw NumericalError(msg.str());
    }
    double step = options_.learning_rate;
    if (options_.grad_clip > 0.0) {
        const double norm = std::sqrt(sq);
        if (norm > options_.grad_clip) step *= options_.grad_clip / norm;
    }
    if (step != 0.0) {
        std::vector<std::span<const double>> grads;
        g.for_each([&](std::span<const double> s) { grads.push_back(s); });
        std::size_t i = 0;
        params_.for_each([&](std::span<double> s) {
            const auto& gs = grads[i++];
            for (std::size_t j = 0; j < s.size(); ++j) s[j] -= step * gs[j];
        });
    }
    if (options_.max_norm > 0.0) {
        for (Eigen::Index k = 0; k < params_.embed.rows(); ++k) {
            const double nrm = params_.embed.row(k).norm();
            if (nrm > options_.max_norm) params_.embed.row(k) *= options_.max_norm / nrm;
        }
    }
    return loss_value;
}

bool GruModel::all_finite() const {
    bool ok = true;
    params_.for_each([&](std::span<const double> s) {
        for (const double v : s) ok = ok && std::isfinite(v);
    });
    return ok;
}

void GruModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("gru: cannot open " + path.string() + " for writing");
    const auto put_u32 = [&](std::uint32_t v) {
        const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b.data(), 4);
    };
    const auto put_f64 = [&](double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
    };
    out.write(kMagic.data(), kMagic.size());
    put_u32(kFormatVersion);
    put_u32(static_cast<std::uint32_t>(n_items()));
    put_u32(static_cast<std::uint32_t>(dim()));
    put_u32(static_cast<std::uint32_t>(options_.mode));
    put_u32(static_cast<std::uint32_t>(options_.max_history));
    put_f64(options_.learning_rate);
    put_f64(options_.grad_clip);
    put_f64(options_.max_norm);
    visit_tensors(params_, [&](const auto& t) {
        for (const double v : row_major(t)) put_f64(v);
    });
    if (!out) throw InvalidArgument("gru: write failed for " + path.string());
}

GruModel GruModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("gru: cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw ParseError("gru: bad checkpoint magic in " + path.string(), 0);
    const auto get_u32 = [&]() {
        std::array<unsigned char, 4> b{};
        in.read(reinterpret_cast<char*>(b.data()), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    const auto get_f64 = [&]() {
        std::array<unsigned char, 8> b{};
        in.read(reinterpret_cast<char*>(b.data()), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    };
    if (get_u32() != kFormatVersion) throw ParseError("gru: unsupported checkpoint version", 0);
    const auto k = static_cast<Eigen::Index>(get_u32());
    const auto d = static_cast<Eigen::Index>(get_u32());
    GruOptions opt;
    const std::uint32_t mode = get_u32();
    if (mode > 1) throw ParseError("gru: unknown cell mode in checkpoint", 0);
    opt.mode = static_cast<CellMode>(mode);
    opt.max_history = get_u32();
    opt.learning_rate = get_f64();
    opt.grad_clip = get_f64();
    opt.max_norm = get_f64();
    if (!in || k == 0 || d == 0) throw ParseError("gru: truncated checkpoint header", 0);

    GruParams p;
    p.embed = Mat(k, d);
    p.w_z = Mat(d, d), p.u_z = Mat(d, d), p.b_z = Vec(d);
    p.w_r = Mat(d, d), p.u_r = Mat(d, d), p.b_r = Vec(d);
    p.w_n = Mat(d, d), p.u_n = Mat(d, d), p.b_n = Vec(d);
    visit_tensors(p, [&](auto& t) {
        std::vector<double> buf(static_cast<std::size_t>(t.size()));
        for (double& v : buf) v = get_f64();
        assign_row_major(t, buf);
    });
    if (!in) throw ParseError("gru: truncated checkpoint tensors", 0);
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("gru: trailing bytes in checkpoint", 0);
    return GruModel(std::move(p), opt);
}

}  // namespace ren
