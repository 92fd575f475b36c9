#pragma once

// Independent reference computations for the unit tests. Nothing here calls
// into the library's numerical code: inverses and determinants go through
// Eigen's LU, selections through brute force.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// I + sum mu mu^T, built densely.
inline Mat gram(const std::vector<Vec>& mus, Eigen::Index d) {
    Mat a = Mat::Identity(d, d);
    for (const auto& m : mus) a += m * m.transpose();
    return a;
}

inline Mat dense_inverse(const Mat& a) { return a.fullPivLu().inverse(); }

inline double log_det(const Mat& a) {
    // Sum of log |diag(U)| from a full-pivot LU; a is SPD here so the sign is +.
    const Eigen::FullPivLU<Mat> lu(a);
    const Mat u = lu.matrixLU().triangularView<Eigen::Upper>();
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) s += std::log(std::abs(u(i, i)));
    return s;
}

/// Greedy MAP: at each step pick the item maximizing
/// relevance + sigma bonus + lambda_d * sqrt(exp(logdet(A + mu mu^T) - logdet(A)) - 1),
/// i.e. the marginal log-det gain expressed as a width. Ties to lowest id.
inline std::vector<std::size_t> exhaustive_logdet_greedy(const std::vector<Vec>& mus, const std::vector<Vec>& history,
                                                         const Vec& theta, const std::vector<double>& sigma,
                                                         double lambda_d, double lambda_u, std::size_t m) {
    const auto d = theta.size();
    std::vector<Vec> chosen_dirs = history;
    std::vector<std::size_t> slate;
    std::vector<bool> used(mus.size(), false);
    for (std::size_t pick = 0; pick < m; ++pick) {
        const Mat a = gram(chosen_dirs, d);
        const double base = log_det(a);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_k = mus.size();
        for (std::size_t k = 0; k < mus.size(); ++k) {
            if (used[k]) continue;
            const double gain = log_det(a + mus[k] * mus[k].transpose()) - base;
            const double width = std::sqrt(std::max(0.0, std::expm1(gain)));
            const double score = mus[k].dot(theta) + lambda_d * width + lambda_u * sigma[k];
            if (score > best + 1e-12) {
                best = score;
                best_k = k;
            }
        }
        used[best_k] = true;
        slate.push_back(best_k);
        chosen_dirs.push_back(mus[best_k]);
    }
    return slate;
}

/// Central finite difference of f at x along coordinate i.
template <class F>
double central_difference(F&& f, double& x, double eps) {
    const double saved = x;
    x = saved + eps;
    const double up = f();
    x = saved - eps;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * eps);
}

/// Tiny self-contained generator for property tests (independent of the
/// library's stream derivation).
struct Gen {
    std::mt19937_64 eng;
    explicit Gen(std::uint64_t seed) : eng(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng); }
    Vec vec(Eigen::Index d, double scale = 1.0) {
        Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v(i) = scale * normal();
        return v;
    }
};

}  // namespace oracle
