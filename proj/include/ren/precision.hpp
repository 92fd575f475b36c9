#pragma once

// Ridge-regression sufficient statistics shared by every exploration policy.
//
//   A = I_d + sum mu mu^T      (precision)
//   b = sum r mu
//
// The inverse of A is maintained incrementally with the Sherman-Morrison
// identity and re-derived from A every kResolveInterval updates.

#include <Eigen/Dense>
#include <cstddef>

namespace ren {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class PrecisionState {
public:
    static constexpr std::size_t kResolveInterval = 1000;

    /// A = A^-1 = I_d, b = 0. Throws InvalidArgument for dim == 0.
    explicit PrecisionState(std::size_t dim);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(b_.size()); }
    std::size_t count() const noexcept { return count_; }

    const Mat& a_matrix() const noexcept { return a_; }
    const Mat& a_inverse() const noexcept { return a_inv_; }
    const Vec& b_vector() const noexcept { return b_; }

    /// A += mu mu^T, b += reward * mu, count += 1.
    void rank_one_update(const Vec& mu, double reward);

    /// Same as rank_one_update but leaves b untouched; used for the
    /// temporary within-slate diversity copies where no reward exists.
    void add_direction(const Vec& mu) { rank_one_update(mu, 0.0); }

    /// sqrt(mu^T A^-1 mu).
    double quad_width(const Vec& mu) const;

    /// Ridge estimate A^-1 b.
    Vec ridge_estimate() const;

    /// Greedy DPP marginal score sqrt(mu^T (I + X^T X)^-1 mu). Numerically
    /// identical to quad_width; the determinant lemma turns the log-det gain
    /// of adding mu into log(1 + dpp_gain^2).
    double dpp_gain(const Vec& mu) const { return quad_width(mu); }

    /// max |A * A^-1 - I|.
    double inverse_residual() const;

private:
    void check_dim(const Vec& v) const;
    void resolve();

    Mat a_;
    Mat a_inv_;
    Vec b_;
    std::size_t count_ = 0;
    std::size_t since_resolve_ = 0;
};

/// Convenience factory mirroring the constructor.
inline PrecisionState init_precision(std::size_t dim) { return PrecisionState(dim); }

}  // namespace ren
