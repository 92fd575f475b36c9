#include "ren/precision.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ren/error.hpp"

namespace ren {

PrecisionState::PrecisionState(std::size_t dim) {
    if (dim == 0) throw InvalidArgument("precision state: dimension must be >= 1");
    const auto n = static_cast<Eigen::Index>(dim);
    a_ = Mat::Identity(n, n);
    a_inv_ = Mat::Identity(n, n);
    b_ = Vec::Zero(n);
}

void PrecisionState::check_dim(const Vec& v) const {
    if (v.size() != b_.size()) {
        throw InvalidArgument("precision state: vector of length " + std::to_string(v.size()) +
                              " does not match dimension " + std::to_string(b_.size()));
    }
}

void PrecisionState::rank_one_update(const Vec& mu, double reward) {
    check_dim(mu);
    if (!mu.allFinite() || !std::isfinite(reward)) {
        throw NumericalError("precision state: non-finite update");
    }
    const Vec a_inv_mu = a_inv_ * mu;
    const double denom = 1.0 + mu.dot(a_inv_mu);
    a_.noalias() += mu * mu.transpose();
    a_inv_.noalias() -= (a_inv_mu * a_inv_mu.transpose()) / denom;
    b_.noalias() += reward * mu;
    ++count_;
    if (++since_resolve_ >= kResolveInterval) resolve();
}

void PrecisionState::resolve() {
    const auto n = a_.rows();
    a_inv_ = a_.llt().solve(Mat::Identity(n, n));
    a_inv_ = 0.5 * (a_inv_ + a_inv_.transpose()).eval();
    since_resolve_ = 0;
}

double PrecisionState::quad_width(const Vec& mu) const {
    check_dim(mu);
    // A^-1 is PD, clamp the rare negative rounding residue at mu ~ 0.
    return std::sqrt(std::max(0.0, mu.dot(a_inv_ * mu)));
}

Vec PrecisionState::ridge_estimate() const { return a_inv_ * b_; }

double PrecisionState::inverse_residual() const {
    const auto n = a_.rows();
    return (a_ * a_inv_ - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
}

}  // namespace ren
