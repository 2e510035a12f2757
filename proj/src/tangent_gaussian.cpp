#include "tsgmm/tangent_gaussian.hpp"

#include "tsgmm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace tsgmm {

TangentCovariance::TangentCovariance(const Manifold& m, const Vec& base, const Mat& cov)
    : normals_(m.normal_basis(base)), intrinsic_dim_(m.intrinsic_dim())
{
    if (cov.rows() != m.tangent_dim() || cov.cols() != m.tangent_dim()) {
        fail(ErrorKind::InvalidArgument, "covariance has wrong shape");
    }
    if (!cov.allFinite()) {
        fail(ErrorKind::NumericalDegeneracy, "covariance has non-finite entries");
    }
    Mat lifted = cov;
    if (normals_.cols() > 0) {
        lifted.noalias() += normals_ * normals_.transpose();
    }
    llt_.compute(lifted);
    if (llt_.info() != Eigen::Success) {
        fail(ErrorKind::NumericalDegeneracy, "covariance is not positive definite on the tangent space");
    }
    const auto diag = llt_.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) {
        fail(ErrorKind::NumericalDegeneracy, "covariance is singular");
    }
    log_det_ = 2.0 * diag.array().log().sum();
}

double TangentCovariance::mahalanobis(const Vec& u) const
{
    const Vec y = llt_.matrixL().solve(u);
    double q = y.squaredNorm();
    if (normals_.cols() > 0) {
        // u should already be tangent; remove any residual normal part.
        q -= (normals_.transpose() * u).squaredNorm();
    }
    return q;
}

Vec TangentCovariance::solve(const Vec& u) const
{
    Vec x = llt_.solve(u);
    if (normals_.cols() > 0) {
        x -= normals_ * (normals_.transpose() * u);
    }
    return x;
}

Mat TangentCovariance::pseudo_inverse() const
{
    const Eigen::Index n = llt_.matrixLLT().rows();
    Mat inv = llt_.solve(Mat::Identity(n, n));
    if (normals_.cols() > 0) {
        inv -= normals_ * normals_.transpose();
    }
    return 0.5 * (inv + inv.transpose());
}

double TangentCovariance::log_density(const Vec& u) const
{
    return -0.5 * (mahalanobis(u) + log_det_ + intrinsic_dim_ * std::log(2.0 * std::numbers::pi));
}

Mat regularize_covariance(const Manifold& m, const Vec& base, const Mat& cov, double factor)
{
    if (factor <= 0.0) return cov;
    const double scale = factor * cov.trace() / m.intrinsic_dim();
    if (m.is_euclidean()) {
        Mat out = cov;
        out.diagonal().array() += scale;
        return out;
    }
    return cov + scale * m.tangent_projector(base);
}

Mat tangent_pseudo_inverse(const Manifold& m, const Vec& base, const Mat& cov)
{
    return TangentCovariance(m, base, cov).pseudo_inverse();
}

Mat clamp_tangent_spectrum(const Manifold& m, const Vec& base, const Mat& cov, double floor)
{
    const Mat n = m.normal_basis(base);
    const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
    Vec values = eig.eigenvalues();
    const Mat& vectors = eig.eigenvectors();
    bool changed = false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const bool normal = n.cols() > 0 && (n.transpose() * vectors.col(i)).norm() > 0.5;
        if (!normal && values[i] < floor) {
            values[i] = floor;
            changed = true;
        }
    }
    if (!changed) return cov;
    Mat out = vectors * values.asDiagonal() * vectors.transpose();
    if (n.cols() > 0) {
        const Mat p = m.tangent_projector(base);
        out = p * out * p;
    }
    return 0.5 * (out + out.transpose());
}

}  // namespace tsgmm
