#pragma once

#include "tsgmm/manifold.hpp"

#include <Eigen/Cholesky>

namespace tsgmm {

/// Covariance living in the tangent space at `base`, factored once.
///
/// Sphere blocks make the ambient covariance rank deficient along the base
/// normals. Adding N·Nᵀ (N = unit normals) lifts those directions to unit
/// eigenvalues, so the Cholesky factor yields the determinant restricted to
/// the tangent subspace and (Σ + NNᵀ)⁻¹ − NNᵀ is the tangent pseudo-inverse.
class TangentCovariance {
public:
    TangentCovariance(const Manifold& m, const Vec& base, const Mat& cov);

    double log_det() const { return log_det_; }
    int dim() const { return intrinsic_dim_; }
    double mahalanobis(const Vec& u) const;
    Vec solve(const Vec& u) const;
    Mat pseudo_inverse() const;
    /// log N(u | 0, Σ) with the intrinsic dimension in the normalizer.
    double log_density(const Vec& u) const;

private:
    Eigen::LLT<Mat> llt_;
    Mat normals_;
    double log_det_ = 0.0;
    int intrinsic_dim_ = 0;
};

/// Σ + factor·trace(Σ)/D·P with P the tangent projector at `base`.
Mat regularize_covariance(const Manifold& m, const Vec& base, const Mat& cov, double factor);

/// Pseudo-inverse restricted to the tangent subspace at `base`.
Mat tangent_pseudo_inverse(const Manifold& m, const Vec& base, const Mat& cov);

/// Raises tangent eigenvalues below `floor` to `floor`; returns `cov`
/// untouched when nothing needs clamping.
Mat clamp_tangent_spectrum(const Manifold& m, const Vec& base, const Mat& cov, double floor);

}  // namespace tsgmm
