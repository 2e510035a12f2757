#pragma once

#include "tsgmm/mixture.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace tsgmm {

/// Output distribution of the joint model conditioned on a time input.
///
/// `component_means` are the per-component conditional means; the component
/// covariances are expressed in the tangent space at the fused `mean`.
struct ConditionalResult {
    double t = 0.0;
    std::vector<double> weights;
    std::vector<Vec> component_means;
    std::vector<Mat> component_covariances;
    Vec mean;
    Mat covariance;
    int iterations = 0;
    bool converged = true;
};

struct GmrOptions {
    int max_iter = 10;
    double tol = 1e-10;
    double eigen_floor = 1e-12;
};

/// Time-marginal responsibilities ĥ_k(t), computed in log space.
std::vector<double> activation_weights(const GmmModel& model, double t);

/// Classic closed-form GMR; the output descriptor must be Euclidean.
ConditionalResult gmr_euclidean(const GmmModel& model, double t, const GmrOptions& options = {});

/// Tangent-space GMR with Gauss-Newton fusion. `initial` overrides the start
/// point (otherwise the conditional mean of the most active component).
ConditionalResult gmr_manifold(const GmmModel& model, double t, const GmrOptions& options = {},
                               const Vec* initial = nullptr);

/// gmr_manifold over a time grid, warm-starting each query from the previous one.
std::vector<ConditionalResult> reproduce(const GmmModel& model, std::span<const double> times,
                                         const GmrOptions& options = {});

/// Uniform grid of `count` points over [start, stop].
std::vector<double> time_grid(double start, double stop, int count);

/// CSV: header t, output coordinates, row-major covariance entries.
void write_trajectory_csv(std::ostream& os, const Manifold& output, const std::vector<ConditionalResult>& trajectory);

}  // namespace tsgmm
