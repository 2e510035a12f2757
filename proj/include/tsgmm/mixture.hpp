#pragma once

#include "tsgmm/manifold.hpp"

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace tsgmm {

/// One Gaussian over the joint (time, output) manifold.
///
/// `covariance` lives in the tangent space at `mean`. `scale` is the
/// post-fit covariance scaling γ; densities and regression use
/// scale·covariance while the fitted covariance stays inspectable.
struct GaussianComponent {
    double prior = 1.0;
    Vec mean;
    Mat covariance;
    double scale = 1.0;

    Mat effective_covariance() const { return scale * covariance; }
    double time_mean() const { return mean[0]; }
    double time_variance() const { return scale * covariance(0, 0); }
};

/// Mixture over the joint manifold; block 0 is always Euclidean(1) time.
struct GmmModel {
    Manifold joint;
    std::vector<GaussianComponent> components;

    int size() const { return static_cast<int>(components.size()); }
    Manifold output() const { return joint.tail(); }
    /// Throws corrupt-model when priors, shapes or the time variance are invalid.
    void validate() const;
    /// Output part of component k's mean.
    Vec output_mean(int k) const;
};

/// Time-stamped samples pooled from one or more demonstrations.
///
/// Samples are the columns of `samples` (row 0 is time); `ranges` holds the
/// half-open [begin, end) column range of each demonstration.
struct DemonstrationSet {
    Manifold joint;
    Mat samples;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;

    std::size_t size() const { return static_cast<std::size_t>(samples.cols()); }
    Vec sample(std::size_t n) const { return samples.col(static_cast<Eigen::Index>(n)); }
    double time(std::size_t n) const { return samples(0, static_cast<Eigen::Index>(n)); }
    void validate() const;
};

struct EmConfig {
    double tol = 1e-6;        // relative change of the log-likelihood
    int max_iter = 200;
    int gn_max_iter = 10;     // Gauss-Newton steps for manifold means
    double gn_tol = 1e-10;
    double regularization = 1e-6;
};

/// Component mean held fixed by the M-step.
struct FixedMean {
    int component = 0;
    Vec mean;
};

double log_gaussian_pdf(const Manifold& joint, const GaussianComponent& c, const Vec& p);
double gaussian_pdf(const Manifold& joint, const GaussianComponent& c, const Vec& p);

struct Responsibilities {
    Mat r;                          // K x N, columns sum to one
    std::size_t underflow_samples = 0;
};

Responsibilities e_step(const GmmModel& model, const DemonstrationSet& data);

/// Priors, Gauss-Newton (Fréchet) means and tangent covariances from the
/// responsibilities. Components listed in `fixed` keep the given mean.
GmmModel m_step(const GmmModel& model, const DemonstrationSet& data, const Mat& r, const EmConfig& config = {},
                const std::vector<FixedMean>& fixed = {});

double log_likelihood(const GmmModel& model, const DemonstrationSet& data);

/// Weighted Fréchet mean by Gauss-Newton iteration started at `start`.
Vec weighted_frechet_mean(const Manifold& m, const Mat& points, const Vec& weights, const Vec& start,
                          int max_iter = 10, double tol = 1e-10);

/// Sort by time, split into K contiguous bins, uniform priors.
GmmModel init_kbins(const DemonstrationSet& data, int k, const EmConfig& config = {});

struct FitResult {
    GmmModel model;
    std::vector<double> trace;   // log-likelihood of the start model, then after each M-step
    int iterations = 0;
    bool converged = false;
};

FitResult fit_em(const DemonstrationSet& data, int k, const EmConfig& config = {});
/// EM from a given start model; `fixed` means are imposed on the start model
/// and held through every M-step.
FitResult run_em(GmmModel start, const DemonstrationSet& data, const EmConfig& config,
                 const std::vector<FixedMean>& fixed = {});

}  // namespace tsgmm
