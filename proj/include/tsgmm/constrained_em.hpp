#pragma once

#include "tsgmm/mixture.hpp"
#include "tsgmm/regression.hpp"

#include <vector>

namespace tsgmm {

/// Desired output `x_des` at time `t_des`, enforced by component `component`
/// (resolved by cem_fit; -1 until then).
struct TimeSensitiveConstraint {
    double t_des = 0.0;
    Vec x_des;
    double epsilon = 1e-3;
    int component = -1;
};

/// ĥ_k(time) <= epsilon for every k other than `component`.
struct ActivationConstraint {
    int component = 0;
    double time = 0.0;
    double epsilon = 1e-3;
};

struct ScalingOptions {
    double lower_bound = 1e-6;
    int max_sweeps = 30;
    int scan_points = 25;
    int refine_iterations = 60;
    double tol = 1e-9;
};

struct ScalingSolution {
    std::vector<double> gammas;
    std::vector<double> achieved_activation;  // ĥ_λ(t) per constraint
    bool feasible = false;
    int blocking_component = -1;
    double log_likelihood = 0.0;
    double unscaled_log_likelihood = 0.0;
    int sweeps = 0;
};

/// Closest component (geodesic distance of output means) to `x_des`; ties
/// go to the smallest index.
int identify_component(const GmmModel& model, const Vec& x_des);

/// Activation weights with every covariance replaced by gammas[k]·Σ_k.
std::vector<double> scaling_activation(const GmmModel& model, const std::vector<double>& gammas, double t);

/// Likelihood of `data` under the model with covariances gammas[k]·Σ_k.
double scaled_log_likelihood(const GmmModel& model, const std::vector<double>& gammas, const DemonstrationSet& data);

/// Maximizes the scaled-covariance likelihood subject to the activation
/// constraints and lower_bound <= γ_k <= 1, all constraints sharing one γ
/// vector. Deterministic: feasibility restoration from γ = 1, then sweeps of
/// log-space coordinate moves and boundary-following moves in fixed order.
ScalingSolution scaling_optimize(const GmmModel& model, const std::vector<ActivationConstraint>& constraints,
                                 const DemonstrationSet& data, const ScalingOptions& options = {});

/// Single constraint at the constrained component's own time mean.
ScalingSolution scaling_optimize(const GmmModel& model, int lambda, double epsilon, const DemonstrationSet& data,
                                 const ScalingOptions& options = {});

struct CemConfig {
    EmConfig em;
    ScalingOptions scaling;
};

struct CemResult {
    GmmModel model;  // scales set to the solved γ
    std::vector<TimeSensitiveConstraint> constraints;  // with resolved components
    ScalingSolution scaling;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    std::vector<double> tsc_errors;  // geodesic distance of the fused GMR mean at t_des
    std::vector<double> tsc_bounds;  // (K-1)·ε·max_k dist(μ̂_k, x_des)
};

/// Constrained EM: k-bins init, component binding, fixed-mean EM, then joint
/// covariance scaling for all constraints.
CemResult cem_fit(const DemonstrationSet& data, int k, std::vector<TimeSensitiveConstraint> constraints,
                  const CemConfig& config = {});

}  // namespace tsgmm
