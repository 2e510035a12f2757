#pragma once

#include "tsgmm/constrained_em.hpp"
#include "tsgmm/regression.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tsgmm {

/// Ensemble of plain GMMs fitted on random subsets of the pooled samples.
/// Baseline only: the blend pulls the output toward the constraints but does
/// not enforce them.
struct BaggingEnsemble {
    std::vector<GmmModel> learners;
    std::vector<std::uint64_t> seeds;  // per-learner subset seed
    double fraction = 0.8;
    double data_scale = 1.0;           // bounding-box diagonal of the outputs
};

struct BaggingConfig {
    int learners = 10;
    double fraction = 0.8;
    EmConfig em;
};

BaggingEnsemble bagging_fit(const DemonstrationSet& data, int k, std::uint64_t seed, const BaggingConfig& config = {});

/// Sample indices (sorted) drawn for one learner.
std::vector<std::size_t> bagging_subset(std::size_t n_samples, double fraction, std::uint64_t seed);

/// exp(-d_b²/σ²) weights with σ = data_scale / 10, normalized; uniform when
/// there are no constraints.
std::vector<double> bagging_weights(const BaggingEnsemble& ensemble,
                                    const std::vector<TimeSensitiveConstraint>& constraints,
                                    const GmrOptions& options = {});

struct BaggingTrajectory {
    std::vector<double> weights;
    std::vector<ConditionalResult> rows;  // only t, mean and covariance are filled
};

BaggingTrajectory bagging_reproduce(const BaggingEnsemble& ensemble, std::span<const double> times,
                                    const std::vector<TimeSensitiveConstraint>& constraints,
                                    const GmrOptions& options = {});

}  // namespace tsgmm
