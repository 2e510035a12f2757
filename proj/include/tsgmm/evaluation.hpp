#pragma once

#include "tsgmm/constrained_em.hpp"
#include "tsgmm/data_io.hpp"

#include <iosfwd>
#include <vector>

namespace tsgmm {

struct Trajectory {
    std::vector<double> times;
    Mat points;  // point_dim x T
};

Trajectory trajectory_from(const std::vector<ConditionalResult>& rows);
/// Reads the CSV written by write_trajectory_csv (covariance columns ignored).
Trajectory read_trajectory_csv(std::istream& in, const Manifold& output);

/// Geodesic interpolation of the samples at time t, clamped to the end points.
Vec interpolate(const Manifold& output, const std::vector<double>& times, const Mat& points, double t);

struct PoseError {
    double position = 0.0;     // Euclidean blocks
    double orientation = 0.0;  // sphere blocks; quaternions use 2·acos|⟨q1,q2⟩|
    double geodesic = 0.0;     // full product-manifold distance
};

PoseError pose_error(const Manifold& output, const Vec& a, const Vec& b);

struct Metrics {
    double rmse = 0.0;  // geodesic RMSE to the nearest demonstration
    std::size_t nearest_demo = 0;
    std::vector<PoseError> constraint_errors;
    PoseError start_error;  // against the mean demonstration start
    PoseError end_error;
};

Metrics evaluate(const Manifold& output, const Trajectory& trajectory, const std::vector<RawDemonstration>& demos,
                 const std::vector<TimeSensitiveConstraint>& constraints);

}  // namespace tsgmm
