#pragma once

#include "tsgmm/constrained_em.hpp"
#include "tsgmm/frame.hpp"
#include "tsgmm/regression.hpp"

#include <span>
#include <vector>

namespace tsgmm {

/// Per-frame constraint request. An empty `x_des` means the local origin
/// (identity pose), i.e. the frame's own pose in global coordinates.
struct FrameSpec {
    bool constrained = false;
    double t_des = 0.0;
    Vec x_des;
    double epsilon = 1e-3;
};

struct TpFrameModel {
    GmmModel model;
    bool constrained = false;
    int lambda = -1;           // constrained component, or the one nearest the local origin
    double anchor_time = 0.0;  // μ_λ^t
    Vec target;                // local x_des for constrained frames
    double epsilon = 0.0;
};

struct TpGmmModel {
    Manifold output;
    std::vector<TpFrameModel> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int size() const { return frames.empty() ? 0 : frames.front().model.size(); }
};

/// Every sample expressed in `frame`; time is untouched.
DemonstrationSet project_to_frame(const DemonstrationSet& data, const TaskFrame& frame);
/// Same with one frame per demonstration range.
DemonstrationSet project_to_frame(const DemonstrationSet& data, std::span<const TaskFrame> per_demo);

/// `frames[d][f]` is frame f of demonstration d; a single row is shared by all
/// demonstrations.
TpGmmModel tpgmm_fit(const DemonstrationSet& data, const std::vector<std::vector<TaskFrame>>& frames, int k,
                     const std::vector<FrameSpec>& specs, const CemConfig& config = {});

struct GaussianEstimate {
    Vec mean;
    Mat covariance;
};

GaussianEstimate local_to_global(const Manifold& output, const TaskFrame& frame, const GaussianEstimate& local);

struct FuseOptions {
    int max_iter = 10;
    double tol = 1e-10;
};

/// Weighted product of Gaussians on the manifold. Terms with zero weight are
/// skipped; Gauss-Newton starts at the most weighted prediction.
GaussianEstimate fuse(const Manifold& output, const std::vector<GaussianEstimate>& predictions,
                      std::span<const double> weights, const FuseOptions& options = {});

/// F x T weights; rows follow the order of `anchors`.
Mat fusion_schedule(std::span<const int> anchors, int count);

/// Index of the grid time closest to `t` (first on ties).
int anchor_index(std::span<const double> times, double t);

struct TpTrajectory {
    std::vector<double> times;
    std::vector<GaussianEstimate> fused;
    std::vector<std::vector<GaussianEstimate>> per_frame;  // [f][n], global coordinates
    Mat weights;                                           // F x T
    std::vector<int> anchors;
};

TpTrajectory tpgmm_reproduce(const TpGmmModel& model, std::span<const TaskFrame> frames,
                             std::span<const double> times, const GmrOptions& gmr = {},
                             const FuseOptions& fusion = {});

}  // namespace tsgmm
