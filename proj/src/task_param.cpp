#include "tsgmm/task_param.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/tangent_gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsgmm {
namespace {

void rethrow_tagged(const Error& e, std::size_t f)
{
    throw Error(e.kind(), "frame " + std::to_string(f) + ": " + e.what());
}

}  // namespace

DemonstrationSet project_to_frame(const DemonstrationSet& data, const TaskFrame& frame)
{
    const std::vector<TaskFrame> per_demo(std::max<std::size_t>(data.ranges.size(), 1), frame);
    if (data.ranges.empty()) {
        DemonstrationSet whole = data;
        whole.ranges = {{0, data.size()}};
        DemonstrationSet out = project_to_frame(whole, std::span<const TaskFrame>(per_demo));
        out.ranges.clear();
        return out;
    }
    return project_to_frame(data, std::span<const TaskFrame>(per_demo));
}

DemonstrationSet project_to_frame(const DemonstrationSet& data, std::span<const TaskFrame> per_demo)
{
    if (per_demo.size() != data.ranges.size()) {
        fail(ErrorKind::InvalidArgument, "need one frame per demonstration (" + std::to_string(data.ranges.size())
                                             + " demonstrations, " + std::to_string(per_demo.size()) + " frames)");
    }
    const Manifold out = data.joint.tail();
    const int d = out.point_dim();
    DemonstrationSet local = data;
    for (std::size_t r = 0; r < data.ranges.size(); ++r) {
        for (std::size_t n = data.ranges[r].first; n < data.ranges[r].second; ++n) {
            const auto col = static_cast<Eigen::Index>(n);
            local.samples.col(col).tail(d) = frame_apply_inverse(out, per_demo[r], data.samples.col(col).tail(d));
        }
    }
    return local;
}

TpGmmModel tpgmm_fit(const DemonstrationSet& data, const std::vector<std::vector<TaskFrame>>& frames, int k,
                     const std::vector<FrameSpec>& specs, const CemConfig& config)
{
    data.validate();
    if (frames.empty() || frames.front().empty()) {
        fail(ErrorKind::InvalidArgument, "tpgmm_fit: at least one frame is required");
    }
    const std::size_t f_count = frames.front().size();
    for (const auto& row : frames) {
        if (row.size() != f_count) {
            fail(ErrorKind::InvalidArgument, "tpgmm_fit: every demonstration needs the same number of frames");
        }
    }
    if (frames.size() != 1 && frames.size() != data.ranges.size()) {
        fail(ErrorKind::InvalidArgument, "tpgmm_fit: frame rows must match the number of demonstrations");
    }
    if (specs.size() != f_count) {
        fail(ErrorKind::InvalidArgument, "tpgmm_fit: one frame spec per frame required");
    }

    const Manifold out = data.joint.tail();
    TpGmmModel model;
    model.output = out;
    for (std::size_t f = 0; f < f_count; ++f) {
        std::vector<TaskFrame> per_demo;
        for (std::size_t r = 0; r < data.ranges.size(); ++r) {
            per_demo.push_back(frames[frames.size() == 1 ? 0 : r][f]);
        }
        TpFrameModel fm;
        try {
            const DemonstrationSet local = project_to_frame(data, std::span<const TaskFrame>(per_demo));
            const FrameSpec& spec = specs[f];
            if (spec.constrained) {
                TimeSensitiveConstraint c;
                c.t_des = spec.t_des;
                c.x_des = spec.x_des.size() == 0 ? out.origin() : spec.x_des;
                c.epsilon = spec.epsilon;
                CemResult res = cem_fit(local, k, {c}, config);
                fm.model = std::move(res.model);
                fm.constrained = true;
                fm.lambda = res.constraints.front().component;
                fm.target = c.x_des;
                fm.epsilon = c.epsilon;
            } else {
                fm.model = fit_em(local, k, config.em).model;
                fm.lambda = identify_component(fm.model, out.origin());
            }
            fm.anchor_time = fm.model.components[static_cast<std::size_t>(fm.lambda)].time_mean();
        } catch (const Error& e) {
            rethrow_tagged(e, f);
        }
        model.frames.push_back(std::move(fm));
    }
    return model;
}

GaussianEstimate local_to_global(const Manifold& output, const TaskFrame& frame, const GaussianEstimate& local)
{
    const Mat j = frame_tangent_map(output, frame);
    Mat cov = j * local.covariance * j.transpose();
    return {frame_apply(output, frame, local.mean), 0.5 * (cov + cov.transpose())};
}

GaussianEstimate fuse(const Manifold& output, const std::vector<GaussianEstimate>& predictions,
                      std::span<const double> weights, const FuseOptions& options)
{
    if (predictions.size() != weights.size() || predictions.empty()) {
        fail(ErrorKind::InvalidArgument, "fuse: one weight per prediction required");
    }
    std::size_t best = 0;
    for (std::size_t f = 0; f < weights.size(); ++f) {
        if (!(weights[f] >= 0.0) || !std::isfinite(weights[f])) {
            fail(ErrorKind::InvalidArgument, "fuse: weights must be finite and non-negative");
        }
        if (weights[f] > weights[best]) best = f;
    }
    if (!(weights[best] > 0.0)) {
        fail(ErrorKind::InvalidArgument, "fuse: all weights are zero");
    }

    const auto active = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
    if (active == 1) {
        const auto& p = predictions[best];
        return {p.mean, weights[best] == 1.0 ? p.covariance : Mat(p.covariance / weights[best])};
    }

    const Eigen::Index d = output.tangent_dim();
    Vec mean = predictions[best].mean;
    Mat precision(d, d);
    for (int it = 0;; ++it) {
        precision.setZero();
        Vec rhs = Vec::Zero(d);
        for (std::size_t f = 0; f < predictions.size(); ++f) {
            if (weights[f] == 0.0) continue;
            const auto& p = predictions[f];
            const Mat cov = output.transport_covariance(p.mean, mean, p.covariance);
            const Mat lambda = weights[f] * tangent_pseudo_inverse(output, mean, cov);
            precision += lambda;
            rhs += lambda * output.log(mean, p.mean);
        }
        precision = 0.5 * (precision + precision.transpose());
        const Vec step = tangent_pseudo_inverse(output, mean, precision) * rhs;
        if (step.norm() < options.tol || it >= options.max_iter) break;
        mean = output.exp(mean, step);
    }
    Mat cov = tangent_pseudo_inverse(output, mean, precision);
    return {std::move(mean), 0.5 * (cov + cov.transpose())};
}

Mat fusion_schedule(std::span<const int> anchors, int count)
{
    if (anchors.empty() || count < 1) {
        fail(ErrorKind::InvalidArgument, "fusion_schedule: need at least one anchor and one grid point");
    }
    const std::size_t f_count = anchors.size();
    std::vector<std::size_t> order(f_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return anchors[a] < anchors[b]; });
    for (std::size_t i = 0; i < f_count; ++i) {
        if (anchors[order[i]] < 0 || anchors[order[i]] >= count) {
            fail(ErrorKind::InvalidArgument, "fusion_schedule: anchor outside the time grid");
        }
        if (i > 0 && anchors[order[i]] == anchors[order[i - 1]]) {
            fail(ErrorKind::InvalidArgument, "fusion_schedule: duplicate anchor index " + std::to_string(anchors[order[i]]));
        }
    }

    Mat w(static_cast<Eigen::Index>(f_count), count);
    for (std::size_t i = 0; i < f_count; ++i) {
        const double eta = anchors[order[i]];
        const auto row = static_cast<Eigen::Index>(order[i]);
        for (int n = 0; n < count; ++n) {
            double v = 1.0;
            if (n < eta && i > 0) {
                const double prev = anchors[order[i - 1]];
                v = std::max(0.0, (n - prev) / (eta - prev));
            } else if (n > eta && i + 1 < f_count) {
                const double next = anchors[order[i + 1]];
                v = std::max(0.0, (next - n) / (next - eta));
            }
            w(row, n) = v;
        }
    }
    return w;
}

int anchor_index(std::span<const double> times, double t)
{
    if (times.empty()) {
        fail(ErrorKind::InvalidArgument, "anchor_index: empty time grid");
    }
    std::size_t best = 0;
    for (std::size_t n = 1; n < times.size(); ++n) {
        if (std::abs(times[n] - t) < std::abs(times[best] - t)) best = n;
    }
    return static_cast<int>(best);
}

TpTrajectory tpgmm_reproduce(const TpGmmModel& model, std::span<const TaskFrame> frames,
                             std::span<const double> times, const GmrOptions& gmr, const FuseOptions& fusion)
{
    if (frames.size() != model.frames.size()) {
        fail(ErrorKind::InvalidArgument, "tpgmm_reproduce: model has " + std::to_string(model.frames.size())
                                             + " frames but " + std::to_string(frames.size()) + " were supplied");
    }
    if (times.empty()) {
        fail(ErrorKind::InvalidArgument, "tpgmm_reproduce: empty time grid");
    }
    TpTrajectory traj;
    traj.times.assign(times.begin(), times.end());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto local = reproduce(model.frames[f].model, times, gmr);
        std::vector<GaussianEstimate> global;
        global.reserve(local.size());
        for (const auto& q : local) {
            global.push_back(local_to_global(model.output, frames[f], {q.mean, q.covariance}));
        }
        traj.per_frame.push_back(std::move(global));
        traj.anchors.push_back(anchor_index(times, model.frames[f].anchor_time));
    }
    traj.weights = fusion_schedule(traj.anchors, static_cast<int>(times.size()));

    std::vector<GaussianEstimate> column(frames.size());
    std::vector<double> w(frames.size());
    for (std::size_t n = 0; n < times.size(); ++n) {
        for (std::size_t f = 0; f < frames.size(); ++f) {
            column[f] = traj.per_frame[f][n];
            w[f] = traj.weights(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n));
        }
        traj.fused.push_back(fuse(model.output, column, w, fusion));
    }
    return traj;
}

}  // namespace tsgmm
