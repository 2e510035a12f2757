#include "tsgmm/bagging.hpp"

#include "tsgmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tsgmm {
namespace {

DemonstrationSet take_subset(const DemonstrationSet& data, const std::vector<std::size_t>& idx)
{
    DemonstrationSet sub;
    sub.joint = data.joint;
    sub.samples.resize(data.samples.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        sub.samples.col(static_cast<Eigen::Index>(i)) = data.samples.col(static_cast<Eigen::Index>(idx[i]));
    }
    // idx is sorted, so each original demonstration maps to a contiguous run.
    std::size_t pos = 0;
    for (const auto& [begin, end] : data.ranges) {
        const std::size_t start = pos;
        while (pos < idx.size() && idx[pos] < end) {
            if (idx[pos] >= begin) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos > start) sub.ranges.emplace_back(start, pos);
    }
    if (data.ranges.empty()) sub.ranges.clear();
    return sub;
}

double output_scale(const DemonstrationSet& data)
{
    const Eigen::Index d = data.samples.rows() - 1;
    if (data.size() == 0 || d == 0) return 1.0;
    const Mat out = data.samples.bottomRows(d);
    const double diag = (out.rowwise().maxCoeff() - out.rowwise().minCoeff()).norm();
    return diag > 0.0 ? diag : 1.0;
}

}  // namespace

std::vector<std::size_t> bagging_subset(std::size_t n_samples, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        fail(ErrorKind::InvalidArgument, "bagging subset fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> perm(n_samples);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates with plain modulo so the permutation does not depend on the
    // standard library's distribution implementation.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n_samples; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_samples)));
    perm.resize(std::clamp<std::size_t>(take, 1, n_samples));
    std::sort(perm.begin(), perm.end());
    return perm;
}

BaggingEnsemble bagging_fit(const DemonstrationSet& data, int k, std::uint64_t seed, const BaggingConfig& config)
{
    data.validate();
    if (config.learners < 1) {
        fail(ErrorKind::InvalidArgument, "bagging needs at least one learner");
    }
    BaggingEnsemble ens;
    ens.fraction = config.fraction;
    ens.data_scale = output_scale(data);
    std::mt19937_64 master(seed);
    for (int b = 0; b < config.learners; ++b) {
        const std::uint64_t s = master();
        const auto idx = bagging_subset(data.size(), config.fraction, s);
        const DemonstrationSet sub = take_subset(data, idx);
        try {
            ens.learners.push_back(fit_em(sub, k, config.em).model);
        } catch (const Error& e) {
            throw Error(e.kind(), "learner " + std::to_string(b) + ": " + e.what());
        }
        ens.seeds.push_back(s);
    }
    return ens;
}

std::vector<double> bagging_weights(const BaggingEnsemble& ensemble,
                                    const std::vector<TimeSensitiveConstraint>& constraints,
                                    const GmrOptions& options)
{
    const std::size_t b_count = ensemble.learners.size();
    if (b_count == 0) {
        fail(ErrorKind::InvalidArgument, "empty bagging ensemble");
    }
    std::vector<double> logw(b_count, 0.0);
    const double sigma = ensemble.data_scale / 10.0;
    for (std::size_t b = 0; b < b_count; ++b) {
        const Manifold out = ensemble.learners[b].output();
        double d2 = 0.0;
        for (const auto& c : constraints) {
            const double d = out.distance(gmr_manifold(ensemble.learners[b], c.t_des, options).mean, c.x_des);
            d2 += d * d;
        }
        logw[b] = -d2 / (sigma * sigma);
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double& w : logw) {
        w = std::exp(w - top);
        total += w;
    }
    for (double& w : logw) w /= total;
    return logw;
}

BaggingTrajectory bagging_reproduce(const BaggingEnsemble& ensemble, std::span<const double> times,
                                    const std::vector<TimeSensitiveConstraint>& constraints,
                                    const GmrOptions& options)
{
    BaggingTrajectory traj;
    traj.weights = bagging_weights(ensemble, constraints, options);
    const std::size_t b_count = ensemble.learners.size();
    std::vector<std::vector<ConditionalResult>> per;
    for (const auto& learner : ensemble.learners) per.push_back(reproduce(learner, times, options));

    const Manifold out = ensemble.learners.front().output();
    const Vec w = Eigen::Map<const Vec>(traj.weights.data(), static_cast<Eigen::Index>(b_count));
    for (std::size_t n = 0; n < times.size(); ++n) {
        Mat points(out.point_dim(), static_cast<Eigen::Index>(b_count));
        std::size_t best = 0;
        for (std::size_t b = 0; b < b_count; ++b) {
            points.col(static_cast<Eigen::Index>(b)) = per[b][n].mean;
            if (traj.weights[b] > traj.weights[best]) best = b;
        }
        ConditionalResult row;
        row.t = times[n];
        row.weights = traj.weights;
        row.mean = weighted_frechet_mean(out, points, w, per[best][n].mean, 50, 1e-12);
        Mat cov = Mat::Zero(out.tangent_dim(), out.tangent_dim());
        for (std::size_t b = 0; b < b_count; ++b) {
            if (traj.weights[b] == 0.0) continue;
            const Vec u = out.log(row.mean, per[b][n].mean);
            cov += traj.weights[b]
                   * (out.transport_covariance(per[b][n].mean, row.mean, per[b][n].covariance) + u * u.transpose());
        }
        row.covariance = 0.5 * (cov + cov.transpose());
        traj.rows.push_back(std::move(row));
    }
    return traj;
}

}  // namespace tsgmm
