#include "tsgmm/regression.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/format.hpp"
#include "tsgmm/tangent_gaussian.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace tsgmm {
namespace {

struct ComponentSlices {
    double time_mean;
    double time_var;
    Vec out_mean;
    Vec cross;  // Σ^{xt}
    Mat out_cov;  // Σ^{xx}
};

ComponentSlices slice(const GaussianComponent& c)
{
    const Mat cov = c.effective_covariance();
    const Eigen::Index d = cov.rows() - 1;
    ComponentSlices s{c.mean[0], cov(0, 0), c.mean.tail(d), cov.block(1, 0, d, 1), cov.block(1, 1, d, d)};
    if (!(s.time_var > 0.0)) {
        fail(ErrorKind::CorruptModel, "component time variance must be positive");
    }
    return s;
}

std::size_t argmax(const std::vector<double>& v)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace

std::vector<double> activation_weights(const GmmModel& model, double t)
{
    const std::size_t k_count = model.components.size();
    std::vector<double> logw(k_count);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
        const auto& c = model.components[k];
        const double var = c.time_variance();
        if (!(var > 0.0)) {
            fail(ErrorKind::CorruptModel, "component time variance must be positive");
        }
        const double dt = t - c.time_mean();
        logw[k] = (c.prior > 0.0 ? std::log(c.prior) : -std::numeric_limits<double>::infinity())
                  - 0.5 * dt * dt / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
        top = std::max(top, logw[k]);
    }
    if (!std::isfinite(top)) {
        return std::vector<double>(k_count, 1.0 / static_cast<double>(k_count));
    }
    double total = 0.0;
    for (double& w : logw) {
        w = std::exp(w - top);
        total += w;
    }
    for (double& w : logw) w /= total;
    return logw;
}

ConditionalResult gmr_euclidean(const GmmModel& model, double t, const GmrOptions& options)
{
    const Manifold out = model.output();
    if (!out.is_euclidean()) {
        fail(ErrorKind::InvalidArgument, "gmr_euclidean requires a Euclidean output descriptor");
    }
    const Eigen::Index d = out.tangent_dim();
    ConditionalResult res;
    res.t = t;
    res.weights = activation_weights(model, t);
    res.mean = Vec::Zero(d);
    Mat second = Mat::Zero(d, d);
    for (std::size_t k = 0; k < model.components.size(); ++k) {
        const ComponentSlices s = slice(model.components[k]);
        const Vec mu = s.out_mean + s.cross * ((t - s.time_mean) / s.time_var);
        const Mat cov = s.out_cov - s.cross * s.cross.transpose() / s.time_var;
        res.mean += res.weights[k] * mu;
        second += res.weights[k] * (cov + mu * mu.transpose());
        res.component_means.push_back(mu);
        res.component_covariances.push_back(cov);
    }
    Mat cov = second - res.mean * res.mean.transpose();
    cov = 0.5 * (cov + cov.transpose());
    res.covariance = clamp_tangent_spectrum(out, res.mean, cov, options.eigen_floor);
    return res;
}

ConditionalResult gmr_manifold(const GmmModel& model, double t, const GmrOptions& options, const Vec* initial)
{
    const Manifold out = model.output();
    const Eigen::Index d = out.tangent_dim();
    const std::size_t k_count = model.components.size();

    ConditionalResult res;
    res.t = t;
    res.weights = activation_weights(model, t);

    std::vector<ComponentSlices> slices;
    slices.reserve(k_count);
    for (const auto& c : model.components) {
        slices.push_back(slice(c));
        const auto& s = slices.back();
        res.component_means.push_back(out.exp(s.out_mean, s.cross * ((t - s.time_mean) / s.time_var)));
    }

    Vec mean = initial ? *initial : res.component_means[argmax(res.weights)];
    std::vector<Vec> local(k_count);
    Vec step(d);
    for (;;) {
        step.setZero();
        for (std::size_t k = 0; k < k_count; ++k) {
            const auto& s = slices[k];
            const Vec cross = out.transport(s.out_mean, mean, s.cross);
            local[k] = out.log(mean, s.out_mean) + cross * ((t - s.time_mean) / s.time_var);
            step += res.weights[k] * local[k];
        }
        if (step.norm() < options.tol) {
            // The last step is tiny but applying it makes the Euclidean case
            // land exactly on the weighted average.
            mean = out.exp(mean, step);
            break;
        }
        if (res.iterations >= options.max_iter) {
            res.converged = false;
            spdlog::warn("gmr_manifold: Gauss-Newton did not converge at t={} (step {})", t, step.norm());
            break;
        }
        mean = out.exp(mean, step);
        ++res.iterations;
    }

    Mat cov = Mat::Zero(d, d);
    for (std::size_t k = 0; k < k_count; ++k) {
        const auto& s = slices[k];
        Mat comp;
        if (out.is_euclidean()) {
            comp = s.out_cov - s.cross * s.cross.transpose() / s.time_var;
        } else {
            const Mat r = out.transport_matrix(s.out_mean, mean);
            const Vec cross = r * s.cross;
            comp = r * s.out_cov * r.transpose() - cross * cross.transpose() / s.time_var;
            comp = 0.5 * (comp + comp.transpose());
        }
        cov += res.weights[k] * (comp + local[k] * local[k].transpose());
        res.component_covariances.push_back(std::move(comp));
    }
    cov -= step * step.transpose();
    cov = 0.5 * (cov + cov.transpose());
    res.mean = std::move(mean);
    res.covariance = clamp_tangent_spectrum(out, res.mean, cov, options.eigen_floor);
    return res;
}

std::vector<ConditionalResult> reproduce(const GmmModel& model, std::span<const double> times,
                                         const GmrOptions& options)
{
    if (times.empty()) {
        fail(ErrorKind::InvalidArgument, "reproduce: empty time grid");
    }
    std::vector<ConditionalResult> out;
    out.reserve(times.size());
    for (double t : times) {
        const Vec* warm = out.empty() ? nullptr : &out.back().mean;
        out.push_back(gmr_manifold(model, t, options, warm));
    }
    return out;
}

std::vector<double> time_grid(double start, double stop, int count)
{
    if (count < 1) {
        fail(ErrorKind::InvalidArgument, "time grid needs at least one point");
    }
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) {
        grid[static_cast<std::size_t>(n)] = count == 1 ? start : start + (stop - start) * n / (count - 1);
    }
    if (count > 1) grid.back() = stop;
    return grid;
}

void write_trajectory_csv(std::ostream& os, const Manifold& output, const std::vector<ConditionalResult>& trajectory)
{
    const int d = output.point_dim();
    os << 't';
    for (int i = 0; i < d; ++i) os << ",x" << i;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) os << ",c" << i << '_' << j;
    }
    os << '\n';
    for (const auto& row : trajectory) {
        os << format_double(row.t);
        for (int i = 0; i < d; ++i) os << ',' << format_double(row.mean[i]);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) os << ',' << format_double(row.covariance(i, j));
        }
        os << '\n';
    }
}

}  // namespace tsgmm
