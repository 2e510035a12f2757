#include "tsgmm/mixture.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/tangent_gaussian.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tsgmm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct EStepResult {
    Mat r;
    double log_likelihood = 0.0;
    std::size_t underflow = 0;
};

EStepResult estep_impl(const GmmModel& model, const DemonstrationSet& data)
{
    const int k_count = model.size();
    const auto n_count = static_cast<Eigen::Index>(data.size());
    Mat logp(k_count, n_count);
    for (int k = 0; k < k_count; ++k) {
        const GaussianComponent& c = model.components[static_cast<std::size_t>(k)];
        const TangentCovariance cov(model.joint, c.mean, c.effective_covariance());
        const double log_prior = c.prior > 0.0 ? std::log(c.prior) : kNegInf;
        for (Eigen::Index n = 0; n < n_count; ++n) {
            const Vec u = model.joint.log(c.mean, data.samples.col(n));
            logp(k, n) = log_prior + cov.log_density(u);
        }
    }

    EStepResult out;
    out.r.resize(k_count, n_count);
    for (Eigen::Index n = 0; n < n_count; ++n) {
        const double top = logp.col(n).maxCoeff();
        if (!std::isfinite(top)) {
            out.r.col(n).setConstant(1.0 / k_count);
            ++out.underflow;
            out.log_likelihood += top;
            continue;
        }
        const Vec w = (logp.col(n).array() - top).exp().matrix();
        const double total = w.sum();
        out.r.col(n) = w / total;
        out.log_likelihood += top + std::log(total);
    }
    if (out.underflow > 0) {
        spdlog::warn("e_step: all component densities underflow for {} sample(s); using uniform responsibilities",
                     out.underflow);
    }
    return out;
}

Mat global_covariance(const Manifold& m, const Mat& points)
{
    const Vec weights = Vec::Ones(points.cols());
    const Vec mean = weighted_frechet_mean(m, points, weights, points.col(0));
    Mat cov = Mat::Zero(m.tangent_dim(), m.tangent_dim());
    for (Eigen::Index n = 0; n < points.cols(); ++n) {
        const Vec u = m.log(mean, points.col(n));
        cov.noalias() += u * u.transpose();
    }
    return cov / static_cast<double>(points.cols());
}

}  // namespace

void GmmModel::validate() const
{
    if (components.empty()) {
        fail(ErrorKind::CorruptModel, "model has no components");
    }
    if (joint.blocks().empty() || joint.blocks().front() != Block::euclidean(1) || joint.blocks().size() < 2) {
        fail(ErrorKind::CorruptModel, "joint manifold must start with a Euclidean(1) time block");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        const std::string tag = "component " + std::to_string(k);
        if (!(c.prior >= 0.0 && c.prior <= 1.0)) {
            fail(ErrorKind::CorruptModel, tag + ": prior outside [0, 1]");
        }
        total += c.prior;
        if (c.mean.size() != joint.point_dim() || c.covariance.rows() != joint.tangent_dim()
            || c.covariance.cols() != joint.tangent_dim()) {
            fail(ErrorKind::CorruptModel, tag + ": mean/covariance shape does not match the descriptor");
        }
        try {
            joint.check_point(c.mean);
        } catch (const Error& e) {
            fail(ErrorKind::CorruptModel, tag + ": " + e.what());
        }
        if (!(c.covariance(0, 0) > 0.0)) {
            fail(ErrorKind::CorruptModel, tag + ": time variance must be positive");
        }
        if (!(c.scale > 0.0 && c.scale <= 1.0)) {
            fail(ErrorKind::CorruptModel, tag + ": covariance scale must lie in (0, 1]");
        }
    }
    if (std::abs(total - 1.0) > 1e-9) {
        fail(ErrorKind::CorruptModel, "priors do not sum to one");
    }
}

Vec GmmModel::output_mean(int k) const
{
    const Vec& mean = components[static_cast<std::size_t>(k)].mean;
    return mean.tail(mean.size() - 1);
}

void DemonstrationSet::validate() const
{
    if (samples.rows() != joint.point_dim()) {
        fail(ErrorKind::InvalidArgument, "demonstration samples do not match the joint descriptor");
    }
    for (const auto& [begin, end] : ranges) {
        if (begin > end || end > size()) {
            fail(ErrorKind::InvalidArgument, "demonstration range out of bounds");
        }
        for (std::size_t n = begin + 1; n < end; ++n) {
            if (!(time(n) > time(n - 1))) {
                fail(ErrorKind::InvalidArgument, "times within a demonstration must be strictly increasing");
            }
        }
    }
}

double log_gaussian_pdf(const Manifold& joint, const GaussianComponent& c, const Vec& p)
{
    const TangentCovariance cov(joint, c.mean, c.effective_covariance());
    return cov.log_density(joint.log(c.mean, p));
}

double gaussian_pdf(const Manifold& joint, const GaussianComponent& c, const Vec& p)
{
    return std::exp(log_gaussian_pdf(joint, c, p));
}

Responsibilities e_step(const GmmModel& model, const DemonstrationSet& data)
{
    auto res = estep_impl(model, data);
    return Responsibilities{std::move(res.r), res.underflow};
}

double log_likelihood(const GmmModel& model, const DemonstrationSet& data)
{
    return estep_impl(model, data).log_likelihood;
}

Vec weighted_frechet_mean(const Manifold& m, const Mat& points, const Vec& weights, const Vec& start, int max_iter,
                          double tol)
{
    const double total = weights.sum();
    if (!(total > 0.0)) {
        fail(ErrorKind::InvalidArgument, "weighted mean needs positive total weight");
    }
    if (m.is_euclidean()) {
        // Identity maps: Gauss-Newton lands on the weighted average in one step.
        return (points * weights) / total;
    }
    Vec mean = start;
    for (int it = 0; it < max_iter; ++it) {
        Vec step = Vec::Zero(m.tangent_dim());
        for (Eigen::Index n = 0; n < points.cols(); ++n) {
            if (weights[n] == 0.0) continue;
            step.noalias() += weights[n] * m.log(mean, points.col(n));
        }
        step /= total;
        mean = m.exp(mean, step);
        if (step.norm() < tol) break;
    }
    return mean;
}

GmmModel m_step(const GmmModel& model, const DemonstrationSet& data, const Mat& r, const EmConfig& config,
                const std::vector<FixedMean>& fixed)
{
    const int k_count = model.size();
    if (r.rows() != k_count || r.cols() != static_cast<Eigen::Index>(data.size())) {
        fail(ErrorKind::InvalidArgument, "m_step: responsibility matrix has wrong shape");
    }
    const double n_total = static_cast<double>(data.size());
    const Manifold& m = model.joint;

    GmmModel out = model;
    for (int k = 0; k < k_count; ++k) {
        const Vec weights = r.row(k).transpose();
        const double mass = weights.sum();
        if (mass < 1e-12) {
            fail(ErrorKind::DegenerateComponent, "component " + std::to_string(k) + " has vanishing responsibility");
        }
        GaussianComponent& c = out.components[static_cast<std::size_t>(k)];
        c.prior = mass / n_total;

        const auto fixed_it = std::find_if(fixed.begin(), fixed.end(), [k](const FixedMean& f) { return f.component == k; });
        if (fixed_it != fixed.end()) {
            c.mean = fixed_it->mean;
        } else {
            c.mean = weighted_frechet_mean(m, data.samples, weights, c.mean, config.gn_max_iter, config.gn_tol);
        }

        Mat cov = Mat::Zero(m.tangent_dim(), m.tangent_dim());
        for (Eigen::Index n = 0; n < data.samples.cols(); ++n) {
            if (weights[n] == 0.0) continue;
            const Vec u = m.log(c.mean, data.samples.col(n));
            cov.noalias() += weights[n] * (u * u.transpose());
        }
        cov /= mass;
        cov = regularize_covariance(m, c.mean, cov, config.regularization);
        c.covariance = 0.5 * (cov + cov.transpose());
        c.scale = 1.0;
    }
    return out;
}

GmmModel init_kbins(const DemonstrationSet& data, int k, const EmConfig& config)
{
    const std::size_t n_count = data.size();
    if (k < 1 || n_count < static_cast<std::size_t>(k)) {
        fail(ErrorKind::InvalidArgument, "init_kbins: need at least K samples (K=" + std::to_string(k)
                                             + ", N=" + std::to_string(n_count) + ")");
    }
    const Manifold& m = data.joint;
    std::vector<std::size_t> order(n_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.time(a) < data.time(b); });

    const Mat global = global_covariance(m, data.samples);
    const double floor = config.regularization * std::max(global.trace(), 1e-300) / m.intrinsic_dim();

    GmmModel model;
    model.joint = m;
    model.components.resize(static_cast<std::size_t>(k));
    for (int b = 0; b < k; ++b) {
        const std::size_t begin = static_cast<std::size_t>(b) * n_count / static_cast<std::size_t>(k);
        const std::size_t end = static_cast<std::size_t>(b + 1) * n_count / static_cast<std::size_t>(k);
        Mat points(m.point_dim(), static_cast<Eigen::Index>(end - begin));
        for (std::size_t i = begin; i < end; ++i) {
            points.col(static_cast<Eigen::Index>(i - begin)) = data.samples.col(static_cast<Eigen::Index>(order[i]));
        }
        const Vec ones = Vec::Ones(points.cols());
        const Vec start = points.col(points.cols() / 2);
        GaussianComponent& c = model.components[static_cast<std::size_t>(b)];
        c.prior = 1.0 / k;
        c.mean = weighted_frechet_mean(m, points, ones, start, config.gn_max_iter, config.gn_tol);
        Mat cov = Mat::Zero(m.tangent_dim(), m.tangent_dim());
        for (Eigen::Index n = 0; n < points.cols(); ++n) {
            const Vec u = m.log(c.mean, points.col(n));
            cov.noalias() += u * u.transpose();
        }
        cov /= static_cast<double>(points.cols());
        const double reg = std::max(config.regularization * cov.trace() / m.intrinsic_dim(), floor);
        cov += reg * m.tangent_projector(c.mean);
        c.covariance = 0.5 * (cov + cov.transpose());
    }
    return model;
}

FitResult run_em(GmmModel start, const DemonstrationSet& data, const EmConfig& config,
                 const std::vector<FixedMean>& fixed)
{
    data.validate();
    if (start.joint != data.joint) {
        fail(ErrorKind::InvalidArgument, "model and data use different descriptors");
    }
    for (const auto& f : fixed) {
        if (f.component < 0 || f.component >= start.size()) {
            fail(ErrorKind::InvalidArgument, "fixed mean refers to a missing component");
        }
        start.joint.check_point(f.mean);
        start.components[static_cast<std::size_t>(f.component)].mean = f.mean;
    }
    start.validate();

    FitResult result;
    result.model = std::move(start);
    auto est = estep_impl(result.model, data);
    double ll = est.log_likelihood;
    result.trace.push_back(ll);
    for (int it = 1; it <= config.max_iter; ++it) {
        result.model = m_step(result.model, data, est.r, config, fixed);
        est = estep_impl(result.model, data);
        const double next = est.log_likelihood;
        result.trace.push_back(next);
        result.iterations = it;
        if (std::abs(next - ll) <= config.tol * std::abs(ll)) {
            result.converged = true;
            break;
        }
        ll = next;
    }
    return result;
}

FitResult fit_em(const DemonstrationSet& data, int k, const EmConfig& config)
{
    return run_em(init_kbins(data, k, config), data, config);
}

}  // namespace tsgmm
