#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's math; models are read and written only through plain fields.

#include "tsgmm/mixture.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

using tsgmm::DemonstrationSet;
using tsgmm::GmmModel;
using tsgmm::Mat;
using tsgmm::Vec;

constexpr double kPi = std::numbers::pi;

// ---- covariance scaling on (time, 1D output) models ----------------------

/// Log-likelihood with component k's covariance multiplied by g[k]. The
/// quadratic forms are cached since scaling only rescales them.
class ScaledLl {
public:
    ScaledLl(const GmmModel& m, const DemonstrationSet& data)
    {
        for (const auto& c : m.components) {
            const Eigen::LDLT<Mat> ldlt(c.covariance);
            const double logdet = ldlt.vectorD().array().log().sum();
            dim_ = static_cast<double>(c.covariance.rows());
            base_.push_back(std::log(c.prior) - 0.5 * logdet - 0.5 * dim_ * std::log(2 * kPi));
            Vec q(static_cast<Eigen::Index>(data.size()));
            for (std::size_t n = 0; n < data.size(); ++n) {
                const Vec d = data.sample(n) - c.mean;
                q[static_cast<Eigen::Index>(n)] = d.dot(ldlt.solve(d));
            }
            quad_.push_back(std::move(q));
        }
    }

    double operator()(const std::vector<double>& g) const
    {
        const Eigen::Index n_count = quad_.front().size();
        double ll = 0.0;
        std::vector<double> terms(quad_.size());
        for (Eigen::Index n = 0; n < n_count; ++n) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < quad_.size(); ++k) {
                terms[k] = base_[k] - 0.5 * dim_ * std::log(g[k]) - 0.5 * quad_[k][n] / g[k];
                top = std::max(top, terms[k]);
            }
            double s = 0.0;
            for (double t : terms) s += std::exp(t - top);
            ll += top + std::log(s);
        }
        return ll;
    }

private:
    double dim_ = 0.0;
    std::vector<double> base_;
    std::vector<Vec> quad_;
};

inline double scaled_ll(const GmmModel& m, const std::vector<double>& g, const DemonstrationSet& data)
{
    return ScaledLl(m, data)(g);
}

inline std::vector<double> activation(const GmmModel& m, const std::vector<double>& g, double t)
{
    std::vector<double> h;
    double total = 0.0;
    for (std::size_t k = 0; k < m.components.size(); ++k) {
        const double var = g[k] * m.components[k].covariance(0, 0);
        const double dt = t - m.components[k].mean[0];
        h.push_back(m.components[k].prior * std::exp(-0.5 * dt * dt / var) / std::sqrt(2 * kPi * var));
        total += h.back();
    }
    for (double& x : h) x /= total;
    return h;
}

struct GridBest {
    double ll = -std::numeric_limits<double>::infinity();
    double g0 = 0.0;
    double g1 = 0.0;
};

/// Brute force for K = 2 over log-spaced gammas in [1e-6, 1]. For a fixed
/// gamma of the constrained component, the other component's log activation
/// term is unimodal in its log gamma, so the feasible set is at most two
/// intervals whose ends are found by bisection and added as candidates.
inline GridBest grid_search(const GmmModel& m, int lambda, double eps, double t, const DemonstrationSet& data)
{
    const ScaledLl ll(m, data);
    const auto lam = static_cast<std::size_t>(lambda);
    const std::size_t other = 1 - lam;
    auto log_term = [&](std::size_t k, double u) {
        const auto& c = m.components[k];
        const double var = std::exp(u) * c.covariance(0, 0);
        const double dt = t - c.mean[0];
        return std::log(c.prior) - 0.5 * std::log(2 * kPi * var) - 0.5 * dt * dt / var;
    };
    const double lo = std::log(1e-6);
    auto feasible = [&](double ul, double uo) { return log_term(other, uo) <= log_term(lam, ul) + std::log(eps / (1 - eps)); };
    auto bisect = [&](double ul, double a, double b) {
        // a feasible, b infeasible
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (a + b);
            (feasible(ul, mid) ? a : b) = mid;
        }
        return a;
    };
    auto evaluate = [&](double ul, double uo, GridBest& best) {
        std::vector<double> g(2);
        g[lam] = std::exp(ul);
        g[other] = std::exp(uo);
        const double v = ll(g);
        if (v > best.ll) best = {v, g[0], g[1]};
    };
    auto sweep = [&](double ul, double olo, double ohi, int steps, GridBest& best) {
        // peak of the other component's term
        const auto& c = m.components[other];
        const double dt = t - c.mean[0];
        const double peak = std::clamp(std::log(std::max(dt * dt, 1e-300) / c.covariance(0, 0)), lo, 0.0);
        std::vector<double> ends;
        if (!feasible(ul, peak)) {
            if (feasible(ul, lo)) ends.push_back(bisect(ul, lo, peak));
            if (feasible(ul, 0.0)) ends.push_back(bisect(ul, 0.0, peak));
        }
        for (int j = 0; j <= steps; ++j) {
            const double uo = olo + (ohi - olo) * j / steps;
            if (feasible(ul, uo)) evaluate(ul, uo, best);
        }
        for (double e : ends) {
            if (e >= olo && e <= ohi) evaluate(ul, e, best);
        }
    };

    GridBest best;
    const int coarse = 400;
    for (int i = 0; i <= coarse; ++i) sweep(lo + (0.0 - lo) * i / coarse, lo, 0.0, coarse, best);
    double width = -lo / coarse;
    for (int level = 0; level < 6; ++level) {
        const double cl = std::log(best.g0 * (lam == 0) + best.g1 * (lam == 1));
        const double co = std::log(best.g0 * (other == 0) + best.g1 * (other == 1));
        for (int i = 0; i <= 40; ++i) {
            const double ul = std::clamp(cl - width + 2 * width * i / 40, lo, 0.0);
            sweep(ul, std::max(lo, co - width), std::min(0.0, co + width), 40, best);
        }
        width /= 10.0;
    }
    return best;
}

// ---- textbook Euclidean GMM / GMR ----------------------------------------

struct RefGmm {
    std::vector<double> priors;
    std::vector<Vec> means;
    std::vector<Mat> covs;
};

struct RefFit {
    RefGmm model;
    std::vector<double> trace;
};

inline double log_normal(const Vec& x, const Vec& mu, const Mat& cov)
{
    const Eigen::LLT<Mat> llt(cov);
    const Vec z = llt.matrixL().solve(x - mu);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (z.squaredNorm() + logdet + static_cast<double>(x.size()) * std::log(2 * kPi));
}

inline Mat add_ridge(Mat cov, double factor)
{
    const double r = factor * cov.trace() / static_cast<double>(cov.rows());
    cov.diagonal().array() += r;
    return cov;
}

/// Equal-count time bins; per-bin sample mean and covariance with a ridge of
/// max(factor·tr/D, factor·tr_global/D).
inline RefGmm kbins(const Mat& x, int k, double factor)
{
    const auto n = static_cast<std::size_t>(x.cols());
    const auto d = static_cast<double>(x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(0, a) < x(0, b); });
    const Vec gmean = x.rowwise().mean();
    const Mat gc = x.colwise() - gmean;
    const double floor = factor * (gc * gc.transpose() / static_cast<double>(n)).trace() / d;
    RefGmm m;
    for (int b = 0; b < k; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(k);
        const std::size_t hi = static_cast<std::size_t>(b + 1) * n / static_cast<std::size_t>(k);
        Mat pts(x.rows(), static_cast<Eigen::Index>(hi - lo));
        for (std::size_t i = lo; i < hi; ++i) pts.col(static_cast<Eigen::Index>(i - lo)) = x.col(static_cast<Eigen::Index>(order[i]));
        const Vec mu = pts.rowwise().mean();
        const Mat c = pts.colwise() - mu;
        Mat cov = c * c.transpose() / static_cast<double>(pts.cols());
        cov.diagonal().array() += std::max(factor * cov.trace() / d, floor);
        m.priors.push_back(1.0 / k);
        m.means.push_back(mu);
        m.covs.push_back(cov);
    }
    return m;
}

inline double estep(const RefGmm& m, const Mat& x, Mat& r)
{
    const auto k = static_cast<Eigen::Index>(m.priors.size());
    r.resize(k, x.cols());
    double ll = 0.0;
    for (Eigen::Index n = 0; n < x.cols(); ++n) {
        Vec lp(k);
        for (Eigen::Index j = 0; j < k; ++j) lp[j] = std::log(m.priors[j]) + log_normal(x.col(n), m.means[j], m.covs[j]);
        const double top = lp.maxCoeff();
        const Vec w = (lp.array() - top).exp();
        r.col(n) = w / w.sum();
        ll += top + std::log(w.sum());
    }
    return ll;
}

/// EM with the same stopping rule as the library: relative change of the
/// log-likelihood at most `tol`.
inline RefFit em(RefGmm m, const Mat& x, double factor, double tol, int max_iter)
{
    RefFit fit;
    Mat r;
    double ll = estep(m, x, r);
    fit.trace.push_back(ll);
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t j = 0; j < m.priors.size(); ++j) {
            const Vec w = r.row(static_cast<Eigen::Index>(j)).transpose();
            const double mass = w.sum();
            m.priors[j] = mass / static_cast<double>(x.cols());
            m.means[j] = x * w / mass;
            const Mat c = x.colwise() - m.means[j];
            Mat cov = c * w.asDiagonal() * c.transpose() / mass;
            m.covs[j] = add_ridge(0.5 * (cov + cov.transpose()), factor);
        }
        const double next = estep(m, x, r);
        fit.trace.push_back(next);
        const bool done = std::abs(next - ll) <= tol * std::abs(ll);
        ll = next;
        if (done) break;
    }
    fit.model = m;
    return fit;
}

struct RefPrediction {
    Vec mean;
    Mat cov;
};

inline RefPrediction gmr(const RefGmm& m, double t)
{
    const std::size_t k = m.priors.size();
    const Eigen::Index d = m.means[0].size() - 1;
    std::vector<double> h(k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double var = m.covs[j](0, 0);
        const double dt = t - m.means[j][0];
        h[j] = m.priors[j] * std::exp(-0.5 * dt * dt / var) / std::sqrt(2 * kPi * var);
        total += h[j];
    }
    RefPrediction p{Vec::Zero(d), Mat::Zero(d, d)};
    for (std::size_t j = 0; j < k; ++j) {
        h[j] /= total;
        const Vec cross = m.covs[j].block(1, 0, d, 1);
        const double var = m.covs[j](0, 0);
        const Vec mu = m.means[j].tail(d) + cross * (t - m.means[j][0]) / var;
        const Mat cov = m.covs[j].block(1, 1, d, d) - cross * cross.transpose() / var;
        p.mean += h[j] * mu;
        p.cov += h[j] * (cov + mu * mu.transpose());
    }
    p.cov -= p.mean * p.mean.transpose();
    return p;
}

}  // namespace oracle
