#include "tsgmm/constrained_em.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/tangent_gaussian.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>

namespace tsgmm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Constraints are enforced with a relative margin so that re-evaluating the
// activations through another code path cannot land just above epsilon.
constexpr double kFeasibilityMargin = 1e-9;

double log_sum_exp(const Vec& v)
{
    const double top = v.maxCoeff();
    if (!std::isfinite(top)) return top;
    return top + std::log((v.array() - top).exp().sum());
}

/// Everything the scaling objective and constraints need, precomputed once:
/// scaling Σ by γ only rescales the Mahalanobis term (1/γ) and the log
/// determinant (D·log γ).
class ScalingProblem {
public:
    ScalingProblem(const GmmModel& model, const std::vector<ActivationConstraint>& constraints,
                   const DemonstrationSet& data)
        : k_count_(model.size()), constraints_(constraints), dim_(model.joint.intrinsic_dim())
    {
        const auto n_count = static_cast<Eigen::Index>(data.size());
        mahal_.resize(k_count_, n_count);
        base_.resize(k_count_);
        for (int k = 0; k < k_count_; ++k) {
            const auto& c = model.components[static_cast<std::size_t>(k)];
            const TangentCovariance cov(model.joint, c.mean, c.covariance);
            base_[k] = (c.prior > 0.0 ? std::log(c.prior) : kNegInf)
                       - 0.5 * (cov.log_det() + dim_ * std::log(2.0 * std::numbers::pi));
            for (Eigen::Index n = 0; n < n_count; ++n) {
                mahal_(k, n) = cov.mahalanobis(model.joint.log(c.mean, data.samples.col(n)));
            }
        }
        // log(π_k N(t | μ_k^t, γ Σ^tt)) = time_base - ½ log γ + time_exp / γ
        time_base_.resize(static_cast<Eigen::Index>(constraints_.size()), k_count_);
        time_exp_.resize(static_cast<Eigen::Index>(constraints_.size()), k_count_);
        for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
            const auto row = static_cast<Eigen::Index>(ci);
            for (int k = 0; k < k_count_; ++k) {
                const auto& c = model.components[static_cast<std::size_t>(k)];
                const double var = c.covariance(0, 0);
                const double dt = constraints_[ci].time - c.mean[0];
                time_base_(row, k) = (c.prior > 0.0 ? std::log(c.prior) : kNegInf)
                                     - 0.5 * std::log(2.0 * std::numbers::pi * var);
                time_exp_(row, k) = -0.5 * dt * dt / var;
            }
        }
    }

    int size() const { return k_count_; }
    const std::vector<ActivationConstraint>& constraints() const { return constraints_; }

    double objective(const std::vector<double>& g) const
    {
        Vec col(k_count_);
        Vec shift(k_count_);
        Vec inv(k_count_);
        for (int k = 0; k < k_count_; ++k) {
            shift[k] = base_[k] - 0.5 * dim_ * std::log(g[static_cast<std::size_t>(k)]);
            inv[k] = 0.5 / g[static_cast<std::size_t>(k)];
        }
        double total = 0.0;
        for (Eigen::Index n = 0; n < mahal_.cols(); ++n) {
            col = shift - inv.cwiseProduct(mahal_.col(n));
            total += log_sum_exp(col);
        }
        return total;
    }

    double log_time_term(std::size_t ci, int k, double gamma) const
    {
        const auto row = static_cast<Eigen::Index>(ci);
        return time_base_(row, k) - 0.5 * std::log(gamma) + time_exp_(row, k) / gamma;
    }

    Vec log_activation(std::size_t ci, const std::vector<double>& g) const
    {
        Vec a(k_count_);
        for (int k = 0; k < k_count_; ++k) a[k] = log_time_term(ci, k, g[static_cast<std::size_t>(k)]);
        return a.array() - log_sum_exp(a);
    }

    /// Largest log-excess of ĥ_k over epsilon across all constraints, with
    /// the offending (constraint, component); <= 0 means feasible.
    double max_violation(const std::vector<double>& g, std::size_t* which = nullptr, int* comp = nullptr) const
    {
        double worst = kNegInf;
        for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
            const Vec la = log_activation(ci, g);
            const double limit = std::log(constraints_[ci].epsilon) + std::log1p(-kFeasibilityMargin);
            for (int k = 0; k < k_count_; ++k) {
                if (k == constraints_[ci].component) continue;
                const double excess = la[k] - limit;
                if (excess > worst) {
                    worst = excess;
                    if (which) *which = ci;
                    if (comp) *comp = k;
                }
            }
        }
        return worst;
    }

    bool feasible(const std::vector<double>& g) const { return max_violation(g) <= 0.0; }

    /// Largest γ_λ in [lb, 1] satisfying constraint `ci` with the other γ fixed.
    std::optional<double> max_lambda_gamma(std::vector<double> g, std::size_t ci, double lb) const
    {
        const int lambda = constraints_[ci].component;
        auto ok = [&](double gl) {
            g[static_cast<std::size_t>(lambda)] = gl;
            const Vec la = log_activation(ci, g);
            const double limit = std::log(constraints_[ci].epsilon) + std::log1p(-kFeasibilityMargin);
            for (int k = 0; k < k_count_; ++k) {
                if (k != lambda && la[k] > limit) return false;
            }
            return true;
        };
        if (ok(1.0)) return 1.0;
        // Scan downward in log space for the first feasible value, then bisect.
        const double lo_s = std::log(lb);
        constexpr int kSteps = 200;
        double prev = 0.0;
        for (int i = 1; i <= kSteps; ++i) {
            const double s = lo_s * i / kSteps;
            if (ok(std::exp(s))) {
                double feas = s;
                double infeas = prev;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (feas + infeas);
                    (ok(std::exp(mid)) ? feas : infeas) = mid;
                }
                return std::exp(feas);
            }
            prev = s;
        }
        return std::nullopt;
    }

    /// Newton iteration on the KKT system of the active set found by the
    /// sweeps. Comparing objective values alone resolves log γ only to about
    /// 1e-8; this pins the optimum to rounding level so nearby inputs give
    /// nearby answers. Returns nothing if the active set does not look like a
    /// regular KKT point.
    std::optional<std::vector<double>> polish(const std::vector<double>& g, double lb) const
    {
        const double lo = std::log(lb);
        Vec s(k_count_);
        for (int k = 0; k < k_count_; ++k) s[k] = std::log(g[static_cast<std::size_t>(k)]);
        std::vector<int> free;
        for (int k = 0; k < k_count_; ++k) {
            if (s[k] > lo + 1e-9 && s[k] < -1e-12) free.push_back(k);
        }
        struct Active {
            std::size_t ci;
            int k;
            double target;
        };
        std::vector<Active> active;
        for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
            const Vec la = log_activation(ci, g);
            const double limit = std::log(constraints_[ci].epsilon) + std::log1p(-kFeasibilityMargin);
            for (int k = 0; k < k_count_; ++k) {
                if (k != constraints_[ci].component && la[k] > limit - 1e-6) active.push_back({ci, k, limit - 1e-12});
            }
        }
        const auto nf = static_cast<Eigen::Index>(free.size());
        const auto na = static_cast<Eigen::Index>(active.size());
        if (nf == 0 || na > nf) return std::nullopt;

        Vec mu = Vec::Zero(na);
        for (int it = 0; it < 30; ++it) {
            Vec grad;
            Mat hess;
            objective_derivatives(s, grad, hess);
            Mat jac(na, k_count_);
            Mat w = hess;
            Vec resid_c(na);
            for (Eigen::Index i = 0; i < na; ++i) {
                Vec cg;
                Mat ch;
                const double v = constraint_derivatives(active[i].ci, active[i].k, s, cg, ch);
                jac.row(i) = cg.transpose();
                resid_c[i] = v - active[i].target;
                if (it > 0) w -= mu[i] * ch;
            }
            Mat jf(na, nf);
            Mat wf(nf, nf);
            Vec gf(nf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                gf[a] = grad[free[a]];
                for (Eigen::Index i = 0; i < na; ++i) jf(i, a) = jac(i, free[a]);
                for (Eigen::Index b = 0; b < nf; ++b) wf(a, b) = w(free[a], free[b]);
            }
            if (it == 0 && na > 0) {
                mu = jf.transpose().colPivHouseholderQr().solve(gf);
                continue;
            }
            Mat kkt = Mat::Zero(nf + na, nf + na);
            kkt.topLeftCorner(nf, nf) = wf;
            kkt.topRightCorner(nf, na) = -jf.transpose();
            kkt.bottomLeftCorner(na, nf) = jf;
            Vec rhs(nf + na);
            rhs.head(nf) = -(gf - jf.transpose() * mu);
            rhs.tail(na) = -resid_c;
            const Eigen::FullPivLU<Mat> lu(kkt);
            if (!lu.isInvertible()) return std::nullopt;
            const Vec step = lu.solve(rhs);
            for (Eigen::Index a = 0; a < nf; ++a) s[free[a]] += step[a];
            mu += step.tail(na);
            if (!s.allFinite() || step.head(nf).lpNorm<Eigen::Infinity>() > 1.0) return std::nullopt;
            if (step.head(nf).lpNorm<Eigen::Infinity>() < 1e-14) break;
        }
        if ((mu.array() < -1e-9).any()) return std::nullopt;
        std::vector<double> out(static_cast<std::size_t>(k_count_));
        for (int k = 0; k < k_count_; ++k) {
            if (s[k] < lo || s[k] > 0.0) return std::nullopt;
            out[static_cast<std::size_t>(k)] = std::exp(s[k]);
        }
        return out;
    }

private:
    /// Gradient and Hessian of the objective in s = log γ.
    void objective_derivatives(const Vec& s, Vec& grad, Mat& hess) const
    {
        grad = Vec::Zero(k_count_);
        hess = Mat::Zero(k_count_, k_count_);
        Vec a(k_count_);
        Vec d1(k_count_);
        Vec d2(k_count_);
        for (Eigen::Index n = 0; n < mahal_.cols(); ++n) {
            for (int k = 0; k < k_count_; ++k) {
                const double e = 0.5 * mahal_(k, n) * std::exp(-s[k]);
                a[k] = base_[k] - 0.5 * dim_ * s[k] - e;
                d1[k] = -0.5 * dim_ + e;
                d2[k] = -e;
            }
            const Vec r = (a.array() - log_sum_exp(a)).exp();
            const Vec rd = r.cwiseProduct(d1);
            grad += rd;
            hess.diagonal() += r.cwiseProduct(d2 + d1.cwiseProduct(d1));
            hess -= rd * rd.transpose();
        }
    }

    /// log ĥ_k(t) of constraint `ci` with its gradient and Hessian in s.
    double constraint_derivatives(std::size_t ci, int k, const Vec& s, Vec& grad, Mat& hess) const
    {
        const auto row = static_cast<Eigen::Index>(ci);
        Vec b(k_count_);
        Vec d1(k_count_);
        Vec d2(k_count_);
        for (int j = 0; j < k_count_; ++j) {
            const double e = time_exp_(row, j) * std::exp(-s[j]);
            b[j] = time_base_(row, j) - 0.5 * s[j] + e;
            d1[j] = -0.5 - e;
            d2[j] = e;
        }
        const double lse = log_sum_exp(b);
        const Vec p = (b.array() - lse).exp();
        const Vec pd = p.cwiseProduct(d1);
        grad = -pd;
        grad[k] += d1[k];
        hess = pd * pd.transpose();
        hess.diagonal() -= p.cwiseProduct(d2 + d1.cwiseProduct(d1));
        hess(k, k) += d2[k];
        return b[k] - lse;
    }

    int k_count_;
    std::vector<ActivationConstraint> constraints_;
    int dim_;
    Mat mahal_;
    Vec base_;
    Mat time_base_;
    Mat time_exp_;
};

struct Candidate {
    std::vector<double> gammas;
    double value = kNegInf;
};

/// Scan + golden-section search of the objective along a one-parameter path
/// s in [lo, 0] (s = log γ of the moved coordinate). Infeasible points score -inf.
Candidate search_path(const ScalingProblem& problem, const std::function<std::optional<std::vector<double>>(double)>& path,
                      double lo, const ScalingOptions& options)
{
    auto eval = [&](double s) {
        Candidate c;
        if (auto g = path(s); g && problem.feasible(*g)) {
            c.value = problem.objective(*g);
            c.gammas = std::move(*g);
        }
        return c;
    };
    const int points = std::max(options.scan_points, 3);
    std::vector<double> grid(static_cast<std::size_t>(points));
    std::vector<Candidate> values(static_cast<std::size_t>(points));
    std::size_t best = 0;
    for (int i = 0; i < points; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        grid[idx] = lo + (0.0 - lo) * i / (points - 1);
        values[idx] = eval(grid[idx]);
        if (values[idx].value > values[best].value) best = idx;
    }
    Candidate top = values[best];
    if (!std::isfinite(top.value)) return top;

    double a = grid[best > 0 ? best - 1 : 0];
    double b = grid[std::min(best + 1, grid.size() - 1)];
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - ratio * (b - a);
    double x2 = a + ratio * (b - a);
    Candidate f1 = eval(x1);
    Candidate f2 = eval(x2);
    for (int it = 0; it < options.refine_iterations; ++it) {
        if (f1.value >= f2.value) {
            if (f1.value > top.value) top = f1;
            b = x2;
            x2 = x1;
            f2 = std::move(f1);
            x1 = b - ratio * (b - a);
            f1 = eval(x1);
        } else {
            if (f2.value > top.value) top = f2;
            a = x1;
            x1 = x2;
            f1 = std::move(f2);
            x2 = a + ratio * (b - a);
            f2 = eval(x2);
        }
    }
    if (f1.value > top.value) top = f1;
    if (f2.value > top.value) top = f2;
    return top;
}

}  // namespace

int identify_component(const GmmModel& model, const Vec& x_des)
{
    const Manifold out = model.output();
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < model.size(); ++k) {
        const double d = out.distance(model.output_mean(k), x_des);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

std::vector<double> scaling_activation(const GmmModel& model, const std::vector<double>& gammas, double t)
{
    if (gammas.size() != model.components.size()) {
        fail(ErrorKind::InvalidArgument, "scaling_activation: one gamma per component required");
    }
    GmmModel scaled = model;
    for (std::size_t k = 0; k < gammas.size(); ++k) scaled.components[k].scale = gammas[k];
    return activation_weights(scaled, t);
}

double scaled_log_likelihood(const GmmModel& model, const std::vector<double>& gammas, const DemonstrationSet& data)
{
    if (gammas.size() != model.components.size()) {
        fail(ErrorKind::InvalidArgument, "scaled_log_likelihood: one gamma per component required");
    }
    GmmModel scaled = model;
    for (std::size_t k = 0; k < gammas.size(); ++k) scaled.components[k].scale = gammas[k];
    return log_likelihood(scaled, data);
}

ScalingSolution scaling_optimize(const GmmModel& model, const std::vector<ActivationConstraint>& constraints,
                                 const DemonstrationSet& data, const ScalingOptions& options)
{
    const int k_count = model.size();
    for (const auto& c : constraints) {
        if (c.component < 0 || c.component >= k_count) {
            fail(ErrorKind::InvalidArgument, "activation constraint refers to a missing component");
        }
        if (!(c.epsilon > 0.0)) {
            fail(ErrorKind::InvalidArgument, "activation threshold epsilon must be positive");
        }
    }
    const ScalingProblem problem(model, constraints, data);
    const double lb = options.lower_bound;
    const double lo = std::log(lb);

    ScalingSolution sol;
    std::vector<double> g(static_cast<std::size_t>(k_count), 1.0);
    sol.unscaled_log_likelihood = problem.objective(g);

    // Feasibility restoration: halve the most violating component, falling
    // back to the constrained component once the violator hits the bound.
    const int max_restore = 4 * k_count * static_cast<int>(constraints.size() + 1) * 64;
    for (int it = 0; it < max_restore; ++it) {
        std::size_t ci = 0;
        int k = -1;
        if (problem.max_violation(g, &ci, &k) <= 0.0) break;
        auto& gk = g[static_cast<std::size_t>(k)];
        auto& gl = g[static_cast<std::size_t>(constraints[ci].component)];
        if (gk > lb) {
            gk = std::max(0.5 * gk, lb);
        } else if (gl > lb) {
            gl = std::max(0.5 * gl, lb);
        } else {
            sol.blocking_component = k;
            break;
        }
    }
    {
        std::size_t ci = 0;
        int k = -1;
        if (problem.max_violation(g, &ci, &k) > 0.0) {
            sol.gammas = g;
            sol.feasible = false;
            sol.blocking_component = k;
            sol.log_likelihood = problem.objective(g);
            for (std::size_t c = 0; c < constraints.size(); ++c) {
                sol.achieved_activation.push_back(std::exp(problem.log_activation(c, g)[constraints[c].component]));
            }
            return sol;
        }
    }

    double value = problem.objective(g);
    // A feasible start is kept as is: the fitted model is the likelihood
    // optimum under γ <= 1.
    const bool start_feasible = std::all_of(g.begin(), g.end(), [](double x) { return x == 1.0; });
    for (int sweep = 0; !start_feasible && sweep < options.max_sweeps; ++sweep) {
        const double start = value;
        auto accept = [&](Candidate c) {
            if (std::isfinite(c.value) && c.value > value) {
                value = c.value;
                g = std::move(c.gammas);
            }
        };
        for (int k = 0; k < k_count; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            accept(search_path(
                problem,
                [&](double s) -> std::optional<std::vector<double>> {
                    auto trial = g;
                    trial[kk] = std::exp(s);
                    return trial;
                },
                lo, options));
            for (std::size_t ci = 0; ci < constraints.size(); ++ci) {
                const int lambda = constraints[ci].component;
                if (lambda == k) continue;
                accept(search_path(
                    problem,
                    [&](double s) -> std::optional<std::vector<double>> {
                        auto trial = g;
                        trial[kk] = std::exp(s);
                        const auto gl = problem.max_lambda_gamma(trial, ci, lb);
                        if (!gl) return std::nullopt;
                        trial[static_cast<std::size_t>(lambda)] = *gl;
                        return trial;
                    },
                    lo, options));
            }
        }
        sol.sweeps = sweep + 1;
        if (value - start <= options.tol * std::max(1.0, std::abs(value))) break;
    }
    if (!start_feasible) {
        if (auto refined = problem.polish(g, lb); refined && problem.feasible(*refined)) {
            const double v = problem.objective(*refined);
            if (v >= value - 1e-6 * std::max(1.0, std::abs(value))) {
                g = std::move(*refined);
                value = v;
            } else {
                spdlog::debug("scaling_optimize: polish rejected ({} < {})", v, value);
            }
        } else {
            spdlog::debug("scaling_optimize: polish skipped");
        }
    }

    sol.gammas = g;
    sol.feasible = true;
    sol.log_likelihood = value;
    for (std::size_t c = 0; c < constraints.size(); ++c) {
        sol.achieved_activation.push_back(std::exp(problem.log_activation(c, g)[constraints[c].component]));
    }
    return sol;
}

ScalingSolution scaling_optimize(const GmmModel& model, int lambda, double epsilon, const DemonstrationSet& data,
                                 const ScalingOptions& options)
{
    if (lambda < 0 || lambda >= model.size()) {
        fail(ErrorKind::InvalidArgument, "scaling_optimize: component index out of range");
    }
    std::vector<ActivationConstraint> constraints;
    if (model.size() > 1) {
        constraints.push_back({lambda, model.components[static_cast<std::size_t>(lambda)].mean[0], epsilon});
    }
    auto sol = scaling_optimize(model, constraints, data, options);
    if (constraints.empty()) sol.achieved_activation = {1.0};
    return sol;
}

CemResult cem_fit(const DemonstrationSet& data, int k, std::vector<TimeSensitiveConstraint> constraints,
                  const CemConfig& config)
{
    data.validate();
    const Manifold out = data.joint.tail();
    if (static_cast<int>(constraints.size()) >= k) {
        fail(ErrorKind::InvalidArgument, "cem_fit: need fewer constraints than components");
    }
    for (const auto& c : constraints) {
        try {
            out.check_point(c.x_des);
        } catch (const Error& e) {
            fail(ErrorKind::InvalidArgument, std::string("constraint x_des: ") + e.what());
        }
        if (!(c.epsilon > 0.0) || (k > 1 && !(c.epsilon < 1.0 / (k - 1)))) {
            fail(ErrorKind::InvalidArgument, "constraint epsilon must lie in (0, 1/(K-1))");
        }
    }

    GmmModel start = init_kbins(data, k, config.em);
    std::vector<FixedMean> fixed;
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        auto& c = constraints[i];
        c.component = identify_component(start, c.x_des);
        for (std::size_t j = 0; j < i; ++j) {
            if (constraints[j].component == c.component) {
                fail(ErrorKind::ConstraintCollision, "constraints " + std::to_string(j) + " and " + std::to_string(i)
                                                         + " both bind component " + std::to_string(c.component));
            }
        }
        Vec mean(data.joint.point_dim());
        mean[0] = c.t_des;
        mean.tail(out.point_dim()) = c.x_des;
        fixed.push_back({c.component, mean});
    }

    FitResult fit = run_em(std::move(start), data, config.em, fixed);

    std::vector<ActivationConstraint> activation;
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto& c = constraints[i];
        for (int j = 0; j < k; ++j) {
            if (j == c.component) continue;
            if (std::abs(fit.model.components[static_cast<std::size_t>(j)].mean[0] - c.t_des) < 1e-6) {
                fail(ErrorKind::Infeasible, "component " + std::to_string(j) + " has its time mean at t_des of constraint "
                                                + std::to_string(i) + "; activation scaling cannot separate it");
            }
        }
        activation.push_back({c.component, c.t_des, c.epsilon});
    }

    CemResult result;
    result.trace = std::move(fit.trace);
    result.iterations = fit.iterations;
    result.converged = fit.converged;
    result.scaling = scaling_optimize(fit.model, activation, data, config.scaling);
    if (!result.scaling.feasible) {
        fail(ErrorKind::Infeasible, "covariance scaling infeasible; blocking component "
                                        + std::to_string(result.scaling.blocking_component));
    }
    result.model = std::move(fit.model);
    for (int j = 0; j < k; ++j) {
        result.model.components[static_cast<std::size_t>(j)].scale = result.scaling.gammas[static_cast<std::size_t>(j)];
    }

    for (const auto& c : constraints) {
        const ConditionalResult q = gmr_manifold(result.model, c.t_des);
        double worst = 0.0;
        for (const auto& m : q.component_means) worst = std::max(worst, out.distance(m, c.x_des));
        const double err = out.distance(q.mean, c.x_des);
        const double bound = (k - 1) * c.epsilon * worst;
        result.tsc_errors.push_back(err);
        result.tsc_bounds.push_back(bound);
        if (err > bound * (1.0 + 1e-6) + 1e-12) {
            spdlog::warn("cem_fit: constraint at t={} reproduced with error {} above bound {}", c.t_des, err, bound);
        }
    }
    result.constraints = std::move(constraints);
    return result;
}

}  // namespace tsgmm
