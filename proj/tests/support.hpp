#pragma once

#include "tsgmm/data_io.hpp"
#include "tsgmm/mixture.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace testing {

using tsgmm::Mat;
using tsgmm::Vec;

struct Rng {
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
    Vec normal_vec(int n, double sd = 1.0)
    {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal(sd);
        return v;
    }
    Vec unit(int n)
    {
        Vec v = normal_vec(n);
        return v / v.norm();
    }
    Mat spd(int n, double floor = 0.1)
    {
        const Mat a = Mat::NullaryExpr(n, n, [&] { return normal(); });
        return a * a.transpose() + floor * Mat::Identity(n, n);
    }
    std::mt19937_64 gen;
};

/// Random point of `m`.
inline Vec random_point(const tsgmm::Manifold& m, Rng& rng, double spread = 1.0)
{
    Vec p(m.point_dim());
    for (std::size_t b = 0; b < m.blocks().size(); ++b) {
        const auto& blk = m.blocks()[b];
        p.segment(m.offset(b), blk.dim) = blk.is_sphere() ? rng.unit(blk.dim) : rng.normal_vec(blk.dim, spread);
    }
    return p;
}

/// Random tangent vector at `base` (ambient normal components removed).
inline Vec random_tangent(const tsgmm::Manifold& m, const Vec& base, Rng& rng, double scale = 1.0)
{
    return m.project_to_tangent(base, rng.normal_vec(m.tangent_dim(), scale));
}

/// Demonstrations scattered around a smooth curve on `output`, `demos` runs of
/// `per_demo` samples over [0, 60].
inline tsgmm::DemonstrationSet curve_data(const tsgmm::Manifold& output, int demos, int per_demo, double noise,
                                          Rng& rng)
{
    std::vector<tsgmm::RawDemonstration> raw;
    const Vec origin = output.origin();
    const Vec dir1 = random_tangent(output, origin, rng, 1.0);
    const Vec dir2 = random_tangent(output, origin, rng, 1.0);
    for (int d = 0; d < demos; ++d) {
        tsgmm::RawDemonstration demo;
        demo.points.resize(output.point_dim(), per_demo);
        for (int n = 0; n < per_demo; ++n) {
            const double t = 60.0 * n / (per_demo - 1);
            demo.times.push_back(t);
            const double s = t / 60.0;
            Vec v = std::sin(2.0 * s) * dir1 + (s * s - 0.5) * dir2;
            v = output.project_to_tangent(origin, v);
            Vec p = output.exp(origin, 0.6 * v);
            p = output.exp(p, random_tangent(output, p, rng, noise));
            demo.points.col(n) = p;
        }
        raw.push_back(std::move(demo));
    }
    return tsgmm::to_demonstration_set(raw, output);
}

inline double geodesic(const tsgmm::Manifold& m, const Vec& a, const Vec& b) { return m.distance(a, b); }

}  // namespace testing
