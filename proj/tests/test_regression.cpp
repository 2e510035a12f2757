#include "support.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/regression.hpp"

#include <doctest.h>

#include <numbers>
#include <sstream>

using namespace tsgmm;
using testing::Rng;

namespace {

GaussianComponent component(double prior, Vec mean, Mat cov)
{
    GaussianComponent c;
    c.prior = prior;
    c.mean = std::move(mean);
    c.covariance = std::move(cov);
    return c;
}

GmmModel two_time_components()
{
    const Manifold joint = Manifold::parse("e1,e1");
    Vec m0(2), m1(2);
    m0 << 0, 0;
    m1 << 1, 0;
    return GmmModel{joint, {component(0.5, m0, Mat::Identity(2, 2)), component(0.5, m1, Mat::Identity(2, 2))}};
}

GmmModel random_euclidean_model(Rng& rng, int k, int out_dim)
{
    GmmModel m;
    m.joint = Manifold::euclidean(out_dim).with_time();
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        Vec mean = rng.normal_vec(out_dim + 1);
        mean[0] = 10.0 * i;
        m.components.push_back(component(rng.uniform(0.5, 1.5), mean, rng.spd(out_dim + 1, 0.5)));
        total += m.components.back().prior;
    }
    for (auto& c : m.components) c.prior /= total;
    return m;
}

}  // namespace

TEST_CASE("activation weight examples")
{
    const Manifold joint = Manifold::parse("e1,e1");
    GmmModel one{joint, {component(1.0, Vec::Zero(2), Mat::Identity(2, 2))}};
    CHECK(activation_weights(one, 3.0) == std::vector<double>{1.0});

    const GmmModel two = two_time_components();
    const auto mid = activation_weights(two, 0.5);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-15));
    const auto w = activation_weights(two, 0.0);
    CHECK(w[0] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-14));
    CHECK(w[0] == doctest::Approx(0.6225).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(0.3775).epsilon(1e-4));

    Rng rng(1);
    const GmmModel r = random_euclidean_model(rng, 5, 2);
    for (double t = -20; t < 60; t += 0.37) {
        const auto h = activation_weights(r, t);
        double s = 0.0;
        for (double x : h) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            s += x;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("gmr_euclidean closed form")
{
    const Manifold joint = Manifold::parse("e1,e1");
    Mat cov(2, 2);
    cov << 1, 0.5, 0.5, 1;
    GmmModel m{joint, {component(1.0, Vec::Zero(2), cov)}};
    const ConditionalResult r = gmr_euclidean(m, 1.0);
    CHECK(r.mean[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.covariance(0, 0) == doctest::Approx(0.75).epsilon(1e-15));

    Rng rng(2);
    const GmmModel iso = random_euclidean_model(rng, 3, 2);
    const ConditionalResult at = gmr_euclidean(iso, 20.0);
    CHECK((at.mean - iso.components[2].mean.tail(2)).norm() < 1e-6);

    m.components[0].covariance(0, 0) = -1.0;
    try {
        (void)gmr_euclidean(m, 0.0);
        FAIL("negative time variance accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CorruptModel);
    }
    CHECK_THROWS_AS(gmr_euclidean(GmmModel{Manifold::parse("e1,s3"), {}}, 0.0), Error);
}

TEST_CASE("gmr covariance matches Monte-Carlo draws from the conditional mixture")
{
    Rng rng(3);
    GmmModel m = random_euclidean_model(rng, 3, 2);
    m.components[1].mean[0] = 4.0;
    m.components[2].mean[0] = 6.0;
    const double t = 5.0;
    const ConditionalResult r = gmr_euclidean(m, t);

    // Sampling oracle: joint Gaussian conditioning via the Schur complement.
    std::vector<Vec> mu;
    std::vector<Eigen::LLT<Mat>> chol;
    std::vector<double> w;
    for (const auto& c : m.components) {
        const Mat& s = c.covariance;
        mu.push_back(c.mean.tail(2) + s.block(1, 0, 2, 1) / s(0, 0) * (t - c.mean[0]));
        chol.emplace_back(s.block(1, 1, 2, 2) - s.block(1, 0, 2, 1) * s.block(0, 1, 1, 2) / s(0, 0));
        w.push_back(c.prior * std::exp(-0.5 * (t - c.mean[0]) * (t - c.mean[0]) / s(0, 0)) / std::sqrt(s(0, 0)));
    }
    std::discrete_distribution<int> pick(w.begin(), w.end());
    const int draws = 1000000;
    Vec sum = Vec::Zero(2);
    Mat outer = Mat::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const auto k = static_cast<std::size_t>(pick(rng.gen));
        const Vec x = mu[k] + Mat(chol[k].matrixL()) * rng.normal_vec(2);
        sum += x;
        outer += x * x.transpose();
    }
    const Vec mean = sum / draws;
    const Mat cov = outer / draws - mean * mean.transpose();
    CHECK((r.mean - mean).norm() < 0.02 * std::sqrt(cov.trace()));
    CHECK((r.covariance - cov).norm() < 0.02 * cov.norm());
}

TEST_CASE("gmr_manifold reduces to gmr_euclidean on Euclidean descriptors")
{
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const GmmModel m = random_euclidean_model(rng, 4, 3);
        for (double t = -5; t < 40; t += 2.5) {
            const ConditionalResult a = gmr_euclidean(m, t);
            const ConditionalResult b = gmr_manifold(m, t);
            CHECK((a.mean - b.mean).norm() < 1e-12);
            CHECK((a.covariance - b.covariance).norm() < 1e-12);
        }
    }
}

TEST_CASE("single sphere component reproduces its mean at its time")
{
    Rng rng(5);
    const Manifold joint = Manifold::parse("e1,s4");
    Vec mean(5);
    mean << 2.0, rng.unit(4);
    const Mat p = joint.tangent_projector(mean);
    GmmModel m{joint, {component(1.0, mean, p * rng.spd(5) * p + 1e-3 * Mat::Identity(5, 5).cwiseProduct(p))}};
    m.components[0].covariance(0, 0) = 1.0;
    const ConditionalResult r = gmr_manifold(m, 2.0);
    CHECK((r.mean - mean.tail(4)).norm() == 0.0);
}

TEST_CASE("quaternion GMR follows a demonstrated geodesic")
{
    const Manifold out = Manifold::sphere(4);
    const Eigen::Quaterniond q0 = Eigen::Quaterniond::Identity();
    const Eigen::Quaterniond q1(Eigen::AngleAxisd(1.2, Eigen::Vector3d(1, 2, 0.5).normalized()));
    RawDemonstration demo;
    demo.points.resize(4, 301);
    for (int n = 0; n <= 300; ++n) {
        const double t = 0.2 * n;
        demo.times.push_back(t);
        const Eigen::Quaterniond q = q0.slerp(t / 60.0, q1);
        demo.points.col(n) << q.w(), q.x(), q.y(), q.z();
    }
    const DemonstrationSet data = to_demonstration_set({demo}, out);
    const GmmModel model = fit_em(data, 6).model;
    double worst = 0.0;
    for (const auto& r : reproduce(model, time_grid(0.0, 60.0, 121))) {
        const Eigen::Quaterniond expected = q0.slerp(r.t / 60.0, q1);
        const double dot = std::abs(r.mean[0] * expected.w() + r.mean[1] * expected.x() + r.mean[2] * expected.y()
                                    + r.mean[3] * expected.z());
        worst = std::max(worst, 2.0 * std::acos(std::min(1.0, dot)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("reproduce examples")
{
    Rng rng(6);
    const GmmModel m = random_euclidean_model(rng, 3, 2);
    CHECK_THROWS_AS(reproduce(m, std::vector<double>{}), Error);
    const std::vector<double> one = {3.0};
    const auto single = reproduce(m, one);
    REQUIRE(single.size() == 1);
    CHECK((single[0].mean - gmr_manifold(m, 3.0).mean).norm() < 1e-12);

    const Manifold joint = Manifold::parse("e1,e2");
    Mat cov = Mat::Identity(3, 3);
    Vec mean(3);
    mean << 5, 1, -1;
    GmmModel flat{joint, {component(1.0, mean, cov)}};
    for (const auto& r : reproduce(flat, time_grid(0, 60, 50))) CHECK((r.mean - mean.tail(2)).norm() == 0.0);
}

TEST_CASE("reproduction of letter data stays within the noise level")
{
    const SynthData train = synth_generate("letter", SynthParams{3, 200, 0.01, 60.0}, 21);
    const SynthData clean = synth_generate("letter", SynthParams{3, 200, 0.0, 60.0}, 22);
    const DemonstrationSet data = to_demonstration_set(train.demos, train.output);
    const GmmModel model = fit_em(data, 10).model;
    const auto traj = reproduce(model, time_grid(0, 60, 200));
    double sum = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const auto col = static_cast<Eigen::Index>(n);
        const Vec ref = (clean.demos[0].points.col(col) + clean.demos[1].points.col(col) + clean.demos[2].points.col(col)) / 3.0;
        sum += (traj[n].mean - ref).squaredNorm();
    }
    CHECK(std::sqrt(sum / static_cast<double>(traj.size())) < 0.01);
}

TEST_CASE("regression output is continuous in time and has a PSD covariance")
{
    Rng rng(7);
    const Manifold out = Manifold::parse("e2,s3");
    const auto data = testing::curve_data(out, 3, 50, 0.05, rng);
    const GmmModel model = fit_em(data, 4).model;
    for (double t = 0; t <= 60; t += 1.7) {
        const auto a = gmr_manifold(model, t);
        const auto b = gmr_manifold(model, t + 1e-6);
        CHECK(out.distance(a.mean, b.mean) < 1e-3);
        Eigen::SelfAdjointEigenSolver<Mat> es(a.covariance);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
        CHECK(a.converged);
    }
}

TEST_CASE("trajectory CSV layout")
{
    const GmmModel m = two_time_components();
    std::ostringstream os;
    write_trajectory_csv(os, m.output(), reproduce(m, time_grid(0, 1, 2)));
    CHECK(os.str() == "t,x0,c0_0\n0,0,1\n1,0,1\n");
}

TEST_CASE("time grid")
{
    const auto g = time_grid(0, 60, 201);
    CHECK(g.size() == 201);
    CHECK(g[100] == 30.0);
    CHECK(g.back() == 60.0);
    CHECK(time_grid(2, 5, 1) == std::vector<double>{2});
    CHECK_THROWS_AS(time_grid(0, 1, 0), Error);
}
