#include "support.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/frame.hpp"
#include "tsgmm/manifold.hpp"

#include <doctest.h>

#include <numbers>

using namespace tsgmm;
using testing::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

Vec v3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

// Rodrigues rotation about axis p x q by the angle between them.
Vec rodrigues_transport(const Vec& p, const Vec& q, const Vec& v)
{
    const Eigen::Vector3d a = Eigen::Vector3d(p).cross(Eigen::Vector3d(q));
    const double s = a.norm();
    const double c = p.dot(q);
    if (s == 0.0) return v;
    const Eigen::Vector3d k = a / s;
    const Eigen::Vector3d x(v);
    const double theta = std::atan2(s, c);
    return std::cos(theta) * x + std::sin(theta) * k.cross(x) + (1.0 - std::cos(theta)) * k.dot(x) * k;
}

}  // namespace

TEST_CASE("descriptor parsing and dimensions")
{
    const Manifold m = Manifold::parse("e3,s4");
    CHECK(m.point_dim() == 7);
    CHECK(m.tangent_dim() == 7);
    CHECK(m.intrinsic_dim() == 6);
    CHECK(m.to_string() == "e3,s4");
    CHECK(m.with_time().to_string() == "e1,e3,s4");
    CHECK(m.with_time().tail() == m);
    CHECK_THROWS_AS(Manifold::parse(""), Error);
    CHECK_THROWS_AS(Manifold::parse("s1"), Error);
    CHECK_THROWS_AS(Manifold::parse("x3"), Error);
    CHECK_THROWS_AS(Manifold::parse("e0"), Error);
}

TEST_CASE("log map examples")
{
    const Manifold s2 = Manifold::sphere(3);
    CHECK(s2.log(v3(0, 0, 1), v3(0, 0, 1)).norm() == 0.0);
    const Vec u = s2.log(v3(0, 0, 1), v3(1, 0, 0));
    CHECK(u[0] == doctest::Approx(kPi / 2).epsilon(1e-15));
    CHECK(std::abs(u[1]) < 1e-15);
    CHECK(std::abs(u[2]) < 1e-15);

    const Manifold e2 = Manifold::euclidean(2);
    Vec a(2), b(2);
    a << 1, 2;
    b << 4, 6;
    CHECK(e2.log(a, b) == Vec((Vec(2) << 3, 4).finished()));
    CHECK(e2.exp(a, (Vec(2) << 3, 4).finished()) == b);

    CHECK_THROWS_AS(s2.log(v3(0, 0, 1), Vec::Zero(4)), Error);
    try {
        (void)log_map(s2, v3(0, 0, 1), v3(0, 0, -1));
        FAIL("antipodal log must throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateGeodesic);
    }
}

TEST_CASE("exp map examples")
{
    const Manifold s2 = Manifold::sphere(3);
    const Vec p = v3(0, 0, 1);
    CHECK(s2.exp(p, Vec::Zero(3)) == p);
    const Vec q = s2.exp(p, v3(kPi / 2, 0, 0));
    CHECK((q - v3(1, 0, 0)).norm() < 1e-15);

    // Base mismatch between point and tangent vector.
    const TangentVector v{v3(1, 0, 0), v3(0, 1, 0)};
    try {
        (void)exp_map(s2, p, v);
        FAIL("base mismatch must throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("log/exp agree with closed-form sphere geodesics")
{
    Rng rng(11);
    const Manifold s3 = Manifold::sphere(4);
    for (int i = 0; i < 200; ++i) {
        const Vec p = rng.unit(4);
        Vec q = rng.unit(4);
        if (p.dot(q) < -0.99) q = -q;
        const Vec u = s3.log(p, q);
        const double angle = std::acos(std::clamp(p.dot(q), -1.0, 1.0));
        CHECK(u.norm() == doctest::Approx(angle).epsilon(1e-9));
        CHECK(std::abs(u.dot(p)) < 1e-12);
        // Direction: normalized component of q orthogonal to p.
        const Vec w = (q - p.dot(q) * p).normalized();
        CHECK((u.normalized() - w).norm() < 1e-9);
        CHECK((s3.exp(p, u) - q).norm() < 1e-9);
    }
}

TEST_CASE("parallel transport examples")
{
    const Manifold s2 = Manifold::sphere(3);
    const Vec from = v3(0, 0, 1);
    const Vec to = v3(1, 0, 0);
    CHECK(s2.transport(from, from, v3(0.3, -0.2, 0)) == v3(0.3, -0.2, 0));
    CHECK((s2.transport(from, to, v3(0, 2.5, 0)) - v3(0, 2.5, 0)).norm() < 1e-15);
    const Vec moved = s2.transport(from, to, v3(1.5, 0, 0));
    CHECK((moved - v3(0, 0, -1.5)).norm() < 1e-15);
    CHECK((moved - rodrigues_transport(from, to, v3(1.5, 0, 0))).norm() < 1e-15);
    CHECK_THROWS_AS(s2.transport(from, v3(0, 0, -1), v3(1, 0, 0)), Error);
}

TEST_CASE("transport matches the Rodrigues rotation oracle on S2")
{
    Rng rng(5);
    const Manifold s2 = Manifold::sphere(3);
    for (int i = 0; i < 200; ++i) {
        const Vec p = rng.unit(3);
        Vec q = rng.unit(3);
        if (p.dot(q) < -0.99) q = -q;
        const Vec v = s2.project_to_tangent(p, rng.normal_vec(3));
        const Vec got = s2.transport(p, q, v);
        CHECK((got - rodrigues_transport(p, q, v)).norm() < 1e-12);
        CHECK(std::abs(got.dot(q)) < 1e-12);
    }
}

TEST_CASE("transport on S3 is an isometry that maps log_p q to -log_q p")
{
    Rng rng(6);
    const Manifold m = Manifold::parse("e2,s4");
    for (int i = 0; i < 200; ++i) {
        const Vec p = testing::random_point(m, rng);
        Vec q = testing::random_point(m, rng);
        if (p.tail(4).dot(q.tail(4)) < 0) q.tail(4) *= -1.0;
        const Vec a = testing::random_tangent(m, p, rng);
        const Vec b = testing::random_tangent(m, p, rng);
        const Vec ta = m.transport(p, q, a);
        const Vec tb = m.transport(p, q, b);
        CHECK(ta.dot(tb) == doctest::Approx(a.dot(b)).epsilon(1e-10));
        CHECK(ta.head(2) == a.head(2));
        CHECK(std::abs(ta.tail(4).dot(q.tail(4))) < 1e-12);
        CHECK((m.transport(p, q, m.log(p, q)) + m.log(q, p)).norm() < 1e-10);
    }
}

TEST_CASE("covariance transport keeps the spectrum")
{
    Rng rng(7);
    const Manifold s2 = Manifold::sphere(3);
    const Vec from = v3(0, 0, 1);
    const Vec to = rng.unit(3);
    CHECK(s2.transport_covariance(from, from, Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3), 1e-15));
    CHECK(s2.transport_covariance(from, to, Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3), 1e-14));
    for (int i = 0; i < 50; ++i) {
        const Mat s = rng.spd(3);
        const Mat t = s2.transport_covariance(from, to, s);
        Eigen::SelfAdjointEigenSolver<Mat> a(s), b(t);
        CHECK((a.eigenvalues() - b.eigenvalues()).norm() < 1e-9 * a.eigenvalues().norm());
    }
    const Manifold e2 = Manifold::euclidean(2);
    const Mat s = rng.spd(2);
    CHECK(e2.transport_covariance(Vec::Zero(2), Vec::Ones(2), s) == s);
}

TEST_CASE("Euclidean descriptors use plain arithmetic")
{
    Rng rng(8);
    const Manifold e = Manifold::euclidean(4);
    const Vec a = rng.normal_vec(4);
    const Vec b = rng.normal_vec(4);
    CHECK(e.log(a, b) == b - a);
    CHECK(e.exp(a, b) == a + b);
    CHECK(e.transport(a, b, a) == a);
}

TEST_CASE("point validation")
{
    const Manifold m = Manifold::parse("e1,s3");
    Vec p(4);
    p << 0.5, 0, 0, 1;
    CHECK_NOTHROW(m.check_point(p));
    p[3] = 1.001;
    CHECK_THROWS_AS(m.check_point(p), Error);
    CHECK_THROWS_AS(m.check_point(Vec::Zero(3)), Error);
    Vec tv(4);
    tv << 3, 0.1, 0.2, 0.5;
    p[3] = 1.0;
    CHECK_THROWS_AS(m.check_tangent(p, tv), Error);
}

// ---- frames -----------------------------------------------------------------

TEST_CASE("frame validation rejects improper rotations")
{
    Mat r = Mat::Identity(3, 3);
    r(0, 0) = -1.0;  // reflection
    try {
        (void)TaskFrame::from_rotation(r, Vec::Zero(3));
        FAIL("reflection accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidFrame);
    }
    Mat skew = Mat::Identity(3, 3);
    skew(0, 1) = 1e-6;
    CHECK_THROWS_AS(TaskFrame::from_rotation(skew, Vec::Zero(3)), Error);
    CHECK_THROWS_AS(TaskFrame::from_rotation(Mat::Identity(3, 3), Vec::Zero(2)), Error);
}

TEST_CASE("frame_apply examples")
{
    const Manifold m = Manifold::parse("e3,s4");
    Rng rng(9);
    const Vec p = testing::random_point(m, rng);
    CHECK(frame_apply(m, TaskFrame(), p) == p);

    const TaskFrame shift = TaskFrame::from_rotation(Mat::Identity(3, 3), v3(1, -2, 3));
    const Vec shifted = frame_apply(m, shift, p);
    CHECK(shifted.head(3) == p.head(3) + v3(1, -2, 3));
    CHECK(shifted.tail(4) == p.tail(4));

    const TaskFrame rot = TaskFrame::from_quaternion(Eigen::Quaterniond(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ())),
                                                     Eigen::Vector3d::Zero());
    const Manifold e3 = Manifold::euclidean(3);
    CHECK((frame_apply(e3, rot, v3(1, 0, 0)) - v3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("frame quaternion agrees with its rotation matrix")
{
    Rng rng(10);
    for (int i = 0; i < 100; ++i) {
        const Vec qv = rng.unit(4);
        const Eigen::Quaterniond q(qv[0], qv[1], qv[2], qv[3]);
        const TaskFrame f = TaskFrame::from_quaternion(q, Eigen::Vector3d(rng.normal_vec(3)));
        const TaskFrame g = TaskFrame::from_rotation(f.rotation(), f.translation());
        // Same rotation, quaternion up to sign.
        CHECK(std::abs(std::abs(g.quaternion().dot(f.quaternion())) - 1.0) < 1e-12);
        CHECK((Mat(g.quaternion().toRotationMatrix()) - f.rotation()).norm() < 1e-12);
        // Left quaternion multiplication matches Eigen's product.
        const Vec pv = rng.unit(4);
        const Eigen::Quaterniond p(pv[0], pv[1], pv[2], pv[3]);
        const Eigen::Quaterniond qp = q * p;
        const Vec got = quaternion_left_matrix(q) * pv;
        CHECK((got - (Vec(4) << qp.w(), qp.x(), qp.y(), qp.z()).finished()).norm() < 1e-14);
    }
}

TEST_CASE("frame_apply_inverse undoes frame_apply and compose chains frames")
{
    Rng rng(12);
    const Manifold m = Manifold::parse("e3,s4");
    for (int i = 0; i < 100; ++i) {
        const Vec qa = rng.unit(4);
        const Vec qb = rng.unit(4);
        const TaskFrame a = TaskFrame::from_quaternion({qa[0], qa[1], qa[2], qa[3]}, Eigen::Vector3d(rng.normal_vec(3)));
        const TaskFrame b = TaskFrame::from_quaternion({qb[0], qb[1], qb[2], qb[3]}, Eigen::Vector3d(rng.normal_vec(3)));
        const Vec p = testing::random_point(m, rng);
        CHECK((frame_apply_inverse(m, a, frame_apply(m, a, p)) - p).norm() < 1e-12);
        CHECK((frame_apply(m, a.compose(b), p) - frame_apply(m, a, frame_apply(m, b, p))).norm() < 1e-12);
        CHECK((frame_apply(m, a.inverse(), p) - frame_apply_inverse(m, a, p)).norm() < 1e-12);
    }
}

TEST_CASE("frame tangent map is the differential of frame_apply")
{
    Rng rng(13);
    const Manifold m = Manifold::parse("e3,s4");
    const Vec qv = rng.unit(4);
    const TaskFrame f = TaskFrame::from_quaternion({qv[0], qv[1], qv[2], qv[3]}, Eigen::Vector3d(rng.normal_vec(3)));
    const Mat j = frame_tangent_map(m, f);
    CHECK((j.transpose() * j - Mat::Identity(7, 7)).norm() < 1e-12);
    for (int i = 0; i < 20; ++i) {
        const Vec p = testing::random_point(m, rng);
        const Vec u = testing::random_tangent(m, p, rng, 0.3);
        // Applying the frame commutes with the exponential map.
        const Vec lhs = frame_apply(m, f, m.exp(p, u));
        const Vec rhs = m.exp(frame_apply(m, f, p), j * u);
        CHECK((lhs - rhs).norm() < 1e-12);
    }
}

TEST_CASE("planar frames act on 2D blocks")
{
    const Manifold e2 = Manifold::euclidean(2);
    const TaskFrame f = TaskFrame::planar(kPi / 2, Eigen::Vector2d(1, 1));
    Vec p(2);
    p << 1, 0;
    const Vec q = frame_apply(e2, f, p);
    CHECK(std::abs(q[0] - 1.0) < 1e-15);
    CHECK(std::abs(q[1] - 2.0) < 1e-15);
    CHECK_THROWS_AS(frame_apply(Manifold::euclidean(3), f, Vec::Zero(3)), Error);
}
