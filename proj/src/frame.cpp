#include "tsgmm/frame.hpp"

#include "tsgmm/errors.hpp"

#include <cmath>

namespace tsgmm {
namespace {

constexpr double kFrameTol = 1e-9;

void check_rotation(const Mat& r)
{
    if (r.rows() != r.cols() || (r.rows() != 2 && r.rows() != 3)) {
        fail(ErrorKind::InvalidFrame, "frame rotation must be 2x2 or 3x3");
    }
    const Mat gram = r.transpose() * r;
    if ((gram - Mat::Identity(r.rows(), r.cols())).cwiseAbs().maxCoeff() > kFrameTol) {
        fail(ErrorKind::InvalidFrame, "frame rotation is not orthonormal");
    }
    if (std::abs(r.determinant() - 1.0) > kFrameTol) {
        fail(ErrorKind::InvalidFrame, "frame rotation must have determinant +1");
    }
}

}  // namespace

Eigen::Matrix4d quaternion_left_matrix(const Eigen::Quaterniond& q)
{
    Eigen::Matrix4d l;
    // clang-format off
    l << q.w(), -q.x(), -q.y(), -q.z(),
         q.x(),  q.w(), -q.z(),  q.y(),
         q.y(),  q.z(),  q.w(), -q.x(),
         q.z(), -q.y(),  q.x(),  q.w();
    // clang-format on
    return l;
}

TaskFrame::TaskFrame()
    : rotation_(Mat::Identity(3, 3)), translation_(Vec::Zero(3)), quaternion_(Eigen::Quaterniond::Identity())
{
}

TaskFrame TaskFrame::from_rotation(const Mat& rotation, const Vec& translation)
{
    check_rotation(rotation);
    if (translation.size() != rotation.rows()) {
        fail(ErrorKind::InvalidFrame, "frame translation dimension does not match rotation");
    }
    TaskFrame f;
    f.rotation_ = rotation;
    f.translation_ = translation;
    if (rotation.rows() == 3) {
        const Eigen::Matrix3d r3 = rotation;
        f.quaternion_ = Eigen::Quaterniond(r3).normalized();
        if (f.quaternion_.w() < 0) f.quaternion_.coeffs() *= -1.0;
    } else {
        const double angle = std::atan2(rotation(1, 0), rotation(0, 0));
        f.quaternion_ = Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()));
    }
    return f;
}

TaskFrame TaskFrame::from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& translation)
{
    if (std::abs(q.norm() - 1.0) > kFrameTol) {
        fail(ErrorKind::InvalidFrame, "frame quaternion is not unit norm");
    }
    TaskFrame f;
    f.quaternion_ = q;
    f.rotation_ = q.toRotationMatrix();
    f.translation_ = translation;
    return f;
}

TaskFrame TaskFrame::planar(double angle, const Eigen::Vector2d& translation)
{
    TaskFrame f;
    f.rotation_ = Eigen::Rotation2Dd(angle).toRotationMatrix();
    f.translation_ = translation;
    f.quaternion_ = Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()));
    return f;
}

TaskFrame TaskFrame::compose(const TaskFrame& other) const
{
    if (dim() != other.dim()) {
        fail(ErrorKind::InvalidFrame, "cannot compose frames of different dimension");
    }
    TaskFrame f;
    f.rotation_ = rotation_ * other.rotation_;
    f.translation_ = rotation_ * other.translation_ + translation_;
    f.quaternion_ = quaternion_ * other.quaternion_;
    return f;
}

TaskFrame TaskFrame::inverse() const
{
    TaskFrame f;
    f.rotation_ = rotation_.transpose();
    f.translation_ = -(rotation_.transpose() * translation_);
    f.quaternion_ = quaternion_.conjugate();
    return f;
}

namespace {

template <bool Inverse>
Vec apply_impl(const Manifold& m, const TaskFrame& frame, const Vec& p)
{
    if (p.size() != m.point_dim()) {
        fail(ErrorKind::InvalidArgument, "frame_apply: point dimension mismatch");
    }
    const int n = frame.dim();
    Vec out(p.size());
    for (std::size_t i = 0; i < m.blocks().size(); ++i) {
        const Block& b = m.blocks()[i];
        const int o = m.offset(i);
        const auto seg = p.segment(o, b.dim);
        if (!b.is_sphere() && b.dim == n) {
            if constexpr (Inverse) {
                out.segment(o, b.dim) = frame.rotation().transpose() * (seg - frame.translation());
            } else {
                out.segment(o, b.dim) = frame.rotation() * seg + frame.translation();
            }
        } else if (b.is_quaternion()) {
            const Eigen::Quaterniond q = Inverse ? frame.quaternion().conjugate() : frame.quaternion();
            out.segment(o, 4) = quaternion_left_matrix(q) * seg;
        } else if (b.is_sphere() && b.dim == n) {
            out.segment(o, b.dim) = (Inverse ? Mat(frame.rotation().transpose()) : frame.rotation()) * seg;
        } else {
            fail(ErrorKind::InvalidArgument, "frame of dimension " + std::to_string(n) + " cannot act on block "
                                                 + std::to_string(i) + " of dimension " + std::to_string(b.dim));
        }
    }
    return out;
}

}  // namespace

Vec frame_apply(const Manifold& m, const TaskFrame& frame, const Vec& p) { return apply_impl<false>(m, frame, p); }

Vec frame_apply_inverse(const Manifold& m, const TaskFrame& frame, const Vec& p)
{
    return apply_impl<true>(m, frame, p);
}

Mat frame_tangent_map(const Manifold& m, const TaskFrame& frame)
{
    const int n = frame.dim();
    Mat j = Mat::Zero(m.tangent_dim(), m.tangent_dim());
    for (std::size_t i = 0; i < m.blocks().size(); ++i) {
        const Block& b = m.blocks()[i];
        const int o = m.offset(i);
        if (b.is_quaternion()) {
            j.block(o, o, 4, 4) = quaternion_left_matrix(frame.quaternion());
        } else if (b.dim == n) {
            j.block(o, o, n, n) = frame.rotation();
        } else {
            fail(ErrorKind::InvalidArgument, "frame cannot act on block " + std::to_string(i));
        }
    }
    return j;
}

}  // namespace tsgmm
