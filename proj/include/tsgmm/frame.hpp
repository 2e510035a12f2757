#pragma once

#include "tsgmm/manifold.hpp"

#include <Eigen/Geometry>

namespace tsgmm {

/// Task parameters {A, b}: a proper rotation with its companion unit
/// quaternion, plus a translation.
///
/// The rotation acts on every Euclidean block whose dimension matches it (2D
/// or 3D), the quaternion acts by left multiplication on Sphere(4) blocks and
/// the rotation matrix acts directly on spheres of matching ambient dimension.
class TaskFrame {
public:
    /// 3D identity frame.
    TaskFrame();

    static TaskFrame from_rotation(const Mat& rotation, const Vec& translation);
    static TaskFrame from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& translation);
    static TaskFrame planar(double angle, const Eigen::Vector2d& translation);

    const Mat& rotation() const { return rotation_; }
    const Vec& translation() const { return translation_; }
    /// (w, x, y, z) as stored; sign is kept as given, not canonicalized.
    const Eigen::Quaterniond& quaternion() const { return quaternion_; }
    int dim() const { return static_cast<int>(rotation_.rows()); }

    /// this ∘ other: applying the result equals applying `other` then `this`.
    TaskFrame compose(const TaskFrame& other) const;
    TaskFrame inverse() const;

private:
    Mat rotation_;
    Vec translation_;
    Eigen::Quaterniond quaternion_;
};

Vec frame_apply(const Manifold& m, const TaskFrame& frame, const Vec& p);
Vec frame_apply_inverse(const Manifold& m, const TaskFrame& frame, const Vec& p);

/// Differential of frame_apply; it does not depend on the point since every
/// block action is linear. Orthogonal, so covariances keep their spectrum.
Mat frame_tangent_map(const Manifold& m, const TaskFrame& frame);

/// Matrix of q ⊗ (·) acting on (w, x, y, z) coordinates.
Eigen::Matrix4d quaternion_left_matrix(const Eigen::Quaterniond& q);

}  // namespace tsgmm
