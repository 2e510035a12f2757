#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace tsgmm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One factor of a product manifold.
///
/// Sphere blocks are stored in ambient coordinates: a Sphere(4) block is the
/// unit-quaternion sphere S^3 with coordinates (w, x, y, z). Tangent vectors of
/// a sphere block are ambient vectors orthogonal to the base point.
struct Block {
    enum class Kind { Euclidean, Sphere };

    Kind kind = Kind::Euclidean;
    int dim = 1;  // Euclidean dimension, or ambient dimension for spheres

    static Block euclidean(int dim);
    static Block sphere(int ambient_dim);

    bool is_sphere() const { return kind == Kind::Sphere; }
    bool is_quaternion() const { return kind == Kind::Sphere && dim == 4; }
    int intrinsic_dim() const { return is_sphere() ? dim - 1 : dim; }

    bool operator==(const Block&) const = default;
};

/// Ordered product of Euclidean and sphere blocks.
///
/// Points and tangent vectors share the same ambient layout, so point_dim()
/// and tangent_dim() coincide; intrinsic_dim() is the true manifold dimension
/// (one less per sphere block) and is what Gaussian normalizers use.
class Manifold {
public:
    Manifold() = default;
    explicit Manifold(std::vector<Block> blocks);

    static Manifold euclidean(int dim);
    static Manifold sphere(int ambient_dim);
    /// Parses a comma separated block list such as "e3,s4".
    static Manifold parse(std::string_view text);

    const std::vector<Block>& blocks() const { return blocks_; }
    int offset(std::size_t block) const { return offsets_[block]; }
    int point_dim() const { return point_dim_; }
    int tangent_dim() const { return point_dim_; }
    int intrinsic_dim() const { return intrinsic_dim_; }
    int sphere_count() const { return sphere_count_; }
    bool is_euclidean() const { return sphere_count_ == 0; }

    /// Same manifold with a Euclidean(1) time block in front.
    Manifold with_time() const;
    /// Drops the leading block (the time block of a joint manifold).
    Manifold tail() const;

    std::string to_string() const;

    /// Throws invalid-argument on a dimension mismatch or a non-unit sphere block.
    void check_point(const Vec& p, double tol = 1e-9) const;
    void check_tangent(const Vec& base, const Vec& v, double tol = 1e-9) const;

    /// Canonical origin: zeros on Euclidean blocks, (1, 0, ...) on spheres.
    Vec origin() const;

    Vec log(const Vec& base, const Vec& target) const;
    Vec exp(const Vec& base, const Vec& v) const;
    double distance(const Vec& a, const Vec& b) const;

    /// Rotation carrying `from` to `to` along the connecting geodesic,
    /// identity on Euclidean blocks. Restricted to T_from it is the parallel
    /// transport to T_to; it is orthogonal on the full ambient space.
    Mat transport_matrix(const Vec& from, const Vec& to) const;
    Vec transport(const Vec& from, const Vec& to, const Vec& v) const;
    Mat transport_covariance(const Vec& from, const Vec& to, const Mat& cov) const;

    /// Orthogonal projector onto T_base.
    Mat tangent_projector(const Vec& base) const;
    /// Unit normals of the sphere blocks at `base`, one column per sphere.
    Mat normal_basis(const Vec& base) const;
    Vec project_to_tangent(const Vec& base, const Vec& v) const;

    bool operator==(const Manifold& other) const { return blocks_ == other.blocks_; }

private:
    void check_dim(const Vec& v, const char* what) const;

    std::vector<Block> blocks_;
    std::vector<int> offsets_;
    int point_dim_ = 0;
    int intrinsic_dim_ = 0;
    int sphere_count_ = 0;
};

/// A tangent vector tagged with its base point.
struct TangentVector {
    Vec base;
    Vec coords;
};

TangentVector log_map(const Manifold& m, const Vec& base, const Vec& target);
Vec exp_map(const Manifold& m, const Vec& base, const TangentVector& v);
TangentVector parallel_transport(const Manifold& m, const Vec& from, const Vec& to, const TangentVector& v);
Mat transport_covariance(const Manifold& m, const Vec& from, const Vec& to, const Mat& cov);

}  // namespace tsgmm
