#include "tsgmm/manifold.hpp"

#include "tsgmm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace tsgmm {
namespace {

// <base, target> below this on a sphere block means the geodesic is not unique.
constexpr double kAntipodalDot = -1.0 + 1e-8;

double clamped_dot(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b)
{
    return std::clamp(a.dot(b), -1.0, 1.0);
}

Vec sphere_log(const Eigen::Ref<const Vec>& base, const Eigen::Ref<const Vec>& target)
{
    const double c = clamped_dot(base, target);
    if (c < kAntipodalDot) {
        fail(ErrorKind::DegenerateGeodesic, "log_map: antipodal points on a sphere block");
    }
    Vec w = target - c * base;
    const double s = w.norm();
    if (s == 0.0) {
        return Vec::Zero(base.size());
    }
    // atan2 keeps full precision for nearby points, where acos(c) does not.
    const double theta = std::atan2(s, c);
    return (theta / s) * w;
}

Vec sphere_exp(const Eigen::Ref<const Vec>& base, const Eigen::Ref<const Vec>& v)
{
    const double theta = v.norm();
    if (theta == 0.0) {
        return base;
    }
    Vec out = std::cos(theta) * base + (std::sin(theta) / theta) * v;
    out.normalize();
    return out;
}

Mat sphere_rotation(const Eigen::Ref<const Vec>& from, const Eigen::Ref<const Vec>& to)
{
    const Eigen::Index n = from.size();
    const double c = clamped_dot(from, to);
    if (c < kAntipodalDot) {
        fail(ErrorKind::DegenerateGeodesic, "parallel_transport: antipodal points on a sphere block");
    }
    Vec w = to - c * from;
    const double s = w.norm();
    if (s == 0.0) {
        return Mat::Identity(n, n);
    }
    const Vec dir = w / s;
    const double theta = std::atan2(s, c);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    Mat r = Mat::Identity(n, n);
    r += (ct - 1.0) * (from * from.transpose() + dir * dir.transpose());
    r += st * (dir * from.transpose() - from * dir.transpose());
    return r;
}

}  // namespace

Block Block::euclidean(int dim)
{
    if (dim < 1) {
        fail(ErrorKind::InvalidArgument, "Euclidean block needs dim >= 1");
    }
    return Block{Kind::Euclidean, dim};
}

Block Block::sphere(int ambient_dim)
{
    if (ambient_dim < 2) {
        fail(ErrorKind::InvalidArgument, "Sphere block needs ambient dim >= 2");
    }
    return Block{Kind::Sphere, ambient_dim};
}

Manifold::Manifold(std::vector<Block> blocks) : blocks_(std::move(blocks))
{
    if (blocks_.empty()) {
        fail(ErrorKind::InvalidArgument, "manifold descriptor needs at least one block");
    }
    offsets_.reserve(blocks_.size());
    for (const auto& b : blocks_) {
        if (b.dim < 1 || (b.is_sphere() && b.dim < 2)) {
            fail(ErrorKind::InvalidArgument, "invalid block dimension");
        }
        offsets_.push_back(point_dim_);
        point_dim_ += b.dim;
        intrinsic_dim_ += b.intrinsic_dim();
        sphere_count_ += b.is_sphere() ? 1 : 0;
    }
}

Manifold Manifold::euclidean(int dim) { return Manifold({Block::euclidean(dim)}); }

Manifold Manifold::sphere(int ambient_dim) { return Manifold({Block::sphere(ambient_dim)}); }

Manifold Manifold::parse(std::string_view text)
{
    std::vector<Block> blocks;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        std::string_view tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (tok.size() < 2 || (tok[0] != 'e' && tok[0] != 's')) {
            fail(ErrorKind::InvalidArgument, "bad manifold block '" + std::string(tok) + "' (expected e<d> or s<d>)");
        }
        int dim = 0;
        const auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), dim);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            fail(ErrorKind::InvalidArgument, "bad manifold block '" + std::string(tok) + "'");
        }
        blocks.push_back(tok[0] == 'e' ? Block::euclidean(dim) : Block::sphere(dim));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return Manifold(std::move(blocks));
}

Manifold Manifold::with_time() const
{
    std::vector<Block> blocks{Block::euclidean(1)};
    blocks.insert(blocks.end(), blocks_.begin(), blocks_.end());
    return Manifold(std::move(blocks));
}

Manifold Manifold::tail() const
{
    if (blocks_.size() < 2) {
        fail(ErrorKind::InvalidArgument, "cannot drop the only block of a manifold");
    }
    return Manifold(std::vector<Block>(blocks_.begin() + 1, blocks_.end()));
}

std::string Manifold::to_string() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (i) os << ',';
        os << (blocks_[i].is_sphere() ? 's' : 'e') << blocks_[i].dim;
    }
    return os.str();
}

void Manifold::check_dim(const Vec& v, const char* what) const
{
    if (v.size() != point_dim_) {
        fail(ErrorKind::InvalidArgument, std::string(what) + ": expected dimension " + std::to_string(point_dim_)
                                             + ", got " + std::to_string(v.size()));
    }
}

void Manifold::check_point(const Vec& p, double tol) const
{
    check_dim(p, "point");
    if (!p.allFinite()) {
        fail(ErrorKind::InvalidArgument, "point has non-finite coordinates");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (!blocks_[i].is_sphere()) continue;
        const double n = p.segment(offsets_[i], blocks_[i].dim).norm();
        if (std::abs(n - 1.0) > tol) {
            fail(ErrorKind::InvalidArgument, "sphere block " + std::to_string(i) + " is not unit norm");
        }
    }
}

void Manifold::check_tangent(const Vec& base, const Vec& v, double tol) const
{
    check_dim(v, "tangent vector");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (!blocks_[i].is_sphere()) continue;
        const int o = offsets_[i];
        const int d = blocks_[i].dim;
        if (std::abs(base.segment(o, d).dot(v.segment(o, d))) > tol) {
            fail(ErrorKind::InvalidArgument, "tangent vector not orthogonal to base on block " + std::to_string(i));
        }
    }
}

Vec Manifold::origin() const
{
    Vec o = Vec::Zero(point_dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].is_sphere()) o[offsets_[i]] = 1.0;
    }
    return o;
}

Vec Manifold::log(const Vec& base, const Vec& target) const
{
    check_dim(base, "log_map base");
    check_dim(target, "log_map target");
    if (sphere_count_ == 0) {
        return target - base;
    }
    Vec out(point_dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const int o = offsets_[i];
        const int d = blocks_[i].dim;
        if (blocks_[i].is_sphere()) {
            out.segment(o, d) = sphere_log(base.segment(o, d), target.segment(o, d));
        } else {
            out.segment(o, d) = target.segment(o, d) - base.segment(o, d);
        }
    }
    return out;
}

Vec Manifold::exp(const Vec& base, const Vec& v) const
{
    check_dim(base, "exp_map base");
    check_dim(v, "exp_map vector");
    if (sphere_count_ == 0) {
        return base + v;
    }
    Vec out(point_dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const int o = offsets_[i];
        const int d = blocks_[i].dim;
        if (blocks_[i].is_sphere()) {
            out.segment(o, d) = sphere_exp(base.segment(o, d), v.segment(o, d));
        } else {
            out.segment(o, d) = base.segment(o, d) + v.segment(o, d);
        }
    }
    return out;
}

double Manifold::distance(const Vec& a, const Vec& b) const { return log(a, b).norm(); }

Mat Manifold::transport_matrix(const Vec& from, const Vec& to) const
{
    check_dim(from, "transport source");
    check_dim(to, "transport target");
    Mat r = Mat::Identity(point_dim_, point_dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (!blocks_[i].is_sphere()) continue;
        const int o = offsets_[i];
        const int d = blocks_[i].dim;
        r.block(o, o, d, d) = sphere_rotation(from.segment(o, d), to.segment(o, d));
    }
    return r;
}

Vec Manifold::transport(const Vec& from, const Vec& to, const Vec& v) const
{
    if (sphere_count_ == 0) {
        check_dim(v, "transported vector");
        return v;
    }
    return transport_matrix(from, to) * v;
}

Mat Manifold::transport_covariance(const Vec& from, const Vec& to, const Mat& cov) const
{
    if (cov.rows() != point_dim_ || cov.cols() != point_dim_) {
        fail(ErrorKind::InvalidArgument, "transport_covariance: covariance has wrong shape");
    }
    if (sphere_count_ == 0) {
        return cov;
    }
    const Mat r = transport_matrix(from, to);
    Mat out = r * cov * r.transpose();
    return 0.5 * (out + out.transpose());
}

Mat Manifold::normal_basis(const Vec& base) const
{
    check_dim(base, "normal_basis base");
    Mat n = Mat::Zero(point_dim_, sphere_count_);
    int col = 0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (!blocks_[i].is_sphere()) continue;
        const int o = offsets_[i];
        const int d = blocks_[i].dim;
        n.block(o, col, d, 1) = base.segment(o, d).normalized();
        ++col;
    }
    return n;
}

Mat Manifold::tangent_projector(const Vec& base) const
{
    const Mat n = normal_basis(base);
    return Mat::Identity(point_dim_, point_dim_) - n * n.transpose();
}

Vec Manifold::project_to_tangent(const Vec& base, const Vec& v) const
{
    if (sphere_count_ == 0) return v;
    const Mat n = normal_basis(base);
    return v - n * (n.transpose() * v);
}

TangentVector log_map(const Manifold& m, const Vec& base, const Vec& target)
{
    m.check_point(base);
    m.check_point(target);
    return TangentVector{base, m.log(base, target)};
}

Vec exp_map(const Manifold& m, const Vec& base, const TangentVector& v)
{
    m.check_point(base);
    if (v.base.size() != base.size() || v.base != base) {
        fail(ErrorKind::InvalidArgument, "exp_map: tangent vector is based at a different point");
    }
    m.check_tangent(base, v.coords);
    return m.exp(base, v.coords);
}

TangentVector parallel_transport(const Manifold& m, const Vec& from, const Vec& to, const TangentVector& v)
{
    m.check_point(from);
    m.check_point(to);
    if (v.base.size() != from.size() || v.base != from) {
        fail(ErrorKind::InvalidArgument, "parallel_transport: tangent vector is based at a different point");
    }
    m.check_tangent(from, v.coords);
    return TangentVector{to, m.transport(from, to, v.coords)};
}

Mat transport_covariance(const Manifold& m, const Vec& from, const Vec& to, const Mat& cov)
{
    m.check_point(from);
    m.check_point(to);
    return m.transport_covariance(from, to, cov);
}

}  // namespace tsgmm
