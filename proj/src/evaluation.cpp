#include "tsgmm/evaluation.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <string>

namespace tsgmm {

Trajectory trajectory_from(const std::vector<ConditionalResult>& rows)
{
    Trajectory tr;
    if (rows.empty()) return tr;
    tr.points.resize(rows.front().mean.size(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t n = 0; n < rows.size(); ++n) {
        tr.times.push_back(rows[n].t);
        tr.points.col(static_cast<Eigen::Index>(n)) = rows[n].mean;
    }
    return tr;
}

Trajectory read_trajectory_csv(std::istream& in, const Manifold& output)
{
    const int d = output.point_dim();
    const std::size_t full = 1 + static_cast<std::size_t>(d + d * d);
    std::vector<double> times;
    std::vector<Vec> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> values;
        std::size_t start = 0;
        bool ok = true;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            double v = 0.0;
            const auto field = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            ok = ok && parse_double(field, v);
            values.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (line_no == 1 && !ok) continue;  // header
        const std::string where = "trajectory line " + std::to_string(line_no) + ": ";
        if (!ok) fail(ErrorKind::Parse, where + "non-numeric field");
        if (values.size() != full && values.size() != static_cast<std::size_t>(1 + d)) {
            fail(ErrorKind::Parse, where + "expected " + std::to_string(full) + " columns, found " + std::to_string(values.size()));
        }
        times.push_back(values[0]);
        points.push_back(Eigen::Map<const Vec>(values.data() + 1, d));
    }
    Trajectory tr;
    tr.times = std::move(times);
    tr.points.resize(d, static_cast<Eigen::Index>(points.size()));
    for (std::size_t n = 0; n < points.size(); ++n) tr.points.col(static_cast<Eigen::Index>(n)) = points[n];
    return tr;
}

Vec interpolate(const Manifold& output, const std::vector<double>& times, const Mat& points, double t)
{
    if (times.empty()) fail(ErrorKind::InvalidArgument, "interpolate: no samples");
    if (t <= times.front()) return points.col(0);
    if (t >= times.back()) return points.col(points.cols() - 1);
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto hi = static_cast<Eigen::Index>(it - times.begin());
    const double t0 = times[static_cast<std::size_t>(hi - 1)];
    const double t1 = times[static_cast<std::size_t>(hi)];
    const double s = (t - t0) / (t1 - t0);
    const Vec a = points.col(hi - 1);
    if (s == 0.0) return a;
    return output.exp(a, s * output.log(a, points.col(hi)));
}

PoseError pose_error(const Manifold& output, const Vec& a, const Vec& b)
{
    PoseError e;
    double pos2 = 0.0;
    double ori2 = 0.0;
    for (std::size_t i = 0; i < output.blocks().size(); ++i) {
        const Block& blk = output.blocks()[i];
        const Vec pa = a.segment(output.offset(i), blk.dim);
        const Vec pb = b.segment(output.offset(i), blk.dim);
        if (!blk.is_sphere()) {
            pos2 += (pa - pb).squaredNorm();
        } else {
            // Chord-based angle; acos loses half the digits near zero.
            const double sign = blk.is_quaternion() && pa.dot(pb) < 0.0 ? -1.0 : 1.0;
            const double half = std::atan2((pa - sign * pb).norm(), (pa + sign * pb).norm());
            const double ang = (blk.is_quaternion() ? 4.0 : 2.0) * half;
            ori2 += ang * ang;
        }
    }
    e.position = std::sqrt(pos2);
    e.orientation = std::sqrt(ori2);
    e.geodesic = output.distance(a, b);
    return e;
}

Metrics evaluate(const Manifold& output, const Trajectory& trajectory, const std::vector<RawDemonstration>& demos,
                 const std::vector<TimeSensitiveConstraint>& constraints)
{
    if (trajectory.times.empty()) fail(ErrorKind::InvalidArgument, "evaluate: empty trajectory");
    if (trajectory.points.rows() != output.point_dim()) {
        fail(ErrorKind::InvalidArgument, "evaluate: trajectory does not match the descriptor");
    }
    Metrics m;
    m.rmse = std::numeric_limits<double>::infinity();
    const auto t_count = static_cast<Eigen::Index>(trajectory.times.size());
    for (std::size_t d = 0; d < demos.size(); ++d) {
        double sum = 0.0;
        for (Eigen::Index n = 0; n < t_count; ++n) {
            const Vec ref = interpolate(output, demos[d].times, demos[d].points, trajectory.times[static_cast<std::size_t>(n)]);
            const double dist = output.distance(trajectory.points.col(n), ref);
            sum += dist * dist;
        }
        const double rmse = std::sqrt(sum / static_cast<double>(t_count));
        if (rmse < m.rmse) {
            m.rmse = rmse;
            m.nearest_demo = d;
        }
    }
    if (demos.empty()) m.rmse = 0.0;

    for (const auto& c : constraints) {
        const Vec at = interpolate(output, trajectory.times, trajectory.points, c.t_des);
        m.constraint_errors.push_back(pose_error(output, at, c.x_des));
    }

    if (!demos.empty()) {
        Mat starts(output.point_dim(), static_cast<Eigen::Index>(demos.size()));
        Mat ends(output.point_dim(), static_cast<Eigen::Index>(demos.size()));
        for (std::size_t d = 0; d < demos.size(); ++d) {
            starts.col(static_cast<Eigen::Index>(d)) = demos[d].points.col(0);
            ends.col(static_cast<Eigen::Index>(d)) = demos[d].points.col(demos[d].points.cols() - 1);
        }
        const Vec ones = Vec::Ones(static_cast<Eigen::Index>(demos.size()));
        const Vec start = weighted_frechet_mean(output, starts, ones, starts.col(0), 50, 1e-12);
        const Vec end = weighted_frechet_mean(output, ends, ones, ends.col(0), 50, 1e-12);
        m.start_error = pose_error(output, trajectory.points.col(0), start);
        m.end_error = pose_error(output, trajectory.points.col(t_count - 1), end);
    }
    return m;
}

}  // namespace tsgmm
