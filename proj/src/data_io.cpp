#include "tsgmm/data_io.hpp"

#include "tsgmm/errors.hpp"
#include "tsgmm/format.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace tsgmm {
namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool is_blank(std::string_view line)
{
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

RawDemonstration finish(std::vector<double>& times, std::vector<Vec>& rows, const std::string& label, std::size_t index)
{
    RawDemonstration d;
    d.times = std::move(times);
    d.points.resize(rows.front().size(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) d.points.col(static_cast<Eigen::Index>(i)) = rows[i];
    d.label = label.empty() ? "demo" + std::to_string(index) : label + "#" + std::to_string(index);
    times.clear();
    rows.clear();
    return d;
}

// Gaussian draws from raw 64-bit output (Box-Muller) so generated data does
// not depend on the standard library's distribution implementations.
class Noise {
public:
    explicit Noise(std::uint64_t seed) : rng_(seed) {}
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double gauss()
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 rng_;
};

Eigen::Quaterniond axis_angle(const Eigen::Vector3d& axis, double angle)
{
    return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()));
}

Vec pose_vec(const Eigen::Vector3d& p, const Eigen::Quaterniond& q)
{
    Vec v(7);
    v << p, q.w(), q.x(), q.y(), q.z();
    return v;
}

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

std::vector<double> uniform_times(int samples, double duration)
{
    std::vector<double> t(static_cast<std::size_t>(samples));
    for (int n = 0; n < samples; ++n) {
        t[static_cast<std::size_t>(n)] = samples == 1 ? 0.0 : duration * n / (samples - 1);
    }
    return t;
}

}  // namespace

std::vector<RawDemonstration> read_csv(std::istream& in, const Manifold& output, const std::string& label)
{
    const std::size_t columns = 1 + static_cast<std::size_t>(output.point_dim());
    std::vector<RawDemonstration> demos;
    std::vector<double> times;
    std::vector<Vec> rows;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            if (!rows.empty()) demos.push_back(finish(times, rows, label, demos.size()));
            continue;
        }
        const auto fields = split_fields(line);
        std::vector<double> values(fields.size());
        bool numeric = true;
        std::vector<bool> ok(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            ok[i] = parse_double(fields[i], values[i]) && std::isfinite(values[i]);
            numeric = numeric && ok[i];
        }
        // A header is recognized by a non-numeric first field on the first line.
        if (!ok[0] && !seen_data) {
            seen_data = true;  // header line
            continue;
        }
        seen_data = true;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != columns) {
            fail(ErrorKind::Parse, where + "expected " + std::to_string(columns) + " columns, found "
                                       + std::to_string(fields.size()));
        }
        if (!numeric) {
            const auto bad = std::find(ok.begin(), ok.end(), false) - ok.begin();
            fail(ErrorKind::Parse, where + "field " + std::to_string(bad + 1) + " is not a finite number");
        }
        if (!times.empty() && !(values[0] > times.back())) {
            fail(ErrorKind::Parse, where + "time stamps must be strictly increasing within a demonstration");
        }
        Vec p = Eigen::Map<const Vec>(values.data() + 1, output.point_dim());
        for (std::size_t b = 0; b < output.blocks().size(); ++b) {
            if (!output.blocks()[b].is_sphere()) continue;
            auto seg = p.segment(output.offset(b), output.blocks()[b].dim);
            const double norm = seg.norm();
            const double dev = std::abs(norm - 1.0);
            if (dev > 1e-3) {
                fail(ErrorKind::Parse, where + "sphere block " + std::to_string(b) + " has norm " + format_double(norm));
            }
            if (dev > 1e-9) {
                spdlog::warn("{}sphere block {} renormalized (norm {})", where, b, norm);
            }
            if (dev > 1e-12) seg /= norm;
        }
        times.push_back(values[0]);
        rows.push_back(std::move(p));
    }
    if (!rows.empty()) demos.push_back(finish(times, rows, label, demos.size()));
    if (demos.empty()) {
        spdlog::warn("no demonstrations found{}", label.empty() ? std::string() : " in " + label);
    }
    return demos;
}

std::vector<RawDemonstration> load_csv(const std::filesystem::path& path, const Manifold& output)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    try {
        return read_csv(in, output, path.filename().string());
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void write_csv(std::ostream& out, const std::vector<RawDemonstration>& demos, const Manifold& output)
{
    out << 't';
    for (int i = 0; i < output.point_dim(); ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t d = 0; d < demos.size(); ++d) {
        if (d > 0) out << '\n';
        const auto& demo = demos[d];
        for (std::size_t n = 0; n < demo.size(); ++n) {
            out << format_double(demo.times[n]);
            for (int i = 0; i < output.point_dim(); ++i) {
                out << ',' << format_double(demo.points(i, static_cast<Eigen::Index>(n)));
            }
            out << '\n';
        }
    }
}

void save_csv(const std::filesystem::path& path, const std::vector<RawDemonstration>& demos, const Manifold& output)
{
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    write_csv(out, demos, output);
}

DemonstrationSet to_demonstration_set(const std::vector<RawDemonstration>& demos, const Manifold& output)
{
    DemonstrationSet set;
    set.joint = output.with_time();
    std::size_t total = 0;
    for (const auto& d : demos) total += d.size();
    set.samples.resize(set.joint.point_dim(), static_cast<Eigen::Index>(total));
    std::size_t pos = 0;
    for (const auto& d : demos) {
        if (d.points.rows() != output.point_dim() || static_cast<std::size_t>(d.points.cols()) != d.size()) {
            fail(ErrorKind::InvalidArgument, "demonstration " + d.label + " does not match the descriptor");
        }
        for (std::size_t n = 0; n < d.size(); ++n) {
            const auto col = static_cast<Eigen::Index>(pos + n);
            set.samples(0, col) = d.times[n];
            set.samples.col(col).tail(output.point_dim()) = d.points.col(static_cast<Eigen::Index>(n));
        }
        set.ranges.emplace_back(pos, pos + d.size());
        pos += d.size();
    }
    set.validate();
    return set;
}

std::vector<RawDemonstration> rescale_times(const std::vector<RawDemonstration>& demos, double duration)
{
    if (!(duration > 0.0)) {
        fail(ErrorKind::InvalidArgument, "duration must be positive");
    }
    std::vector<RawDemonstration> scaled = demos;
    for (auto& d : scaled) {
        if (d.size() < 2) {
            fail(ErrorKind::InvalidArgument, "demonstration " + d.label + " needs at least two samples");
        }
        const double t0 = d.times.front();
        const double span = d.times.back() - t0;
        if (!(span > 0.0)) {
            fail(ErrorKind::InvalidArgument, "demonstration " + d.label + " has zero duration");
        }
        for (double& t : d.times) t = (t - t0) / span * duration;
        d.times.back() = duration;
    }
    return scaled;
}

DemonstrationSet normalize_time(const std::vector<RawDemonstration>& demos, const Manifold& output, double duration)
{
    return to_demonstration_set(rescale_times(demos, duration), output);
}

void align_quaternions(std::vector<RawDemonstration>& demos, const Manifold& output)
{
    for (auto& d : demos) {
        for (std::size_t b = 0; b < output.blocks().size(); ++b) {
            if (!output.blocks()[b].is_quaternion()) continue;
            const int o = output.offset(b);
            for (Eigen::Index n = 0; n < d.points.cols(); ++n) {
                auto q = d.points.col(n).segment(o, 4);
                const bool flip = n == 0 ? q[0] < 0.0 : q.dot(d.points.col(n - 1).segment(o, 4)) < 0.0;
                if (flip) q = -q;
            }
        }
    }
}

Vec pose_path(const std::vector<double>& knot_times, const std::vector<Vec>& poses, double t)
{
    if (knot_times.size() != poses.size() || knot_times.size() < 2) {
        fail(ErrorKind::InvalidArgument, "pose_path: need matching knots and poses (at least two)");
    }
    std::size_t seg = 0;
    while (seg + 2 < knot_times.size() && t > knot_times[seg + 1]) ++seg;
    const double span = knot_times[seg + 1] - knot_times[seg];
    const double s = smoothstep(std::clamp((t - knot_times[seg]) / span, 0.0, 1.0));
    const Vec& a = poses[seg];
    const Vec& b = poses[seg + 1];
    const Eigen::Quaterniond qa(a[3], a[4], a[5], a[6]);
    Eigen::Quaterniond qb(b[3], b[4], b[5], b[6]);
    if (qa.dot(qb) < 0.0) qb.coeffs() = -qb.coeffs();
    const Eigen::Vector3d p = (1.0 - s) * a.head<3>() + s * b.head<3>();
    return pose_vec(p, qa.slerp(s, qb).normalized());
}

SynthData synth_generate(const std::string& kind, const SynthParams& params, std::uint64_t seed)
{
    if (params.demos < 1 || params.samples < 2 || !(params.noise >= 0.0) || !(params.duration > 0.0)) {
        fail(ErrorKind::InvalidArgument, "synth: demos >= 1, samples >= 2, noise >= 0 and duration > 0 required");
    }
    Noise noise(seed);
    SynthData out;
    const std::vector<double> times = uniform_times(params.samples, params.duration);
    const double two_pi = 2.0 * std::numbers::pi;

    if (kind == "sine") {
        out.output = Manifold::euclidean(1);
        for (int d = 0; d < params.demos; ++d) {
            RawDemonstration demo{times, Mat(1, params.samples), "sine" + std::to_string(d)};
            for (int n = 0; n < params.samples; ++n) {
                demo.points(0, n) = std::sin(two_pi * times[static_cast<std::size_t>(n)] / params.duration)
                                    + params.noise * noise.gauss();
            }
            out.demos.push_back(std::move(demo));
        }
    } else if (kind == "letter") {
        out.output = Manifold::euclidean(2);
        for (int d = 0; d < params.demos; ++d) {
            // Spiral arc shrinking into the origin, with a per-demo amplitude.
            const double amp = 1.0 + 0.1 * (d - 0.5 * (params.demos - 1)) / params.demos;
            RawDemonstration demo{times, Mat(2, params.samples), "letter" + std::to_string(d)};
            for (int n = 0; n < params.samples; ++n) {
                const double s = times[static_cast<std::size_t>(n)] / params.duration;
                const double a = 1.5 * std::numbers::pi * s;
                demo.points(0, n) = amp * (1.0 - s) * std::cos(a) + params.noise * noise.gauss();
                demo.points(1, n) = amp * (1.0 - s) * std::sin(a) + params.noise * noise.gauss();
            }
            out.demos.push_back(std::move(demo));
        }
    } else if (kind == "pick_place") {
        out.output = Manifold::parse("e3,s4");
        const std::vector<Eigen::Vector3d> nominal = {{0.4, -0.3, 0.1}, {0.5, 0.0, 0.4}, {0.4, 0.3, 0.1}};
        const std::vector<double> tilt = {0.5, 0.3, 0.6};
        out.frame_times = {0.2 * params.duration, 0.5 * params.duration, 0.8 * params.duration};
        const std::vector<double> knots = {0.0, out.frame_times[0], out.frame_times[1], out.frame_times[2],
                                           params.duration};
        const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
        const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
        for (int d = 0; d < params.demos; ++d) {
            std::vector<TaskFrame> frames;
            std::vector<Vec> poses = {pose_vec({0.2, -0.5, 0.3}, Eigen::Quaterniond::Identity())};
            for (std::size_t f = 0; f < nominal.size(); ++f) {
                Eigen::Vector3d p = nominal[f];
                for (int i = 0; i < 3; ++i) p[i] += 0.1 * (noise.uniform() - 0.5);
                const double yaw = 0.6 * (noise.uniform() - 0.5);
                const Eigen::Quaterniond q = axis_angle(ez, yaw) * axis_angle(ey, tilt[f]);
                frames.push_back(TaskFrame::from_quaternion(q, p));
                poses.push_back(pose_vec(p, q));
            }
            poses.push_back(pose_vec({0.2, 0.5, 0.3}, Eigen::Quaterniond::Identity()));
            RawDemonstration demo{times, Mat(7, params.samples), "pick_place" + std::to_string(d)};
            for (int n = 0; n < params.samples; ++n) {
                Vec x = pose_path(knots, poses, times[static_cast<std::size_t>(n)]);
                if (params.noise > 0.0) {
                    for (int i = 0; i < 3; ++i) x[i] += params.noise * noise.gauss();
                    Vec v(4);
                    v << 0.0, params.noise * noise.gauss(), params.noise * noise.gauss(), params.noise * noise.gauss();
                    const Vec q = x.tail(4);
                    // Body-frame perturbation q ⊗ exp(v/2).
                    const Eigen::Quaterniond base(q[0], q[1], q[2], q[3]);
                    const double ang = v.tail(3).norm();
                    const Eigen::Quaterniond delta =
                        ang > 0.0 ? axis_angle(Eigen::Vector3d(v[1], v[2], v[3]), ang) : Eigen::Quaterniond::Identity();
                    const Eigen::Quaterniond r = (base * delta).normalized();
                    x.tail(4) << r.w(), r.x(), r.y(), r.z();
                }
                demo.points.col(n) = x;
            }
            out.demos.push_back(std::move(demo));
            out.frames.push_back(std::move(frames));
        }
        align_quaternions(out.demos, out.output);
    } else {
        fail(ErrorKind::InvalidArgument, "unknown synthetic kind '" + kind + "' (sine, letter, pick_place)");
    }
    return out;
}

}  // namespace tsgmm
