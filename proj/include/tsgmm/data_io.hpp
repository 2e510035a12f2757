#pragma once

#include "tsgmm/frame.hpp"
#include "tsgmm/mixture.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsgmm {

struct RawDemonstration {
    std::vector<double> times;
    Mat points;  // point_dim x N
    std::string label;

    std::size_t size() const { return times.size(); }
};

/// Comma-separated rows `t, coordinates...`; an optional non-numeric header
/// line and blank lines separating demonstrations.
std::vector<RawDemonstration> read_csv(std::istream& in, const Manifold& output, const std::string& label = "");
std::vector<RawDemonstration> load_csv(const std::filesystem::path& path, const Manifold& output);

void write_csv(std::ostream& out, const std::vector<RawDemonstration>& demos, const Manifold& output);
void save_csv(const std::filesystem::path& path, const std::vector<RawDemonstration>& demos, const Manifold& output);

/// Pools demonstrations into the joint (time, output) representation as-is.
DemonstrationSet to_demonstration_set(const std::vector<RawDemonstration>& demos, const Manifold& output);

/// Maps each demonstration's time stamps affinely onto [0, duration].
std::vector<RawDemonstration> rescale_times(const std::vector<RawDemonstration>& demos, double duration = 60.0);
/// rescale_times followed by to_demonstration_set.
DemonstrationSet normalize_time(const std::vector<RawDemonstration>& demos, const Manifold& output,
                                double duration = 60.0);

/// Per demonstration, flips Sphere(4) samples into the hemisphere of their
/// predecessor; the first sample gets a non-negative scalar part.
void align_quaternions(std::vector<RawDemonstration>& demos, const Manifold& output);

struct SynthParams {
    int demos = 3;
    int samples = 200;
    double noise = 0.01;
    double duration = 60.0;
};

struct SynthData {
    Manifold output;
    std::vector<RawDemonstration> demos;
    /// pick_place only: frames[d][f] and the time each demonstration passes
    /// through frame f's pose.
    std::vector<std::vector<TaskFrame>> frames;
    std::vector<double> frame_times;
};

/// Kinds: "sine" (Euclidean 1D), "letter" (2D, ends at the origin),
/// "pick_place" (position plus quaternion through three frames).
SynthData synth_generate(const std::string& kind, const SynthParams& params, std::uint64_t seed);

/// Smooth pose path through given waypoints: smoothstep-eased linear
/// position and slerp orientation per segment. Poses are (x, y, z, w, qx, qy, qz).
Vec pose_path(const std::vector<double>& knot_times, const std::vector<Vec>& poses, double t);

}  // namespace tsgmm
