#pragma once

#include "tsgmm/bagging.hpp"
#include "tsgmm/constrained_em.hpp"
#include "tsgmm/task_param.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace tsgmm {

using Json = nlohmann::json;

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with sorted keys and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& value);

Json vec_to_json(const Vec& v);
Json mat_to_json(const Mat& m);  // row-major flat list

Json model_to_json(const GmmModel& model);
/// Throws corrupt-model on any schema or validity problem.
GmmModel model_from_json(const Json& j);

Json tp_model_to_json(const TpGmmModel& model);
TpGmmModel tp_model_from_json(const Json& j);

Json bagging_to_json(const BaggingEnsemble& ensemble);
BaggingEnsemble bagging_from_json(const Json& j);

/// "gmm", "tpgmm" or "bagging".
std::string model_type(const Json& j);

/// [{t_des, x_des, epsilon?}]; x_des is checked against `output`.
std::vector<TimeSensitiveConstraint> constraints_from_json(const Json& j, const Manifold& output,
                                                           double default_epsilon = 1e-3);
Json constraints_to_json(const std::vector<TimeSensitiveConstraint>& constraints);

struct FrameFile {
    std::vector<std::vector<TaskFrame>> frames;  // [demo][f]; a single row is shared
    std::vector<FrameSpec> specs;                // from the first row
    std::vector<std::optional<double>> anchor_times;
};

/// List of frame objects, or a list of such lists (one per demonstration).
/// Each object: rotation (3x3 nested or 9 row-major numbers, 2x2 for planar
/// frames, or 4 numbers as a w,x,y,z quaternion), translation, anchor_time?,
/// constrained?, x_des?, epsilon?.
FrameFile frames_from_json(const Json& j, const Manifold& output, double default_epsilon = 1e-3);
Json frame_to_json(const TaskFrame& frame);

}  // namespace tsgmm
