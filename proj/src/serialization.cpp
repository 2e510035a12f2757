#include "tsgmm/serialization.hpp"

#include "tsgmm/errors.hpp"

#include <fstream>

namespace tsgmm {
namespace {

Vec json_vec(const Json& j, const char* what)
{
    if (!j.is_array()) {
        fail(ErrorKind::CorruptModel, std::string(what) + " must be a list of numbers");
    }
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            fail(ErrorKind::CorruptModel, std::string(what) + " must be a list of numbers");
        }
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

/// Flat row-major list or nested rows.
Mat json_square(const Json& j, const char* what, ErrorKind kind)
{
    std::vector<double> flat;
    if (!j.is_array()) {
        fail(kind, std::string(what) + " must be a list");
    }
    const bool nested = !j.empty() && j[0].is_array();
    for (const auto& row : j) {
        if (nested) {
            if (!row.is_array() || row.size() != j.size()) {
                fail(kind, std::string(what) + " must be square");
            }
            for (const auto& x : row) {
                if (!x.is_number()) fail(kind, std::string(what) + " entries must be numbers");
                flat.push_back(x.get<double>());
            }
        } else {
            if (!row.is_number()) fail(kind, std::string(what) + " entries must be numbers");
            flat.push_back(row.get<double>());
        }
    }
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
    if (n * n != static_cast<Eigen::Index>(flat.size())) {
        fail(kind, std::string(what) + " must have a square number of entries");
    }
    Mat m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = flat[static_cast<std::size_t>(r * n + c)];
    }
    return m;
}

template <class T>
T required(const Json& j, const char* key, ErrorKind kind)
{
    if (!j.is_object() || !j.contains(key)) {
        fail(kind, std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(kind, std::string("field '") + key + "' has the wrong type");
    }
}

Manifold parse_descriptor(const std::string& text, ErrorKind kind)
{
    try {
        return Manifold::parse(text);
    } catch (const Error& e) {
        fail(kind, std::string("descriptor: ") + e.what());
    }
}

TaskFrame frame_from_json(const Json& j, const Manifold& output)
{
    if (!j.is_object()) {
        fail(ErrorKind::InvalidArgument, "frame entries must be objects");
    }
    int dim = 3;
    for (const Block& b : output.blocks()) {
        if (!b.is_sphere() && (b.dim == 2 || b.dim == 3)) {
            dim = b.dim;
            break;
        }
    }
    Vec t = Vec::Zero(dim);
    if (j.contains("translation")) {
        t = json_vec(j.at("translation"), "translation");
        if (t.size() != dim) {
            fail(ErrorKind::InvalidArgument, "translation must have " + std::to_string(dim) + " entries");
        }
    }
    if (!j.contains("rotation")) {
        return TaskFrame::from_rotation(Mat::Identity(dim, dim), t);
    }
    const Json& r = j.at("rotation");
    if (dim == 3 && r.is_array() && r.size() == 4 && r[0].is_number()) {
        const Vec q = json_vec(r, "rotation");
        if (std::abs(q.norm() - 1.0) > 1e-9) {
            fail(ErrorKind::InvalidFrame, "rotation quaternion must have unit norm");
        }
        return TaskFrame::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), t.head<3>());
    }
    const Mat rot = json_square(r, "rotation", ErrorKind::InvalidArgument);
    if (rot.rows() != dim) {
        fail(ErrorKind::InvalidArgument, "rotation must be " + std::to_string(dim) + "x" + std::to_string(dim));
    }
    return TaskFrame::from_rotation(rot, t);
}

}  // namespace

Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& value)
{
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out << value.dump(2) << '\n';
}

Json vec_to_json(const Vec& v)
{
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Json mat_to_json(const Mat& m)
{
    Json j = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) j.push_back(m(r, c));
    }
    return j;
}

Json model_to_json(const GmmModel& model)
{
    Json comps = Json::array();
    for (const auto& c : model.components) {
        comps.push_back({{"prior", c.prior}, {"mean", vec_to_json(c.mean)}, {"covariance", mat_to_json(c.covariance)},
                         {"scale", c.scale}});
    }
    return {{"type", "gmm"}, {"descriptor", model.joint.to_string()}, {"K", model.size()}, {"components", comps}};
}

GmmModel model_from_json(const Json& j)
{
    constexpr auto kind = ErrorKind::CorruptModel;
    GmmModel model;
    model.joint = parse_descriptor(required<std::string>(j, "descriptor", kind), kind);
    const Json& comps = j.contains("components") ? j.at("components") : Json();
    if (!comps.is_array()) {
        fail(kind, "missing component list");
    }
    if (j.contains("K") && (!j.at("K").is_number_integer() || j.at("K").get<std::size_t>() != comps.size())) {
        fail(kind, "K does not match the number of components");
    }
    for (const auto& c : comps) {
        GaussianComponent g;
        g.prior = required<double>(c, "prior", kind);
        g.mean = json_vec(c.contains("mean") ? c.at("mean") : Json(), "mean");
        g.covariance = json_square(c.contains("covariance") ? c.at("covariance") : Json(), "covariance", kind);
        g.scale = c.contains("scale") ? required<double>(c, "scale", kind) : 1.0;
        model.components.push_back(std::move(g));
    }
    model.validate();
    return model;
}

Json tp_model_to_json(const TpGmmModel& model)
{
    Json frames = Json::array();
    for (const auto& f : model.frames) {
        Json e = {{"model", model_to_json(f.model)},
                  {"constrained", f.constrained},
                  {"lambda", f.lambda},
                  {"anchor_time", f.anchor_time}};
        if (f.constrained) {
            e["target"] = vec_to_json(f.target);
            e["epsilon"] = f.epsilon;
        }
        frames.push_back(std::move(e));
    }
    return {{"type", "tpgmm"}, {"descriptor", model.output.to_string()}, {"frames", frames}};
}

TpGmmModel tp_model_from_json(const Json& j)
{
    constexpr auto kind = ErrorKind::CorruptModel;
    TpGmmModel model;
    model.output = parse_descriptor(required<std::string>(j, "descriptor", kind), kind);
    const Json& frames = j.contains("frames") ? j.at("frames") : Json();
    if (!frames.is_array() || frames.empty()) {
        fail(kind, "task-parameterized model needs a non-empty frame list");
    }
    for (const auto& e : frames) {
        TpFrameModel f;
        if (!e.is_object() || !e.contains("model")) fail(kind, "frame entry without model");
        f.model = model_from_json(e.at("model"));
        f.constrained = required<bool>(e, "constrained", kind);
        f.lambda = required<int>(e, "lambda", kind);
        f.anchor_time = required<double>(e, "anchor_time", kind);
        if (f.constrained) {
            f.target = json_vec(e.contains("target") ? e.at("target") : Json(), "target");
            f.epsilon = required<double>(e, "epsilon", kind);
        }
        if (f.model.output() != model.output) fail(kind, "frame model descriptor differs from the model descriptor");
        if (f.lambda < 0 || f.lambda >= f.model.size()) fail(kind, "frame lambda out of range");
        if (f.model.size() != (model.frames.empty() ? f.model.size() : model.frames.front().model.size())) {
            fail(kind, "frames must share the number of components");
        }
        model.frames.push_back(std::move(f));
    }
    return model;
}

Json bagging_to_json(const BaggingEnsemble& ensemble)
{
    Json learners = Json::array();
    for (const auto& m : ensemble.learners) learners.push_back(model_to_json(m));
    return {{"type", "bagging"},
            {"fraction", ensemble.fraction},
            {"data_scale", ensemble.data_scale},
            {"seeds", ensemble.seeds},
            {"learners", learners}};
}

BaggingEnsemble bagging_from_json(const Json& j)
{
    constexpr auto kind = ErrorKind::CorruptModel;
    BaggingEnsemble ens;
    ens.fraction = required<double>(j, "fraction", kind);
    ens.data_scale = required<double>(j, "data_scale", kind);
    ens.seeds = required<std::vector<std::uint64_t>>(j, "seeds", kind);
    const Json& learners = j.contains("learners") ? j.at("learners") : Json();
    if (!learners.is_array() || learners.empty()) fail(kind, "bagging model needs learners");
    for (const auto& m : learners) ens.learners.push_back(model_from_json(m));
    if (!(ens.data_scale > 0.0)) fail(kind, "data_scale must be positive");
    return ens;
}

std::string model_type(const Json& j)
{
    if (!j.is_object()) fail(ErrorKind::CorruptModel, "model file must hold a JSON object");
    const std::string type = j.value("type", std::string("gmm"));
    if (type != "gmm" && type != "tpgmm" && type != "bagging") {
        fail(ErrorKind::CorruptModel, "unknown model type '" + type + "'");
    }
    return type;
}

std::vector<TimeSensitiveConstraint> constraints_from_json(const Json& j, const Manifold& output, double default_epsilon)
{
    constexpr auto kind = ErrorKind::InvalidArgument;
    if (!j.is_array()) fail(kind, "constraints must be a JSON list");
    std::vector<TimeSensitiveConstraint> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string tag = "constraint " + std::to_string(i) + ": ";
        const Json& e = j[i];
        TimeSensitiveConstraint c;
        try {
            c.t_des = required<double>(e, "t_des", kind);
            c.x_des = json_vec(e.contains("x_des") ? e.at("x_des") : Json(), "x_des");
            c.epsilon = e.contains("epsilon") ? required<double>(e, "epsilon", kind) : default_epsilon;
        } catch (const Error& err) {
            fail(kind, tag + err.what());
        }
        if (c.x_des.size() != output.point_dim()) {
            fail(kind, tag + "x_des has " + std::to_string(c.x_des.size()) + " entries, descriptor "
                           + output.to_string() + " needs " + std::to_string(output.point_dim()));
        }
        try {
            output.check_point(c.x_des, 1e-6);
        } catch (const Error& err) {
            fail(kind, tag + err.what());
        }
        for (std::size_t b = 0; b < output.blocks().size(); ++b) {
            if (!output.blocks()[b].is_sphere()) continue;
            auto seg = c.x_des.segment(output.offset(b), output.blocks()[b].dim);
            seg /= seg.norm();
        }
        if (!(c.epsilon > 0.0)) fail(kind, tag + "epsilon must be positive");
        out.push_back(std::move(c));
    }
    return out;
}

Json constraints_to_json(const std::vector<TimeSensitiveConstraint>& constraints)
{
    Json j = Json::array();
    for (const auto& c : constraints) {
        Json e = {{"t_des", c.t_des}, {"x_des", vec_to_json(c.x_des)}, {"epsilon", c.epsilon}};
        if (c.component >= 0) e["component"] = c.component;
        j.push_back(std::move(e));
    }
    return j;
}

FrameFile frames_from_json(const Json& j, const Manifold& output, double default_epsilon)
{
    constexpr auto kind = ErrorKind::InvalidArgument;
    if (!j.is_array() || j.empty()) fail(kind, "frames must be a non-empty JSON list");
    FrameFile file;
    const bool nested = j[0].is_array();
    const Json rows = nested ? j : Json::array({j});
    for (std::size_t d = 0; d < rows.size(); ++d) {
        const Json& row = rows[d];
        if (!row.is_array() || row.empty()) fail(kind, "frame rows must be non-empty lists");
        std::vector<TaskFrame> frames;
        for (std::size_t f = 0; f < row.size(); ++f) {
            try {
                frames.push_back(frame_from_json(row[f], output));
                // Validate the frame against the descriptor once.
                if (d == 0) (void)frame_tangent_map(output, frames.back());
            } catch (const Error& e) {
                throw Error(e.kind(), "frame " + std::to_string(f) + (nested ? " of row " + std::to_string(d) : "")
                                          + ": " + e.what());
            }
        }
        if (!file.frames.empty() && frames.size() != file.frames.front().size()) {
            fail(kind, "every frame row needs the same number of frames");
        }
        file.frames.push_back(std::move(frames));
    }
    for (const auto& e : rows[0]) {
        FrameSpec spec;
        spec.constrained = e.value("constrained", false);
        spec.epsilon = e.contains("epsilon") ? required<double>(e, "epsilon", kind) : default_epsilon;
        if (e.contains("x_des")) {
            spec.x_des = json_vec(e.at("x_des"), "x_des");
            if (spec.x_des.size() != output.point_dim()) fail(kind, "frame x_des does not match the descriptor");
        }
        std::optional<double> anchor;
        if (e.contains("anchor_time")) anchor = required<double>(e, "anchor_time", kind);
        spec.t_des = anchor.value_or(0.0);
        file.specs.push_back(std::move(spec));
        file.anchor_times.push_back(anchor);
    }
    return file;
}

Json frame_to_json(const TaskFrame& frame)
{
    if (frame.dim() == 3) {
        const auto& q = frame.quaternion();
        return {{"rotation", {q.w(), q.x(), q.y(), q.z()}}, {"translation", vec_to_json(frame.translation())}};
    }
    return {{"rotation", mat_to_json(frame.rotation())}, {"translation", vec_to_json(frame.translation())}};
}

}  // namespace tsgmm
