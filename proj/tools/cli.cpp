#include "cli.hpp"

#include "tsgmm/bagging.hpp"
#include "tsgmm/constrained_em.hpp"
#include "tsgmm/data_io.hpp"
#include "tsgmm/errors.hpp"
#include "tsgmm/evaluation.hpp"
#include "tsgmm/format.hpp"
#include "tsgmm/regression.hpp"
#include "tsgmm/serialization.hpp"
#include "tsgmm/task_param.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace tsgmm::cli {
namespace {

namespace fs = std::filesystem;

enum class Type { Int, UInt, Real, Text };

struct Key {
    const char* name;  // config-file key
    const char* flag;  // CLI11 option spec
    Type type;
    const char* help;
};

const std::vector<Key>& keys()
{
    static const std::vector<Key> list = {
        {"k", "--k", Type::Int, "number of Gaussian components"},
        {"epsilon", "--epsilon", Type::Real, "activation threshold for constraints"},
        {"seed", "--seed", Type::UInt, "random seed"},
        {"method", "--method", Type::Text, "em, cem or bagging"},
        {"out_dir", "--out-dir", Type::Text, "output directory"},
        {"data", "--data", Type::Text, "demonstration CSV"},
        {"manifold", "--manifold", Type::Text, "output descriptor, e.g. e2 or e3,s4"},
        {"constraints", "--constraints", Type::Text, "constraints JSON"},
        {"frames", "--frames", Type::Text, "task frames JSON"},
        {"model", "--model", Type::Text, "model JSON"},
        {"trajectory", "--trajectory", Type::Text, "trajectory CSV"},
        {"kind", "--kind", Type::Text, "synthetic family: sine, letter, pick_place"},
        {"T", "-T,--grid", Type::Int, "number of reproduction time steps"},
        {"duration", "--duration", Type::Real, "normalized demonstration duration"},
        {"tol", "--tol", Type::Real, "EM relative tolerance"},
        {"max_iter", "--max-iter", Type::Int, "EM iteration cap"},
        {"gn_max_iter", "--gn-max-iter", Type::Int, "Gauss-Newton iteration cap"},
        {"gn_tol", "--gn-tol", Type::Real, "Gauss-Newton step tolerance"},
        {"regularization", "--regularization", Type::Real, "relative covariance regularization"},
        {"learners", "--learners", Type::Int, "bagging base learners"},
        {"fraction", "--fraction", Type::Real, "bagging subset fraction"},
        {"demos", "--demos", Type::Int, "synthetic demonstrations"},
        {"samples", "--samples", Type::Int, "synthetic samples per demonstration"},
        {"noise", "--noise", Type::Real, "synthetic noise level"},
    };
    return list;
}

Json defaults()
{
    return {{"k", 6},       {"epsilon", 1e-3},       {"seed", 0},      {"method", "em"},       {"out_dir", "."},
            {"T", 200},     {"duration", 60.0},      {"tol", 1e-6},    {"max_iter", 200},      {"gn_max_iter", 10},
            {"gn_tol", 1e-10}, {"regularization", 1e-6}, {"learners", 10}, {"fraction", 0.8}, {"demos", 3},
            {"samples", 200}, {"noise", 0.01},        {"kind", "letter"}};
}

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::InvalidArgument, msg); }

Json typed_value(const Key& key, const Json& raw)
{
    switch (key.type) {
    case Type::Int:
        if (raw.is_number_integer()) return raw;
        break;
    case Type::UInt:
        if (raw.is_number_unsigned() || (raw.is_number_integer() && raw.get<long long>() >= 0)) return raw;
        break;
    case Type::Real:
        if (raw.is_number()) return raw.get<double>();
        break;
    case Type::Text:
        if (raw.is_string()) return raw;
        break;
    }
    config_error(std::string("config key '") + key.name + "' has the wrong type");
}

Json parse_flag(const Key& key, const std::string& text)
{
    switch (key.type) {
    case Type::Int:
    case Type::UInt: {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size() || text.empty() || (key.type == Type::UInt && v < 0)) {
            config_error(std::string("option ") + key.flag + " expects an integer, got '" + text + "'");
        }
        return key.type == Type::UInt ? Json(static_cast<std::uint64_t>(v)) : Json(v);
    }
    case Type::Real: {
        double v = 0.0;
        if (!parse_double(text, v)) {
            config_error(std::string("option ") + key.flag + " expects a number, got '" + text + "'");
        }
        return v;
    }
    case Type::Text:
        return text;
    }
    return text;
}

/// Defaults, then the config file, then explicit flags.
class Settings {
public:
    explicit Settings(Json values) : values_(std::move(values)) {}

    int integer(const char* key, int min) const
    {
        const long long v = values_.at(key).get<long long>();
        if (v < min || v > 100000000) {
            config_error(std::string(key) + " must be at least " + std::to_string(min));
        }
        return static_cast<int>(v);
    }
    double positive(const char* key) const
    {
        const double v = values_.at(key).get<double>();
        if (!(v > 0.0) || !std::isfinite(v)) config_error(std::string(key) + " must be positive");
        return v;
    }
    double non_negative(const char* key) const
    {
        const double v = values_.at(key).get<double>();
        if (!(v >= 0.0) || !std::isfinite(v)) config_error(std::string(key) + " must be non-negative");
        return v;
    }
    std::uint64_t seed() const { return values_.at("seed").get<std::uint64_t>(); }
    std::string text(const char* key) const { return values_.at(key).get<std::string>(); }
    bool has(const char* key) const { return values_.contains(key) && !values_.at(key).is_null(); }
    std::string path(const char* key) const
    {
        if (!has(key)) config_error(std::string("missing required option --") + key);
        return text(key);
    }

    Manifold output() const
    {
        const std::string d = path("manifold");
        return Manifold::parse(d);
    }

    EmConfig em() const
    {
        EmConfig c;
        c.tol = positive("tol");
        c.max_iter = integer("max_iter", 1);
        c.gn_max_iter = integer("gn_max_iter", 1);
        c.gn_tol = positive("gn_tol");
        c.regularization = values_.at("regularization").get<double>();
        if (!(c.regularization >= 0.0)) config_error("regularization must be non-negative");
        return c;
    }

    std::string method() const
    {
        const std::string m = text("method");
        if (m != "em" && m != "cem" && m != "bagging") {
            config_error("method must be em, cem or bagging (got '" + m + "')");
        }
        return m;
    }

    fs::path out_dir() const
    {
        const fs::path dir = text("out_dir");
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
        return dir;
    }

private:
    Json values_;
};

std::vector<RawDemonstration> load_demos(const Settings& s, const Manifold& output)
{
    auto demos = load_csv(s.path("data"), output);
    if (demos.empty()) config_error("no demonstrations in " + s.path("data"));
    align_quaternions(demos, output);
    return rescale_times(demos, s.positive("duration"));
}

std::vector<TimeSensitiveConstraint> load_constraints(const Settings& s, const Manifold& output)
{
    if (!s.has("constraints")) return {};
    return constraints_from_json(read_json_file(s.path("constraints")), output, s.positive("epsilon"));
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

Json constraint_report(const CemResult& res)
{
    Json list = Json::array();
    for (std::size_t i = 0; i < res.constraints.size(); ++i) {
        const auto& c = res.constraints[i];
        const auto h = scaling_activation(res.model, res.scaling.gammas, c.t_des);
        double others = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) {
            if (static_cast<int>(k) != c.component) others = std::max(others, h[k]);
        }
        list.push_back({{"t_des", c.t_des},
                        {"x_des", vec_to_json(c.x_des)},
                        {"epsilon", c.epsilon},
                        {"component", c.component},
                        {"achieved_activation", res.scaling.achieved_activation[i]},
                        {"activation_bound", 1.0 - (res.model.size() - 1) * c.epsilon},
                        {"max_other_activation", others},
                        {"tsc_error", res.tsc_errors[i]},
                        {"tsc_bound", res.tsc_bounds[i]}});
    }
    return list;
}

Json scaling_report(const ScalingSolution& s)
{
    return {{"gammas", s.gammas},
            {"feasible", s.feasible},
            {"sweeps", s.sweeps},
            {"log_likelihood", s.log_likelihood},
            {"unscaled_log_likelihood", s.unscaled_log_likelihood}};
}

std::vector<ConditionalResult> fused_rows(const TpTrajectory& tr)
{
    std::vector<ConditionalResult> rows;
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
        ConditionalResult r;
        r.t = tr.times[n];
        r.mean = tr.fused[n].mean;
        r.covariance = tr.fused[n].covariance;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string trajectory_csv(const Manifold& output, const std::vector<ConditionalResult>& rows)
{
    std::ostringstream os;
    write_trajectory_csv(os, output, rows);
    return os.str();
}

std::string weights_csv(const TpTrajectory& tr)
{
    std::ostringstream os;
    os << 't';
    for (Eigen::Index f = 0; f < tr.weights.rows(); ++f) os << ",w" << f;
    os << '\n';
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
        os << format_double(tr.times[n]);
        for (Eigen::Index f = 0; f < tr.weights.rows(); ++f) {
            os << ',' << format_double(tr.weights(f, static_cast<Eigen::Index>(n)));
        }
        os << '\n';
    }
    return os.str();
}

CemConfig cem_config(const Settings& s)
{
    CemConfig c;
    c.em = s.em();
    return c;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const Settings& s, std::ostream& out)
{
    const Manifold output = s.output();
    const auto demos = load_demos(s, output);
    const DemonstrationSet data = to_demonstration_set(demos, output);
    const int k = s.integer("k", 1);
    const std::string method = s.method();
    const double duration = s.positive("duration");
    const fs::path dir = s.out_dir();

    Json model;
    Json report = {{"method", method}, {"K", k}, {"descriptor", output.to_string()}, {"samples", data.size()},
                   {"demonstrations", demos.size()}};

    if (s.has("frames")) {
        if (method == "bagging") config_error("bagging does not support task frames");
        FrameFile file = frames_from_json(read_json_file(s.path("frames")), output, s.positive("epsilon"));
        for (std::size_t f = 0; f < file.specs.size(); ++f) {
            if (file.specs[f].constrained && !file.anchor_times[f]) {
                config_error("constrained frame " + std::to_string(f) + " needs anchor_time");
            }
        }
        const TpGmmModel tp = tpgmm_fit(data, file.frames, k, file.specs, cem_config(s));
        model = tp_model_to_json(tp);
        report["method"] = "tpgmm";
        Json frames = Json::array();
        for (const auto& f : tp.frames) {
            std::vector<double> gammas;
            for (const auto& c : f.model.components) gammas.push_back(c.scale);
            frames.push_back({{"constrained", f.constrained},
                              {"lambda", f.lambda},
                              {"anchor_time", f.anchor_time},
                              {"gammas", gammas}});
        }
        report["frames"] = frames;
    } else if (method == "em") {
        const FitResult fit = fit_em(data, k, s.em());
        model = model_to_json(fit.model);
        report["log_likelihood_trace"] = fit.trace;
        report["iterations"] = fit.iterations;
        report["converged"] = fit.converged;
    } else if (method == "cem") {
        auto constraints = load_constraints(s, output);
        if (constraints.empty()) config_error("method cem needs at least one constraint (--constraints)");
        const CemResult res = cem_fit(data, k, constraints, cem_config(s));
        model = model_to_json(res.model);
        report["log_likelihood_trace"] = res.trace;
        report["iterations"] = res.iterations;
        report["converged"] = res.converged;
        report["scaling"] = scaling_report(res.scaling);
        report["constraints"] = constraint_report(res);
    } else {
        BaggingConfig cfg;
        cfg.learners = s.integer("learners", 1);
        cfg.fraction = s.positive("fraction");
        cfg.em = s.em();
        const auto constraints = load_constraints(s, output);
        const BaggingEnsemble ens = bagging_fit(data, k, s.seed(), cfg);
        model = bagging_to_json(ens);
        model["constraints"] = constraints_to_json(constraints);
        report["learners"] = cfg.learners;
        report["seed"] = s.seed();
        report["subset_seeds"] = ens.seeds;
        report["blend_weights"] = bagging_weights(ens, constraints);
        report["note"] = "surrogate blend weights exp(-d^2/sigma^2), sigma = data scale / 10";
    }
    model["duration"] = duration;

    write_json_file(dir / "model.json", model);
    write_json_file(dir / "report.json", report);
    out << (dir / "model.json").string() << '\n';
    return 0;
}

// ---- reproduce -----------------------------------------------------------

double model_duration(const Json& j, const Settings& s)
{
    if (j.contains("duration") && j.at("duration").is_number()) {
        const double d = j.at("duration").get<double>();
        if (d > 0.0) return d;
    }
    return s.positive("duration");
}

int cmd_reproduce(const Settings& s, std::ostream& out)
{
    const Json j = read_json_file(s.path("model"));
    const std::string type = model_type(j);
    const auto times = time_grid(0.0, model_duration(j, s), s.integer("T", 1));
    const fs::path dir = s.out_dir();

    if (type == "gmm") {
        if (s.has("frames")) config_error("plain GMM models do not take task frames");
        const GmmModel model = model_from_json(j);
        write_text(dir / "trajectory.csv", trajectory_csv(model.output(), reproduce(model, times)));
    } else if (type == "tpgmm") {
        const TpGmmModel model = tp_model_from_json(j);
        std::vector<TaskFrame> frames;
        if (s.has("frames")) {
            FrameFile file = frames_from_json(read_json_file(s.path("frames")), model.output);
            if (file.frames.size() != 1) config_error("reproduce takes a single list of run-time frames");
            frames = file.frames.front();
        } else {
            config_error("task-parameterized model needs --frames");
        }
        if (frames.size() != model.frames.size()) {
            config_error("model has " + std::to_string(model.frames.size()) + " frames but the frames file has "
                         + std::to_string(frames.size()));
        }
        const TpTrajectory tr = tpgmm_reproduce(model, frames, times);
        write_text(dir / "trajectory.csv", trajectory_csv(model.output, fused_rows(tr)));
        write_text(dir / "weights.csv", weights_csv(tr));
    } else {
        const BaggingEnsemble ens = bagging_from_json(j);
        const Manifold output = ens.learners.front().output();
        std::vector<TimeSensitiveConstraint> constraints;
        if (j.contains("constraints")) constraints = constraints_from_json(j.at("constraints"), output);
        const BaggingTrajectory tr = bagging_reproduce(ens, times, constraints);
        write_text(dir / "trajectory.csv", trajectory_csv(output, tr.rows));
    }
    out << (dir / "trajectory.csv").string() << '\n';
    return 0;
}

// ---- evaluate ------------------------------------------------------------

Json pose_json(const PoseError& e)
{
    return {{"position", e.position}, {"orientation", e.orientation}, {"geodesic", e.geodesic}};
}

Json metrics_json(const Metrics& m, const std::vector<TimeSensitiveConstraint>& constraints)
{
    Json errs = Json::array();
    for (std::size_t i = 0; i < m.constraint_errors.size(); ++i) {
        Json e = pose_json(m.constraint_errors[i]);
        e["t_des"] = constraints[i].t_des;
        errs.push_back(std::move(e));
    }
    return {{"rmse_nearest_demo", m.rmse},
            {"nearest_demo", m.nearest_demo},
            {"constraint_errors", errs},
            {"start_error", pose_json(m.start_error)},
            {"end_error", pose_json(m.end_error)}};
}

int cmd_evaluate(const Settings& s, std::ostream& out)
{
    const Manifold output = s.output();
    std::ifstream in(s.path("trajectory"));
    if (!in) fail(ErrorKind::Io, "cannot open " + s.path("trajectory"));
    const Trajectory tr = read_trajectory_csv(in, output);
    const auto demos = load_demos(s, output);
    const auto constraints = load_constraints(s, output);
    const Json metrics = metrics_json(evaluate(output, tr, demos, constraints), constraints);
    write_json_file(s.out_dir() / "metrics.json", metrics);
    out << metrics.dump(2) << '\n';
    return 0;
}

// ---- compare -------------------------------------------------------------

int cmd_compare(const Settings& s, std::ostream& out)
{
    const Manifold output = s.output();
    const auto demos = load_demos(s, output);
    const DemonstrationSet data = to_demonstration_set(demos, output);
    const auto constraints = load_constraints(s, output);
    if (constraints.empty()) config_error("compare needs constraints (--constraints)");
    const int k = s.integer("k", 1);
    const auto times = time_grid(0.0, s.positive("duration"), s.integer("T", 1));
    const fs::path dir = s.out_dir();

    std::vector<std::pair<std::string, std::vector<ConditionalResult>>> runs;
    runs.emplace_back("em", reproduce(fit_em(data, k, s.em()).model, times));
    runs.emplace_back("cem", reproduce(cem_fit(data, k, constraints, cem_config(s)).model, times));
    BaggingConfig cfg;
    cfg.learners = s.integer("learners", 1);
    cfg.fraction = s.positive("fraction");
    cfg.em = s.em();
    runs.emplace_back("bagging", bagging_reproduce(bagging_fit(data, k, s.seed(), cfg), times, constraints).rows);

    Json table = Json::array();
    std::ostringstream csv;
    csv << "method,rmse,max_constraint_error,mean_constraint_error,end_error\n";
    for (const auto& [name, rows] : runs) {
        const Trajectory tr = trajectory_from(rows);
        const Metrics m = evaluate(output, tr, demos, constraints);
        std::vector<double> exact;
        for (const auto& e : m.constraint_errors) exact.push_back(e.geodesic);
        const double worst = *std::max_element(exact.begin(), exact.end());
        double mean = 0.0;
        for (double e : exact) mean += e / static_cast<double>(exact.size());
        Json row = metrics_json(m, constraints);
        row["method"] = name;
        row["max_constraint_error"] = worst;
        if (name == "bagging") row["note"] = "surrogate baseline";
        table.push_back(std::move(row));
        csv << name << ',' << format_double(m.rmse) << ',' << format_double(worst) << ',' << format_double(mean) << ','
            << format_double(m.end_error.geodesic) << '\n';
        write_text(dir / ("trajectory_" + name + ".csv"), trajectory_csv(output, rows));
    }
    write_json_file(dir / "compare.json", Json{{"K", k}, {"methods", table}});
    write_text(dir / "compare.csv", csv.str());
    out << csv.str();
    return 0;
}

// ---- synth ---------------------------------------------------------------

int cmd_synth(const Settings& s, std::ostream& out)
{
    SynthParams p;
    p.demos = s.integer("demos", 1);
    p.samples = s.integer("samples", 2);
    p.noise = s.non_negative("noise");
    p.duration = s.positive("duration");
    const SynthData d = synth_generate(s.text("kind"), p, s.seed());
    const fs::path dir = s.out_dir();
    std::ostringstream csv;
    write_csv(csv, d.demos, d.output);
    write_text(dir / "demos.csv", csv.str());
    if (!d.frames.empty()) {
        Json rows = Json::array();
        for (const auto& row : d.frames) {
            Json list = Json::array();
            for (std::size_t f = 0; f < row.size(); ++f) {
                Json e = frame_to_json(row[f]);
                e["constrained"] = true;
                e["anchor_time"] = d.frame_times[f];
                list.push_back(std::move(e));
            }
            rows.push_back(std::move(list));
        }
        write_json_file(dir / "frames.json", rows);
    }
    out << d.output.to_string() << '\n';
    return 0;
}

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Time-sensitive constrained GMM trajectory learning"};
    app.require_subcommand(1);
    std::string config_path;
    std::map<std::string, std::string> flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config with flat keys");
        for (const Key& key : keys()) {
            sub->add_option(key.flag, flags[key.name], key.help);
        }
    };
    CLI::App* train = app.add_subcommand("train", "fit a model (em, cem, bagging, or task-parameterized with --frames)");
    CLI::App* repro = app.add_subcommand("reproduce", "regress a trajectory from a model");
    CLI::App* eval = app.add_subcommand("evaluate", "metrics of a trajectory against demonstrations");
    CLI::App* comp = app.add_subcommand("compare", "em vs cem vs bagging on one dataset");
    CLI::App* synth = app.add_subcommand("synth", "write synthetic demonstrations");
    for (CLI::App* sub : {train, repro, eval, comp, synth}) add_common(sub);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        Json values = defaults();
        if (!config_path.empty()) {
            const Json file = read_json_file(config_path);
            if (!file.is_object()) config_error("config file must hold a JSON object");
            for (const auto& [name, raw] : file.items()) {
                const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return name == k.name; });
                if (it == keys().end()) config_error("unknown config key '" + name + "'");
                values[name] = typed_value(*it, raw);
            }
        }
        for (CLI::App* sub : {train, repro, eval, comp, synth}) {
            if (!sub->parsed()) continue;
            for (const Key& key : keys()) {
                std::string spec = key.flag;
                const std::string name = spec.substr(spec.rfind("--"));
                if (sub->get_option(name)->count() > 0) values[key.name] = parse_flag(key, flags[key.name]);
            }
        }
        const Settings settings(values);
        if (train->parsed()) return cmd_train(settings, out);
        if (repro->parsed()) return cmd_reproduce(settings, out);
        if (eval->parsed()) return cmd_evaluate(settings, out);
        if (comp->parsed()) return cmd_compare(settings, out);
        return cmd_synth(settings, out);
    } catch (const Error& e) {
        err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
        return is_numerical(e.kind()) ? 3 : 2;
    } catch (const Json::exception& e) {
        err << "error: invalid-argument: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: internal: " << one_line(e.what()) << '\n';
        return 2;
    }
}

}  // namespace tsgmm::cli
