#include "multilevel/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "multilevel/errors.hpp"
#include "multilevel/nested.hpp"
#include "multilevel/sde.hpp"
#include "multilevel/weights.hpp"

namespace multilevel::io {

namespace {

using nlohmann::ordered_json;

double require_number(const ordered_json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(std::string("config: missing numeric field '") + key + "'");
    return j[key].get<double>();
}

template <typename T>
T get_or(const ordered_json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    return j[key].get<T>();
}

std::optional<double> opt_number(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
    return j[key].get<double>();
}

ordered_json weights_to_json(const weights::WeightTable& t) {
    return ordered_json{{"alpha", t.alpha}, {"M", t.M}, {"R", t.R},
                        {"w", t.w},         {"W", t.W}, {"a", t.a},
                        {"b", t.b}};
}

weights::WeightTable weights_from_json(const ordered_json& j) {
    weights::WeightTable t;
    t.alpha = j.at("alpha").get<double>();
    t.M = j.at("M").get<int>();
    t.R = j.at("R").get<int>();
    t.w = j.at("w").get<std::vector<double>>();
    t.W = j.at("W").get<std::vector<double>>();
    t.a = j.at("a").get<std::vector<double>>();
    t.b = j.at("b").get<std::vector<double>>();
    return t;
}

std::string format_opt(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream out;
    out.precision(17);
    out << *v;
    return out.str();
}

std::string format_num(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

ExperimentConfig parse_config(const ordered_json& j) {
    ExperimentConfig cfg;
    if (!j.contains("model") || !j["model"].is_object() || !j["model"].contains("name"))
        throw ConfigError("config: 'model' object with a 'name' is required");
    cfg.model = j["model"];

    if (!j.contains("seed") || !j["seed"].is_number_integer())
        throw ConfigError("config: integer 'seed' is required (no wall-clock default)");
    if (j["seed"].is_number_unsigned()) {
        cfg.seed = j["seed"].get<std::uint64_t>();
    } else {
        const auto s = j["seed"].get<std::int64_t>();
        if (s < 0) throw ConfigError("config: 'seed' must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(s);
    }

    if (j.contains("estimators")) {
        for (const auto& e : j["estimators"])
            cfg.estimators.push_back(calibration::kind_from_name(e.get<std::string>()));
    } else {
        cfg.estimators = {calibration::EstimatorKind::Ml2r, calibration::EstimatorKind::Mlmc};
    }
    if (cfg.estimators.empty()) throw ConfigError("config: 'estimators' must not be empty");

    if (j.contains("epsilon"))
        cfg.epsilons = {require_number(j, "epsilon")};
    else if (j.contains("epsilons"))
        cfg.epsilons = j["epsilons"].get<std::vector<double>>();
    if (cfg.epsilons.empty()) throw ConfigError("config: 'epsilon' or a non-empty 'epsilons' grid is required");
    for (double e : cfg.epsilons)
        if (!(e > 0.0)) throw ConfigError("config: every epsilon must be > 0");

    cfg.M = get_or(j, "M", 2);
    if (cfg.M < 2) throw ConfigError("config: M must be >= 2");
    cfg.replications = get_or(j, "replications", 100);
    if (cfg.replications < 1) throw ConfigError("config: replications must be >= 1");
    cfg.workers = get_or(j, "workers", 1);
    if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
    cfg.budget = get_or(j, "budget", 0.0);
    cfg.pilot_n = get_or<std::int64_t>(j, "pilot_n", 100000);
    if (cfg.pilot_n < 100) throw ConfigError("config: pilot_n must be >= 100");

    if (j.contains("params")) {
        const auto& p = j["params"];
        cfg.alpha = opt_number(p, "alpha");
        cfg.beta = opt_number(p, "beta");
        cfg.h_bold = opt_number(p, "h_bold");
        cfg.var_y0 = opt_number(p, "var_y0");
        cfg.v1 = opt_number(p, "v1");
        cfg.c_hat_mlmc = opt_number(p, "c_hat_mlmc");
        cfg.c_hat_ml2r = opt_number(p, "c_hat_ml2r");
    }
    if (j.contains("output")) {
        cfg.output_dir = get_or<std::string>(j["output"], "dir", cfg.output_dir);
        cfg.output_prefix = get_or<std::string>(j["output"], "prefix", cfg.output_prefix);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["model"] = cfg.model;
    ordered_json kinds = ordered_json::array();
    for (auto k : cfg.estimators) kinds.push_back(calibration::kind_name(k));
    j["estimators"] = kinds;
    j["M"] = cfg.M;
    j["epsilons"] = cfg.epsilons;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["budget"] = cfg.budget;
    j["pilot_n"] = cfg.pilot_n;
    ordered_json p;
    auto put = [&p](const char* key, const std::optional<double>& v) {
        if (v) p[key] = *v;
    };
    put("alpha", cfg.alpha);
    put("beta", cfg.beta);
    put("h_bold", cfg.h_bold);
    put("var_y0", cfg.var_y0);
    put("v1", cfg.v1);
    put("c_hat_mlmc", cfg.c_hat_mlmc);
    put("c_hat_ml2r", cfg.c_hat_ml2r);
    j["params"] = p;
    j["output"] = ordered_json{{"dir", cfg.output_dir}, {"prefix", cfg.output_prefix}};
    return j;
}

namespace {

Model make_model_impl(const ordered_json& mj) {
    Model m;
    m.name = mj.at("name").get<std::string>();
    if (m.name == "nested_cos" || m.name == "nested_cos_smooth") {
        const auto k0 = get_or<std::int64_t>(mj, "k0", 1);
        auto spec = models::gaussian_cos_spec(k0);
        m.h_bold = spec.h_bold();
        const auto oracle = models::gaussian_nested_oracle();
        m.oracle = oracle.i0;
        m.true_c1 = oracle.c[0];
        m.default_alpha = 1.0;
        if (m.name == "nested_cos") {
            m.default_beta = 1.0;
            m.sampler = std::make_unique<models::NestedSampler>(std::move(spec));
        } else {
            m.default_beta = 2.0;
            m.sampler = std::make_unique<models::SmoothNestedSampler>(std::move(spec));
        }
        return m;
    }
    if (m.name == "bs_euler" || m.name == "bs_milstein") {
        const double s0 = get_or(mj, "s0", 100.0);
        const double strike = get_or(mj, "strike", 80.0);
        const double rate = get_or(mj, "rate", 0.1);
        const double vol = get_or(mj, "vol", 0.4);
        const double horizon = get_or(mj, "horizon", 1.0);
        const int base_steps = get_or(mj, "base_steps", 1);
        auto spec = models::black_scholes_call_spec(s0, strike, rate, vol, horizon, base_steps);
        m.h_bold = spec.h_bold();
        m.oracle = models::bs_call_price(s0, strike, rate, vol, horizon);
        m.default_alpha = 1.0;
        if (m.name == "bs_euler") {
            m.default_beta = 1.0;
            m.sampler = std::make_unique<models::EulerSampler>(std::move(spec));
        } else {
            m.default_beta = 2.0;
            m.sampler = std::make_unique<models::MilsteinSampler>(std::move(spec));
        }
        return m;
    }
    if (m.name == "linear_bias") {
        const double i0 = get_or(mj, "i0", 1.0);
        const double slope = get_or(mj, "slope", 1.0);
        m.h_bold = get_or(mj, "h_bold", 1.0);
        m.oracle = i0;
        m.true_c1 = slope;
        m.sampler = std::make_unique<models::LinearBiasSampler>(i0, slope);
        return m;
    }
    throw ConfigError("unknown model: " + m.name);
}

}  // namespace

Model make_model(const ordered_json& mj) {
    Model m = make_model_impl(mj);
    // Value-dependent report columns are omitted when the oracle is
    // suppressed (or genuinely unknown).
    if (!get_or(mj, "use_oracle", true)) m.oracle.reset();
    return m;
}

nlohmann::ordered_json plan_to_json(const calibration::MultilevelPlan& plan) {
    ordered_json j;
    j["schema"] = kPlanSchema;
    j["kind"] = calibration::kind_name(plan.kind);
    j["epsilon"] = plan.epsilon;
    j["M"] = plan.M;
    j["R"] = plan.R;
    j["h"] = plan.h;
    j["q"] = plan.q;
    j["mu_star"] = plan.mu_star;
    j["N"] = plan.N;
    j["level_sizes"] = plan.level_sizes;
    j["refiners"] = plan.refiners;
    j["weights"] = weights_to_json(plan.weights);
    j["params"] = ordered_json{{"alpha", plan.params.alpha},   {"beta", plan.params.beta},
                               {"h_bold", plan.params.h_bold}, {"var_y0", plan.params.var_y0},
                               {"v1", plan.params.v1},         {"c_hat", plan.params.c_hat}};
    j["degenerate"] = plan.degenerate;
    j["warnings"] = plan.warnings;
    return j;
}

calibration::MultilevelPlan plan_from_json(const ordered_json& j) {
    if (get_or<std::string>(j, "schema", "") != kPlanSchema)
        throw ConfigError("plan file has an unexpected schema");
    calibration::MultilevelPlan plan;
    plan.kind = calibration::kind_from_name(j.at("kind").get<std::string>());
    plan.epsilon = j.at("epsilon").get<double>();
    plan.M = j.at("M").get<int>();
    plan.R = j.at("R").get<int>();
    plan.h = j.at("h").get<double>();
    plan.q = j.at("q").get<std::vector<double>>();
    plan.mu_star = j.at("mu_star").get<double>();
    plan.N = j.at("N").get<std::int64_t>();
    plan.level_sizes = j.at("level_sizes").get<std::vector<std::int64_t>>();
    plan.refiners = j.at("refiners").get<std::vector<std::int64_t>>();
    plan.weights = weights_from_json(j.at("weights"));
    const auto& p = j.at("params");
    plan.params.alpha = p.at("alpha").get<double>();
    plan.params.beta = p.at("beta").get<double>();
    plan.params.h_bold = p.at("h_bold").get<double>();
    plan.params.var_y0 = p.at("var_y0").get<double>();
    plan.params.v1 = p.at("v1").get<double>();
    plan.params.c_hat = p.at("c_hat").get<double>();
    plan.degenerate = j.at("degenerate").get<bool>();
    plan.warnings = j.at("warnings").get<std::vector<std::string>>();
    return plan;
}

nlohmann::ordered_json study_to_json(const engine::ReplicationStudy& study) {
    ordered_json j;
    j["schema"] = kStudySchema;
    j["plan"] = plan_to_json(study.plan);
    j["master_seed"] = study.master_seed;
    if (study.oracle) j["oracle"] = *study.oracle;
    ordered_json runs = ordered_json::array();
    for (const auto& run : study.runs) {
        ordered_json r;
        r["seed"] = run.seed;
        r["estimate"] = run.estimate;
        r["total_cost_units"] = run.total_cost_units;
        ordered_json levels = ordered_json::array();
        for (const auto& ls : run.per_level)
            levels.push_back(ordered_json{{"count", ls.count},
                                          {"mean", ls.mean},
                                          {"variance", ls.variance},
                                          {"cost_units", ls.cost_units}});
        r["per_level"] = levels;
        runs.push_back(r);
    }
    j["runs"] = runs;
    return j;
}

engine::ReplicationStudy study_from_json(const ordered_json& j) {
    if (get_or<std::string>(j, "schema", "") != kStudySchema)
        throw ConfigError("study file has an unexpected schema");
    engine::ReplicationStudy study;
    study.plan = plan_from_json(j.at("plan"));
    study.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("oracle")) study.oracle = j.at("oracle").get<double>();
    for (const auto& r : j.at("runs")) {
        engine::EstimatorResult run;
        run.seed = r.at("seed").get<std::uint64_t>();
        run.estimate = r.at("estimate").get<double>();
        run.total_cost_units = r.at("total_cost_units").get<double>();
        for (const auto& l : r.at("per_level")) {
            engine::LevelStats ls;
            ls.count = l.at("count").get<std::int64_t>();
            ls.mean = l.at("mean").get<double>();
            ls.variance = l.at("variance").get<double>();
            ls.cost_units = l.at("cost_units").get<double>();
            run.per_level.push_back(ls);
        }
        run.plan = study.plan;
        study.runs.push_back(std::move(run));
    }
    return study;
}

nlohmann::ordered_json study_report_to_json(const analysis::StudyReport& report) {
    return ordered_json{{"epsilon", report.epsilon},
                        {"replications", report.replications},
                        {"empirical_rmse", report.empirical_rmse},
                        {"empirical_bias", report.empirical_bias},
                        {"m_hat", report.m_hat},
                        {"empirical_sd", report.empirical_sd},
                        {"skewness", report.skewness},
                        {"excess_kurtosis", report.excess_kurtosis},
                        {"ks_distance", report.ks_distance},
                        {"mean_cost", report.mean_cost},
                        {"median_cost", report.median_cost}};
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << kCsvSchema << "\n";
    for (const auto& r : rows) {
        out << format_num(r.epsilon) << ',' << calibration::kind_name(r.kind) << ','
            << format_opt(r.rmse) << ',' << format_opt(r.bias) << ',' << format_opt(r.m_hat) << ','
            << format_num(r.cost_theoretical) << ',' << format_num(r.cost_measured) << ','
            << format_num(r.sigma_hat) << "\n";
    }
    return out.str();
}

std::string weight_table_csv(const weights::WeightTable& table) {
    const double residual = weights::vandermonde_residual(table);
    std::ostringstream out;
    out << "j,a,b,w,W,residual\n";
    for (int j = 1; j <= table.R; ++j) {
        out << j << ',' << (table.a.empty() ? "" : format_num(table.a[j - 1])) << ','
            << (table.b.empty() ? "" : format_num(table.b[j - 1])) << ','
            << format_num(table.w[j - 1]) << ',' << format_num(table.W[j - 1]) << ','
            << format_num(residual) << "\n";
    }
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace multilevel::io
