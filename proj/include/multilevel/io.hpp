#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multilevel/analysis.hpp"
#include "multilevel/calibration.hpp"
#include "multilevel/engine.hpp"

namespace multilevel::io {

// File formats. Plans and studies are JSON (machine-readable, byte-stable for
// a given configuration); summary tables are CSV with the fixed schema below.
inline constexpr const char* kCsvSchema =
    "epsilon,kind,rmse,bias,m_hat,cost_theoretical,cost_measured,sigma_hat";
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kPlanSchema = "multilevel-plan-v1";
inline constexpr const char* kStudySchema = "multilevel-study-v1";

/// Everything a CLI invocation needs. The seed is mandatory: there is no
/// wall-clock fallback, so equal configs give byte-identical outputs.
struct ExperimentConfig {
    nlohmann::ordered_json model;           ///< {"name": ..., model parameters}
    std::vector<calibration::EstimatorKind> estimators;
    int M = 2;
    std::vector<double> epsilons;
    int replications = 100;
    std::uint64_t seed = 0;
    int workers = 1;
    double budget = 0.0;                    ///< cost-unit cap, 0 = unlimited
    std::int64_t pilot_n = 100000;
    // Structural overrides; unset values are pilot-estimated or defaulted.
    std::optional<double> alpha, beta, h_bold, var_y0, v1;
    std::optional<double> c_hat_mlmc;       ///< default: |pilot c1|
    std::optional<double> c_hat_ml2r;       ///< default: 1
    std::string output_dir = "out";
    std::string output_prefix = "experiment";
};

ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// A level-sampler family constructed from a config, with its structural
/// defaults and, when available, the analytic value and bias constant.
struct Model {
    std::unique_ptr<engine::LevelSampler> sampler;
    std::string name;
    double h_bold = 1.0;
    double default_alpha = 1.0;
    double default_beta = 1.0;
    std::optional<double> oracle;     ///< true value, when known in closed form
    std::optional<double> true_c1;    ///< first bias coefficient, when known
};

/// Known model names: nested_cos, nested_cos_smooth, bs_euler, bs_milstein,
/// constant, linear_bias. Throws ConfigError for anything else.
Model make_model(const nlohmann::ordered_json& model_config);

nlohmann::ordered_json plan_to_json(const calibration::MultilevelPlan& plan);
calibration::MultilevelPlan plan_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json study_to_json(const engine::ReplicationStudy& study);
engine::ReplicationStudy study_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json study_report_to_json(const analysis::StudyReport& report);

/// One CSV row in the fixed schema; unknown-oracle columns are left empty.
struct SummaryRow {
    double epsilon = 0.0;
    calibration::EstimatorKind kind;
    std::optional<double> rmse, bias, m_hat;
    double cost_theoretical = 0.0;
    double cost_measured = 0.0;
    double sigma_hat = 0.0;
};
std::string summary_csv(const std::vector<SummaryRow>& rows);

std::string weight_table_csv(const weights::WeightTable& table);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace multilevel::io
