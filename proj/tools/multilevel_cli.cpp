// Command-line front end: calibrate plans, run replicated studies, estimate
// structural parameters, and emit machine-readable results.
//
// Exit codes: 0 success, 2 config error, 3 budget exceeded, 4 numerical failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "multilevel/analysis.hpp"
#include "multilevel/calibration.hpp"
#include "multilevel/engine.hpp"
#include "multilevel/errors.hpp"
#include "multilevel/io.hpp"
#include "multilevel/weights.hpp"

namespace {

namespace fs = std::filesystem;
using multilevel::analysis::StudyReport;
using multilevel::calibration::EstimatorKind;
using multilevel::calibration::MultilevelPlan;
using multilevel::calibration::StructuralParams;
using nlohmann::ordered_json;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<double> budget;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--workers", flags.workers, "override the worker count");
    cmd->add_option("--out", flags.out_dir, "override the output directory");
    cmd->add_option("--budget", flags.budget, "override the cost budget (cost units)");
}

multilevel::io::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
    auto cfg = multilevel::io::load_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.out_dir) cfg.output_dir = *flags.out_dir;
    if (flags.budget) cfg.budget = *flags.budget;
    return cfg;
}

struct ResolvedParams {
    StructuralParams mlmc;
    StructuralParams ml2r;
    std::optional<multilevel::analysis::PilotReport> pilot;
    std::vector<std::string> notes;
};

// Structural parameters per estimator kind: explicit config values win,
// anything missing is pilot-estimated from the model.
ResolvedParams resolve_params(const multilevel::io::ExperimentConfig& cfg,
                              const multilevel::io::Model& model) {
    ResolvedParams out;
    StructuralParams base;
    base.alpha = cfg.alpha.value_or(model.default_alpha);
    base.beta = cfg.beta.value_or(model.default_beta);
    base.h_bold = cfg.h_bold.value_or(model.h_bold);

    const bool need_pilot = !cfg.var_y0 || !cfg.v1 || !cfg.c_hat_mlmc;
    if (need_pilot) {
        out.pilot = multilevel::analysis::estimate_structural(*model.sampler, base.h_bold, cfg.M,
                                                              base.beta, cfg.pilot_n, cfg.seed);
        out.notes.push_back("pilot: var_y0 = " + std::to_string(out.pilot->var_y0_hat) +
                            ", v1 = " + std::to_string(out.pilot->v1_hat) +
                            ", c1 = " + std::to_string(out.pilot->c1_hat));
    }
    base.var_y0 = cfg.var_y0 ? *cfg.var_y0 : out.pilot->var_y0_hat;
    base.v1 = cfg.v1 ? *cfg.v1 : out.pilot->v1_hat;

    out.mlmc = base;
    if (cfg.c_hat_mlmc) {
        out.mlmc.c_hat = *cfg.c_hat_mlmc;
    } else if (out.pilot && std::abs(out.pilot->c1_hat) > 0.0 &&
               std::isfinite(out.pilot->c1_std_error)) {
        out.mlmc.c_hat = std::abs(out.pilot->c1_hat);
    } else {
        out.mlmc.c_hat = 1.0;
        out.notes.push_back("c1 pilot unavailable, using c_hat = 1");
    }
    out.ml2r = base;
    out.ml2r.c_hat = cfg.c_hat_ml2r.value_or(1.0);
    return out;
}

const StructuralParams& params_for(const ResolvedParams& p, EstimatorKind kind) {
    return kind == EstimatorKind::Mlmc ? p.mlmc : p.ml2r;
}

std::string eps_tag(std::size_t index) { return "eps" + std::to_string(index); }

int cmd_weights(double alpha, int M, int R, const std::optional<std::string>& out_path) {
    const auto table = multilevel::weights::ml2r_weights(alpha, M, R);
    const std::string csv = multilevel::io::weight_table_csv(table);
    std::cout << csv;
    std::cout << "# vandermonde_residual = " << multilevel::weights::vandermonde_residual(table)
              << "\n";
    if (out_path) multilevel::io::write_text_file(*out_path, csv);
    return 0;
}

int cmd_calibrate(const CommonFlags& flags) {
    const auto cfg = load_with_overrides(flags);
    const auto model = multilevel::io::make_model(cfg.model);
    const auto params = resolve_params(cfg, model);
    for (const auto& note : params.notes) std::cout << "# " << note << "\n";

    std::cout << "epsilon,kind,R,h,N,mu_star,cost_theoretical\n";
    for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
        for (auto kind : cfg.estimators) {
            const auto plan =
                multilevel::calibration::calibrate(cfg.epsilons[e], params_for(params, kind),
                                                   cfg.M, kind);
            for (const auto& w : plan.warnings) std::cout << "# warning: " << w << "\n";
            std::cout << plan.epsilon << ',' << multilevel::calibration::kind_name(kind) << ','
                      << plan.R << ',' << plan.h << ',' << plan.N << ',' << plan.mu_star << ','
                      << multilevel::calibration::theoretical_cost(plan) << "\n";
            const fs::path path = fs::path(cfg.output_dir) /
                                  (cfg.output_prefix + "_" +
                                   multilevel::calibration::kind_name(kind) + "_" + eps_tag(e) +
                                   ".plan.json");
            multilevel::io::write_text_file(path, multilevel::io::plan_to_json(plan).dump(2) + "\n");
        }
    }
    return 0;
}

int cmd_pilot(const CommonFlags& flags) {
    const auto cfg = load_with_overrides(flags);
    const auto model = multilevel::io::make_model(cfg.model);
    const double h_bold = cfg.h_bold.value_or(model.h_bold);
    const double beta = cfg.beta.value_or(model.default_beta);
    const auto pilot = multilevel::analysis::estimate_structural(*model.sampler, h_bold, cfg.M,
                                                                 beta, cfg.pilot_n, cfg.seed);
    ordered_json j{{"model", model.name},
                   {"h_bold", h_bold},
                   {"beta_assumed", beta},
                   {"n", pilot.n},
                   {"var_y0_hat", pilot.var_y0_hat},
                   {"v1_hat", pilot.v1_hat},
                   {"theta_hat", pilot.theta_hat},
                   {"c1_hat", pilot.c1_hat},
                   {"c1_std_error", pilot.c1_std_error},
                   {"mean_coarse", pilot.mean_coarse},
                   {"mean_fine", pilot.mean_fine},
                   {"var_coarse", pilot.var_coarse},
                   {"var_fine", pilot.var_fine}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

struct StudyOutcome {
    MultilevelPlan plan;
    std::optional<StudyReport> report;
    double mean_measured_cost = 0.0;
    double sigma_hat = 0.0;
};

StudyOutcome execute_study(const multilevel::io::ExperimentConfig& cfg,
                           const multilevel::io::Model& model, const ResolvedParams& params,
                           EstimatorKind kind, double epsilon, const fs::path& study_path) {
    StudyOutcome out;
    out.plan = multilevel::calibration::calibrate(epsilon, params_for(params, kind), cfg.M, kind);
    const double projected =
        multilevel::calibration::theoretical_cost(out.plan) * cfg.replications;
    if (cfg.budget > 0.0 && projected > cfg.budget)
        throw multilevel::BudgetExceeded("projected cost " + std::to_string(projected) +
                                         " exceeds budget " + std::to_string(cfg.budget));

    auto study = multilevel::engine::run_replicated(out.plan, *model.sampler, cfg.seed,
                                                    cfg.replications, cfg.workers);
    study.oracle = model.oracle;

    double cost_sum = 0.0;
    std::vector<double> estimates;
    estimates.reserve(study.runs.size());
    for (const auto& run : study.runs) {
        cost_sum += multilevel::engine::measured_cost(run);
        estimates.push_back(run.estimate);
    }
    out.mean_measured_cost = cost_sum / static_cast<double>(study.runs.size());
    out.sigma_hat = estimates.size() > 1
                        ? std::sqrt(multilevel::analysis::sample_variance(estimates)) / epsilon
                        : 0.0;

    ordered_json study_json = multilevel::io::study_to_json(study);
    if (model.oracle && study.runs.size() > 1) {
        out.report = multilevel::analysis::study_statistics(study, *model.oracle);
        study_json["statistics"] = multilevel::io::study_report_to_json(*out.report);
    }
    multilevel::io::write_text_file(study_path, study_json.dump(2) + "\n");
    return out;
}

int cmd_run(const CommonFlags& flags, bool study_mode) {
    const auto cfg = load_with_overrides(flags);
    const auto model = multilevel::io::make_model(cfg.model);
    const auto params = resolve_params(cfg, model);
    for (const auto& note : params.notes) std::cout << "# " << note << "\n";

    std::vector<multilevel::io::SummaryRow> rows;
    for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
        for (auto kind : cfg.estimators) {
            const fs::path study_path =
                fs::path(cfg.output_dir) /
                (cfg.output_prefix + "_" + multilevel::calibration::kind_name(kind) + "_" +
                 eps_tag(e) + ".study.json");
            const auto outcome = execute_study(cfg, model, params, kind, cfg.epsilons[e],
                                               study_path);
            multilevel::io::SummaryRow row;
            row.epsilon = cfg.epsilons[e];
            row.kind = kind;
            row.cost_theoretical = multilevel::calibration::theoretical_cost(outcome.plan);
            row.cost_measured = outcome.mean_measured_cost;
            row.sigma_hat = outcome.sigma_hat;
            if (outcome.report) {
                row.rmse = outcome.report->empirical_rmse;
                row.bias = outcome.report->empirical_bias;
                row.m_hat = outcome.report->m_hat;
            }
            rows.push_back(row);

            std::cout << multilevel::calibration::kind_name(kind) << " eps=" << cfg.epsilons[e]
                      << " R=" << outcome.plan.R << " N=" << outcome.plan.N;
            if (outcome.report) {
                std::cout << " rmse=" << outcome.report->empirical_rmse
                          << " m_hat=" << outcome.report->m_hat;
                if (study_mode && kind == EstimatorKind::Mlmc) {
                    const auto band = multilevel::calibration::bias_band(
                        params_for(params, kind).alpha, cfg.M);
                    const double m = std::abs(outcome.report->m_hat);
                    std::cout << (m >= band.first && m <= band.second ? " [in bias band]"
                                                                      : " [outside bias band]");
                }
            }
            std::cout << "\n";
        }
    }
    const fs::path csv_path = fs::path(cfg.output_dir) / (cfg.output_prefix + "_summary.csv");
    multilevel::io::write_text_file(csv_path, multilevel::io::summary_csv(rows));
    std::cout << "# wrote " << csv_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted multilevel Monte Carlo toolkit"};
    app.require_subcommand(1);

    double w_alpha = 1.0;
    int w_m = 2, w_r = 2;
    std::optional<std::string> w_out;
    auto* weights_cmd = app.add_subcommand("weights", "print a weight table");
    weights_cmd->add_option("--alpha", w_alpha, "weak-rate exponent")->required();
    weights_cmd->add_option("--M", w_m, "root refiner")->required();
    weights_cmd->add_option("--R", w_r, "depth")->required();
    weights_cmd->add_option("--out", w_out, "also write the CSV here");

    CommonFlags calibrate_flags, pilot_flags, run_flags, study_flags;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "write calibrated plans");
    add_common(calibrate_cmd, calibrate_flags);
    auto* pilot_cmd = app.add_subcommand("pilot", "estimate structural parameters");
    add_common(pilot_cmd, pilot_flags);
    auto* run_cmd = app.add_subcommand("run", "run replicated studies");
    add_common(run_cmd, run_flags);
    auto* study_cmd = app.add_subcommand("study", "run an epsilon grid and report");
    add_common(study_cmd, study_flags);

    try {
        app.parse(argc, argv);
        if (weights_cmd->parsed()) return cmd_weights(w_alpha, w_m, w_r, w_out);
        if (calibrate_cmd->parsed()) return cmd_calibrate(calibrate_flags);
        if (pilot_cmd->parsed()) return cmd_pilot(pilot_flags);
        if (run_cmd->parsed()) return cmd_run(run_flags, false);
        if (study_cmd->parsed()) {
            const auto cfg = multilevel::io::load_config(study_flags.config_path);
            if (cfg.epsilons.size() < 2)
                throw multilevel::ConfigError("study: an epsilon grid with >= 2 values is required");
            return cmd_run(study_flags, true);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const multilevel::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const multilevel::BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return 3;
    } catch (const multilevel::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
