#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "multilevel/calibration.hpp"
#include "multilevel/engine.hpp"

namespace multilevel::analysis {

// Pilot streams live in a reserved stream-id range so they can never alias
// estimator streams under the same seed (see rng.hpp).
constexpr std::uint32_t kPilotStructuralStream = 0x80000000u;
constexpr std::uint32_t kPilotC1Stream = 0x80000001u;
constexpr std::uint32_t kPilotVinfStream = 0x80000002u;

struct C1Estimate {
    double value = 0.0;       ///< (mean Y_{h/M'} - mean Y_h) / (h/M' - h)
    double std_error = 0.0;
    std::int64_t n = 0;
};

/// First bias coefficient from coupled draws at h and h/refiner.
/// Throws InsufficientPilot when the standard error exceeds |value|.
C1Estimate estimate_c1(const engine::LevelSampler& sampler, double h, int refiner,
                       std::int64_t n_pilot, std::uint64_t seed);

/// Structural estimates from a coupled pilot at the coarsest pair
/// (h_bold, h_bold/M).
struct PilotReport {
    double var_y0_hat = 0.0;  ///< sample variance at the finest pilot level
    double v1_hat = 0.0;      ///< |Y_hb - Y_hb/M|_2^2 / (hb^beta (1+M^(-beta/2))^2)
    double c1_hat = 0.0;
    double c1_std_error = 0.0;
    double theta_hat = 0.0;
    // per-h diagnostics
    double mean_coarse = 0.0, mean_fine = 0.0;
    double var_coarse = 0.0, var_fine = 0.0;
    std::int64_t n = 0;
};

PilotReport estimate_structural(const engine::LevelSampler& sampler, double h_bold, int M,
                                double beta_assumed, std::int64_t n_pilot, std::uint64_t seed);

/// lim_h |Z(h)|_2^2 with Z(h) = (h/M)^(-beta/2) (Y_{h/M} - Y_h), estimated at
/// the two smallest affordable bias parameters (h_small and M h_small) with a
/// linear-in-h extrapolation; falls back to the finer measurement when the
/// extrapolation is unstable.
struct VinfEstimate {
    double value = 0.0;
    double at_fine = 0.0;    ///< |Z(h_small)|^2
    double at_coarse = 0.0;  ///< |Z(M h_small)|^2
    bool extrapolated = true;
};
VinfEstimate estimate_v_infinity(const engine::LevelSampler& sampler, double h_small, int M,
                                 double beta, std::int64_t n_pilot, std::uint64_t seed);

/// Summary statistics of a replication study against a known value.
struct StudyReport {
    double epsilon = 0.0;
    int replications = 0;
    double empirical_rmse = 0.0;
    double empirical_bias = 0.0;
    double m_hat = 0.0;         ///< bias / epsilon
    double empirical_sd = 0.0;  ///< sample sd of the estimates
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks_distance = 0.0;   ///< sup-distance of studentized errors to the normal CDF
    double mean_cost = 0.0;
    double median_cost = 0.0;
};

StudyReport study_statistics(const engine::ReplicationStudy& study, double i0);

/// One estimator run per epsilon, reporting |error| against the known value.
struct SllnRow {
    double epsilon = 0.0;
    double estimate = 0.0;
    double abs_error = 0.0;
    double ratio = 0.0;  ///< |error| / epsilon
};
struct SllnReport {
    std::vector<SllnRow> rows;
    double max_ratio = 0.0;
    double fitted_c = 0.0;  ///< the errors are dominated by fitted_c * eps_k
};
SllnReport slln_decay_check(const engine::LevelSampler& sampler,
                            const calibration::StructuralParams& params, int M,
                            calibration::EstimatorKind kind, const std::vector<double>& epsilons,
                            double i0, std::uint64_t seed, int workers = 1);

struct CltCheckOptions {
    double variance_lo = 0.6;
    double variance_hi = 1.4;
    double ks_slack = 1.5;  ///< threshold = slack * 1.36 / sqrt(K)
};
struct CltReport {
    double variance_ratio = 0.0;  ///< empirical variance of errors/eps over predicted sigma^2
    double ks_distance = 0.0;
    double ks_threshold = 0.0;
    double m_subtracted = 0.0;
    bool variance_pass = false;
    bool shape_pass = false;
    bool pass = false;
};

/// Standardizes errors by epsilon, subtracts m_pred (0 for the weighted kind,
/// the study's own normalized bias for the unweighted kind), and compares the
/// empirical variance to the predicted limit and the empirical CDF to the
/// normal reference.
CltReport clt_check(const engine::ReplicationStudy& study, double i0, double predicted_sigma_sq,
                    double m_pred, const CltCheckOptions& opts = {});

/// Cost-complexity table over an epsilon grid.
struct CostRow {
    double epsilon = 0.0;
    calibration::EstimatorKind kind;
    int R = 0;
    double h = 0.0;
    std::int64_t N = 0;
    double cost_theoretical = 0.0;
    std::optional<double> cost_measured;
    double cost_over_v = 0.0;  ///< cost / v(eps) for the kind's complexity shape
};
struct CostTable {
    std::vector<CostRow> rows;
    /// ml2r/mlmc theoretical cost ratio per epsilon (when both kinds present)
    std::vector<double> cost_ratio;
};

/// Complexity shape v(eps) for a kind at strong rate beta (eps^-2 up to the
/// logarithmic / subpolynomial factors).
double complexity_shape(double epsilon, double alpha, double beta, int M,
                        calibration::EstimatorKind kind);

/// Structural parameters per estimator kind: the bias-constant estimate
/// means |c1| for the unweighted kind and the root-limit constant for the
/// weighted kind, so the two calibrations generally differ.
struct KindParams {
    calibration::StructuralParams ml2r;
    calibration::StructuralParams mlmc;
    const calibration::StructuralParams& for_kind(calibration::EstimatorKind k) const {
        return k == calibration::EstimatorKind::Ml2r ? ml2r : mlmc;
    }
};

/// Budget guard: throws BudgetExceeded when the summed theoretical cost of
/// the grid exceeds `budget` (0 disables the check). When `sampler` is given,
/// each plan is run once and the measured cost reported.
CostTable cost_scaling_study(const std::vector<calibration::EstimatorKind>& kinds,
                             const std::vector<double>& epsilons, const KindParams& params,
                             int M, const engine::LevelSampler* sampler, double budget,
                             std::uint64_t seed, int workers = 1);

// Small statistics helpers shared by the checks above.
double sample_mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);
double sample_skewness(const std::vector<double>& xs);
double sample_excess_kurtosis(const std::vector<double>& xs);
/// sup_x |F_hat(x) - Phi(x)| for the given sample (any order).
double kolmogorov_distance_to_normal(std::vector<double> xs);
/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace multilevel::analysis
