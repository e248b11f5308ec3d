#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multilevel/weights.hpp"

namespace multilevel::calibration {

enum class EstimatorKind { Mlmc, Ml2r };

const char* kind_name(EstimatorKind k);
EstimatorKind kind_from_name(const std::string& name);

/// Structural constants of a biased-simulation family: bias expansion
/// E Y_h - E Y_0 = sum_k c_k h^(alpha k), strong error |Y_h - Y_0|_2^2 <= V1 h^beta.
struct StructuralParams {
    double alpha = 1.0;    ///< weak-rate exponent, > 0
    double beta = 1.0;     ///< strong-rate exponent, > 0 (consistency: 2 alpha >= beta)
    double h_bold = 1.0;   ///< coarsest bias parameter, > 0
    double var_y0 = 1.0;   ///< Var(Y_0), >= 0
    double v1 = 1.0;       ///< strong-error constant V1, >= 0
    double c_hat = 1.0;    ///< bias-constant estimate: |c1| hat (unweighted) or c_inf hat (weighted)

    /// sqrt(V1 / Var(Y_0)); 0 when V1 = 0, infinity is rejected by validate().
    double theta() const;
    void validate() const;
};

/// A fully calibrated estimator configuration.
struct MultilevelPlan {
    EstimatorKind kind = EstimatorKind::Ml2r;
    double epsilon = 0.0;         ///< target RMSE
    int M = 2;                    ///< root refiner
    int R = 2;                    ///< depth (1 only for the degenerate single-level fallback)
    double h = 1.0;               ///< bias parameter, h = h_bold / n for integer n
    std::vector<double> q;        ///< allocation fractions, sum to 1
    double mu_star = 1.0;         ///< allocation normalizer
    std::int64_t N = 1;           ///< total size
    std::vector<std::int64_t> level_sizes;    ///< N_j = ceil(N q_j)
    std::vector<std::int64_t> refiners;       ///< n_j = M^(j-1)
    weights::WeightTable weights;             ///< cumulative weights (all ones when unweighted)
    StructuralParams params;
    bool degenerate = false;      ///< theta = 0 fallback, q = [1]
    std::vector<std::string> warnings;
};

/// Ceiling with a snap window: arguments within 1e-9 of an integer are taken
/// as that integer first, so platform rounding cannot shift a boundary case.
std::int64_t ceil_snapped(double x);

/// Depth of the weighted estimator,
/// ceil( C1 + sqrt(C1^2 + 2 log(A)/(alpha log M) + 2 log(1/eps)/(alpha log M)) )
/// with C1 = 1/2 + log(c_hat^(1/alpha) h_bold)/log M and A = sqrt(1+4 alpha),
/// clamped below at 2.
int depth_ml2r(double epsilon, const StructuralParams& p, int M);

/// Depth of the unweighted estimator,
/// ceil( 1 + log(c_hat^(1/alpha) h_bold)/log M + log(A/eps)/(alpha log M) )
/// with A = sqrt(1+2 alpha), clamped below at 2.
int depth_mlmc(double epsilon, const StructuralParams& p, int M);

/// Bias parameter h(eps) = h_bold / ceil(...): the cost-optimal h projected
/// onto the admissible grid {h_bold / n}. Saturates at h_bold for small eps.
double bias_parameter(double epsilon, int R, const StructuralParams& p, int M,
                      EstimatorKind kind);

struct Allocation {
    std::vector<double> q;
    double mu_star = 1.0;
};

/// Effort-minimizing allocation fractions:
///   q_1 = mu* (1 + theta h^(beta/2))
///   q_j = mu* theta h^(beta/2) C_under |W_j| M^(-(1+beta)(j-1)/2),  j >= 2
/// normalized so sum q_j = 1 (mu* is the reciprocal of the unnormalized sum).
/// Throws DegenerateAllocation if any q_j vanishes.
Allocation allocation(const StructuralParams& p, int R, double h, int M,
                      const weights::WeightTable& table);

constexpr std::int64_t kDefaultSizeCap = std::int64_t{1} << 53;

/// Total estimator size
///   N = ceil( F * Var(Y0) * (1 + theta h^(b/2) (1 + Cbar sum_j |W_j| M^((1-b)(j-1)/2)))
///             / (eps^2 mu*) )
/// with F = 1 + 1/(2 alpha R) for the weighted kind, 1 + 1/(2 alpha) otherwise.
/// Throws NumericalError if N would exceed `cap`.
std::int64_t sample_size(double epsilon, const StructuralParams& p, int R, double h, int M,
                         std::span<const double> q, double mu_star,
                         const weights::WeightTable& table, EstimatorKind kind,
                         std::int64_t cap = kDefaultSizeCap);

struct CalibrateOptions {
    std::int64_t size_cap = kDefaultSizeCap;
};

/// Compose depth, bias parameter, weights, allocation and size into a
/// validated plan. theta = 0 degrades to a single-level plan with a warning.
MultilevelPlan calibrate(double epsilon, const StructuralParams& p, int M, EstimatorKind kind,
                         const CalibrateOptions& opts = {});

/// Asymptotic size constant C_beta: N(eps) ~ C_beta eps^-2 * {1, R(eps),
/// M^((1-beta) R(eps)/2)} for beta > 1, = 1, < 1. Returns 0 when theta = 0.
double asymptotic_size_constant(const StructuralParams& p, int M, EstimatorKind kind);

/// Asymptotic band of the normalized bias |m(eps)| for the unweighted
/// estimator calibrated with the true bias constant:
/// (M^-alpha / sqrt(1+2 alpha), 1 / sqrt(1+2 alpha)).
std::pair<double, double> bias_band(double alpha, int M);

/// Inputs for the limiting CLT variance. beta > 1 uses the level-variance
/// sequence (Var Z_j, j = 2, 3, ...) and Var(Y_h_bold); beta <= 1 uses the
/// limit v_inf = lim |Z(h)|_2^2 and, when 2 alpha = beta, c1.
struct CltVarianceInputs {
    std::optional<std::vector<double>> var_z;  ///< Var(Z_j) for j = 2.. (beta > 1)
    std::optional<double> var_y_h;             ///< Var(Y_{h_bold}); defaults to its cap
    std::optional<double> v_inf;               ///< lim |Z(h)|_2^2 (beta <= 1)
    std::optional<double> c1;                  ///< first bias coefficient (2 alpha = beta)
};

struct CltVariance {
    double sigma1_sq = 0.0;  ///< coarse-level share (beta > 1 only)
    double sigma2_sq = 0.0;  ///< refined-level share
    double total = 0.0;      ///< limiting variance of (I - I0)/eps, kind-scaled
};

/// Limiting CLT variance; the unweighted kind is scaled by 2a/(2a+1).
/// Throws NumericalError when 2 alpha < beta, or for the unweighted kind
/// with beta < 1 and 2 alpha <= beta.
CltVariance clt_variance(const StructuralParams& p, int M, EstimatorKind kind,
                         const CltVarianceInputs& in);

/// Cost of a plan in inverse-h units: (N/h) sum_j q_j (n_{j-1} + n_j), n_0 = 0.
double theoretical_cost(const MultilevelPlan& plan);

/// Throws if the plan violates its invariants (allocation normalized,
/// level sizes consistent, weights table matching).
void validate(const MultilevelPlan& plan);

}  // namespace multilevel::calibration
