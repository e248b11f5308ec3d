#include "multilevel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "multilevel/errors.hpp"

namespace multilevel::calibration {

namespace {

// (1 + M^(beta/2)) / sqrt(1 + 1/M): strong-error envelope over cost shape.
double c_under(int M, double beta) {
    return (1.0 + std::pow(M, 0.5 * beta)) / std::sqrt(1.0 + 1.0 / M);
}

// (1 + M^(beta/2)) * sqrt(1 + 1/M)
double c_bar(int M, double beta) {
    return (1.0 + std::pow(M, 0.5 * beta)) * std::sqrt(1.0 + 1.0 / M);
}

void check_eps(double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("calibration: epsilon must be > 0");
}

void check_m(int M) {
    if (M < 2) throw std::invalid_argument("calibration: M must be >= 2");
}

}  // namespace

const char* kind_name(EstimatorKind k) { return k == EstimatorKind::Mlmc ? "mlmc" : "ml2r"; }

EstimatorKind kind_from_name(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
    if (s == "mlmc") return EstimatorKind::Mlmc;
    if (s == "ml2r") return EstimatorKind::Ml2r;
    throw ConfigError("unknown estimator kind: " + name);
}

double StructuralParams::theta() const {
    // var_y0 = 0 means a family with no statistical error at all: any
    // residual v1 comes from the bias gap alone, so the ratio is taken as 0
    // and calibration degrades to the single-level plan.
    if (v1 == 0.0 || var_y0 == 0.0) return 0.0;
    return std::sqrt(v1 / var_y0);
}

void StructuralParams::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("StructuralParams: alpha must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("StructuralParams: beta must be > 0");
    if (2.0 * alpha < beta - 1e-12)
        throw std::invalid_argument("StructuralParams: need 2 alpha >= beta");
    if (!(h_bold > 0.0)) throw std::invalid_argument("StructuralParams: h_bold must be > 0");
    if (!(var_y0 >= 0.0)) throw std::invalid_argument("StructuralParams: var_y0 must be >= 0");
    if (!(v1 >= 0.0)) throw std::invalid_argument("StructuralParams: v1 must be >= 0");
    if (!(c_hat > 0.0)) throw std::invalid_argument("StructuralParams: c_hat must be > 0");
}

std::int64_t ceil_snapped(double x) {
    if (!std::isfinite(x)) throw NumericalError("ceil_snapped: non-finite argument");
    const double r = std::nearbyint(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)))
        return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::ceil(x));
}

int depth_ml2r(double epsilon, const StructuralParams& p, int M) {
    check_eps(epsilon);
    check_m(M);
    p.validate();
    const double logM = std::log(static_cast<double>(M));
    const double c1 = 0.5 + std::log(std::pow(p.c_hat, 1.0 / p.alpha) * p.h_bold) / logM;
    const double a = std::sqrt(1.0 + 4.0 * p.alpha);
    const double c2 = c1 * c1 + 2.0 * std::log(a) / (p.alpha * logM);
    // The argument can go negative for very large eps; the clamp takes over.
    const double arg = std::max(0.0, c2 + 2.0 * std::log(1.0 / epsilon) / (p.alpha * logM));
    const double raw = c1 + std::sqrt(arg);
    return static_cast<int>(std::max<std::int64_t>(2, ceil_snapped(raw)));
}

int depth_mlmc(double epsilon, const StructuralParams& p, int M) {
    check_eps(epsilon);
    check_m(M);
    p.validate();
    const double logM = std::log(static_cast<double>(M));
    const double a = std::sqrt(1.0 + 2.0 * p.alpha);
    const double raw = 1.0 + std::log(std::pow(p.c_hat, 1.0 / p.alpha) * p.h_bold) / logM +
                       std::log(a / epsilon) / (p.alpha * logM);
    return static_cast<int>(std::max<std::int64_t>(2, ceil_snapped(raw)));
}

double bias_parameter(double epsilon, int R, const StructuralParams& p, int M,
                      EstimatorKind kind) {
    check_eps(epsilon);
    check_m(M);
    p.validate();
    if (R < 1) throw std::invalid_argument("bias_parameter: R must be >= 1");
    double x;
    if (kind == EstimatorKind::Ml2r) {
        x = p.h_bold * std::pow(1.0 + 2.0 * p.alpha * R, 1.0 / (2.0 * p.alpha * R)) *
            std::pow(p.c_hat, 1.0 / p.alpha) * std::pow(epsilon, -1.0 / (p.alpha * R)) *
            std::pow(static_cast<double>(M), -0.5 * (R - 1));
    } else {
        x = p.h_bold * std::pow(1.0 + 2.0 * p.alpha, 1.0 / (2.0 * p.alpha)) *
            std::pow(p.c_hat, 1.0 / p.alpha) * std::pow(epsilon, -1.0 / p.alpha) *
            std::pow(static_cast<double>(M), -static_cast<double>(R - 1));
    }
    const std::int64_t n = std::max<std::int64_t>(1, ceil_snapped(x));
    return p.h_bold / static_cast<double>(n);
}

Allocation allocation(const StructuralParams& p, int R, double h, int M,
                      const weights::WeightTable& table) {
    p.validate();
    check_m(M);
    if (R < 1 || table.R != R) throw std::invalid_argument("allocation: R/table mismatch");
    if (!(h > 0.0) || h > p.h_bold * (1.0 + 1e-12))
        throw std::invalid_argument("allocation: need 0 < h <= h_bold");

    const double theta = p.theta();
    const double hb2 = std::pow(h, 0.5 * p.beta);
    std::vector<double> u(R);
    u[0] = 1.0 + theta * hb2;
    const double cu = c_under(M, p.beta);
    for (int j = 2; j <= R; ++j)
        u[j - 1] = theta * hb2 * cu * std::abs(table.W[j - 1]) *
                   std::pow(static_cast<double>(M), -0.5 * (1.0 + p.beta) * (j - 1));

    for (int j = 2; j <= R; ++j)
        if (u[j - 1] == 0.0)
            throw DegenerateAllocation("allocation: q_" + std::to_string(j) +
                                       " vanished (theta or W_j is zero)");
    const double s = std::accumulate(u.begin(), u.end(), 0.0);
    Allocation out;
    out.mu_star = 1.0 / s;
    out.q.resize(R);
    for (int j = 0; j < R; ++j) out.q[j] = u[j] / s;
    return out;
}

std::int64_t sample_size(double epsilon, const StructuralParams& p, int R, double h, int M,
                         std::span<const double> q, double mu_star,
                         const weights::WeightTable& table, EstimatorKind kind,
                         std::int64_t cap) {
    check_eps(epsilon);
    p.validate();
    if (static_cast<int>(q.size()) != R) throw std::invalid_argument("sample_size: q size");
    const double theta = p.theta();
    const double hb2 = std::pow(h, 0.5 * p.beta);
    const double factor = kind == EstimatorKind::Ml2r ? 1.0 + 1.0 / (2.0 * p.alpha * R)
                                                      : 1.0 + 1.0 / (2.0 * p.alpha);
    double tail = 0.0;
    for (int j = 2; j <= R; ++j)
        tail += std::abs(table.W[j - 1]) *
                std::pow(static_cast<double>(M), 0.5 * (1.0 - p.beta) * (j - 1));
    const double bracket = 1.0 + theta * hb2 + theta * hb2 * c_bar(M, p.beta) * tail;
    const double x = factor * p.var_y0 * bracket / (epsilon * epsilon * mu_star);
    if (!std::isfinite(x) || x > static_cast<double>(cap))
        throw NumericalError("sample_size: size exceeds cap");
    return std::max<std::int64_t>(1, ceil_snapped(x));
}

MultilevelPlan calibrate(double epsilon, const StructuralParams& p, int M, EstimatorKind kind,
                         const CalibrateOptions& opts) {
    check_eps(epsilon);
    check_m(M);
    p.validate();

    MultilevelPlan plan;
    plan.kind = kind;
    plan.epsilon = epsilon;
    plan.M = M;
    plan.params = p;

    if (p.theta() == 0.0) {
        // No strong-error constant: refined levels carry nothing, fall back
        // to a single-level plan sized like a crude Monte Carlo estimator.
        plan.degenerate = true;
        plan.warnings.push_back("theta = 0: degenerate single-level plan (q = [1])");
        plan.R = 1;
        plan.h = bias_parameter(epsilon, 1, p, M, EstimatorKind::Mlmc);
        plan.weights = weights::uniform_weights(p.alpha, M, 1);
        plan.q = {1.0};
        plan.mu_star = 1.0;
        plan.N = sample_size(epsilon, p, 1, plan.h, M, plan.q, plan.mu_star, plan.weights, kind,
                             opts.size_cap);
        plan.level_sizes = {plan.N};
        plan.refiners = {1};
        return plan;
    }

    const int raw_depth =
        kind == EstimatorKind::Ml2r ? depth_ml2r(epsilon, p, M) : depth_mlmc(epsilon, p, M);
    plan.R = raw_depth;
    if (plan.R == 2) {
        // depth_* clamps at 2; surface it when the unclamped formula was lower.
        const double logM = std::log(static_cast<double>(M));
        const double k = std::log(std::pow(p.c_hat, 1.0 / p.alpha) * p.h_bold) / logM;
        double raw;
        if (kind == EstimatorKind::Ml2r) {
            const double c1 = 0.5 + k;
            const double a = std::sqrt(1.0 + 4.0 * p.alpha);
            raw = c1 + std::sqrt(std::max(0.0, c1 * c1 + 2.0 * std::log(a) / (p.alpha * logM) +
                                                   2.0 * std::log(1.0 / epsilon) / (p.alpha * logM)));
        } else {
            raw = 1.0 + k +
                  std::log(std::sqrt(1.0 + 2.0 * p.alpha) / epsilon) / (p.alpha * logM);
        }
        if (raw < 2.0) plan.warnings.push_back("depth formula below 2, clamped to R = 2");
    }

    plan.h = bias_parameter(epsilon, plan.R, p, M, kind);
    plan.weights = kind == EstimatorKind::Ml2r ? weights::ml2r_weights(p.alpha, M, plan.R)
                                               : weights::uniform_weights(p.alpha, M, plan.R);
    auto alloc = allocation(p, plan.R, plan.h, M, plan.weights);
    plan.q = std::move(alloc.q);
    plan.mu_star = alloc.mu_star;
    plan.N = sample_size(epsilon, p, plan.R, plan.h, M, plan.q, plan.mu_star, plan.weights, kind,
                         opts.size_cap);
    plan.level_sizes.resize(plan.R);
    plan.refiners.resize(plan.R);
    std::int64_t n = 1;
    for (int j = 0; j < plan.R; ++j) {
        plan.level_sizes[j] =
            std::max<std::int64_t>(1, ceil_snapped(static_cast<double>(plan.N) * plan.q[j]));
        plan.refiners[j] = n;
        if (j + 1 < plan.R) n *= M;
    }
    validate(plan);
    return plan;
}

double asymptotic_size_constant(const StructuralParams& p, int M, EstimatorKind kind) {
    p.validate();
    check_m(M);
    const double theta = p.theta();
    if (theta == 0.0) return 0.0;

    const double hb2 = std::pow(p.h_bold, 0.5 * p.beta);
    const double cu = c_under(M, p.beta);
    const double cb = c_bar(M, p.beta);
    const double mu_limit_inv =
        1.0 + theta * hb2 * (1.0 + cu / (std::pow(M, 0.5 * (1.0 + p.beta)) - 1.0));
    const double base = p.var_y0 * mu_limit_inv;
    const double kind_factor = kind == EstimatorKind::Mlmc ? 1.0 + 1.0 / (2.0 * p.alpha) : 1.0;

    if (p.beta > 1.0) {
        const double g = std::pow(M, 0.5 * (1.0 - p.beta));
        return base * (1.0 + theta * hb2 * (1.0 + cb * g / (1.0 - g))) * kind_factor;
    }
    if (p.beta == 1.0) return base * theta * std::sqrt(p.h_bold) * cb * kind_factor;

    // beta < 1
    if (kind == EstimatorKind::Mlmc)
        return base * theta * hb2 * cb * kind_factor /
               (std::pow(M, 0.5 * (1.0 - p.beta)) - 1.0);
    const auto lc = weights::limit_constants(p.alpha, M, 50);
    double series = 0.0;
    for (int j = 1; j <= static_cast<int>(lc.b_partial_sums.size()); ++j)
        series += std::abs(lc.b_partial_sums[j - 1]) * std::pow(M, 0.5 * (p.beta - 1.0) * j);
    return base * theta * hb2 * cb * lc.a_inf * series;
}

std::pair<double, double> bias_band(double alpha, int M) {
    if (!(alpha > 0.0)) throw std::invalid_argument("bias_band: alpha must be > 0");
    check_m(M);
    const double s = std::sqrt(1.0 + 2.0 * alpha);
    return {std::pow(static_cast<double>(M), -alpha) / s, 1.0 / s};
}

CltVariance clt_variance(const StructuralParams& p, int M, EstimatorKind kind,
                         const CltVarianceInputs& in) {
    if (2.0 * p.alpha < p.beta - 1e-12)
        throw NumericalError("clt_variance: regime 2 alpha < beta is not covered");
    p.validate();
    check_m(M);

    const double theta = p.theta();
    const double scale =
        kind == EstimatorKind::Mlmc ? 2.0 * p.alpha / (2.0 * p.alpha + 1.0) : 1.0;
    CltVariance out;

    if (p.beta > 1.0) {
        if (!in.var_z) throw NumericalError("clt_variance: beta > 1 needs the Var(Z_j) sequence");
        const double hb2 = std::pow(p.h_bold, 0.5 * p.beta);
        const double g = std::pow(M, 0.5 * (1.0 - p.beta));
        const double sigma_total = 1.0 + theta * hb2 * (1.0 + c_bar(M, p.beta) * g / (1.0 - g));
        const double var_y_h =
            in.var_y_h.value_or(p.var_y0 * (1.0 + theta * hb2) * (1.0 + theta * hb2));
        out.sigma1_sq = var_y_h / (sigma_total * p.var_y0 * (1.0 + theta * hb2));
        double series = 0.0;
        for (std::size_t i = 0; i < in.var_z->size(); ++i) {
            const int j = static_cast<int>(i) + 2;
            series += std::pow(M, 0.5 * (1.0 - p.beta) * (j - 1)) * (*in.var_z)[i];
        }
        out.sigma2_sq =
            hb2 * series / (sigma_total * std::sqrt(p.var_y0 * p.v1) * c_under(M, p.beta));
        out.total = scale * (out.sigma1_sq + out.sigma2_sq);
        return out;
    }

    // beta <= 1: only the refined levels contribute.
    if (!in.v_inf) throw NumericalError("clt_variance: beta <= 1 needs v_inf");
    if (kind == EstimatorKind::Mlmc && p.beta < 1.0 && 2.0 * p.alpha <= p.beta + 1e-12)
        throw NumericalError("clt_variance: unweighted kind with beta < 1 needs 2 alpha > beta");
    double v = *in.v_inf;
    if (std::abs(2.0 * p.alpha - p.beta) <= 1e-12) {
        if (!in.c1) throw NumericalError("clt_variance: 2 alpha = beta needs c1");
        const double d = 1.0 - std::pow(M, 0.5 * p.beta);
        v -= (*in.c1) * (*in.c1) * d * d;
    }
    const double denom = std::pow(1.0 + std::pow(M, 0.5 * p.beta), 2.0) * p.v1;
    out.sigma2_sq = v / denom;
    out.total = scale * out.sigma2_sq;
    return out;
}

double theoretical_cost(const MultilevelPlan& plan) {
    double s = 0.0;
    for (int j = 0; j < plan.R; ++j) {
        const double n_prev = j == 0 ? 0.0 : static_cast<double>(plan.refiners[j - 1]);
        s += plan.q[j] * (n_prev + static_cast<double>(plan.refiners[j]));
    }
    return static_cast<double>(plan.N) / plan.h * s;
}

void validate(const MultilevelPlan& plan) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("MultilevelPlan: " + m); };
    if (!(plan.epsilon > 0.0)) fail("epsilon <= 0");
    if (plan.M < 2) fail("M < 2");
    if (plan.R < 1 || (plan.R < 2 && !plan.degenerate)) fail("R < 2 in a non-degenerate plan");
    if (static_cast<int>(plan.q.size()) != plan.R) fail("q size");
    if (static_cast<int>(plan.level_sizes.size()) != plan.R) fail("level_sizes size");
    if (static_cast<int>(plan.refiners.size()) != plan.R) fail("refiners size");
    double qs = 0.0;
    for (double qj : plan.q) {
        if (!(qj > 0.0)) fail("q_j <= 0");
        qs += qj;
    }
    if (std::abs(qs - 1.0) > 1e-12) fail("sum q_j != 1");
    if (plan.N < 1) fail("N < 1");
    for (int j = 0; j < plan.R; ++j) {
        if (plan.level_sizes[j] < 1) fail("N_j < 1");
        const auto expected =
            std::max<std::int64_t>(1, ceil_snapped(static_cast<double>(plan.N) * plan.q[j]));
        if (plan.level_sizes[j] != expected) fail("N_j != ceil(N q_j)");
    }
    const std::int64_t n_grid = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::nearbyint(plan.params.h_bold / plan.h)));
    if (std::abs(plan.params.h_bold / static_cast<double>(n_grid) - plan.h) >
        1e-12 * plan.params.h_bold)
        fail("h is not h_bold / n");
    if (plan.weights.R != plan.R) fail("weights depth mismatch");
    if (plan.kind == EstimatorKind::Ml2r && !plan.degenerate &&
        plan.weights.alpha != plan.params.alpha)
        fail("weights alpha mismatch");
}

}  // namespace multilevel::calibration
