#include "multilevel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "multilevel/errors.hpp"
#include "multilevel/rng.hpp"

namespace multilevel::analysis {

namespace {

struct CoupledMoments {
    double mean_fine = 0.0, mean_coarse = 0.0;
    double var_fine = 0.0, var_coarse = 0.0;
    double mean_diff = 0.0, var_diff = 0.0, mean_diff_sq = 0.0;
    std::int64_t n = 0;
};

// Coupled pilot draws of (Y_{h/refiner}, Y_h) through a level-2 request.
CoupledMoments coupled_pilot(const engine::LevelSampler& sampler, double h, int refiner,
                             std::int64_t n_pilot, std::uint64_t seed, std::uint32_t stream_id) {
    if (n_pilot < 2) throw std::invalid_argument("pilot: need at least 2 draws");
    engine::LevelRequest req{2, 1, refiner, h};
    double sf = 0.0, sf2 = 0.0, sc = 0.0, sc2 = 0.0, sd = 0.0, sd2 = 0.0;
    for (std::int64_t k = 0; k < n_pilot; ++k) {
        RngStream stream(seed, stream_id, static_cast<std::uint64_t>(k));
        const engine::LevelSample s = sampler.sample(req, stream);
        if (!s.coarse || !std::isfinite(s.fine) || !std::isfinite(*s.coarse))
            throw NumericalError("pilot: bad coupled sample at draw " + std::to_string(k));
        const double d = s.fine - *s.coarse;
        sf += s.fine;
        sf2 += s.fine * s.fine;
        sc += *s.coarse;
        sc2 += *s.coarse * *s.coarse;
        sd += d;
        sd2 += d * d;
    }
    const double n = static_cast<double>(n_pilot);
    CoupledMoments m;
    m.n = n_pilot;
    m.mean_fine = sf / n;
    m.mean_coarse = sc / n;
    m.mean_diff = sd / n;
    m.mean_diff_sq = sd2 / n;
    m.var_fine = std::max(0.0, (sf2 - sf * sf / n) / (n - 1.0));
    m.var_coarse = std::max(0.0, (sc2 - sc * sc / n) / (n - 1.0));
    m.var_diff = std::max(0.0, (sd2 - sd * sd / n) / (n - 1.0));
    return m;
}

}  // namespace

C1Estimate estimate_c1(const engine::LevelSampler& sampler, double h, int refiner,
                       std::int64_t n_pilot, std::uint64_t seed) {
    if (refiner < 2) throw std::invalid_argument("estimate_c1: refiner must be >= 2");
    const auto m = coupled_pilot(sampler, h, refiner, n_pilot, seed, kPilotC1Stream);
    const double dh = h / static_cast<double>(refiner) - h;  // negative
    C1Estimate est;
    est.n = m.n;
    est.value = m.mean_diff / dh;
    est.std_error = std::sqrt(m.var_diff / static_cast<double>(m.n)) / std::abs(dh);
    if (est.std_error > std::abs(est.value))
        throw InsufficientPilot("estimate_c1: standard error " + std::to_string(est.std_error) +
                                " exceeds |estimate| " + std::to_string(std::abs(est.value)));
    return est;
}

PilotReport estimate_structural(const engine::LevelSampler& sampler, double h_bold, int M,
                                double beta_assumed, std::int64_t n_pilot, std::uint64_t seed) {
    if (n_pilot < 100) throw std::invalid_argument("estimate_structural: need n_pilot >= 100");
    if (M < 2) throw std::invalid_argument("estimate_structural: M must be >= 2");
    const auto m = coupled_pilot(sampler, h_bold, M, n_pilot, seed, kPilotStructuralStream);

    PilotReport rep;
    rep.n = m.n;
    rep.mean_coarse = m.mean_coarse;
    rep.mean_fine = m.mean_fine;
    rep.var_coarse = m.var_coarse;
    rep.var_fine = m.var_fine;
    rep.var_y0_hat = m.var_fine;
    const double norm = std::pow(h_bold, beta_assumed) *
                        std::pow(1.0 + std::pow(M, -0.5 * beta_assumed), 2.0);
    rep.v1_hat = m.mean_diff_sq / norm;
    rep.theta_hat = rep.var_y0_hat > 0.0 ? std::sqrt(rep.v1_hat / rep.var_y0_hat) : 0.0;
    try {
        const auto c1 = estimate_c1(sampler, h_bold, 2, n_pilot, seed);
        rep.c1_hat = c1.value;
        rep.c1_std_error = c1.std_error;
    } catch (const InsufficientPilot&) {
        rep.c1_hat = 0.0;
        rep.c1_std_error = std::numeric_limits<double>::infinity();
    }
    return rep;
}

VinfEstimate estimate_v_infinity(const engine::LevelSampler& sampler, double h_small, int M,
                                 double beta, std::int64_t n_pilot, std::uint64_t seed) {
    if (M < 2) throw std::invalid_argument("estimate_v_infinity: M must be >= 2");
    const double h_coarse = h_small * M;
    const auto fine = coupled_pilot(sampler, h_small, M, n_pilot, seed, kPilotVinfStream);
    const auto coarse = coupled_pilot(sampler, h_coarse, M, n_pilot, seed + 1, kPilotVinfStream);
    const double scale_f = std::pow(h_small / M, -beta);
    const double scale_c = std::pow(h_coarse / M, -beta);

    VinfEstimate est;
    est.at_fine = scale_f * fine.mean_diff_sq;
    est.at_coarse = scale_c * coarse.mean_diff_sq;
    const double extrap = est.at_fine + (est.at_fine - est.at_coarse) / (M - 1.0);
    if (std::isfinite(extrap) && extrap > 0.0 &&
        std::abs(est.at_fine - est.at_coarse) <= 0.5 * est.at_fine) {
        est.value = extrap;
        est.extrapolated = true;
    } else {
        est.value = est.at_fine;
        est.extrapolated = false;
    }
    return est;
}

StudyReport study_statistics(const engine::ReplicationStudy& study, double i0) {
    const int K = static_cast<int>(study.runs.size());
    if (K < 2) throw std::invalid_argument("study_statistics: need at least 2 runs");
    StudyReport rep;
    rep.epsilon = study.plan.epsilon;
    rep.replications = K;

    std::vector<double> errors(study.runs.size());
    std::vector<double> costs(study.runs.size());
    double se = 0.0, se2 = 0.0;
    for (std::size_t r = 0; r < study.runs.size(); ++r) {
        errors[r] = study.runs[r].estimate - i0;
        costs[r] = engine::measured_cost(study.runs[r]);
        se += errors[r];
        se2 += errors[r] * errors[r];
    }
    const double n = static_cast<double>(K);
    rep.empirical_rmse = std::sqrt(se2 / n);
    rep.empirical_bias = se / n;
    rep.m_hat = rep.empirical_bias / rep.epsilon;
    rep.empirical_sd = std::sqrt(std::max(0.0, (se2 - se * se / n) / (n - 1.0)));
    rep.skewness = sample_skewness(errors);
    rep.excess_kurtosis = sample_excess_kurtosis(errors);

    std::vector<double> z(errors.size());
    const double sd = rep.empirical_sd > 0.0 ? rep.empirical_sd : 1.0;
    for (std::size_t r = 0; r < errors.size(); ++r)
        z[r] = (errors[r] - rep.empirical_bias) / sd;
    rep.ks_distance = kolmogorov_distance_to_normal(std::move(z));

    rep.mean_cost = sample_mean(costs);
    std::nth_element(costs.begin(), costs.begin() + K / 2, costs.end());
    rep.median_cost = costs[static_cast<std::size_t>(K / 2)];
    return rep;
}

SllnReport slln_decay_check(const engine::LevelSampler& sampler,
                            const calibration::StructuralParams& params, int M,
                            calibration::EstimatorKind kind, const std::vector<double>& epsilons,
                            double i0, std::uint64_t seed, int workers) {
    SllnReport rep;
    std::uint64_t k = 0;
    for (double eps : epsilons) {
        const auto plan = calibration::calibrate(eps, params, M, kind);
        const auto result = engine::run(plan, sampler, seed + k, workers);
        ++k;
        SllnRow row;
        row.epsilon = eps;
        row.estimate = result.estimate;
        row.abs_error = std::abs(result.estimate - i0);
        row.ratio = row.abs_error / eps;
        rep.max_ratio = std::max(rep.max_ratio, row.ratio);
        rep.rows.push_back(row);
    }
    rep.fitted_c = rep.max_ratio;
    return rep;
}

CltReport clt_check(const engine::ReplicationStudy& study, double i0, double predicted_sigma_sq,
                    double m_pred, const CltCheckOptions& opts) {
    const int K = static_cast<int>(study.runs.size());
    if (K < 200) throw std::invalid_argument("clt_check: need at least 200 replications");
    if (!(predicted_sigma_sq > 0.0)) throw std::invalid_argument("clt_check: sigma^2 must be > 0");

    std::vector<double> x(study.runs.size());
    for (std::size_t r = 0; r < x.size(); ++r)
        x[r] = (study.runs[r].estimate - i0) / study.plan.epsilon - m_pred;

    CltReport rep;
    rep.m_subtracted = m_pred;
    const double var = sample_variance(x);
    rep.variance_ratio = var / predicted_sigma_sq;
    rep.ks_threshold = opts.ks_slack * 1.36 / std::sqrt(static_cast<double>(K));

    const double mean = sample_mean(x);
    const double sd = std::sqrt(var > 0.0 ? var : 1.0);
    std::vector<double> z(x.size());
    for (std::size_t r = 0; r < x.size(); ++r) z[r] = (x[r] - mean) / sd;
    rep.ks_distance = kolmogorov_distance_to_normal(std::move(z));

    rep.variance_pass =
        rep.variance_ratio >= opts.variance_lo && rep.variance_ratio <= opts.variance_hi;
    rep.shape_pass = rep.ks_distance <= rep.ks_threshold;
    rep.pass = rep.variance_pass && rep.shape_pass;
    return rep;
}

double complexity_shape(double epsilon, double alpha, double beta, int M,
                        calibration::EstimatorKind kind) {
    const double inv2 = 1.0 / (epsilon * epsilon);
    const double l = std::log(1.0 / epsilon);
    if (beta > 1.0) return inv2;
    if (beta == 1.0)
        return kind == calibration::EstimatorKind::Mlmc ? inv2 * l * l : inv2 * l;
    if (kind == calibration::EstimatorKind::Mlmc)
        return inv2 * std::pow(epsilon, -(1.0 - beta) / alpha);
    return inv2 * std::exp((1.0 - beta) / std::sqrt(alpha) *
                           std::sqrt(2.0 * l * std::log(static_cast<double>(M))));
}

CostTable cost_scaling_study(const std::vector<calibration::EstimatorKind>& kinds,
                             const std::vector<double>& epsilons, const KindParams& params,
                             int M, const engine::LevelSampler* sampler, double budget,
                             std::uint64_t seed, int workers) {
    if (epsilons.size() < 4)
        throw std::invalid_argument("cost_scaling_study: need a grid of >= 4 epsilons");
    CostTable table;
    std::vector<calibration::MultilevelPlan> plans;
    double projected = 0.0;
    for (double eps : epsilons)
        for (auto kind : kinds) {
            auto plan = calibration::calibrate(eps, params.for_kind(kind), M, kind);
            projected += calibration::theoretical_cost(plan);
            plans.push_back(std::move(plan));
        }
    if (budget > 0.0 && projected > budget)
        throw BudgetExceeded("cost_scaling_study: projected cost " + std::to_string(projected) +
                             " exceeds budget " + std::to_string(budget));

    std::size_t idx = 0;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        double ml2r_cost = 0.0, mlmc_cost = 0.0;
        for (auto kind : kinds) {
            const auto& plan = plans[idx++];
            CostRow row;
            row.epsilon = epsilons[e];
            row.kind = kind;
            row.R = plan.R;
            row.h = plan.h;
            row.N = plan.N;
            const auto& kp = params.for_kind(kind);
            row.cost_theoretical = calibration::theoretical_cost(plan);
            row.cost_over_v =
                row.cost_theoretical / complexity_shape(epsilons[e], kp.alpha, kp.beta, M, kind);
            if (sampler) {
                const auto result =
                    engine::run(plan, *sampler, seed + static_cast<std::uint64_t>(idx), workers);
                row.cost_measured = engine::measured_cost(result);
            }
            if (kind == calibration::EstimatorKind::Ml2r) ml2r_cost = row.cost_theoretical;
            if (kind == calibration::EstimatorKind::Mlmc) mlmc_cost = row.cost_theoretical;
            table.rows.push_back(row);
        }
        if (ml2r_cost > 0.0 && mlmc_cost > 0.0) table.cost_ratio.push_back(ml2r_cost / mlmc_cost);
    }
    return table;
}

double sample_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double sample_skewness(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double s2 = 0.0, s3 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        s2 += d * d;
        s3 += d * d * d;
    }
    const double n = static_cast<double>(xs.size());
    const double sd = std::sqrt(s2 / n);
    return sd > 0.0 ? (s3 / n) / (sd * sd * sd) : 0.0;
}

double sample_excess_kurtosis(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double s2 = 0.0, s4 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    const double n = static_cast<double>(xs.size());
    const double v = s2 / n;
    return v > 0.0 ? (s4 / n) / (v * v) - 3.0 : 0.0;
}

double kolmogorov_distance_to_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double phi = normal_cdf(xs[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        worst = std::max({worst, std::abs(phi - lo), std::abs(phi - hi)});
    }
    return worst;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: bad input");
    const double mx = sample_mean(x);
    const double my = sample_mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

}  // namespace multilevel::analysis
