#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "multilevel/calibration.hpp"
#include "multilevel/errors.hpp"
#include "multilevel/weights.hpp"

using namespace multilevel;
using calibration::EstimatorKind;
using calibration::StructuralParams;

namespace {

StructuralParams unit_params(double alpha = 1.0, double beta = 1.0) {
    StructuralParams p;
    p.alpha = alpha;
    p.beta = beta;
    p.h_bold = 1.0;
    p.var_y0 = 1.0;
    p.v1 = 1.0;
    p.c_hat = 1.0;
    return p;
}

// Grid on which the bias parameter is expected to saturate at h_bold.
const std::vector<double> kStandardEpsGrid = {0.1,  0.05,  0.03125, 0.02,
                                              0.01, 0.005, 0.002,   0.001};

}  // namespace

TEST_CASE("ceil_snapped guards against representation error") {
    CHECK(calibration::ceil_snapped(2.3) == 3);
    CHECK(calibration::ceil_snapped(2.0) == 2);
    CHECK(calibration::ceil_snapped(2.0 + 1e-12) == 2);
    CHECK(calibration::ceil_snapped(2.0 - 1e-12) == 2);
    CHECK(calibration::ceil_snapped(2.0 + 1e-7) == 3);
}

TEST_CASE("depth formulas reproduce hand evaluations at eps = 2^-5") {
    const auto p = unit_params();
    // C1 = 1/2, inner sqrt of 0.25 + log5/log2 + 10 = 12.5719 -> ceil(4.0457).
    CHECK(calibration::depth_ml2r(std::pow(2.0, -5.0), p, 2) == 5);
    // 1 + log(sqrt(3))/log 2 + 5 = 6.7925 -> 7.
    CHECK(calibration::depth_mlmc(std::pow(2.0, -5.0), p, 2) == 7);
}

TEST_CASE("depth clamps at 2 for large eps") {
    const auto p = unit_params();
    CHECK(calibration::depth_ml2r(3.0, p, 2) == 2);
    CHECK(calibration::depth_mlmc(3.0, p, 2) == 2);
    CHECK_THROWS_AS(calibration::depth_ml2r(0.0, p, 2), std::invalid_argument);
    CHECK_THROWS_AS(calibration::depth_mlmc(-1.0, p, 2), std::invalid_argument);
}

TEST_CASE("depth is nonincreasing in eps and follows the growth rates") {
    const auto p = unit_params();
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        CHECK(calibration::depth_ml2r(eps / 10.0, p, 2) >= calibration::depth_ml2r(eps, p, 2));
        CHECK(calibration::depth_mlmc(eps / 10.0, p, 2) >= calibration::depth_mlmc(eps, p, 2));
    }
    // Unweighted depth doubles when log(1/eps) doubles.
    const double r3 = calibration::depth_mlmc(1e-3, p, 2);
    const double r6 = calibration::depth_mlmc(1e-6, p, 2);
    CHECK(r6 / r3 == doctest::Approx(2.0).epsilon(0.25));
    // Asymptotic rates: R ~ sqrt(2 log(1/eps)/(a log M)) and log(1/eps)/(a log M).
    for (double eps : {1e-6, 1e-7, 1e-8}) {
        const double l = std::log(1.0 / eps);
        const double ml2r_pred = std::sqrt(2.0 * l / std::log(2.0));
        const double mlmc_pred = l / std::log(2.0);
        CHECK(calibration::depth_ml2r(eps, p, 2) / ml2r_pred > 0.95);
        CHECK(calibration::depth_ml2r(eps, p, 2) / ml2r_pred < 1.30);
        CHECK(calibration::depth_mlmc(eps, p, 2) / mlmc_pred > 0.95);
        CHECK(calibration::depth_mlmc(eps, p, 2) / mlmc_pred < 1.30);
    }
}

TEST_CASE("bias parameter saturates at h_bold and projects onto the grid") {
    const auto p = unit_params();
    // ceil argument 11^0.1 * 32^0.2 * 2^-2 = 0.636 < 1.
    CHECK(calibration::bias_parameter(std::pow(2.0, -5.0), 5, p, 2, EstimatorKind::Ml2r) == 1.0);

    auto big_c = p;
    big_c.c_hat = 1e6;
    const double h = calibration::bias_parameter(std::pow(2.0, -5.0), 5, big_c, 2,
                                                 EstimatorKind::Ml2r);
    CHECK(h < big_c.h_bold);

    for (double eps : {0.3, 0.07, 0.004}) {
        for (auto kind : {EstimatorKind::Ml2r, EstimatorKind::Mlmc}) {
            const double hv = calibration::bias_parameter(eps, 4, big_c, 3, kind);
            const double n = big_c.h_bold / hv;
            CHECK(std::abs(n - std::round(n)) < 1e-9);
            CHECK(n >= 1.0);
        }
    }
}

TEST_CASE("bias parameter saturation on the standard grid") {
    for (int M : {2, 3})
        for (double beta : {1.0, 2.0})
            for (double eps : kStandardEpsGrid) {
                CAPTURE(M);
                CAPTURE(eps);
                auto p = unit_params(1.0, beta);
                const int r_ml2r = calibration::depth_ml2r(eps, p, M);
                CHECK(calibration::bias_parameter(eps, r_ml2r, p, M, EstimatorKind::Ml2r) == 1.0);
                const int r_mlmc = calibration::depth_mlmc(eps, p, M);
                CHECK(calibration::bias_parameter(eps, r_mlmc, p, M, EstimatorKind::Mlmc) == 1.0);
            }
}

TEST_CASE("allocation: single level, degenerate theta, frozen 3-level row") {
    const auto p = unit_params();
    const auto t1 = weights::uniform_weights(1.0, 2, 1);
    const auto a1 = calibration::allocation(p, 1, 1.0, 2, t1);
    CHECK(a1.q.size() == 1);
    CHECK(a1.q[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a1.mu_star == doctest::Approx(1.0 / 2.0).epsilon(1e-14));  // 1/(1 + theta h^(b/2))

    auto zero_theta = p;
    zero_theta.v1 = 0.0;
    const auto t3 = weights::ml2r_weights(1.0, 2, 3);
    CHECK_THROWS_AS(calibration::allocation(zero_theta, 3, 1.0, 2, t3), DegenerateAllocation);

    // Direct evaluation of the allocation row with W = [1, 2/3, 8/3],
    // theta = 1, beta = 1, M = 2, h = 1.
    const double cu = (1.0 + std::sqrt(2.0)) / std::sqrt(1.5);
    const double u1 = 2.0;
    const double u2 = cu * (2.0 / 3.0) * 0.5;
    const double u3 = cu * (8.0 / 3.0) * 0.25;
    const double sum = u1 + u2 + u3;
    const auto a3 = calibration::allocation(p, 3, 1.0, 2, t3);
    CHECK(a3.mu_star == doctest::Approx(1.0 / sum).epsilon(1e-12));
    CHECK(a3.q[0] == doctest::Approx(u1 / sum).epsilon(1e-12));
    CHECK(a3.q[1] == doctest::Approx(u2 / sum).epsilon(1e-12));
    CHECK(a3.q[2] == doctest::Approx(u3 / sum).epsilon(1e-12));
    CHECK(a3.q[0] + a3.q[1] + a3.q[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sample size: quadratic growth, classic fallback, asymptotic constant") {
    // beta = 2: halving eps multiplies N by about 4.
    auto p = unit_params(1.0, 2.0);
    auto plan1 = calibration::calibrate(1e-3, p, 2, EstimatorKind::Ml2r);
    auto plan2 = calibration::calibrate(5e-4, p, 2, EstimatorKind::Ml2r);
    CHECK(static_cast<double>(plan2.N) / static_cast<double>(plan1.N) ==
          doctest::Approx(4.0).epsilon(0.10));

    // theta = 0 reduces to classic Monte Carlo sizing.
    auto det = unit_params();
    det.v1 = 0.0;
    det.var_y0 = 2.5;
    const auto plan = calibration::calibrate(0.05, det, 2, EstimatorKind::Mlmc);
    CHECK(plan.degenerate);
    CHECK(plan.R == 1);
    CHECK(plan.q == std::vector<double>{1.0});
    CHECK(plan.mu_star == 1.0);
    const double expected = (1.0 + 0.5) * 2.5 / (0.05 * 0.05);
    CHECK(plan.N == calibration::ceil_snapped(expected));
    CHECK(!plan.warnings.empty());

    // Size asymptotics in the saturated regime at M = 5, beta = 1:
    // N eps^2 / R within 10% of the limiting constant.
    auto pb = unit_params(1.0, 1.0);
    const double eps = 1e-4;
    for (auto kind : {EstimatorKind::Ml2r, EstimatorKind::Mlmc}) {
        const int R = kind == EstimatorKind::Ml2r ? calibration::depth_ml2r(eps, pb, 5)
                                                  : calibration::depth_mlmc(eps, pb, 5);
        const auto table = kind == EstimatorKind::Ml2r ? weights::ml2r_weights(1.0, 5, R)
                                                       : weights::uniform_weights(1.0, 5, R);
        const auto alloc = calibration::allocation(pb, R, pb.h_bold, 5, table);
        const auto n = calibration::sample_size(eps, pb, R, pb.h_bold, 5, alloc.q, alloc.mu_star,
                                                table, kind);
        const double c_beta = calibration::asymptotic_size_constant(pb, 5, kind);
        const double normalized = static_cast<double>(n) * eps * eps / R;
        CHECK(normalized == doctest::Approx(c_beta).epsilon(0.10));
    }

    // Overflow guard.
    CHECK_THROWS_AS(calibration::calibrate(1e-12, pb, 2, EstimatorKind::Mlmc,
                                           {.size_cap = 1000000}),
                    NumericalError);
}

TEST_CASE("calibrate composes the pieces: frozen plans at eps = 2^-5") {
    const auto p = unit_params();
    const auto ml2r = calibration::calibrate(std::pow(2.0, -5.0), p, 2, EstimatorKind::Ml2r);
    CHECK(ml2r.R == 5);
    CHECK(ml2r.h == 1.0);
    CHECK(ml2r.weights.R == 5);
    CHECK(ml2r.weights.alpha == 1.0);
    const auto mlmc = calibration::calibrate(std::pow(2.0, -5.0), p, 2, EstimatorKind::Mlmc);
    CHECK(mlmc.R == 7);
    CHECK(mlmc.h == 1.0);
    for (double W : mlmc.weights.W) CHECK(W == 1.0);
}

TEST_CASE("plan invariants hold on the parameter grid") {
    const std::vector<double> eps_grid = {0.1, 0.05, 0.02, 0.008, 0.003};
    for (double alpha : {0.5, 1.0})
        for (double beta : {0.5, 1.0, 2.0}) {
            if (2.0 * alpha < beta) {
                StructuralParams bad = unit_params(alpha, beta);
                CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
                continue;
            }
            for (double eps : eps_grid)
                for (auto kind : {EstimatorKind::Ml2r, EstimatorKind::Mlmc}) {
                    CAPTURE(alpha);
                    CAPTURE(beta);
                    CAPTURE(eps);
                    const auto plan =
                        calibration::calibrate(eps, unit_params(alpha, beta), 2, kind);
                    CHECK_NOTHROW(calibration::validate(plan));
                    double qs = 0.0;
                    for (double q : plan.q) qs += q;
                    CHECK(std::abs(qs - 1.0) <= 1e-12);
                    for (auto nj : plan.level_sizes) CHECK(nj >= 1);
                }
        }
}

TEST_CASE("allocation normalization on a 200-point fuzz grid") {
    // 5 eps x 5 theta x 4 beta x 2 kinds = 200 allocations.
    const double eps_grid[] = {0.09, 0.031, 0.017, 0.006, 0.0013};
    const double thetas[] = {0.1, 0.5, 1.0, 2.0, 7.5};
    const double betas[] = {0.5, 1.0, 1.5, 2.0};
    int points = 0;
    for (double eps : eps_grid)
        for (double theta : thetas)
            for (double beta : betas)
                for (auto kind : {EstimatorKind::Ml2r, EstimatorKind::Mlmc}) {
                    auto p = unit_params(1.0, beta);
                    p.v1 = theta * theta * p.var_y0;
                    const auto plan = calibration::calibrate(eps, p, 3, kind);
                    double qs = 0.0;
                    for (double q : plan.q) {
                        CHECK(q > 0.0);
                        qs += q;
                    }
                    CHECK(std::abs(qs - 1.0) <= 1e-12);
                    ++points;
                }
    CHECK(points == 200);
}

TEST_CASE("normalizer bounds hold in the saturated regime") {
    for (auto kind : {EstimatorKind::Ml2r, EstimatorKind::Mlmc})
        for (double beta : {0.5, 1.0, 2.0})
            for (double eps : kStandardEpsGrid) {
                const auto p = unit_params(1.0, beta);
                const auto plan = calibration::calibrate(eps, p, 2, kind);
                if (plan.h != p.h_bold) continue;
                const double theta = p.theta();
                const double hb2 = std::pow(p.h_bold, 0.5 * beta);
                const double cu = (1.0 + std::pow(2.0, 0.5 * beta)) / std::sqrt(1.5);
                const double upper = 1.0 / (1.0 + theta * hb2);
                const double ainf_b = kind == EstimatorKind::Ml2r
                                          ? weights::weight_bound(p.alpha, 2)
                                          : 1.0;
                const double lower =
                    1.0 / (1.0 + theta * hb2 *
                                     (1.0 + cu * ainf_b /
                                                (1.0 - std::pow(2.0, -0.5 * (beta + 1.0)))));
                CHECK(plan.mu_star <= upper + 1e-12);
                CHECK(plan.mu_star >= lower - 1e-12);
            }
}

TEST_CASE("asymptotic size constants") {
    // beta = 2: the two kinds differ exactly by 1 + 1/(2 alpha).
    const auto p2 = unit_params(1.0, 2.0);
    const double ml2r = calibration::asymptotic_size_constant(p2, 2, EstimatorKind::Ml2r);
    const double mlmc = calibration::asymptotic_size_constant(p2, 2, EstimatorKind::Mlmc);
    CHECK(mlmc / ml2r == doctest::Approx(1.5).epsilon(1e-12));

    // beta = 1: the constant carries the factor theta sqrt(h_bold) c_bar.
    auto p1 = unit_params(1.0, 1.0);
    p1.h_bold = 0.25;
    p1.v1 = 4.0;
    p1.var_y0 = 1.0;
    const double theta = p1.theta();
    const double cb = (1.0 + std::sqrt(2.0)) * std::sqrt(1.5);
    const double cu = (1.0 + std::sqrt(2.0)) / std::sqrt(1.5);
    const double mu_inv = 1.0 + theta * 0.5 * (1.0 + cu / (2.0 - 1.0));
    const double expected = p1.var_y0 * mu_inv * theta * 0.5 * cb;
    CHECK(calibration::asymptotic_size_constant(p1, 2, EstimatorKind::Ml2r) ==
          doctest::Approx(expected).epsilon(1e-12));

    // theta = 0 collapses the constant.
    auto pz = unit_params(1.0, 1.0);
    pz.v1 = 0.0;
    CHECK(calibration::asymptotic_size_constant(pz, 2, EstimatorKind::Ml2r) == 0.0);
}

TEST_CASE("bias band") {
    const auto [lo, hi] = calibration::bias_band(1.0, 2);
    CHECK(lo == doctest::Approx(0.5 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(hi == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(lo < hi);
    const auto [lo2, hi2] = calibration::bias_band(0.5, 4);
    CHECK(lo2 == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(hi2 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("limiting variance: saturated envelopes give total 1") {
    // beta <= 1 branch: v_inf at the strong-error cap.
    auto p = unit_params(1.0, 1.0);
    p.var_y0 = 2.0;
    p.v1 = 0.7;
    calibration::CltVarianceInputs in;
    in.v_inf = 0.7 * std::pow(1.0 + std::sqrt(2.0), 2.0);
    const auto v = calibration::clt_variance(p, 2, EstimatorKind::Ml2r, in);
    CHECK(v.total == doctest::Approx(1.0).epsilon(1e-12));
    const auto vm = calibration::clt_variance(p, 2, EstimatorKind::Mlmc, in);
    CHECK(vm.total == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(vm.total / v.total == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // beta > 1 branch: caps for Var(Y_h) and Var(Z_j) give sigma1^2+sigma2^2 = 1.
    auto p2 = unit_params(1.0, 2.0);
    p2.var_y0 = 1.3;
    p2.v1 = 0.9;
    const double theta = p2.theta();
    calibration::CltVarianceInputs in2;
    in2.var_y_h = p2.var_y0 * std::pow(1.0 + theta, 2.0);
    in2.var_z = std::vector<double>(200, p2.v1 * std::pow(1.0 + 2.0, 2.0));
    const auto v2 = calibration::clt_variance(p2, 2, EstimatorKind::Ml2r, in2);
    CHECK(v2.sigma1_sq + v2.sigma2_sq == doctest::Approx(1.0).epsilon(1e-9));
    const auto v2m = calibration::clt_variance(p2, 2, EstimatorKind::Mlmc, in2);
    CHECK(v2m.total == doctest::Approx((2.0 / 3.0) * v2.total).epsilon(1e-12));
}

TEST_CASE("limiting variance: regime guards") {
    auto bad = unit_params(1.0, 1.0);
    bad.beta = 2.5;  // 2 alpha < beta
    calibration::CltVarianceInputs in;
    in.var_z = std::vector<double>(10, 1.0);
    CHECK_THROWS_AS(calibration::clt_variance(bad, 2, EstimatorKind::Ml2r, in), NumericalError);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    // 2 alpha = beta < 1: the unweighted kind is out of scope, the weighted
    // kind needs the first bias coefficient.
    auto edge = unit_params(0.25, 0.5);
    calibration::CltVarianceInputs in2;
    in2.v_inf = 1.0;
    CHECK_THROWS_AS(calibration::clt_variance(edge, 2, EstimatorKind::Mlmc, in2), NumericalError);
    CHECK_THROWS_AS(calibration::clt_variance(edge, 2, EstimatorKind::Ml2r, in2), NumericalError);
    in2.c1 = 0.3;
    const auto v = calibration::clt_variance(edge, 2, EstimatorKind::Ml2r, in2);
    const double d = 1.0 - std::pow(2.0, 0.25);
    const double expected =
        (1.0 - 0.09 * d * d) / (std::pow(1.0 + std::pow(2.0, 0.25), 2.0) * edge.v1);
    CHECK(v.total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("theoretical cost") {
    calibration::MultilevelPlan plan;
    plan.kind = EstimatorKind::Mlmc;
    plan.epsilon = 0.1;
    plan.M = 2;
    plan.R = 1;
    plan.h = 1.0;  // h = h_bold
    plan.q = {1.0};
    plan.mu_star = 1.0;
    plan.N = 100;
    plan.level_sizes = {100};
    plan.refiners = {1};
    plan.weights = weights::uniform_weights(1.0, 2, 1);
    plan.degenerate = true;
    CHECK(calibration::theoretical_cost(plan) == doctest::Approx(100.0).epsilon(1e-15));

    auto plan2 = plan;
    plan2.N = 200;
    CHECK(calibration::theoretical_cost(plan2) > calibration::theoretical_cost(plan));

    // At beta = 1 the weighted estimator is already cheaper at eps = 1e-3
    // and the advantage grows as eps shrinks.
    auto pw = unit_params();
    auto ratio_at = [&pw](double eps) {
        const auto w = calibration::calibrate(eps, pw, 2, EstimatorKind::Ml2r);
        const auto u = calibration::calibrate(eps, pw, 2, EstimatorKind::Mlmc);
        return calibration::theoretical_cost(w) / calibration::theoretical_cost(u);
    };
    CHECK(ratio_at(1e-3) < 1.0);
    CHECK(ratio_at(1e-4) < ratio_at(1e-3));
    CHECK(ratio_at(1e-5) < ratio_at(1e-4));
}
