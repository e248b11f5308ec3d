#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "multilevel/engine.hpp"

namespace multilevel::models {

/// Nested expectation E[f(E[X|Y])] with X = F(xi, Y): the bias parameter is
/// the reciprocal inner sample count, h_bold = 1 / inner_base.
struct NestedSpec {
    std::function<double(RngStream&)> outer;                 ///< draw Y
    std::function<double(RngStream&, double y)> inner;       ///< draw xi, return F(xi, y)
    std::function<double(double)> outer_function;            ///< f
    std::int64_t inner_base = 1;                             ///< K0 >= 1

    double h_bold() const { return 1.0 / static_cast<double>(inner_base); }
};

/// Standard nested coupling: one outer draw, n_fine/h inner draws; the coarse
/// value averages the first n_coarse/h of them (shared prefix), so both
/// levels see the same inner sequence. Stream order: outer draw first, then
/// the inner draws in sequence. Fresh inner draws per (level, outer draw).
class NestedSampler final : public engine::LevelSampler {
  public:
    explicit NestedSampler(NestedSpec spec);
    engine::LevelSample sample(const engine::LevelRequest& req, RngStream& stream) const override;
    const NestedSpec& spec() const { return spec_; }

  private:
    NestedSpec spec_;
};

/// Smoothed refined-level difference for f in C^(1+rho): the level-j
/// increment is f(grand inner mean) minus the average of f over the M
/// per-block means, all sharing the same inner draws. The increment has
/// mean E[Y_fine - Y_coarse] and strong order beta = 1 + rho; for convex f
/// it is nonpositive pathwise. Level 1 falls back to the plain value.
class SmoothNestedSampler final : public engine::LevelSampler {
  public:
    explicit SmoothNestedSampler(NestedSpec spec);
    engine::LevelSample sample(const engine::LevelRequest& req, RngStream& stream) const override;
    const NestedSpec& spec() const { return spec_; }

  private:
    NestedSpec spec_;
};

/// Y ~ N(0,1), F(xi, y) = y + xi with xi ~ N(0,1), f = cos. Everything about
/// this family is known in closed form (see gaussian_nested_oracle).
NestedSpec gaussian_cos_spec(std::int64_t inner_base = 1);

/// Closed-form facts for the Gaussian-cos family.
struct GaussianNestedOracle {
    double i0;                  ///< E f(E[X|Y]) = exp(-1/2)
    double var_y0;              ///< Var(cos Y) = (1+e^-2)/2 - e^-1
    std::vector<double> c;      ///< bias coefficients c_k = e^(-1/2) (-1/2)^k / k!
    double sigma_f;             ///< sqrt(Var(F(xi,y) | y)) = 1 for every y

    /// E[Y_h] = exp(-(1+h)/2)
    double mean_at(double h) const;
    /// lim_h |Z(h)|_2^2 = (M-1) E[sin^2 Y] = (M-1)(1-e^-2)/2
    double v_infinity(int M) const;
};
GaussianNestedOracle gaussian_nested_oracle(int coefficients = 8);

/// Deterministic family Y_h = i0 + slope * h (no randomness): pilot and
/// degenerate-path test fixture.
class LinearBiasSampler final : public engine::LevelSampler {
  public:
    LinearBiasSampler(double i0, double slope) : i0_(i0), slope_(slope) {}
    engine::LevelSample sample(const engine::LevelRequest& req, RngStream&) const override;

  private:
    double i0_;
    double slope_;
};

}  // namespace multilevel::models
