#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "multilevel/engine.hpp"

namespace multilevel::models {

/// Discrete path skeleton handed to payoff functionals: steps+1 states of
/// dimension dim on a uniform grid with step dt. Values between grid points
/// are understood as linearly interpolated.
struct PathView {
    std::span<const double> flat;
    std::int64_t steps = 0;
    int dim = 1;
    double dt = 0.0;

    std::span<const double> state(std::int64_t k) const {
        return flat.subspan(static_cast<std::size_t>(k) * static_cast<std::size_t>(dim),
                            static_cast<std::size_t>(dim));
    }
    double terminal(int component = 0) const {
        return flat[static_cast<std::size_t>(steps) * static_cast<std::size_t>(dim) +
                    static_cast<std::size_t>(component)];
    }
};

/// A Brownian diffusion dX = b(t,X) dt + sigma(t,X) dW with a path payoff.
/// The coarsest simulation uses base_steps Euler steps over [0,T], so the
/// coarsest bias parameter is h_bold = T / base_steps.
struct SdeSpec {
    int dim = 1;
    int noise_dim = 1;
    std::vector<double> x0 = {0.0};
    double horizon = 1.0;
    int base_steps = 1;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> drift;
    /// dim x noise_dim matrix, row-major.
    std::function<void(double t, std::span<const double> x, std::span<double> out)> diffusion;
    /// Scalar-case diffusion derivative d sigma / dx (second-order scheme only).
    std::function<double(double t, double x)> diffusion_dx;
    std::function<double(const PathView&)> payoff;

    double h_bold() const { return horizon / base_steps; }
};

/// Euler scheme with coupled levels: the fine path uses n_fine * (T/h) steps,
/// the coarse path reuses the fine Brownian increments aggregated in blocks.
/// Stream consumption order: noise_dim normals per fine step, step by step
/// (the replay contract coupling tests rely on).
class EulerSampler final : public engine::LevelSampler {
  public:
    explicit EulerSampler(SdeSpec spec);
    engine::LevelSample sample(const engine::LevelRequest& req, RngStream& stream) const override;
    const SdeSpec& spec() const { return spec_; }

  private:
    SdeSpec spec_;
};

/// Second-order (Milstein) scheme for scalar diffusions, same coupling and
/// stream order as the Euler sampler.
class MilsteinSampler final : public engine::LevelSampler {
  public:
    explicit MilsteinSampler(SdeSpec spec);
    engine::LevelSample sample(const engine::LevelRequest& req, RngStream& stream) const override;
    const SdeSpec& spec() const { return spec_; }

  private:
    SdeSpec spec_;
};

/// Geometric Brownian motion dX = r X dt + vol X dW with the discounted call
/// payoff exp(-rT) max(X_T - strike, 0).
SdeSpec black_scholes_call_spec(double s0, double strike, double rate, double vol, double horizon,
                                int base_steps);

/// Closed-form Black-Scholes call price (strike = 0 degenerates to s0).
double bs_call_price(double s0, double strike, double rate, double vol, double horizon);

}  // namespace multilevel::models
