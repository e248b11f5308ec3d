#include "multilevel/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "multilevel/errors.hpp"

namespace multilevel::models {

namespace {

// Number of fine steps for refiner n at bias parameter h: T n / h, integral
// by construction of the admissible grid h = h_bold / m.
std::int64_t step_count(const SdeSpec& spec, double h, std::int64_t refiner) {
    const double m_real = spec.h_bold() / h;
    const std::int64_t m = static_cast<std::int64_t>(std::llround(m_real));
    if (m < 1 || std::abs(m_real - static_cast<double>(m)) > 1e-9)
        throw NumericalError("sde: bias parameter " + std::to_string(h) +
                             " is not h_bold / n for integer n");
    return static_cast<std::int64_t>(spec.base_steps) * m * refiner;
}

void check_state(std::span<const double> x, std::int64_t step) {
    for (double c : x)
        if (!std::isfinite(c))
            throw NumericalError("sde: non-finite state at step " + std::to_string(step));
}

struct Scratch {
    std::vector<double> fine_path, coarse_path, drift, diff, dw, dw_agg, xf, xc;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

EulerSampler::EulerSampler(SdeSpec spec) : spec_(std::move(spec)) {
    if (!spec_.drift || !spec_.diffusion || !spec_.payoff)
        throw std::invalid_argument("EulerSampler: drift, diffusion and payoff are required");
    if (spec_.dim < 1 || spec_.noise_dim < 1 || spec_.base_steps < 1 || !(spec_.horizon > 0.0))
        throw std::invalid_argument("EulerSampler: bad spec");
    if (static_cast<int>(spec_.x0.size()) != spec_.dim)
        throw std::invalid_argument("EulerSampler: x0 size mismatch");
}

engine::LevelSample EulerSampler::sample(const engine::LevelRequest& req,
                                         RngStream& stream) const {
    const int d = spec_.dim;
    const int q = spec_.noise_dim;
    const std::int64_t fine_steps = step_count(spec_, req.h, req.n_fine);
    const bool coupled = req.n_coarse > 0;
    const std::int64_t ratio = coupled ? req.n_fine / req.n_coarse : 1;
    const std::int64_t coarse_steps = coupled ? fine_steps / ratio : 0;
    const double dt_f = spec_.horizon / static_cast<double>(fine_steps);
    const double dt_c = coupled ? spec_.horizon / static_cast<double>(coarse_steps) : 0.0;
    const double sqrt_dt_f = std::sqrt(dt_f);

    auto& s = scratch();
    s.fine_path.assign(static_cast<std::size_t>((fine_steps + 1) * d), 0.0);
    if (coupled) s.coarse_path.assign(static_cast<std::size_t>((coarse_steps + 1) * d), 0.0);
    s.drift.assign(static_cast<std::size_t>(d), 0.0);
    s.diff.assign(static_cast<std::size_t>(d) * static_cast<std::size_t>(q), 0.0);
    s.dw.assign(static_cast<std::size_t>(q), 0.0);
    s.dw_agg.assign(static_cast<std::size_t>(q), 0.0);
    s.xf = spec_.x0;
    s.xc = spec_.x0;

    auto write_state = [d](std::vector<double>& path, std::int64_t k,
                           std::span<const double> x) {
        for (int c = 0; c < d; ++c)
            path[static_cast<std::size_t>(k * d + c)] = x[static_cast<std::size_t>(c)];
    };
    write_state(s.fine_path, 0, s.xf);
    if (coupled) write_state(s.coarse_path, 0, s.xc);

    auto euler_step = [&](std::vector<double>& x, double t, double dt,
                          std::span<const double> dw) {
        spec_.drift(t, x, s.drift);
        spec_.diffusion(t, x, s.diff);
        for (int i = 0; i < d; ++i) {
            double noise = 0.0;
            for (int l = 0; l < q; ++l)
                noise += s.diff[static_cast<std::size_t>(i * q + l)] * dw[static_cast<std::size_t>(l)];
            x[static_cast<std::size_t>(i)] += s.drift[static_cast<std::size_t>(i)] * dt + noise;
        }
    };

    std::int64_t coarse_done = 0;
    for (std::int64_t k = 0; k < fine_steps; ++k) {
        for (int l = 0; l < q; ++l) s.dw[static_cast<std::size_t>(l)] = sqrt_dt_f * stream.next_gaussian();
        euler_step(s.xf, static_cast<double>(k) * dt_f, dt_f, s.dw);
        check_state(s.xf, k + 1);
        write_state(s.fine_path, k + 1, s.xf);
        if (coupled) {
            for (int l = 0; l < q; ++l) s.dw_agg[static_cast<std::size_t>(l)] += s.dw[static_cast<std::size_t>(l)];
            if ((k + 1) % ratio == 0) {
                euler_step(s.xc, static_cast<double>(coarse_done) * dt_c, dt_c, s.dw_agg);
                check_state(s.xc, coarse_done + 1);
                ++coarse_done;
                write_state(s.coarse_path, coarse_done, s.xc);
                for (int l = 0; l < q; ++l) s.dw_agg[static_cast<std::size_t>(l)] = 0.0;
            }
        }
    }

    engine::LevelSample out;
    out.fine = spec_.payoff(PathView{s.fine_path, fine_steps, d, dt_f});
    if (coupled) out.coarse = spec_.payoff(PathView{s.coarse_path, coarse_steps, d, dt_c});
    out.cost_units = static_cast<double>(req.n_coarse + req.n_fine);
    return out;
}

MilsteinSampler::MilsteinSampler(SdeSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim != 1 || spec_.noise_dim != 1)
        throw std::invalid_argument("MilsteinSampler: scalar diffusions only");
    if (!spec_.drift || !spec_.diffusion || !spec_.diffusion_dx || !spec_.payoff)
        throw std::invalid_argument("MilsteinSampler: drift, diffusion, diffusion_dx, payoff required");
    if (spec_.base_steps < 1 || !(spec_.horizon > 0.0))
        throw std::invalid_argument("MilsteinSampler: bad spec");
}

engine::LevelSample MilsteinSampler::sample(const engine::LevelRequest& req,
                                            RngStream& stream) const {
    const std::int64_t fine_steps = step_count(spec_, req.h, req.n_fine);
    const bool coupled = req.n_coarse > 0;
    const std::int64_t ratio = coupled ? req.n_fine / req.n_coarse : 1;
    const std::int64_t coarse_steps = coupled ? fine_steps / ratio : 0;
    const double dt_f = spec_.horizon / static_cast<double>(fine_steps);
    const double dt_c = coupled ? spec_.horizon / static_cast<double>(coarse_steps) : 0.0;
    const double sqrt_dt_f = std::sqrt(dt_f);

    auto& s = scratch();
    s.fine_path.assign(static_cast<std::size_t>(fine_steps + 1), 0.0);
    if (coupled) s.coarse_path.assign(static_cast<std::size_t>(coarse_steps + 1), 0.0);
    double xf = spec_.x0[0];
    double xc = spec_.x0[0];
    s.fine_path[0] = xf;
    if (coupled) s.coarse_path[0] = xc;

    std::vector<double>& bbuf = s.drift;
    std::vector<double>& gbuf = s.diff;
    bbuf.assign(1, 0.0);
    gbuf.assign(1, 0.0);
    auto step = [&](double& x, double t, double dt, double dw) {
        const std::span<const double> xs(&x, 1);
        spec_.drift(t, xs, bbuf);
        spec_.diffusion(t, xs, gbuf);
        const double g = gbuf[0];
        const double gdx = spec_.diffusion_dx(t, x);
        x += bbuf[0] * dt + g * dw + 0.5 * g * gdx * (dw * dw - dt);
        if (!std::isfinite(x)) throw NumericalError("sde: non-finite state");
    };

    double dw_agg = 0.0;
    std::int64_t coarse_done = 0;
    for (std::int64_t k = 0; k < fine_steps; ++k) {
        const double dw = sqrt_dt_f * stream.next_gaussian();
        step(xf, static_cast<double>(k) * dt_f, dt_f, dw);
        s.fine_path[static_cast<std::size_t>(k + 1)] = xf;
        if (coupled) {
            dw_agg += dw;
            if ((k + 1) % ratio == 0) {
                step(xc, static_cast<double>(coarse_done) * dt_c, dt_c, dw_agg);
                ++coarse_done;
                s.coarse_path[static_cast<std::size_t>(coarse_done)] = xc;
                dw_agg = 0.0;
            }
        }
    }

    engine::LevelSample out;
    out.fine = spec_.payoff(PathView{s.fine_path, fine_steps, 1, dt_f});
    if (coupled) out.coarse = spec_.payoff(PathView{s.coarse_path, coarse_steps, 1, dt_c});
    out.cost_units = static_cast<double>(req.n_coarse + req.n_fine);
    return out;
}

SdeSpec black_scholes_call_spec(double s0, double strike, double rate, double vol, double horizon,
                                int base_steps) {
    SdeSpec spec;
    spec.dim = 1;
    spec.noise_dim = 1;
    spec.x0 = {s0};
    spec.horizon = horizon;
    spec.base_steps = base_steps;
    spec.drift = [rate](double, std::span<const double> x, std::span<double> out) {
        out[0] = rate * x[0];
    };
    spec.diffusion = [vol](double, std::span<const double> x, std::span<double> out) {
        out[0] = vol * x[0];
    };
    spec.diffusion_dx = [vol](double, double) { return vol; };
    const double df = std::exp(-rate * horizon);
    spec.payoff = [strike, df](const PathView& path) {
        return df * std::max(path.terminal() - strike, 0.0);
    };
    return spec;
}

double bs_call_price(double s0, double strike, double rate, double vol, double horizon) {
    if (!(s0 > 0.0) || strike < 0.0 || !(vol > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("bs_call_price: bad arguments");
    if (strike == 0.0) return s0;
    const double sq = vol * std::sqrt(horizon);
    const double d1 = (std::log(s0 / strike) + (rate + 0.5 * vol * vol) * horizon) / sq;
    const double d2 = d1 - sq;
    return s0 * normal_cdf(d1) - strike * std::exp(-rate * horizon) * normal_cdf(d2);
}

}  // namespace multilevel::models
