#include "multilevel/nested.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "multilevel/errors.hpp"

namespace multilevel::models {

namespace {

// Inner count for refiner n at bias h: n / h, integral on the admissible grid.
std::int64_t inner_count(double h, std::int64_t refiner) {
    const double x = static_cast<double>(refiner) / h;
    const std::int64_t k = static_cast<std::int64_t>(std::llround(x));
    if (k < 1 || std::abs(x - static_cast<double>(k)) > 1e-6)
        throw NumericalError("nested: bias parameter " + std::to_string(h) +
                             " gives a non-integral inner count");
    return k;
}

void check_spec(const NestedSpec& spec) {
    if (!spec.outer || !spec.inner || !spec.outer_function)
        throw std::invalid_argument("nested: outer, inner and outer_function are required");
    if (spec.inner_base < 1) throw std::invalid_argument("nested: inner_base must be >= 1");
}

}  // namespace

NestedSampler::NestedSampler(NestedSpec spec) : spec_(std::move(spec)) { check_spec(spec_); }

engine::LevelSample NestedSampler::sample(const engine::LevelRequest& req,
                                          RngStream& stream) const {
    const std::int64_t k_fine = inner_count(req.h, req.n_fine);
    const std::int64_t k_coarse = req.n_coarse > 0 ? inner_count(req.h, req.n_coarse) : 0;
    const double y = spec_.outer(stream);

    double sum = 0.0;
    double coarse_mean = 0.0;
    for (std::int64_t k = 1; k <= k_fine; ++k) {
        sum += spec_.inner(stream, y);
        if (k == k_coarse) coarse_mean = sum / static_cast<double>(k_coarse);
    }

    engine::LevelSample out;
    out.fine = spec_.outer_function(sum / static_cast<double>(k_fine));
    if (k_coarse > 0) out.coarse = spec_.outer_function(coarse_mean);
    out.cost_units = static_cast<double>(req.n_coarse + req.n_fine);
    return out;
}

SmoothNestedSampler::SmoothNestedSampler(NestedSpec spec) : spec_(std::move(spec)) {
    check_spec(spec_);
}

engine::LevelSample SmoothNestedSampler::sample(const engine::LevelRequest& req,
                                                RngStream& stream) const {
    const std::int64_t k_fine = inner_count(req.h, req.n_fine);
    const double y = spec_.outer(stream);
    engine::LevelSample out;
    out.cost_units = static_cast<double>(req.n_coarse + req.n_fine);

    if (req.n_coarse == 0) {
        double sum = 0.0;
        for (std::int64_t k = 0; k < k_fine; ++k) sum += spec_.inner(stream, y);
        out.fine = spec_.outer_function(sum / static_cast<double>(k_fine));
        return out;
    }

    const std::int64_t blocks = req.n_fine / req.n_coarse;
    const std::int64_t block_size = k_fine / blocks;
    double total = 0.0;
    double f_blocks = 0.0;
    for (std::int64_t m = 0; m < blocks; ++m) {
        double block_sum = 0.0;
        for (std::int64_t k = 0; k < block_size; ++k) block_sum += spec_.inner(stream, y);
        total += block_sum;
        f_blocks += spec_.outer_function(block_sum / static_cast<double>(block_size));
    }
    out.fine = spec_.outer_function(total / static_cast<double>(k_fine));
    out.coarse = f_blocks / static_cast<double>(blocks);
    return out;
}

NestedSpec gaussian_cos_spec(std::int64_t inner_base) {
    NestedSpec spec;
    spec.inner_base = inner_base;
    spec.outer = [](RngStream& s) { return s.next_gaussian(); };
    spec.inner = [](RngStream& s, double y) { return y + s.next_gaussian(); };
    spec.outer_function = [](double x) { return std::cos(x); };
    return spec;
}

double GaussianNestedOracle::mean_at(double h) const { return std::exp(-0.5 * (1.0 + h)); }

double GaussianNestedOracle::v_infinity(int M) const {
    return (M - 1) * 0.5 * (1.0 - std::exp(-2.0));
}

GaussianNestedOracle gaussian_nested_oracle(int coefficients) {
    GaussianNestedOracle o;
    o.i0 = std::exp(-0.5);
    o.var_y0 = 0.5 * (1.0 + std::exp(-2.0)) - std::exp(-1.0);
    o.sigma_f = 1.0;
    o.c.resize(static_cast<std::size_t>(coefficients));
    double term = o.i0;
    for (int k = 1; k <= coefficients; ++k) {
        term *= -0.5 / static_cast<double>(k);
        o.c[static_cast<std::size_t>(k - 1)] = term;
    }
    return o;
}

engine::LevelSample LinearBiasSampler::sample(const engine::LevelRequest& req, RngStream&) const {
    auto value_at = [this](double h) { return i0_ + slope_ * h; };
    engine::LevelSample out;
    out.fine = value_at(req.h / static_cast<double>(req.n_fine));
    if (req.n_coarse > 0) out.coarse = value_at(req.h / static_cast<double>(req.n_coarse));
    out.cost_units = static_cast<double>(req.n_coarse + req.n_fine);
    return out;
}

}  // namespace multilevel::models
