#include "multilevel/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace multilevel {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox_round(std::array<std::uint32_t, 4> c,
                                                 std::array<std::uint32_t, 2> k) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mul_hi_lo(kPhiloxM0, c[0], hi0, lo0);
    mul_hi_lo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        counter = philox_round(counter, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return counter;
}

void RngStream::refill() {
    const std::array<std::uint32_t, 4> ctr = {
        block_, stream_id_, static_cast<std::uint32_t>(draw_),
        static_cast<std::uint32_t>(draw_ >> 32)};
    const auto r = philox4x32(ctr, key_);
    out_[1] = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    out_[0] = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
    have_ = 2;
    ++block_;
}

double RngStream::next_gaussian() { return inverse_normal_cdf(next_uniform()); }

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p outside (0,1)");

    // Rational initial guess (Abramowitz & Stegun 26.2.23, |err| < 4.5e-4).
    const double q = p < 0.5 ? p : 1.0 - p;
    const double t = std::sqrt(-2.0 * std::log(q));
    double x = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                       (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
    if (p < 0.5) x = -x;

    // Two Halley steps against the exact CDF push the error to roundoff.
    for (int it = 0; it < 2; ++it) {
        const double err = normal_cdf(x) - p;
        const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
        if (pdf <= std::numeric_limits<double>::min()) break;
        const double u = err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

}  // namespace multilevel
