#include "multilevel/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <tuple>

namespace multilevel::weights {

namespace {

void check_args(double alpha, int M, int R) {
    if (!(alpha > 0.0)) throw std::invalid_argument("weights: alpha must be > 0");
    if (M < 2) throw std::invalid_argument("weights: M must be >= 2");
    if (R < 1) throw std::invalid_argument("weights: R must be >= 1");
}

// b_l / b_{l-1} = -M^(-l alpha) / (1 - M^(-l alpha))
std::pair<std::vector<double>, std::vector<double>> coeffs_impl(double alpha, int M, int count_a,
                                                                int count_b) {
    std::vector<double> a(count_a), b(count_b);
    double prod = 1.0;  // prod_{k=1..l-1} (1 - M^(-k alpha))
    for (int l = 1; l <= count_a; ++l) {
        if (l > 1) prod *= 1.0 - std::pow(M, -(l - 1) * alpha);
        a[l - 1] = 1.0 / prod;
    }
    double bl = 1.0;
    for (int l = 0; l < count_b; ++l) {
        b[l] = bl;
        const double m = std::pow(M, -(l + 1) * alpha);
        bl *= -m / (1.0 - m);
    }
    return {std::move(a), std::move(b)};
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> closed_form_coeffs(double alpha, int M, int R) {
    check_args(alpha, M, R);
    return coeffs_impl(alpha, M, R, R);
}

WeightTable ml2r_weights(double alpha, int M, int R) {
    check_args(alpha, M, R);
    WeightTable t;
    t.alpha = alpha;
    t.M = M;
    t.R = R;
    std::tie(t.a, t.b) = closed_form_coeffs(alpha, M, R);
    t.w.resize(R);
    for (int l = 1; l <= R; ++l) t.w[l - 1] = t.a[l - 1] * t.b[R - l];
    t.W.resize(R);
    t.W[R - 1] = t.w[R - 1];
    for (int j = R - 2; j >= 0; --j) t.W[j] = t.W[j + 1] + t.w[j];
    return t;
}

WeightTable uniform_weights(double alpha, int M, int R) {
    check_args(alpha, M, R);
    WeightTable t;
    t.alpha = alpha;
    t.M = M;
    t.R = R;
    t.w.assign(R, 0.0);
    t.w[R - 1] = 1.0;
    t.W.assign(R, 1.0);
    return t;
}

double vandermonde_residual(const WeightTable& table) {
    const int R = table.R;
    long double worst = 0.0L;
    for (int k = 0; k < R; ++k) {
        long double s = 0.0L;
        for (int r = 1; r <= R; ++r) {
            // n_r^(-alpha k) with n_r = M^(r-1)
            const long double f =
                std::exp(-static_cast<long double>(table.alpha) * k * (r - 1) *
                         std::log(static_cast<long double>(table.M)));
            s += static_cast<long double>(table.w[r - 1]) * f;
        }
        if (k == 0) s -= 1.0L;
        worst = std::max(worst, std::abs(s));
    }
    return static_cast<double>(worst);
}

double weighted_geometric_sum(const WeightTable& table, double gamma,
                              const std::optional<std::vector<double>>& v) {
    if (v && static_cast<int>(v->size()) < table.R)
        throw std::invalid_argument("weighted_geometric_sum: v shorter than R");
    double s = 0.0;
    for (int j = 2; j <= table.R; ++j) {
        const double vj = v ? (*v)[j - 1] : 1.0;
        s += std::abs(table.W[j - 1]) * std::pow(table.M, gamma * (j - 1)) * vj;
    }
    return s;
}

LimitConstants limit_constants(double alpha, int M, int terms) {
    check_args(alpha, M, 1);
    if (terms < 1) throw std::invalid_argument("limit_constants: terms must be >= 1");
    auto [a, b] = coeffs_impl(alpha, M, terms, terms + 1);
    LimitConstants lc;
    lc.a_inf = a.back();
    lc.b_partial_sums.resize(terms);
    double run = 0.0;
    for (int l = 0; l < terms; ++l) {
        lc.b_abs_sum += std::abs(b[l]);
        lc.b_sum += b[l];
        run += b[l];
        lc.b_partial_sums[l] = run;
    }
    // Truncation tail is bounded by the next term over a geometric factor.
    if (alpha >= 0.5 && std::abs(b[terms]) > 1e-12)
        throw std::logic_error("limit_constants: truncation tail unexpectedly large");
    return lc;
}

double weight_bound(double alpha, int M) {
    const auto lc = limit_constants(alpha, M);
    return lc.a_inf * lc.b_abs_sum;
}

void validate(const WeightTable& t) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("WeightTable: " + msg); };
    if (!(t.alpha > 0.0) || t.M < 2 || t.R < 1) fail("bad parameters");
    if (static_cast<int>(t.w.size()) != t.R || static_cast<int>(t.W.size()) != t.R)
        fail("w/W size mismatch");
    if (std::abs(t.W[0] - 1.0) > 1e-12) fail("W_1 != 1");
    // Suffix sums reconstruct bitwise: W_j = W_{j+1} + w_j, W_R = w_R.
    for (int j = 0; j + 1 < t.R; ++j)
        if (t.W[j] != t.W[j + 1] + t.w[j]) fail("suffix-sum identity broken");
    if (t.W[t.R - 1] != t.w[t.R - 1]) fail("W_R != w_R");
    if (!t.a.empty()) {
        if (static_cast<int>(t.a.size()) != t.R || static_cast<int>(t.b.size()) != t.R)
            fail("a/b size mismatch");
        for (int l = 1; l <= t.R; ++l)
            if (t.w[l - 1] != t.a[l - 1] * t.b[t.R - l]) fail("closed-form identity broken");
    }
    const double bound = weight_bound(t.alpha, t.M) + 1e-9;
    for (double Wj : t.W)
        if (std::abs(Wj) > bound) fail("|W_j| exceeds a_inf * sum|b_l|");
}

}  // namespace multilevel::weights
