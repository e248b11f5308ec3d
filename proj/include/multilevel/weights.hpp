#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace multilevel::weights {

// Weighted-multilevel weight system. The refined levels of the weighted
// estimator carry cumulative weights W_j^R built from the solution w of the
// Vandermonde system V w = e1 with nodes n_r^{-alpha}, n_r = M^(r-1). The
// solution is evaluated through the closed-form coefficient products (stable
// for any depth), never through a dense solve: the Vandermonde matrix is
// exponentially ill-conditioned in R.

/// Full weight system for one (alpha, M, R).
struct WeightTable {
    double alpha = 1.0;  ///< weak-rate exponent, > 0
    int M = 2;           ///< root refiner, >= 2
    int R = 1;           ///< depth, >= 1
    std::vector<double> w;  ///< raw weights w_1..w_R
    std::vector<double> W;  ///< cumulative weights W_j = sum_{r>=j} w_r, W_1 = 1
    std::vector<double> a;  ///< closed-form coefficients a_1..a_R
    std::vector<double> b;  ///< closed-form coefficients b_0..b_{R-1}
};

/// Closed-form coefficient vectors:
///   a_l = 1 / prod_{k=1..l-1} (1 - M^(-k alpha))   (empty product = 1)
///   b_l = (-1)^l M^(-(alpha/2) l(l+1)) / prod_{k=1..l} (1 - M^(-k alpha))
/// Returns a of length R (a_1..a_R) and b of length R (b_0..b_{R-1}).
/// Throws std::invalid_argument on alpha <= 0, M < 2 or R < 1.
std::pair<std::vector<double>, std::vector<double>> closed_form_coeffs(double alpha, int M, int R);

/// Weight table with w_l = a_l * b_{R-l} and W by suffix sums of w.
WeightTable ml2r_weights(double alpha, int M, int R);

/// Degenerate table with W_j = 1 for every level (w = e_R), used by the
/// unweighted estimator.
WeightTable uniform_weights(double alpha, int M, int R);

/// Oracle check that the table solves the Vandermonde system:
/// max over rows k=0..R-1 of |sum_r w_r n_r^(-alpha k) - delta_{k,0}|,
/// accumulated in extended precision.
double vandermonde_residual(const WeightTable& table);

/// sum_{j=2..R} |W_j| M^(gamma (j-1)) v_j, with v_j defaulting to 1.
/// Empty sum (R = 1) is 0. Used by the calibration rows and the weight-limit
/// checks: for gamma < 0 the sum converges to 1/(M^|gamma| - 1) as R grows,
/// for gamma = 0 it behaves like R.
double weighted_geometric_sum(const WeightTable& table, double gamma,
                              const std::optional<std::vector<double>>& v = std::nullopt);

/// Numerically evaluated limits of the coefficient sequences, truncated at
/// `terms` (the tail decays like M^(-(alpha/2) l^2), negligible by l = 50).
struct LimitConstants {
    double a_inf = 0.0;        ///< lim a_l
    double b_abs_sum = 0.0;    ///< sum_l |b_l|
    double b_sum = 0.0;        ///< sum_l b_l
    std::vector<double> b_partial_sums;  ///< partial sums b_0 + ... + b_{j-1}, j = 1..terms
};
LimitConstants limit_constants(double alpha, int M, int terms = 50);

/// Uniform bound a_inf * sum|b_l| on |W_j^R| over all j, R.
double weight_bound(double alpha, int M);

/// Throws std::invalid_argument if the table violates its construction
/// invariants (suffix sums, W_1 = 1, closed-form product identity).
void validate(const WeightTable& table);

}  // namespace multilevel::weights
