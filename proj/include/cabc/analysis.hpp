#pragma once

#include <functional>
#include <vector>

#include "cabc/types.hpp"

namespace cabc {

/// H_1^(1)(z) = J_1(z) + i Y_1(z), z > 0.
cplx hankel_h1(double z);

/// Half-space DtN kernel K(r) = (i k^2 / 2) H_1^(1)(kr) / (kr).
cplx halfspace_kernel(double k, double r);

/// H(r) = K(r) e^{-ikr}.
cplx halfspace_amplitude(double k, double r);

struct ChebFit {
  double error = 0.0;     ///< max |f - fit| on the verification grid
  bool overflow = false;  ///< the power form r^{-j/alpha}, j < p, exceeds double range on [r0, 1]
  CVector coeffs;         ///< Chebyshev coefficients in xi, p of them
  /// Same fit done directly in the powers r^{-j/alpha} (unit-norm columns,
  /// pivoted QR) at the same points; NaN on overflow. Shows the
  /// conditioning floor of the raw power basis.
  double power_error = 0.0;
};

/// xi(r) mapping [r0, 1] onto [1, -1]; r(xi) its inverse.
double cheb_xi(double r, double r0, double alpha);
double cheb_r(double xi, double r0, double alpha);

/// p-term fit of f in T_n(xi(r)) from 4p Chebyshev collocation points,
/// checked on 2000 log-spaced r in [r0, 1].
ChebFit cheb_fit(const std::function<cplx(double)>& f, double r0, double alpha, int p);
/// Same for f = H(r) of wavenumber k.
ChebFit cheb_fit_error(double k, double r0, double alpha, int p);

/// Least-squares log-log slope -d log(err) / d log(p).
double loglog_slope(const std::vector<int>& p, const std::vector<double>& err);

/// True when the last third of the curve improves by less than a factor 2
/// per doubling of p, i.e. local slope below 1.
bool has_plateau(const std::vector<int>& p, const std::vector<double>& err);

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b], 1 <= n <= 128.
Quadrature gauss_legendre(int n, double a, double b);

struct SeparableExpansion {
  std::vector<double> weights;
  std::vector<double> nodes;       ///< t_p >= 0
  std::vector<double> breakpoints; ///< interval ends 0, 2L/k, 4L/k, ..., 2^{M+1}L/k
  int M = 0;
  int n = 0;                       ///< nodes per interval
  double T = 0.0;                  ///< right end of the last interval
  double target_eps = 0.0;
  double max_error = 0.0;          ///< measured on the verification grid
  bool escalated = false;
  bool verified = false;

  int terms() const { return static_cast<int>(weights.size()); }
  /// sum w_p e^{-k r t_p}
  double evaluate(double k, double r) const;
};

/// 1/(kr) ~ sum w_p e^{-k r t_p} for r in [r0, 1] from Gauss-Legendre on a
/// dyadic partition of [0, T]. Verified on 4000 points; on failure n grows by
/// 2 once, and a second failure raises NumericError.
SeparableExpansion separable_inv_kr(double k, double r0, double eps);

/// D_ij = h K(|i - j| h) off the diagonal, zero on it.
CMatrix sampled_halfspace_dtn(double k, int N);

struct RankScan {
  int max_rank = 0;
  int blocks = 0;
};

/// Max numerical rank (#sigma >= eps) over a dyadic tiling of the part of the
/// lower triangle with i - j >= ceil(r0/h).
RankScan offdiag_rank_scan(const CMatrix& D, double h, double r0, double eps);

}  // namespace cabc
