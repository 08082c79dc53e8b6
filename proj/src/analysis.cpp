#include "cabc/analysis.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/special_functions/bessel.hpp>

namespace cabc {

cplx hankel_h1(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw ConfigError("hankel_h1: argument must be positive, got " + std::to_string(z));
  return {boost::math::cyl_bessel_j(1, z), boost::math::cyl_neumann(1, z)};
}

cplx halfspace_kernel(double k, double r) {
  if (!(k > 0.0) || !(r > 0.0)) throw ConfigError("halfspace_kernel: k and r must be positive");
  const double z = k * r;
  return kI * (k * k / 2.0) * hankel_h1(z) / z;
}

cplx halfspace_amplitude(double k, double r) { return halfspace_kernel(k, r) * std::exp(-kI * (k * r)); }

double cheb_xi(double r, double r0, double alpha) {
  const double a = std::pow(r0, -1.0 / alpha) - 1.0;
  return 2.0 / a * (std::pow(r, -1.0 / alpha) - 1.0) - 1.0;
}

double cheb_r(double xi, double r0, double alpha) {
  const double a = std::pow(r0, -1.0 / alpha) - 1.0;
  return std::pow((xi + 1.0) / 2.0 * a + 1.0, -alpha);
}

namespace {

cplx cheb_eval(const CVector& c, double x) {
  // Clenshaw
  cplx b1 = 0.0, b2 = 0.0;
  for (Eigen::Index j = c.size() - 1; j >= 1; --j) {
    const cplx b0 = 2.0 * x * b1 - b2 + c(j);
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + c(0);
}

}  // namespace

ChebFit cheb_fit(const std::function<cplx(double)>& f, double r0, double alpha, int p) {
  if (!(r0 > 0.0 && r0 < 1.0)) throw ConfigError("cheb_fit: r0 must lie in (0, 1)");
  if (!(alpha > 0.0)) throw ConfigError("cheb_fit: alpha must be positive");
  if (p < 1) throw ConfigError("cheb_fit: p must be >= 1");

  ChebFit out;
  // largest power r^{-(p-1)/alpha} sits at r0
  out.overflow = (p - 1) / alpha * std::log(1.0 / r0) > std::log(DBL_MAX);

  const int m = 4 * p;
  std::vector<cplx> fv(m);
  std::vector<double> xs(m);
  for (int i = 0; i < m; ++i) {
    xs[i] = std::cos(kPi * (i + 0.5) / m);
    fv[i] = f(cheb_r(xs[i], r0, alpha));
  }
  out.coeffs = CVector::Zero(p);
  for (int j = 0; j < p; ++j) {
    cplx s = 0.0;
    for (int i = 0; i < m; ++i) s += fv[i] * std::cos(j * kPi * (i + 0.5) / m);
    out.coeffs(j) = s * (j == 0 ? 1.0 : 2.0) / static_cast<double>(m);
  }

  const int nv = 2000;
  const double l0 = std::log(r0);
  double err = 0.0;
  for (int i = 0; i < nv; ++i) {
    const double r = std::exp(l0 + (0.0 - l0) * i / (nv - 1));
    const double x = std::clamp(cheb_xi(r, r0, alpha), -1.0, 1.0);
    err = std::max(err, std::abs(f(r) - cheb_eval(out.coeffs, x)));
  }
  out.error = err;

  out.power_error = std::numeric_limits<double>::quiet_NaN();
  if (!out.overflow) {
    CMatrix A(m, p);
    CVector b(m);
    RVector scale(p);
    for (int i = 0; i < m; ++i) {
      const double r = cheb_r(xs[i], r0, alpha);
      b(i) = fv[i];
      for (int j = 0; j < p; ++j) A(i, j) = std::pow(r, -j / alpha);
    }
    for (int j = 0; j < p; ++j) {
      scale(j) = A.col(j).norm();
      A.col(j) /= scale(j);
    }
    const CVector c = A.colPivHouseholderQr().solve(b);
    double perr = 0.0;
    for (int i = 0; i < nv; ++i) {
      const double r = std::exp(l0 + (0.0 - l0) * i / (nv - 1));
      cplx s = 0.0;
      for (int j = 0; j < p; ++j) s += c(j) / scale(j) * std::pow(r, -j / alpha);
      perr = std::max(perr, std::abs(f(r) - s));
    }
    out.power_error = perr;
  }
  return out;
}

ChebFit cheb_fit_error(double k, double r0, double alpha, int p) {
  if (!(k > 0.0)) throw ConfigError("cheb_fit_error: k must be positive");
  if (p < 2) throw ConfigError("cheb_fit_error: p must be >= 2");
  return cheb_fit([k](double r) { return halfspace_amplitude(k, r); }, r0, alpha, p);
}

double loglog_slope(const std::vector<int>& p, const std::vector<double>& err) {
  const std::size_t n = std::min(p.size(), err.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(err[i] > 0.0) || p[i] <= 0) continue;
    const double x = std::log(static_cast<double>(p[i])), y = std::log(err[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) return 0.0;
  const double den = cnt * sxx - sx * sx;
  if (den == 0.0) return 0.0;
  return -(cnt * sxy - sx * sy) / den;
}

bool has_plateau(const std::vector<int>& p, const std::vector<double>& err) {
  const std::size_t n = std::min(p.size(), err.size());
  if (n < 3) return false;
  const std::size_t start = n - std::max<std::size_t>(2, n / 3);
  std::vector<int> pp(p.begin() + start, p.begin() + n);
  std::vector<double> ee(err.begin() + start, err.begin() + n);
  return loglog_slope(pp, ee) < 1.0;
}

Quadrature gauss_legendre(int n, double a, double b) {
  if (n < 1 || n > 128) throw ConfigError("gauss_legendre: n must be in [1, 128]");
  if (!(a < b)) throw ConfigError("gauss_legendre: need a < b");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // refresh derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = mid - half * x;
    q.nodes[n - 1 - i] = mid + half * x;
    q.weights[i] = q.weights[n - 1 - i] = half * w;
  }
  return q;
}

double SeparableExpansion::evaluate(double k, double r) const {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * std::exp(-k * r * nodes[i]);
  return s;
}

namespace {

void build_expansion(SeparableExpansion& e, double k) {
  const double L = std::abs(std::log(e.target_eps));
  e.weights.clear();
  e.nodes.clear();
  e.breakpoints = {0.0};
  for (int j = 0; j <= e.M; ++j) e.breakpoints.push_back(std::ldexp(1.0, j + 1) * L / k);
  e.T = e.breakpoints.back();
  for (std::size_t j = 0; j + 1 < e.breakpoints.size(); ++j) {
    const Quadrature q = gauss_legendre(e.n, e.breakpoints[j], e.breakpoints[j + 1]);
    e.nodes.insert(e.nodes.end(), q.nodes.begin(), q.nodes.end());
    e.weights.insert(e.weights.end(), q.weights.begin(), q.weights.end());
  }
}

double verify_expansion(const SeparableExpansion& e, double k, double r0) {
  const int nv = 4000;
  double err = 0.0;
  for (int i = 0; i < nv; ++i) {
    const double r = r0 + (1.0 - r0) * i / (nv - 1);
    err = std::max(err, std::abs(1.0 / (k * r) - e.evaluate(k, r)));
  }
  return err;
}

}  // namespace

SeparableExpansion separable_inv_kr(double k, double r0, double eps) {
  if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError("separable_inv_kr: eps must lie in (0, 1/2]");
  if (!(k >= 4.0)) throw ConfigError("separable_inv_kr: k must be >= 4");
  if (!(r0 * k >= 0.5) || !(r0 < 1.0)) throw ConfigError("separable_inv_kr: need k r0 >= 0.5 and r0 < 1");
  SeparableExpansion e;
  e.target_eps = eps;
  e.M = static_cast<int>(std::ceil(std::log2(k)));
  e.n = static_cast<int>(std::ceil(std::abs(std::log(eps))));
  build_expansion(e, k);
  e.max_error = verify_expansion(e, k, r0);
  if (e.max_error > eps) {
    e.escalated = true;
    e.n += 2;
    build_expansion(e, k);
    e.max_error = verify_expansion(e, k, r0);
    if (e.max_error > eps) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "separable_inv_kr: max error %.3e exceeds eps %.3e after escalation", e.max_error,
                    eps);
      throw NumericError(msg);
    }
  }
  e.verified = true;
  return e;
}

CMatrix sampled_halfspace_dtn(double k, int N) {
  if (N < 1) throw ConfigError("sampled_halfspace_dtn: N must be positive");
  const double h = 1.0 / N;
  std::vector<cplx> row(N, 0.0);
  for (int d = 1; d < N; ++d) row[d] = h * halfspace_kernel(k, d * h);
  CMatrix D(N, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) D(i, j) = row[std::abs(i - j)];
  return D;
}

namespace {

void scan_block(const CMatrix& D, int r0, int r1, int c0, int c1, int sep, double eps, RankScan& out) {
  if (r1 <= r0 || c1 <= c0) return;
  if ((r1 - 1) - c0 < sep) return;  // no entry far enough from the diagonal
  if (r0 - (c1 - 1) >= sep) {
    Eigen::BDCSVD<CMatrix> svd(D.block(r0, c0, r1 - r0, c1 - c0));
    const RVector& s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) >= eps) ++rank;
    out.max_rank = std::max(out.max_rank, rank);
    ++out.blocks;
    return;
  }
  const int rm = (r0 + r1) / 2, cm = (c0 + c1) / 2;
  if (r1 - r0 == 1 && c1 - c0 == 1) return;
  scan_block(D, r0, rm, c0, cm, sep, eps, out);
  scan_block(D, r0, rm, cm, c1, sep, eps, out);
  scan_block(D, rm, r1, c0, cm, sep, eps, out);
  scan_block(D, rm, r1, cm, c1, sep, eps, out);
}

}  // namespace

RankScan offdiag_rank_scan(const CMatrix& D, double h, double r0, double eps) {
  if (D.rows() != D.cols()) throw ConfigError("offdiag_rank_scan: matrix must be square");
  if (!(eps > 0.0) || !(h > 0.0)) throw ConfigError("offdiag_rank_scan: eps and h must be positive");
  const int n = static_cast<int>(D.rows());
  const int sep = std::max(1, static_cast<int>(std::ceil(r0 / h - 1e-9)));
  RankScan out;
  scan_block(D, 0, n, 0, n, sep, eps, out);
  return out;
}

}  // namespace cabc
