#include "cabc/probing.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include <Eigen/SVD>

#include "cabc/rng.hpp"

namespace cabc {

void BasisSpec::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("basis.alpha must be positive");
  if (p < 0) throw ConfigError("basis.p must be >= 0");
  if (phases.empty()) throw ConfigError("basis.phases must not be empty");
  for (const auto& [a, b] : exponent_pairs)
    if (a < 0 || b < 0) throw ConfigError("basis exponent pairs must be nonnegative");
}

std::vector<std::pair<int, int>> triangular_pairs(int count, bool only_j1) {
  std::vector<std::pair<int, int>> out;
  for (int level = 0; static_cast<int>(out.size()) < count; ++level)
    for (int j2 = 0; 2 * j2 <= level && static_cast<int>(out.size()) < count; ++j2) {
      if (only_j1 && j2 > 0) break;
      out.emplace_back(level - 2 * j2, j2);
    }
  return out;
}

std::vector<int> split_points(const Medium& medium, int side, int N) {
  std::vector<int> cuts;
  const double h = 1.0 / N;
  auto c = [&](double t) { return eval_speed(medium, side_point(side, t)); };
  for (int l = 0; l + 1 < N; ++l) {
    double a = (l + 0.5) * h, b = (l + 1.5) * h;
    double ca = c(a), cb = c(b);
    if (std::abs(ca - cb) <= 1e-3 * std::max(ca, cb)) continue;
    // A jump survives bisection; a steep smooth profile does not.
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b), cm = c(m);
      if (std::abs(cm - ca) >= std::abs(cb - cm)) {
        b = m;
        cb = cm;
      } else {
        a = m;
        ca = cm;
      }
    }
    if (std::abs(ca - cb) > 1e-3 * std::max(ca, cb)) cuts.push_back(l + 1);
  }
  return cuts;
}

namespace {

double sq(double v) { return v * v; }

/// Per-entry geometry of one block: singular distance s, second variable
/// theta and the two interfacial traveltimes.
struct BlockGeometry {
  RMatrix s, theta, tau1, tau2;
  double omega = 0.0;
};

BlockGeometry block_geometry(const BasisSpec& spec, const Medium& medium, const GridSpec& grid, BlockId b) {
  const int N = grid.N;
  const double h = grid.h();
  std::function<double(double)> slow;
  if (spec.dispersion_corrected) {
    // Plane wave along a grid axis: 2 - 2 cos(kappa h) = (omega h / c)^2.
    const double wh = grid.omega * h;
    slow = [wh](double c) {
      const double arg = 1.0 - 0.5 * sq(wh / c);
      return std::acos(std::max(-1.0, arg)) / wh;
    };
  }
  const int cells = std::max(4096, 8 * N);
  const EdgeSlowness Ei(medium, b.row, cells, slow);
  const EdgeSlowness Ej(medium, b.col, cells, slow);
  std::vector<double> Fi(N), Fj(N), t(N);
  for (int k = 0; k < N; ++k) {
    t[k] = (k + 0.5) * h;
    Fi[k] = Ei.cumulative(t[k]);
    Fj[k] = Ej.cumulative(t[k]);
  }
  const double Ti = Ei.total(), Tj = Ej.total();

  BlockGeometry g;
  g.omega = grid.omega;
  g.s.resize(N, N);
  g.theta.resize(N, N);
  g.tau1.resize(N, N);
  g.tau2.resize(N, N);
  const int dist = block_distance(b);
  double Tn = 0.0, Tp = 0.0;  // sides after and before the column side
  if (dist == 2) {
    Tn = EdgeSlowness(medium, b.col % 4 + 1, cells, slow).total();
    Tp = EdgeSlowness(medium, (b.col + 2) % 4 + 1, cells, slow).total();
  }
  const bool i_follows_j = b.row == b.col % 4 + 1;
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < N; ++m) {
      const double x = t[l], y = t[m];
      double s = 0, th = 0, t1 = 0, t2 = 0;
      if (dist == 0) {
        s = std::abs(x - y);
        th = spec.theta == ThetaKind::PlusSum ? x + y : std::min(x + y, 2.0 - x - y);
        t1 = std::abs(Fi[l] - Fj[m]);
        const double left = std::min(Fi[l], Fj[m]);
        const double right = Ti - std::max(Fi[l], Fj[m]);
        t2 = t1 + 2.0 * std::min(left, right);
      } else if (dist == 1) {
        // Arclengths a, b from the shared corner along the row and column sides.
        double a, bb, ti, tj, fi, fj;
        if (i_follows_j) {
          a = x, bb = 1.0 - y;
          ti = Fi[l], tj = Tj - Fj[m];
          fi = Ti - Fi[l], fj = Fj[m];
        } else {
          a = 1.0 - x, bb = y;
          ti = Ti - Fi[l], tj = Fj[m];
          fi = Fi[l], fj = Tj - Fj[m];
        }
        s = a + bb;
        th = spec.theta == ThetaKind::PlusSum ? a + bb : std::abs(a - bb);
        t1 = ti + tj;
        t2 = t1 + 2.0 * std::min(fi, fj);
      } else {
        // Opposite sides: the shorter of the two routes around the square.
        const double ra = (Tj - Fj[m]) + Tn + Fi[l];
        const double rb = Fj[m] + Tp + (Ti - Fi[l]);
        const double ga = (1.0 - y) + 1.0 + x, gb = y + 1.0 + (1.0 - x);
        s = std::min(ga, gb);
        th = std::abs(ga - gb);
        t1 = std::min(ra, rb);
        t2 = std::max(ra, rb);
      }
      g.s(l, m) = s;
      g.theta(l, m) = th;
      g.tau1(l, m) = t1;
      g.tau2(l, m) = t2;
    }
  return g;
}

}  // namespace

BasisSet build_basis(const BasisSpec& spec, const Medium& medium, const GridSpec& grid, BlockId block) {
  spec.validate();
  const int N = grid.N;
  const double h = grid.h();
  if (block.row < 1 || block.row > 4 || block.col < 1 || block.col > 4) throw ConfigError("block sides must be 1..4");

  BlockGeometry geo = block_geometry(spec, medium, grid, block);

  std::vector<int> rcut{0}, ccut{0};
  if (spec.split_at_discontinuities) {
    for (int c : split_points(medium, block.row, N)) rcut.push_back(c);
    for (int c : split_points(medium, block.col, N)) ccut.push_back(c);
  }
  rcut.push_back(N);
  ccut.push_back(N);
  const int pieces = static_cast<int>((rcut.size() - 1) * (ccut.size() - 1));

  const bool no_theta = spec.theta == ThetaKind::None || block_distance(block) == 2;
  const int nph = static_cast<int>(spec.phases.size());
  const bool identity = spec.local_diagonal && spec.family == BasisFamily::Oscillatory;
  int want = spec.p;
  std::vector<std::pair<int, int>> pairs = spec.exponent_pairs;
  if (pairs.empty()) {
    const int rest = want - (identity ? 1 : 0);
    const int need = rest > 0 ? (rest + nph * pieces - 1) / (nph * pieces) : 1;
    pairs = triangular_pairs(need, no_theta);
  }
  if (want == 0) want = static_cast<int>(pairs.size()) * nph * pieces + (identity ? 1 : 0);
  if (want > N * N / 4) throw ConfigError("basis size p exceeds N^2/4");

  BasisSet out;
  if (identity) out.matrices.push_back(CMatrix::Identity(N, N));
  for (const auto& [j1, j2] : pairs) {
    RMatrix amp(N, N);
    for (int l = 0; l < N; ++l)
      for (int m = 0; m < N; ++m) {
        double a;
        if (spec.family == BasisFamily::PolynomialBothDirections) {
          const double x = (l + 0.5) * h, y = (m + 0.5) * h;
          a = std::pow(x - y, j1) * std::pow(x + y - 1.0, j2);
        } else {
          a = std::pow(h + geo.s(l, m), -j1 / spec.alpha);
          if (j2 > 0 && !no_theta)
            a *= spec.second == SecondFactor::InversePower ? std::pow(h + geo.theta(l, m), -j2 / spec.alpha)
                                                           : std::pow(h + geo.theta(l, m), j2);
        }
        amp(l, m) = a;
      }
    for (PhaseKind ph : spec.phases) {
      CMatrix beta(N, N);
      for (int l = 0; l < N; ++l)
        for (int m = 0; m < N; ++m) {
          double tau = 0.0;
          switch (ph) {
            case PhaseKind::PlusT1: tau = geo.tau1(l, m); break;
            case PhaseKind::MinusT1: tau = -geo.tau1(l, m); break;
            case PhaseKind::PlusT2: tau = geo.tau2(l, m); break;
            case PhaseKind::MinusT2: tau = -geo.tau2(l, m); break;
            case PhaseKind::Constant: tau = 0.0; break;
          }
          beta(l, m) = std::polar(amp(l, m), geo.omega * tau);
        }
      for (std::size_t r = 0; r + 1 < rcut.size(); ++r)
        for (std::size_t c = 0; c + 1 < ccut.size(); ++c) {
          if (out.size() >= want) break;
          if (pieces == 1) {
            out.matrices.push_back(beta);
            continue;
          }
          CMatrix piece = CMatrix::Zero(N, N);
          const int r0 = rcut[r], rn = rcut[r + 1] - rcut[r];
          const int c0 = ccut[c], cn = ccut[c + 1] - ccut[c];
          piece.block(r0, c0, rn, cn) = beta.block(r0, c0, rn, cn);
          out.matrices.push_back(std::move(piece));
        }
    }
    if (out.size() >= want) break;
  }
  out.gram_condition = gram_condition(out.matrices);
  return out;
}

BasisSet halfspace_basis(int N, double k, double alpha, int p) {
  if (N < 1 || p < 1 || !(alpha > 0.0)) throw ConfigError("halfspace_basis: bad arguments");
  const double h = 1.0 / N;
  BasisSet out;
  for (int j = 0; j < p; ++j) {
    CMatrix B(N, N);
    for (int l = 0; l < N; ++l)
      for (int m = 0; m < N; ++m) {
        const double d = std::abs(l - m);
        B(l, m) = std::polar(std::pow(h + h * d, -j / alpha), k * h * d);
      }
    out.matrices.push_back(std::move(B));
  }
  out.gram_condition = gram_condition(out.matrices);
  return out;
}

cplx frob_inner(const CMatrix& A, const CMatrix& B) {
  return (A.array().conjugate() * B.array()).sum();
}

BasisSet orthonormalize(const BasisSet& raw) {
  BasisSet out;
  out.orthonormal = true;
  for (const CMatrix& M : raw.matrices) {
    const double n0 = M.norm();
    CMatrix v = M;
    for (int pass = 0; pass < 2; ++pass)
      for (const CMatrix& q : out.matrices) v -= frob_inner(q, v) * q;
    const double n1 = v.norm();
    if (!(n1 >= 1e-10 * n0) || n0 == 0.0) {
      ++out.dropped;
      continue;
    }
    out.matrices.push_back(v / n1);
  }
  if (2 * out.dropped > raw.size())
    throw NumericError("orthonormalize: " + std::to_string(out.dropped) + " of " + std::to_string(raw.size()) +
                       " basis matrices are dependent");
  if (out.dropped > 0)
    std::cerr << "warning: orthonormalize dropped " << out.dropped << " dependent basis matrices\n";
  out.gram_condition = gram_condition(out.matrices);
  return out;
}

double gram_condition(const std::vector<CMatrix>& mats) {
  const int p = static_cast<int>(mats.size());
  if (p == 0) return 1.0;
  CMatrix G(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = a; b < p; ++b) {
      G(a, b) = frob_inner(mats[a], mats[b]);
      G(b, a) = std::conj(G(a, b));
    }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(G, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

CMatrix ProbeResult::reconstruct(const BasisSet& basis) const {
  if (basis.size() != c.size()) throw ConfigError("reconstruct: coefficient count does not match the basis");
  if (basis.size() == 0) return CMatrix();
  CMatrix M = CMatrix::Zero(basis.matrices[0].rows(), basis.matrices[0].cols());
  for (int j = 0; j < basis.size(); ++j) M += c(j) * basis.matrices[j];
  return M;
}

CMatrix probe_vectors(int N, int q, std::uint64_t stream) {
  Philox rng(stream);
  return gaussian_real(N, q, rng);
}

CMatrix build_psi(const BasisSet& basis, const CMatrix& Z) {
  const Eigen::Index N = Z.rows(), q = Z.cols();
  CMatrix psi(N * q, basis.size());
  for (int j = 0; j < basis.size(); ++j) {
    const CMatrix BZ = basis.matrices[j] * Z;
    for (Eigen::Index r = 0; r < q; ++r) psi.col(j).segment(r * N, N) = BZ.col(r);
  }
  return psi;
}

CVector stack_columns(const CMatrix& W) {
  CVector w(W.size());
  for (Eigen::Index r = 0; r < W.cols(); ++r) w.segment(r * W.rows(), W.rows()) = W.col(r);
  return w;
}

ProbeResult probe_from_psi(const CMatrix& psi, const CVector& w, int q, std::uint64_t stream) {
  const int p = static_cast<int>(psi.cols());
  if (p == 0) throw ConfigError("probe: empty basis");
  if (psi.rows() != w.size()) throw ConfigError("probe: Psi and w lengths differ");
  if (psi.rows() < p) throw ConfigError("probe: q N must be >= p");
  Eigen::BDCSVD<CMatrix> svd(psi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  ProbeResult res;
  res.q = q;
  res.stream = stream;
  res.cond_psi = sv(p - 1) > 0.0 ? sv(0) / sv(p - 1) : std::numeric_limits<double>::infinity();
  if (!(sv(0) > 0.0) || !(sv(p - 1) >= 1e-12 * sv(0)))
    throw NumericError("probe: Psi is rank deficient (cond " + std::to_string(res.cond_psi) + ")");
  CVector ut = svd.matrixU().adjoint() * w;
  for (int k = 0; k < p; ++k) ut(k) = sv(k) > 1e-12 * sv(0) ? ut(k) / sv(k) : cplx(0.0);
  res.c = svd.matrixV() * ut;
  return res;
}

ProbeResult probe_from_samples(const BasisSet& basis, const CMatrix& Z, const CMatrix& W, std::uint64_t stream) {
  if (!basis.orthonormal) throw ConfigError("probe: basis must be orthonormalized");
  if (Z.rows() != W.rows() || Z.cols() != W.cols()) throw ConfigError("probe: Z and W shapes differ");
  if (Z.rows() * Z.cols() < basis.size()) throw ConfigError("probe: q N must be >= p");
  return probe_from_psi(build_psi(basis, Z), stack_columns(W), static_cast<int>(Z.cols()), stream);
}

ProbeResult probe_block(const BlockApply& apply, const BasisSet& basis, int q, std::uint64_t stream) {
  if (basis.size() == 0) throw ConfigError("probe: empty basis");
  const CMatrix Z = probe_vectors(static_cast<int>(basis.matrices[0].rows()), q, stream);
  return probe_from_samples(basis, Z, apply(Z), stream);
}

double spectral_norm(const CMatrix& B, int iterations, double tol) {
  if (B.size() == 0) return 0.0;
  Philox rng(0x5eed);
  CVector v = gaussian_complex(static_cast<int>(B.cols()), 1, rng).col(0);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    CVector w = B.adjoint() * (B * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = std::sqrt(nw);
    v = w / nw;
    if (std::abs(next - est) <= tol * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

Conditioning condition_numbers(const BasisSet& basis, const CMatrix& psi) {
  Conditioning c;
  for (const CMatrix& B : basis.matrices) {
    const double nf = B.norm();
    if (nf > 0.0) c.lambda = std::max(c.lambda, spectral_norm(B) * std::sqrt(double(B.rows())) / nf);
  }
  c.kappa = gram_condition(basis.matrices);
  if (psi.size() > 0) {
    Eigen::BDCSVD<CMatrix> svd(psi);
    const RVector& sv = svd.singularValues();
    const double lo = sv(sv.size() - 1);
    c.cond_psi = lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
  }
  return c;
}

std::vector<double> approximation_curve(const CMatrix& M, const BasisSet& ortho, int multiplicity, double normD) {
  if (!ortho.orthonormal) throw ConfigError("approximation error needs an orthonormal basis");
  std::vector<double> out;
  double rem = M.squaredNorm();
  for (const CMatrix& B : ortho.matrices) {
    rem -= std::norm(frob_inner(B, M));
    out.push_back(std::sqrt(multiplicity * std::max(rem, 0.0)) / normD);
  }
  // Recompute the last one directly to avoid cancellation for tiny errors.
  if (!out.empty()) {
    CMatrix R = M;
    for (const CMatrix& B : ortho.matrices) R -= frob_inner(B, M) * B;
    out.back() = std::sqrt(double(multiplicity)) * R.norm() / normD;
  }
  return out;
}

double approximation_error(const CMatrix& M, const BasisSet& ortho, int p, int multiplicity, double normD) {
  if (!ortho.orthonormal) throw ConfigError("approximation error needs an orthonormal basis");
  if (p < 0 || p > ortho.size()) throw ConfigError("approximation error: p out of range");
  CMatrix R = M;
  for (int j = 0; j < p; ++j) R -= frob_inner(ortho.matrices[j], M) * ortho.matrices[j];
  return std::sqrt(double(multiplicity)) * R.norm() / normD;
}

ProbingMetrics probing_errors(const CMatrix* M_ref, const CMatrix& M_tilde, int multiplicity, double normD,
                              const BasisSet* ortho, const HeldOut* held, std::uint64_t recovery_stream) {
  if (!(normD > 0.0)) throw ConfigError("probing_errors: normD must be positive");
  ProbingMetrics out;
  const double sm = std::sqrt(double(multiplicity));
  if (M_ref) {
    out.probing_error = sm * (*M_ref - M_tilde).norm() / normD;
    if (ortho) out.approximation_error = approximation_error(*M_ref, *ortho, ortho->size(), multiplicity, normD);
  }
  if (held) {
    if (held->stream == recovery_stream)
      throw ConfigError("probing_errors: held-out probes share the recovery stream");
    if (held->Z.cols() == 0) throw ConfigError("probing_errors: no held-out probes");
    out.estimated_error = sm * (held->W - M_tilde * held->Z).norm() / std::sqrt(double(held->Z.cols())) / normD;
  }
  return out;
}

double total_error(const std::vector<double>& e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return std::sqrt(s);
}

BasisSpec default_block_spec(BlockId block, double target_error) {
  BasisSpec s;
  switch (block_distance(block)) {
    case 0:
      s.local_diagonal = true;
      if (target_error < 1e-4)
        s.phases = {PhaseKind::PlusT1, PhaseKind::MinusT1, PhaseKind::PlusT2, PhaseKind::MinusT2};
      else
        s.phases = {PhaseKind::PlusT1, PhaseKind::PlusT2};
      break;
    case 1:
      s.phases = {PhaseKind::PlusT1};
      s.second = SecondFactor::Polynomial;
      break;
    default:
      s.phases = {PhaseKind::PlusT1};
      s.theta = ThetaKind::None;
      s.p = 1;
      break;
  }
  return s;
}

}  // namespace cabc
