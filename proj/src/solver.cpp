#include "cabc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include <Eigen/LU>

namespace cabc {

// ---- DtN realizations -----------------------------------------------------

DtNRealization DtNRealization::dense(CMatrix D) {
  if (D.rows() != D.cols() || D.rows() % 4 != 0 || D.rows() == 0)
    throw ConfigError("dense DtN must be 4N x 4N");
  DtNRealization r;
  r.variant_ = DtNVariant::Dense;
  r.N_ = static_cast<int>(D.rows() / 4);
  r.dense_ = std::move(D);
  return r;
}

namespace {

void check_ledger(const BlockLedger& ledger, std::size_t count) {
  if (ledger.empty() || ledger.size() != count) throw ConfigError("DtN realization: one block per ledger entry");
  int covered = 0;
  for (const auto& e : ledger) covered += static_cast<int>(e.copies.size());
  if (covered != 16) throw ConfigError("DtN realization: ledger must cover the 16 blocks");
}

CMatrix flip(const CMatrix& X) { return X.colwise().reverse(); }

// orient_block(M, o) * X through products with M and M^T only.
template <class Mul, class MulT>
CMatrix oriented_product(Orientation o, const CMatrix& X, Mul&& mul, MulT&& mul_t) {
  switch (o) {
    case Orientation::Id: return mul(X);
    case Orientation::Transpose: return mul_t(X);
    case Orientation::FlipCols: return mul(flip(X));
    case Orientation::TransposeFlipCols: return mul_t(flip(X));
    case Orientation::FlipBoth: return flip(mul(flip(X)));
    case Orientation::TransposeFlipBoth: return flip(mul_t(flip(X)));
  }
  return mul(X);
}

}  // namespace

DtNRealization DtNRealization::probed(BlockLedger ledger, std::vector<CMatrix> reps) {
  check_ledger(ledger, reps.size());
  const Eigen::Index N = reps.front().rows();
  for (const auto& m : reps)
    if (m.rows() != N || m.cols() != N) throw ConfigError("probed DtN: blocks must all be N x N");
  DtNRealization r;
  r.variant_ = DtNVariant::Probed;
  r.N_ = static_cast<int>(N);
  r.ledger_ = std::move(ledger);
  r.reps_ = std::move(reps);
  return r;
}

DtNRealization DtNRealization::compressed(BlockLedger ledger, std::vector<PLRMatrix> reps) {
  check_ledger(ledger, reps.size());
  const int N = reps.front().n_orig;
  for (const auto& m : reps)
    if (m.n_orig != N) throw ConfigError("compressed DtN: blocks must all be N x N");
  DtNRealization r;
  r.variant_ = DtNVariant::Compressed;
  r.N_ = N;
  r.ledger_ = std::move(ledger);
  r.plr_ = std::move(reps);
  return r;
}

CMatrix DtNRealization::apply(const CMatrix& G) const {
  const int N = N_;
  if (G.rows() != 4 * N) throw ConfigError("DtN apply: data must have 4N rows, got " + std::to_string(G.rows()));
  if (variant_ == DtNVariant::Dense) return dense_ * G;
  CMatrix out = CMatrix::Zero(4 * N, G.cols());
  for (std::size_t e = 0; e < ledger_.size(); ++e) {
    for (const auto& cp : ledger_[e].copies) {
      const CMatrix X = G.middleRows((cp.position.col - 1) * N, N);
      CMatrix Y;
      if (variant_ == DtNVariant::Probed) {
        const CMatrix& M = reps_[e];
        Y = oriented_product(
            cp.orientation, X, [&](const CMatrix& Z) { return CMatrix(M * Z); },
            [&](const CMatrix& Z) { return CMatrix(M.transpose() * Z); });
      } else {
        const PLRMatrix& P = plr_[e];
        Y = oriented_product(
            cp.orientation, X, [&](const CMatrix& Z) { return plr_matvec(P, Z); },
            [&](const CMatrix& Z) { return plr_matvec_transpose(P, Z); });
      }
      out.middleRows((cp.position.row - 1) * N, N) += Y;
    }
  }
  return out;
}

CVector DtNRealization::apply(const CVector& g) const {
  CMatrix y = apply(CMatrix(g));
  return y.col(0);
}

long long DtNRealization::matvec_ops() const {
  const long long n = 4LL * N_;
  switch (variant_) {
    case DtNVariant::Dense: return 2 * n * n;
    case DtNVariant::Probed: return 16 * 2LL * N_ * N_;
    case DtNVariant::Compressed: {
      long long ops = 0;
      for (std::size_t e = 0; e < ledger_.size(); ++e)
        ops += static_cast<long long>(ledger_[e].copies.size()) * matvec_cost(plr_[e]);
      return ops;
    }
  }
  return 0;
}

CMatrix DtNRealization::to_dense() const {
  if (variant_ == DtNVariant::Dense) return dense_;
  if (variant_ == DtNVariant::Probed) return assemble_from_ledger(ledger_, reps_);
  std::vector<CMatrix> reps;
  for (const auto& p : plr_) reps.push_back(p.dense());
  return assemble_from_ledger(ledger_, reps);
}

// ---- interior solve -------------------------------------------------------

CVector point_source(int N, double x, double y) {
  if (N < 1) throw ConfigError("point_source: N must be positive");
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) throw ConfigError("point_source: location outside the unit square");
  const double h = 1.0 / N;
  const int i = std::clamp(static_cast<int>(std::floor(x / h)), 0, N - 1);
  const int j = std::clamp(static_cast<int>(std::floor(y / h)), 0, N - 1);
  CVector f = CVector::Zero(static_cast<Eigen::Index>(N) * N);
  f(i + static_cast<Eigen::Index>(N) * j) = 1.0 / (h * h);
  return f;
}

InteriorSolver::InteriorSolver(const Medium& medium, const GridSpec& grid) : grid_(grid) {
  grid.validate();
  const int N = grid.N;
  const double h = grid.h();
  // The Interior assembly carries the ghost ring; keep the Omega block only.
  const AssembledSystem full = assemble_system(medium, grid, SystemConfig::Interior);
  const NodeMap& map = *full.system.nodes;
  std::vector<int> local(map.size(), -1);
  for (int r = 0; r < map.size(); ++r) {
    const auto [i, j] = map.nodes[r];
    if (i >= 0 && j >= 0 && i < N && j < N) local[r] = i + N * j;
  }
  sys_.config = SystemConfig::Interior;
  sys_.grid = grid;
  auto nodes = std::make_shared<NodeMap>();
  nodes->i0 = 0;
  nodes->j0 = 0;
  nodes->nx = N;
  nodes->ny = N;
  nodes->index.resize(static_cast<std::size_t>(N) * N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      nodes->index[static_cast<std::size_t>(j) * N + i] = i + N * j;
      nodes->nodes.emplace_back(i, j);
    }
  sys_.nodes = nodes;
  for (const auto& e : full.system.entries) {
    if (local[e.row] < 0 || local[e.col] < 0) continue;
    sys_.entries.push_back({local[e.row], local[e.col], e.value});
  }
  const auto ports = boundary_ports(N);
  port_node_.resize(ports.size());
  for (std::size_t k = 0; k < ports.size(); ++k) {
    port_node_[k] = ports[k].i + N * ports[k].j;
    sys_.entries.push_back({port_node_[k], port_node_[k], cplx(1.0 / (h * h), 0.0)});
  }
  sys_.dimension = N * N;
  int bw = 0;
  for (const auto& e : sys_.entries) bw = std::max(bw, std::abs(e.row - e.col));
  sys_.bandwidth = bw;
  lu_ = std::make_unique<BandedLU>(sys_);
}

const CMatrix& InteriorSolver::border_green() const {
  std::call_once(*G_once_, [this] {
    const int n = static_cast<int>(port_node_.size());
    CMatrix Et = CMatrix::Zero(sys_.dimension, n);
    for (int k = 0; k < n; ++k) Et(port_node_[k], k) = 1.0;
    const CMatrix X = lu_->solve(Et);
    CMatrix G(n, n);
    for (int k = 0; k < n; ++k) G.row(k) = X.row(port_node_[k]);
    G_ = std::move(G);
  });
  return G_;
}

InteriorSolution InteriorSolver::solve(const DtNRealization& dtn, const CVector& f) const {
  const int N = grid_.N;
  if (dtn.N() != N) throw ConfigError("DtN realization was built for N = " + std::to_string(dtn.N()) +
                                      ", interior grid has N = " + std::to_string(N));
  if (f.size() != static_cast<Eigen::Index>(N) * N) throw ConfigError("source must have N^2 entries");
  InteriorSolution sol;
  if (f.isZero(0.0)) {
    sol.u = CVector::Zero(f.size());
    return sol;
  }
  const double h = grid_.h();
  const int n = 4 * N;
  const CMatrix& G = border_green();
  // z = (D/h) E u satisfies (I + (D/h) G) z = (D/h) E A0^{-1} f; then u = A0^{-1}(f - E^T z).
  const CVector w = lu_->solve(f);
  CVector Ew(n);
  for (int k = 0; k < n; ++k) Ew(k) = w(port_node_[k]);
  CMatrix K = dtn.apply(G) / h;
  K.diagonal().array() += 1.0;
  const CVector rhs = dtn.apply(Ew) / h;
  Eigen::PartialPivLU<CMatrix> lu(K);
  const CVector z = lu.solve(rhs);
  CVector f2 = f;
  for (int k = 0; k < n; ++k) f2(port_node_[k]) -= z(k);
  sol.u = lu_->solve(f2);

  // residual of (A0 + E^T D E / h) u = f
  CVector Eu(n);
  for (int k = 0; k < n; ++k) Eu(k) = sol.u(port_node_[k]);
  const CVector DEu = dtn.apply(Eu) / h;
  CVector r = -f;
  for (const auto& e : sys_.entries) r(e.row) += e.value * sol.u(e.col);
  for (int k = 0; k < n; ++k) r(port_node_[k]) += DEu(k);
  sol.residual = r.norm() / f.norm();
  if (!(sol.residual <= 1e-9))
    throw NumericError("interior solve: relative residual " + std::to_string(sol.residual));
  return sol;
}

CVector InteriorSolver::solve_monolithic(const CMatrix& D, const CVector& f) const {
  const int N = grid_.N;
  if (N > 32) throw ConfigError("solve_monolithic: dense oracle limited to N <= 32");
  if (D.rows() != 4 * N || D.cols() != 4 * N) throw ConfigError("solve_monolithic: D must be 4N x 4N");
  const int m = N * N;
  CMatrix A = CMatrix::Zero(m, m);
  for (const auto& e : sys_.entries) A(e.row, e.col) += e.value;
  const double h = grid_.h();
  for (int a = 0; a < 4 * N; ++a)
    for (int b = 0; b < 4 * N; ++b) A(port_node_[a], port_node_[b]) += D(a, b) / h;
  return Eigen::PartialPivLU<CMatrix>(A).solve(f);
}

InteriorSolution solve_with_dtn(const Medium& medium, const GridSpec& grid, const DtNRealization& dtn,
                                const CVector& f) {
  return InteriorSolver(medium, grid).solve(dtn, f);
}

CVector reference_solve(const Medium& medium, const GridSpec& grid, const CVector& f) {
  const int N = grid.N;
  if (f.size() != static_cast<Eigen::Index>(N) * N) throw ConfigError("source must have N^2 entries");
  const AssembledSystem as = assemble_system(medium, grid, SystemConfig::Full);
  const NodeMap& map = *as.system.nodes;
  CVector rhs = CVector::Zero(map.size());
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) rhs(map.at(i, j)) = f(i + static_cast<Eigen::Index>(N) * j);
  const Field u = factor_solve(as.system, rhs);
  CVector out(static_cast<Eigen::Index>(N) * N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) out(i + static_cast<Eigen::Index>(N) * j) = u.values(map.at(i, j));
  return out;
}

double solution_error(const CVector& u, const CVector& u_ref) {
  if (u.size() != u_ref.size()) throw ConfigError("solution_error: size mismatch");
  const double nr = u_ref.norm();
  if (!(nr > 0.0)) throw NumericError("solution_error: reference has zero norm");
  return (u - u_ref).norm() / nr;
}

std::vector<GrazingPoint> grazing_scan(const InteriorSolver& solver, const DtNRealization& dtn,
                                       const DtNRealization& reference, const std::vector<double>& offsets) {
  const GridSpec& g = solver.grid();
  std::vector<GrazingPoint> out;
  for (double d : offsets) {
    if (!(d >= 2.0 * g.h() - 1e-12) || d > 0.5) throw ConfigError("grazing_scan: offsets must lie in [2h, 1/2]");
    const CVector f = point_source(g.N, 0.5, d);
    const CVector u = solver.solve(dtn, f).u;
    const CVector ur = solver.solve(reference, f).u;
    out.push_back({d, solution_error(u, ur)});
  }
  return out;
}

}  // namespace cabc
