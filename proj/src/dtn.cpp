#include "cabc/dtn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace cabc {

// ---- exterior solves ----------------------------------------------------

ExteriorSolver::ExteriorSolver(const Medium& medium, const GridSpec& grid) : grid_(grid) {
  sys_ = assemble_system(medium, grid, SystemConfig::Exterior).system;
  lu_ = std::make_unique<BandedLU>(sys_);
  for (const auto& p : boundary_ports(grid.N)) port_rows_.push_back(sys_.nodes->at(p.gi, p.gj));
}

CMatrix ExteriorSolver::apply(const CMatrix& G) const {
  const int n = 4 * grid_.N;
  if (G.rows() != n) throw ConfigError("boundary data must have 4N rows");
  const double h = grid_.h();
  CMatrix rhs = CMatrix::Zero(sys_.dimension, G.cols());
  for (int k = 0; k < n; ++k) rhs.row(port_rows_[k]) = -G.row(k) / (h * h);
  const CMatrix u = lu_->solve(rhs);
  solves_ += G.cols();
  CMatrix out(n, G.cols());
  for (int k = 0; k < n; ++k) out.row(k) = (u.row(port_rows_[k]) - G.row(k)) / h;
  return out;
}

CVector ExteriorSolver::apply(const CVector& g) const {
  CMatrix out = apply(CMatrix(g));
  return out.col(0);
}

CMatrix ExteriorSolver::apply_block_column(int side, const CMatrix& Z) const {
  const int N = grid_.N;
  if (side < 1 || side > 4 || Z.rows() != N) throw ConfigError("apply_block_column: bad side or length");
  CMatrix G = CMatrix::Zero(4 * N, Z.cols());
  G.middleRows((side - 1) * N, N) = Z;
  return apply(G);
}

CVector dtn_apply(const Medium& medium, const GridSpec& grid, const CVector& g) {
  if (g.size() != 4 * grid.N) throw ConfigError("dtn_apply: g must have length 4N");
  if (g.isZero(0.0)) return CVector::Zero(4 * grid.N);
  return ExteriorSolver(medium, grid).apply(g);
}

CMatrix assemble_dense_dtn(const ExteriorSolver& solver) {
  const int n = 4 * solver.grid().N;
  return solver.apply(CMatrix(CMatrix::Identity(n, n)));
}

CMatrix assemble_dense_dtn(const Medium& medium, const GridSpec& grid) {
  if (grid.N > 1024) throw NumericError("assemble_dense_dtn: N above the dense guard (1024)");
  return assemble_dense_dtn(ExteriorSolver(medium, grid));
}

// ---- elimination oracles ------------------------------------------------

namespace {

CMatrix dense_sub(const Eigen::SparseMatrix<cplx>& A, const std::vector<int>& rows,
                  const std::vector<int>& cols) {
  std::vector<int> where(A.rows(), -1);
  for (std::size_t r = 0; r < rows.size(); ++r) where[rows[r]] = static_cast<int>(r);
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(A, cols[c]); it; ++it)
      if (where[it.row()] >= 0) out(where[it.row()], static_cast<Eigen::Index>(c)) = it.value();
  return out;
}

CMatrix guarded_solve(const CMatrix& A, const CMatrix& B, const char* what) {
  Eigen::PartialPivLU<CMatrix> lu(A);
  if (!(lu.rcond() > 1e-14)) throw NumericError(std::string(what) + ": singular Schur block");
  return lu.solve(B);
}

CMatrix dtn_from_ring_schur(const CMatrix& T, double h) {
  const Eigen::Index n = T.rows();
  CMatrix Tinv = guarded_solve(T, CMatrix::Identity(n, n), "ring Schur complement");
  return (-Tinv / (h * h) - CMatrix::Identity(n, n)) / h;
}

}  // namespace

CMatrix eliminate_dtn_oracle(const Medium& medium, const GridSpec& grid, EliminationMode mode) {
  const SparseSystem sys = assemble_system(medium, grid, SystemConfig::Exterior).system;
  if (sys.dimension > 40000) throw NumericError("eliminate_dtn_oracle: more than 4e4 exterior unknowns");
  const Eigen::SparseMatrix<cplx> A = sys.to_sparse();
  const NodeMap& map = *sys.nodes;
  const int N = grid.N;
  const double h = grid.h();

  std::vector<int> port;
  for (const auto& p : boundary_ports(N)) port.push_back(map.at(p.gi, p.gj));

  if (mode == EliminationMode::OnePass) {
    std::vector<char> is_port(sys.dimension, 0);
    for (int r : port) is_port[r] = 1;
    std::vector<int> rest;
    for (int r = 0; r < sys.dimension; ++r)
      if (!is_port[r]) rest.push_back(r);
    const double bytes = 16.0 * rest.size() * rest.size();
    if (bytes > 2.5e9) throw NumericError("eliminate_dtn_oracle: dense block over the memory guard");
    const CMatrix App = dense_sub(A, port, port);
    const CMatrix Apr = dense_sub(A, port, rest);
    const CMatrix Arr = dense_sub(A, rest, rest);
    const CMatrix T = App - Apr * guarded_solve(Arr, Apr.transpose(), "one-pass elimination");
    return dtn_from_ring_schur(T, h);
  }

  // Rings at Chebyshev distance r from Omega, stripped from the outside in.
  const int d = grid.strip_gap + grid.pml_width;
  std::vector<std::vector<int>> ring(d + 1);
  for (int r = 0; r < sys.dimension; ++r) {
    const auto [i, j] = map.nodes[r];
    const int dist = std::max({-i, i - (N - 1), -j, j - (N - 1)});
    ring[dist].push_back(r);
  }
  CMatrix S = dense_sub(A, ring[d], ring[d]);
  for (int r = d - 1; r >= 1; --r) {
    const CMatrix Arr = dense_sub(A, ring[r], ring[r]);
    const CMatrix Aro = dense_sub(A, ring[r], ring[r + 1]);
    // Symmetric pattern: A(outer, r) = A(r, outer)^T.
    S = Arr - Aro * guarded_solve(S, Aro.transpose(), "layer stripping");
  }
  // Ring 1: eliminate its four corner nodes, keep the ports in boundary order.
  std::vector<int> pos(sys.dimension, -1);
  for (std::size_t q = 0; q < ring[1].size(); ++q) pos[ring[1][q]] = static_cast<int>(q);
  std::vector<char> used(ring[1].size(), 0);
  std::vector<int> pidx, cidx;
  for (int r : port) {
    pidx.push_back(pos[r]);
    used[pos[r]] = 1;
  }
  for (std::size_t q = 0; q < ring[1].size(); ++q)
    if (!used[q]) cidx.push_back(static_cast<int>(q));
  const CMatrix Spp = S(pidx, pidx);
  const CMatrix Spc = S(pidx, cidx);
  const CMatrix Scc = S(cidx, cidx);
  const CMatrix Scp = S(cidx, pidx);
  const CMatrix T = Spp - Spc * guarded_solve(Scc, Scp, "corner elimination");
  return dtn_from_ring_schur(T, h);
}

// ---- half-space strip ---------------------------------------------------

HalfspaceStrip layer_strip_halfspace(const std::function<double(double)>& speed_on_line,
                                     const GridSpec& grid, int depth_layers) {
  grid.validate();
  if (depth_layers < 2) throw ConfigError("layer_strip_halfspace: depth_layers must be >= 2");
  const int N = grid.N;
  const double h = grid.h();
  const int lat = grid.strip_gap + grid.pml_width;
  const int L = N + 2 * lat;
  const int damped = std::max(1, depth_layers / 4);
  GridSpec vert = grid;
  vert.pml_width = damped;
  vert.strip_gap = depth_layers - damped;

  std::vector<double> k2(L);
  for (int a = 0; a < L; ++a) {
    const double c = speed_on_line((a - lat + 0.5) * h);
    k2[a] = grid.omega * grid.omega / (c * c);
  }
  auto sx = [&](double pos) { return pml_stretch(grid, pos - lat); };
  auto sy = [&](double pos) { return vert.strip_gap >= 1 ? pml_stretch(vert, pos) : cplx(1.0); };

  // h^2 times the symmetrised line operator at lattice row j (j < 0).
  auto line_block = [&](int j) {
    CMatrix M = CMatrix::Zero(L, L);
    const cplx syj = sy(j);
    for (int a = 0; a < L; ++a) {
      const cplx e = syj / sx(a + 0.5), w = syj / sx(a - 0.5);
      const cplx n = sx(a) / sy(j + 0.5), s = sx(a) / sy(j - 0.5);
      M(a, a) = -(e + w + n + s) + h * h * k2[a] * sx(a) * syj;
      if (a + 1 < L) M(a, a + 1) = e;
      if (a > 0) M(a, a - 1) = w;
    }
    return M;
  };
  auto coupling = [&](int j) {  // between rows j and j+1
    CVector v(L);
    for (int a = 0; a < L; ++a) v(a) = sx(a) / sy(j + 0.5);
    return v;
  };

  HalfspaceStrip out;
  CMatrix S = line_block(-depth_layers);
  CMatrix Dprev;
  for (int j = -depth_layers + 1; j <= -1; ++j) {
    const CVector v = coupling(j - 1);
    CMatrix Sinv_v = guarded_solve(S, CMatrix(v.asDiagonal()), "strip recursion");
    S = line_block(j) - v.asDiagonal() * Sinv_v;
    CMatrix Dk = (S + CMatrix::Identity(L, L)) / h;
    if (Dprev.size()) out.increments.push_back((Dk - Dprev).norm() / Dprev.norm());
    Dprev = std::move(Dk);
  }
  out.D = Dprev.block(lat, lat, N, N);
  const CMatrix Sinv = guarded_solve(S, CMatrix::Identity(L, L), "strip recursion");
  out.neumann = (-Sinv.block(lat, lat, N, N) - CMatrix::Identity(N, N)) / h;
  return out;
}

CMatrix halfstrip_dtn(const Medium& medium, const GridSpec& grid) {
  const int N = grid.N;
  const double h = grid.h();
  AssembledSystem as = assemble_system(medium, grid, SystemConfig::HalfStrip);
  BandedLU lu(as.system);
  CMatrix rhs(as.system.dimension, N);
  for (int t = 0; t < N; ++t) {
    CVector e = CVector::Zero(N);
    e(t) = 1.0;
    rhs.col(t) = dirichlet_rhs(as.system, e);
  }
  const CMatrix u = lu.solve(rhs);
  CMatrix D(N, N);
  for (int t = 0; t < N; ++t) D.row(t) = u.row(as.system.nodes->at(t, -1));
  return (D - CMatrix::Identity(N, N)) / h;
}

// ---- blocks and ledger --------------------------------------------------

CMatrix orient_block(const CMatrix& M, Orientation o) {
  switch (o) {
    case Orientation::Id: return M;
    case Orientation::Transpose: return M.transpose();
    case Orientation::FlipCols: return M.rowwise().reverse();
    case Orientation::TransposeFlipCols: return CMatrix(M.transpose()).rowwise().reverse();
    case Orientation::FlipBoth: return M.reverse();
    case Orientation::TransposeFlipBoth: return CMatrix(M.transpose()).reverse();
  }
  return M;
}

CMatrix unorient_block(const CMatrix& B, Orientation o) {
  switch (o) {
    case Orientation::TransposeFlipCols: return CMatrix(B.rowwise().reverse()).transpose();
    default: return orient_block(B, o);  // the others are involutions
  }
}

CMatrix get_block(const CMatrix& D, BlockId id) {
  const Eigen::Index N = D.rows() / 4;
  return D.block((id.row - 1) * N, (id.col - 1) * N, N, N);
}

void set_block(CMatrix& D, BlockId id, const CMatrix& B) {
  const Eigen::Index N = D.rows() / 4;
  D.block((id.row - 1) * N, (id.col - 1) * N, N, N) = B;
}

int block_distance(BlockId id) {
  const int d = std::abs(id.row - id.col);
  return std::min(d, 4 - d);
}

BlockLedger ledger_from_group(const std::vector<SquareMap>& group, bool use_transpose) {
  std::map<std::pair<int, int>, int> owner;
  BlockLedger ledger;
  for (int col = 1; col <= 4; ++col)
    for (int row = 1; row <= 4; ++row) {
      if (owner.count({row, col})) continue;
      LedgerEntry e;
      e.representative = {row, col};
      const int id = static_cast<int>(ledger.size());
      auto claim = [&](int r, int c, Orientation o) {
        if (owner.count({r, c})) return;
        owner[{r, c}] = id;
        e.copies.push_back({{r, c}, o});
      };
      claim(row, col, Orientation::Id);
      for (SquareMap g : group) {
        const int r = map_side(g, row), c = map_side(g, col);
        const bool refl = is_reflection(g);
        claim(r, c, refl ? Orientation::FlipBoth : Orientation::Id);
        if (use_transpose) claim(c, r, refl ? Orientation::TransposeFlipBoth : Orientation::Transpose);
      }
      e.multiplicity = static_cast<int>(e.copies.size());
      ledger.push_back(std::move(e));
    }
  return ledger;
}

BlockLedger trivial_ledger() { return ledger_from_group({SquareMap::Id}, false); }

BlockLedger ledger_for(const Medium& medium) {
  const auto group = symmetry_group(medium);
  if (group.empty()) return trivial_ledger();
  return ledger_from_group(group);
}

CMatrix assemble_from_ledger(const BlockLedger& ledger, const std::vector<CMatrix>& reps) {
  if (reps.size() != ledger.size()) throw ConfigError("assemble_from_ledger: one matrix per representative");
  const Eigen::Index N = reps.front().rows();
  CMatrix D = CMatrix::Zero(4 * N, 4 * N);
  for (std::size_t e = 0; e < ledger.size(); ++e)
    for (const auto& cp : ledger[e].copies) set_block(D, cp.position, orient_block(reps[e], cp.orientation));
  return D;
}

double estimate_frobenius(const CMatrix& DZ) {
  if (DZ.cols() == 0) return 0.0;
  return DZ.norm() / std::sqrt(static_cast<double>(DZ.cols()));
}

}  // namespace cabc
