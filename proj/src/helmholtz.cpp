#include "cabc/helmholtz.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace cabc {

void GridSpec::validate() const {
  if (N < 2) throw ConfigError("grid.N must be >= 2");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("grid.omega must be positive");
  if (pml_width < 1) throw ConfigError("grid.pml_width must be >= 1");
  if (strip_gap < 1) throw ConfigError("grid.strip_gap must be >= 1");
  if (!(pml_strength >= 0.0)) throw ConfigError("grid.pml_strength must be >= 0");
}

double omega_from_pollution(int N) {
  const double omega0 = 2.0 * kPi * 51.2;
  return omega0 * std::pow(static_cast<double>(N) / 1023.0, 2.0 / 3.0);
}

double pml_sigma(double t, double sigma0) {
  t = std::clamp(t, 0.0, 1.0);
  return sigma0 * t * t * t;
}

double pml_sigma0(const GridSpec& g) { return g.pml_strength / ((g.pml_width + 1) * g.h()); }

cplx pml_stretch(const GridSpec& g, double pos) {
  const double h = g.h();
  const double x = (pos + 0.5) * h;
  const double outside = std::max({0.0, -x, x - 1.0});
  const double start = (g.strip_gap - 0.5) * h;
  const double t = (outside - start) / ((g.pml_width + 1) * h);
  if (t <= 0.0) return {1.0, 0.0};
  return {1.0, pml_sigma(t, pml_sigma0(g)) / g.omega};
}

std::vector<BoundaryPort> boundary_ports(int N) {
  std::vector<BoundaryPort> ports;
  ports.reserve(4 * N);
  for (int t = 0; t < N; ++t) ports.push_back({t, 0, t, -1});
  for (int t = 0; t < N; ++t) ports.push_back({N - 1, t, N, t});
  for (int t = 0; t < N; ++t) ports.push_back({N - 1 - t, N - 1, N - 1 - t, N});
  for (int t = 0; t < N; ++t) ports.push_back({0, N - 1 - t, -1, N - 1 - t});
  return ports;
}

Eigen::SparseMatrix<cplx> SparseSystem::to_sparse() const {
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(entries.size());
  for (const auto& e : entries) trip.emplace_back(e.row, e.col, e.value);
  Eigen::SparseMatrix<cplx> a(dimension, dimension);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

namespace {

std::shared_ptr<NodeMap> make_nodes(int i0, int j0, int nx, int ny, auto&& keep) {
  auto map = std::make_shared<NodeMap>();
  map->i0 = i0;
  map->j0 = j0;
  map->nx = nx;
  map->ny = ny;
  map->index.assign(static_cast<std::size_t>(nx) * ny, -1);
  for (int b = 0; b < ny; ++b)
    for (int a = 0; a < nx; ++a) {
      const int i = i0 + a, j = j0 + b;
      if (!keep(i, j)) continue;
      map->index[static_cast<std::size_t>(b) * nx + a] = static_cast<int>(map->nodes.size());
      map->nodes.emplace_back(i, j);
    }
  return map;
}

struct Stencil {
  cplx diag, east, west, north, south;
};

// Symmetrised stretched five-point operator (rows multiplied by s_x s_y).
Stencil stencil(const Medium& medium, const GridSpec& g, int i, int j, bool stretched) {
  const double h = g.h();
  const double inv_h2 = 1.0 / (h * h);
  auto s = [&](double pos) { return stretched ? pml_stretch(g, pos) : cplx(1.0, 0.0); };
  const cplx sx = s(i), sy = s(j);
  const cplx e = sy / s(i + 0.5), w = sy / s(i - 0.5);
  const cplx n = sx / s(j + 0.5), so = sx / s(j - 0.5);
  const double c = eval_speed(medium, {(i + 0.5) * h, (j + 0.5) * h});
  const double k2 = g.omega * g.omega / (c * c);
  Stencil st;
  st.east = e * inv_h2;
  st.west = w * inv_h2;
  st.north = n * inv_h2;
  st.south = so * inv_h2;
  st.diag = -(e + w + n + so) * inv_h2 + k2 * sx * sy;
  return st;
}

void finalize(SparseSystem& sys) {
  int bw = 0;
  for (const auto& e : sys.entries) bw = std::max(bw, std::abs(e.row - e.col));
  sys.bandwidth = bw;
  sys.dimension = sys.nodes->size();
}

}  // namespace

AssembledSystem assemble_system(const Medium& medium, const GridSpec& grid, SystemConfig config,
                                const CVector* dirichlet) {
  grid.validate();
  const int N = grid.N;
  const int d = grid.strip_gap + grid.pml_width;
  SparseSystem sys;
  sys.config = config;
  sys.grid = grid;

  if (config == SystemConfig::Interior) {
    sys.nodes = make_nodes(-1, -1, N + 2, N + 2, [](int, int) { return true; });
  } else if (config == SystemConfig::Exterior) {
    sys.nodes = make_nodes(-d, -d, N + 2 * d, N + 2 * d,
                           [N](int i, int j) { return i < 0 || j < 0 || i >= N || j >= N; });
  } else if (config == SystemConfig::Full) {
    sys.nodes = make_nodes(-d, -d, N + 2 * d, N + 2 * d, [](int, int) { return true; });
  } else {
    sys.nodes = make_nodes(-d, -d, N + 2 * d, d, [](int, int) { return true; });
  }
  const NodeMap& map = *sys.nodes;
  if (map.size() < 1) throw ConfigError("geometry yields no unknowns");

  const bool stretched = config != SystemConfig::Interior;
  for (int r = 0; r < map.size(); ++r) {
    const auto [i, j] = map.nodes[r];
    if (config == SystemConfig::Interior && (i < 0 || j < 0 || i >= N || j >= N)) {
      sys.entries.push_back({r, r, 1.0});
      continue;
    }
    const Stencil st = stencil(medium, grid, i, j, stretched);
    sys.entries.push_back({r, r, st.diag});
    const std::pair<int, int> nb[4] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
    const cplx coef[4] = {st.east, st.west, st.north, st.south};
    for (int q = 0; q < 4; ++q) {
      const int c = map.at(nb[q].first, nb[q].second);
      if (c >= 0) sys.entries.push_back({r, c, coef[q]});
    }
  }
  finalize(sys);

  AssembledSystem out{std::move(sys), CVector::Zero(map.size())};
  if (dirichlet) out.rhs = dirichlet_rhs(out.system, *dirichlet);
  return out;
}

CVector dirichlet_rhs(const SparseSystem& sys, const CVector& g) {
  const NodeMap& map = *sys.nodes;
  const GridSpec& grid = sys.grid;
  const int N = grid.N;
  CVector rhs = CVector::Zero(sys.dimension);
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  switch (sys.config) {
    case SystemConfig::Exterior: {
      if (g.size() != 4 * N) throw ConfigError("exterior dirichlet data must have length 4N");
      const auto ports = boundary_ports(N);
      for (int k = 0; k < 4 * N; ++k) {
        const int r = map.at(ports[k].gi, ports[k].gj);
        // The ring next to Omega lies in the unstretched gap: coupling is 1/h^2.
        rhs(r) -= inv_h2 * g(k);
      }
      break;
    }
    case SystemConfig::HalfStrip: {
      if (g.size() != N) throw ConfigError("half-strip dirichlet data must have length N");
      for (int t = 0; t < N; ++t) {
        const int r = map.at(t, -1);
        const cplx sx = pml_stretch(grid, t);
        rhs(r) -= sx / pml_stretch(grid, -0.5) * inv_h2 * g(t);
      }
      break;
    }
    case SystemConfig::Full:
      if (g.size() != 0) throw ConfigError("full-domain system takes no boundary data");
      break;
    case SystemConfig::Interior: {
      if (g.size() != 4 * N) throw ConfigError("interior ghost data must have length 4N");
      const auto ports = boundary_ports(N);
      for (int k = 0; k < 4 * N; ++k) rhs(map.at(ports[k].gi, ports[k].gj)) = g(k);
      break;
    }
  }
  return rhs;
}

BandedLU::BandedLU(const SparseSystem& sys, double memory_budget_bytes) {
  n_ = sys.dimension;
  kl_ = std::max(1, sys.bandwidth);
  ldab_ = 2 * kl_ + kl_ + 1;
  const double bytes = static_cast<double>(ldab_) * n_ * sizeof(cplx);
  if (bytes > memory_budget_bytes)
    throw NumericError("banded LU needs " + std::to_string(bytes / 1e9) + " GB, over the memory budget");
  ab_.assign(static_cast<std::size_t>(ldab_) * n_, cplx(0.0, 0.0));
  double anorm = 0.0;
  std::vector<double> rowsum(n_, 0.0);
  for (const auto& e : sys.entries) {
    ab_[static_cast<std::size_t>(e.col) * ldab_ + (2 * kl_ + e.row - e.col)] += e.value;
    rowsum[e.row] += std::abs(e.value);
  }
  for (double v : rowsum) anorm = std::max(anorm, v);
  ipiv_.assign(n_, 0);
  const int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, kl_, ab_.data(), ldab_, ipiv_.data());
  if (info < 0) throw NumericError("zgbtrf: illegal argument " + std::to_string(-info));
  double umin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n_; ++j) umin = std::min(umin, std::abs(ab_[static_cast<std::size_t>(j) * ldab_ + 2 * kl_]));
  min_pivot_ratio_ = anorm > 0.0 ? umin / anorm : 0.0;
  if (info > 0 || min_pivot_ratio_ < 1e-14)
    throw NumericError("singular or ill-conditioned factorization: min |pivot| / ||A|| = " +
                       std::to_string(min_pivot_ratio_));
}

CMatrix BandedLU::solve(const CMatrix& rhs) const {
  if (rhs.rows() != n_) throw ConfigError("rhs length does not match the system dimension");
  CMatrix x = rhs;
  if (x.cols() == 0) return x;
  const int info = LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', n_, kl_, kl_, static_cast<int>(x.cols()),
                                  ab_.data(), ldab_, ipiv_.data(), x.data(), n_);
  if (info != 0) throw NumericError("zgbtrs failed: " + std::to_string(info));
  return x;
}

CVector BandedLU::solve(const CVector& rhs) const {
  CMatrix x = solve(CMatrix(rhs));
  return x.col(0);
}

double relative_residual(const SparseSystem& sys, const CVector& u, const CVector& rhs) {
  CVector r = -rhs;
  for (const auto& e : sys.entries) r(e.row) += e.value * u(e.col);
  const double nb = rhs.norm();
  return nb > 0.0 ? r.norm() / nb : r.norm();
}

Field factor_solve(const SparseSystem& sys, const CVector& rhs) {
  BandedLU lu(sys);
  Field f{lu.solve(rhs), sys.nodes};
  const double res = relative_residual(sys, f.values, rhs);
  if (!(res <= 1e-10)) throw NumericError("factor_solve: relative residual " + std::to_string(res));
  return f;
}

}  // namespace cabc
