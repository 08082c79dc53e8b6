#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "cabc/medium.hpp"
#include "cabc/types.hpp"

namespace cabc {

/// Cell-centred grid: Omega = [0,1]^2 carries nodes x_i = (i + 1/2) h,
/// i = 0..N-1, h = 1/N. Exterior nodes continue the same lattice.
struct GridSpec {
  int N = 16;
  double omega = 2.0 * kPi;
  int pml_width = 8;            ///< w, layer width in grid points
  int strip_gap = 2;            ///< unstretched cells between the boundary and the layer
  double pml_strength = 40.0;   ///< sigma0 * layer thickness

  double h() const { return 1.0 / N; }
  void validate() const;
};

/// Pollution rule omega = omega0 (N/N0)^(2/3), (N0, omega0/2pi) = (1023, 51.2).
double omega_from_pollution(int N);

/// Cubic profile sigma0 * t^3.
double pml_sigma(double depth_fraction, double sigma0);
/// Decided amplitude: strength / ((w+1) h), i.e. per unit of physical layer thickness.
double pml_sigma0(const GridSpec& grid);

/// Complex stretch 1 + i sigma/omega along one axis at lattice coordinate
/// `pos` (in units of h, may be a half-integer), for the given configuration.
cplx pml_stretch(const GridSpec& grid, double pos);

enum class SystemConfig { Interior, Exterior, HalfStrip, Full };

/// Bijection between lattice nodes (i, j) inside a bounding box and unknowns.
struct NodeMap {
  int i0 = 0, j0 = 0, nx = 0, ny = 0;
  std::vector<int> index;                  ///< nx*ny entries, -1 = not an unknown
  std::vector<std::pair<int, int>> nodes;  ///< unknown -> (i, j)

  int at(int i, int j) const {
    const int a = i - i0, b = j - j0;
    if (a < 0 || b < 0 || a >= nx || b >= ny) return -1;
    return index[static_cast<std::size_t>(b) * nx + a];
  }
  int size() const { return static_cast<int>(nodes.size()); }
};

/// Boundary node k of the 4N-long boundary vector: Omega node (i, j) and its
/// outward lattice neighbour (gi, gj). Side-major, counter-clockwise from the
/// bottom side; each Omega corner appears once per incident side.
struct BoundaryPort {
  int i, j;
  int gi, gj;
};
std::vector<BoundaryPort> boundary_ports(int N);

struct Entry {
  int row;
  int col;
  cplx value;
};

struct SparseSystem {
  int dimension = 0;
  std::vector<Entry> entries;
  int bandwidth = 0;  ///< max |row - col| over entries
  SystemConfig config = SystemConfig::Exterior;
  GridSpec grid;
  std::shared_ptr<const NodeMap> nodes;

  Eigen::SparseMatrix<cplx> to_sparse() const;
};

struct AssembledSystem {
  SparseSystem system;
  CVector rhs;
};

/// Assembles the five-point system. Exterior: annulus of width gap + w
/// around Omega with zero Dirichlet beyond; dirichlet = 4N boundary values.
/// HalfStrip: rows j = -(gap+w)..-1 below the bottom side, layers on the
/// left, right and bottom; dirichlet = N values on the bottom side.
/// Full: Omega and the annulus together, zero Dirichlet beyond, no data.
/// Interior: (N+2)^2 nodes, ghost ring rows are identity carrying the
/// optional 4N ghost values (ordered like boundary_ports) or zero.
AssembledSystem assemble_system(const Medium& medium, const GridSpec& grid, SystemConfig config,
                                const CVector* dirichlet = nullptr);

/// Right-hand side produced by Dirichlet data for an already assembled system.
CVector dirichlet_rhs(const SparseSystem& sys, const CVector& g);

struct Field {
  CVector values;
  std::shared_ptr<const NodeMap> nodes;
};

/// Banded complex LU with partial pivoting (LAPACK zgbtrf/zgbtrs storage).
/// Immutable after construction; solve() is const and reentrant.
class BandedLU {
 public:
  explicit BandedLU(const SparseSystem& sys, double memory_budget_bytes = 3.5e9);

  CVector solve(const CVector& rhs) const;
  CMatrix solve(const CMatrix& rhs) const;

  int dimension() const { return n_; }
  int bandwidth() const { return kl_; }
  double min_pivot_ratio() const { return min_pivot_ratio_; }

 private:
  int n_ = 0;
  int kl_ = 0;
  int ldab_ = 0;
  std::vector<cplx> ab_;
  std::vector<int> ipiv_;
  double min_pivot_ratio_ = 0.0;
};

/// Factor and solve once; verifies the relative residual.
Field factor_solve(const SparseSystem& sys, const CVector& rhs);

double relative_residual(const SparseSystem& sys, const CVector& u, const CVector& rhs);

}  // namespace cabc
