#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "cabc/dtn.hpp"
#include "cabc/helmholtz.hpp"
#include "cabc/medium.hpp"
#include "cabc/plr.hpp"
#include "cabc/types.hpp"

namespace cabc {

enum class DtNVariant { Dense, Probed, Compressed };

/// Black-box boundary map g -> D g on 4N boundary vectors. Probed and
/// Compressed realizations store one matrix per ledger representative and
/// apply it once per copy with that copy's orientation.
class DtNRealization {
 public:
  static DtNRealization dense(CMatrix D);
  static DtNRealization probed(BlockLedger ledger, std::vector<CMatrix> reps);
  static DtNRealization compressed(BlockLedger ledger, std::vector<PLRMatrix> reps);

  DtNVariant variant() const { return variant_; }
  int N() const { return N_; }
  /// G is 4N x q.
  CMatrix apply(const CMatrix& G) const;
  CVector apply(const CVector& g) const;
  /// Operation count of one application (dense blocks 2 n^2, PLR leaves 4 n R).
  long long matvec_ops() const;
  /// Dense 4N x 4N matrix of the realization.
  CMatrix to_dense() const;

  const BlockLedger& ledger() const { return ledger_; }
  const std::vector<PLRMatrix>& plr_blocks() const { return plr_; }

 private:
  DtNVariant variant_ = DtNVariant::Dense;
  int N_ = 0;
  CMatrix dense_;
  BlockLedger ledger_;
  std::vector<CMatrix> reps_;
  std::vector<PLRMatrix> plr_;
};

/// Single-node delta scaled by 1/h^2 at the cell containing (x, y).
CVector point_source(int N, double x, double y);

struct InteriorSolution {
  CVector u;               ///< N^2 values, index i + N j
  double residual = 0.0;   ///< relative residual of the reduced system
};

/// Interior operator with the ghost ring eliminated through D:
/// (A0 + E^T D E / h) u = f, A0 = five-point operator + E^T E / h^2,
/// E picking the 4N boundary entries (corners twice). A0 is factored once;
/// G = E A0^{-1} E^T is formed on first use and shared by every solve.
class InteriorSolver {
 public:
  InteriorSolver(const Medium& medium, const GridSpec& grid);

  InteriorSolution solve(const DtNRealization& dtn, const CVector& f) const;
  /// Dense (A0 + E^T D E / h) solved directly, N <= 32.
  CVector solve_monolithic(const CMatrix& D, const CVector& f) const;

  const GridSpec& grid() const { return grid_; }
  const CMatrix& border_green() const;

 private:
  GridSpec grid_;
  SparseSystem sys_;
  std::unique_ptr<BandedLU> lu_;
  std::vector<int> port_node_;  ///< boundary entry -> interior unknown
  mutable CMatrix G_;
  std::unique_ptr<std::once_flag> G_once_ = std::make_unique<std::once_flag>();
};

InteriorSolution solve_with_dtn(const Medium& medium, const GridSpec& grid, const DtNRealization& dtn,
                                const CVector& f);

/// Solve on Omega plus an absorbing annulus of the grid's width; returns the
/// N^2 values inside Omega.
CVector reference_solve(const Medium& medium, const GridSpec& grid, const CVector& f);

/// ||u - u_ref|| / ||u_ref||.
double solution_error(const CVector& u, const CVector& u_ref);

struct GrazingPoint {
  double offset = 0.0;
  double error = 0.0;
};

/// Source at (0.5, offset) for each offset; error of `dtn` against `reference`.
std::vector<GrazingPoint> grazing_scan(const InteriorSolver& solver, const DtNRealization& dtn,
                                       const DtNRealization& reference, const std::vector<double>& offsets);

}  // namespace cabc
