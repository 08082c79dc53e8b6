#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <memory>
#include <vector>

#include "cabc/helmholtz.hpp"
#include "cabc/medium.hpp"
#include "cabc/types.hpp"

namespace cabc {

/// Exterior problem factored once; applies the discrete DtN map
/// (u1 - g)/h = D g to any number of boundary vectors.
class ExteriorSolver {
 public:
  ExteriorSolver(const Medium& medium, const GridSpec& grid);

  /// G is 4N x q boundary data (corners doubled); returns D G.
  CMatrix apply(const CMatrix& G) const;
  CVector apply(const CVector& g) const;
  /// Data z (N x q) on `side` (1..4), zero elsewhere; returns the full 4N x q output.
  CMatrix apply_block_column(int side, const CMatrix& Z) const;

  const GridSpec& grid() const { return grid_; }
  int unknowns() const { return sys_.dimension; }
  long solves() const { return solves_.load(); }

 private:
  GridSpec grid_;
  SparseSystem sys_;
  std::unique_ptr<BandedLU> lu_;
  std::vector<int> port_rows_;
  mutable std::atomic<long> solves_{0};
};

/// One exterior solve with Dirichlet data g.
CVector dtn_apply(const Medium& medium, const GridSpec& grid, const CVector& g);

/// Dense D from 4N unit-vector solves sharing one factorization.
CMatrix assemble_dense_dtn(const Medium& medium, const GridSpec& grid);
CMatrix assemble_dense_dtn(const ExteriorSolver& solver);

enum class EliminationMode { OnePass, LayerByLayer };

/// Dense Schur elimination of all exterior unknowns except the ring just
/// outside Omega; D = -(T^{-1}/h^2 + I)/h where T is that ring's Schur block.
CMatrix eliminate_dtn_oracle(const Medium& medium, const GridSpec& grid,
                             EliminationMode mode = EliminationMode::OnePass);

struct HalfspaceStrip {
  CMatrix D;                        ///< D_k = (S_k + I)/h on the central N points
  CMatrix neumann;                  ///< (u_1 - g)/h = neumann * g for data on the central N points
  std::vector<double> increments;   ///< ||D_{k+1} - D_k||_F / ||D_k||_F per step
};

/// Layer stripping S_{k+1} = M_{k+1} - V_k S_k^{-1} V_k from the deepest line
/// up, seeded with S_1 = M. The line extends (strip_gap + pml_width) nodes
/// past each end with a lateral layer; the deepest max(1, depth/4) lines are
/// stretched. Without stretching the recursion is exactly S_{k+1} = M - S_k^{-1}.
HalfspaceStrip layer_strip_halfspace(const std::function<double(double)>& speed_on_line,
                                     const GridSpec& grid, int depth_layers);

/// Half-strip DtN (same sign convention as the exterior map) from 2-D solves.
CMatrix halfstrip_dtn(const Medium& medium, const GridSpec& grid);

// ---- 4x4 block structure ------------------------------------------------

struct BlockId {
  int row = 1;  ///< side of the output (1..4)
  int col = 1;  ///< side of the input (1..4)
  bool operator==(const BlockId&) const = default;
};

enum class Orientation { Id, Transpose, FlipCols, TransposeFlipCols, FlipBoth, TransposeFlipBoth };

/// Id, M^T, columns reversed, (M^T) columns reversed, rows and columns
/// reversed, (M^T) rows and columns reversed.
CMatrix orient_block(const CMatrix& block, Orientation o);
/// Inverse map: orient_block(unorient_block(B, o), o) == B.
CMatrix unorient_block(const CMatrix& block, Orientation o);

struct BlockCopy {
  BlockId position;
  Orientation orientation;
};

struct LedgerEntry {
  BlockId representative;
  int multiplicity = 0;
  std::vector<BlockCopy> copies;  ///< includes the representative itself (Id)
};

using BlockLedger = std::vector<LedgerEntry>;

/// Orbits of the 16 blocks under the medium's square symmetries and the
/// symmetry of D. Rotations keep counter-clockwise indexing (Id); reflections
/// reverse both sides (FlipBoth).
BlockLedger ledger_for(const Medium& medium);
/// 16 distinct blocks, m = 1 each.
BlockLedger trivial_ledger();
BlockLedger ledger_from_group(const std::vector<SquareMap>& group, bool use_transpose = true);

/// Block (i,j) of a 4N x 4N matrix, copied.
CMatrix get_block(const CMatrix& D, BlockId id);
void set_block(CMatrix& D, BlockId id, const CMatrix& block);
int block_distance(BlockId id);  ///< 0 same side, 1 adjacent, 2 opposite

/// Re-tile D from one matrix per representative (same order as the ledger).
CMatrix assemble_from_ledger(const BlockLedger& ledger, const std::vector<CMatrix>& reps);

/// Frobenius norm estimate sqrt(mean ||D z||^2) over Gaussian probes Z (4N x q).
double estimate_frobenius(const CMatrix& DZ);

}  // namespace cabc
