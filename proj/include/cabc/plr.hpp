#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cabc/types.hpp"

namespace cabc {

struct RsvdResult {
  CMatrix U;      ///< n x k, orthonormal columns
  RVector sigma;  ///< k values, nonincreasing
  CMatrix V;      ///< n x k, orthonormal columns
};

/// Randomised SVD returning k = r_max + 1 triplets: complex Gaussian test
/// matrix with 10 extra columns, one power iteration. When n <= k + 10 the
/// SVD is exact.
RsvdResult rsvd(const CMatrix& A, int r_max, std::uint64_t stream);
/// Same, through products X -> A X and X -> A^H X only.
RsvdResult rsvd(const std::function<CMatrix(const CMatrix&)>& apply,
                const std::function<CMatrix(const CMatrix&)>& apply_adjoint, int n, int r_max,
                std::uint64_t stream);

struct PLRNode {
  enum class Tag { Compressed, Hierarchical };
  Tag tag = Tag::Compressed;
  int row0 = 0, col0 = 0, size = 0, depth = 0;
  CMatrix U;                        ///< size x R, columns scaled by singular values
  CMatrix Vh;                       ///< R x size
  std::array<int, 4> child{-1, -1, -1, -1};  ///< 2x2 order: (0,0), (0,1), (1,0), (1,1)

  int rank() const { return static_cast<int>(U.cols()); }
};

/// Quadtree over an n x n matrix (n a power of two); nodes[0] is the root.
struct PLRMatrix {
  int n = 0;         ///< padded dimension
  int n_orig = 0;    ///< dimension before zero padding
  int r_max = 0;
  double epsilon = 0.0;
  std::vector<PLRNode> nodes;

  std::vector<int> leaves() const;
  int max_depth() const;
  int leaf_count() const { return static_cast<int>(leaves().size()); }
  /// Dense matrix of the leaf factors (n_orig x n_orig).
  CMatrix dense() const;
};

/// Adaptive compression: a block whose estimated sigma_{r_max+1} is below
/// epsilon keeps the smallest R with sigma_{R+1} < epsilon; otherwise it is
/// split in four. Blocks of size <= r_max are always compressed.
PLRMatrix plr_compress(const CMatrix& M, int r_max, double epsilon, std::uint64_t seed = 1);

CVector plr_matvec(const PLRMatrix& H, const CVector& x);
CMatrix plr_matvec(const PLRMatrix& H, const CMatrix& X);
/// H^T X (plain transpose), same cost as plr_matvec.
CMatrix plr_matvec_transpose(const PLRMatrix& H, const CMatrix& X);

/// Sum over compressed leaves of 4 N_B R_B.
long long matvec_cost(const PLRMatrix& H);

enum class ReferenceKind { Weak, Strong, Corner };

/// Skeleton tree with every leaf of rank min(r_max, size) and empty factors.
/// Corner refers to the top-right entry (row 0, column n-1).
PLRMatrix reference_structure(ReferenceKind kind, int n, int r_max);

struct RmaxChoice {
  int r_max = 0;
  long long cost = 0;
  std::vector<std::pair<int, long long>> scanned;  ///< (candidate, cost)
};

/// Compress with each candidate and keep the cheapest (ties: smaller r_max).
RmaxChoice choose_rmax(const CMatrix& M, double epsilon, const std::vector<int>& candidates = {1, 2, 4, 8, 16, 32},
                       std::uint64_t seed = 1);

/// epsilon for a DtN block: probing error * ||D||_F / divisor, divisor in [1, 100].
double choose_epsilon(double block_probing_error, double normD, double divisor = 25.0);

/// Default r_max by block distance: 8 same side, 4 adjacent, 2 opposite.
int default_rmax(int block_distance);

/// Preorder tree with tags, leaf (size, R) headers and factors as CABC matrices.
void write_plr(std::ostream& os, const PLRMatrix& H);
PLRMatrix read_plr(std::istream& is);
void write_plr(const std::string& path, const PLRMatrix& H);
PLRMatrix read_plr(const std::string& path);

}  // namespace cabc
