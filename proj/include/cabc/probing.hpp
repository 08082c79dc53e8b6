#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "cabc/dtn.hpp"
#include "cabc/helmholtz.hpp"
#include "cabc/medium.hpp"
#include "cabc/types.hpp"

namespace cabc {

/// Oscillation attached to a basis matrix. Constant carries no x,y-dependent
/// phase (a constant factor e^{i omega T} is absorbed by the coefficient).
enum class PhaseKind { PlusT1, MinusT1, PlusT2, MinusT2, Constant };
enum class ThetaKind { MinSum, PlusSum, None };
enum class SecondFactor { InversePower, Polynomial };
enum class BasisFamily { Oscillatory, PolynomialBothDirections };

struct BasisSpec {
  double alpha = 2.0;
  int p = 0;  ///< number of matrices kept; 0 keeps every pair x phase (x sub-block)
  std::vector<std::pair<int, int>> exponent_pairs;  ///< empty: triangular order by j1 + 2 j2
  std::vector<PhaseKind> phases{PhaseKind::PlusT1};
  ThetaKind theta = ThetaKind::MinSum;
  SecondFactor second = SecondFactor::InversePower;
  BasisFamily family = BasisFamily::Oscillatory;
  /// Integrate the grid's own dispersion relation instead of 1/c for phases.
  bool dispersion_corrected = false;
  /// Give every candidate one copy per sub-block cut by jumps of c on the two sides.
  bool split_at_discontinuities = true;
  /// Put the identity first: the one-sided difference (u1 - g)/h carries an
  /// exact -g/h term that no smooth kernel captures cheaply. Counts toward p.
  bool local_diagonal = false;

  void validate() const;
};

/// First `count` pairs (j1, j2) by nondecreasing j1 + 2 j2, then j2.
/// With only_j1 the pairs are (0,0), (1,0), (2,0), ...
std::vector<std::pair<int, int>> triangular_pairs(int count, bool only_j1 = false);

struct BasisSet {
  std::vector<CMatrix> matrices;
  bool orthonormal = false;
  double gram_condition = std::numeric_limits<double>::quiet_NaN();  ///< kappa
  int dropped = 0;

  int size() const { return static_cast<int>(matrices.size()); }
};

/// Raw basis matrices beta_j for block (row side, column side) of D.
BasisSet build_basis(const BasisSpec& spec, const Medium& medium, const GridSpec& grid, BlockId block);

/// Toeplitz family e^{i k h |l-m|} / (h + h|l-m|)^{j/alpha}, j = 0..p-1.
BasisSet halfspace_basis(int N, double k, double alpha, int p);

/// Indices where c jumps along a side (cell-centre index starting a new piece).
std::vector<int> split_points(const Medium& medium, int side, int N);

/// <A, B> = sum conj(A) .* B.
cplx frob_inner(const CMatrix& A, const CMatrix& B);

/// Gram-Schmidt twice in the Frobenius inner product. Elements whose norm
/// falls below 1e-10 of the original are dropped; more than half dropped is an error.
BasisSet orthonormalize(const BasisSet& raw);

/// cond of the N^2 x p matrix of vectorised elements, from the Gram matrix.
double gram_condition(const std::vector<CMatrix>& matrices);

struct ProbeResult {
  CVector c;
  int q = 0;
  double cond_psi = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t stream = 0;  ///< RNG stream of the probe vectors

  CMatrix reconstruct(const BasisSet& basis) const;
};

/// Z -> M Z for a block M (N x q in, N x q out).
using BlockApply = std::function<CMatrix(const CMatrix&)>;

/// N x q iid real N(0,1) probe vectors from Philox stream `stream`.
CMatrix probe_vectors(int N, int q, std::uint64_t stream);

/// Psi = [B_1 z, ..., B_p z] stacked over the q columns of Z: (N q) x p.
CMatrix build_psi(const BasisSet& basis, const CMatrix& Z);

/// c = pinv(Psi) w via thin SVD, cutoff 1e-12 sigma_max. Rank-deficient Psi
/// (sigma_min < 1e-12 sigma_max) raises NumericError.
ProbeResult probe_from_samples(const BasisSet& basis, const CMatrix& Z, const CMatrix& W,
                               std::uint64_t stream = 0);
/// Same least-squares step for an already built Psi (any column prefix of a
/// larger one) and stacked samples w.
ProbeResult probe_from_psi(const CMatrix& psi, const CVector& w, int q, std::uint64_t stream = 0);
/// Columns of W stacked into one vector, matching build_psi's row order.
CVector stack_columns(const CMatrix& W);
ProbeResult probe_block(const BlockApply& apply, const BasisSet& basis, int q, std::uint64_t stream);

struct Conditioning {
  double lambda = 0.0;
  double kappa = 0.0;
  double cond_psi = 0.0;
};

/// ||B||_2 by power iteration on B^H B.
double spectral_norm(const CMatrix& B, int iterations = 20, double tol = 1e-6);
Conditioning condition_numbers(const BasisSet& basis, const CMatrix& psi);

/// sqrt(m) ||M - P_p M||_F / normD with P_p the projection on the first p
/// elements of an orthonormal basis.
double approximation_error(const CMatrix& M, const BasisSet& ortho, int p, int multiplicity, double normD);
/// Approximation errors for every p = 1..size, one pass.
std::vector<double> approximation_curve(const CMatrix& M, const BasisSet& ortho, int multiplicity, double normD);

struct HeldOut {
  CMatrix Z;  ///< N x q_h probe vectors never used for recovery
  CMatrix W;  ///< M Z
  std::uint64_t stream = 0;
};

struct ProbingMetrics {
  double approximation_error = std::numeric_limits<double>::quiet_NaN();
  double probing_error = std::numeric_limits<double>::quiet_NaN();
  double estimated_error = std::numeric_limits<double>::quiet_NaN();
};

/// Dense path (M_ref given) and/or the held-out estimator
/// sqrt(m) ||W - M~ Z||_F / sqrt(q_h) / normD.
ProbingMetrics probing_errors(const CMatrix* M_ref, const CMatrix& M_tilde, int multiplicity, double normD,
                              const BasisSet* ortho = nullptr, const HeldOut* held = nullptr,
                              std::uint64_t recovery_stream = 0);

/// Total error sqrt(sum m ||M - M~||_F^2) / ||D||_F given per-representative
/// errors already normalised as sqrt(m)||M - M~||_F / ||D||_F.
double total_error(const std::vector<double>& block_errors);

/// Decided per-block basis: diagonal blocks start with the identity, then use {+T1, -T1, +T2, -T2} below a
/// 1e-4 target and {+T1, +T2} otherwise; adjacent blocks {+T1} with a
/// polynomial factor in theta = |a - b| (a, b = distances to the shared
/// corner); opposite blocks a single matrix with the around-the-corner phase.
BasisSpec default_block_spec(BlockId block, double target_error);

}  // namespace cabc
