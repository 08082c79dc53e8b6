#pragma once

#include <cstdint>
#include <vector>

#include "cabc/dtn.hpp"
#include "cabc/plr.hpp"
#include "cabc/probing.hpp"
#include "cabc/solver.hpp"

namespace cabc {

struct ProbePlan {
  double target = 1e-3;            ///< total probing error aimed for
  std::vector<int> p_schedule;     ///< candidate p per block; empty uses default_p_schedule()
  int p_same = 0, p_adjacent = 0, p_opposite = 0;  ///< fixed p by block distance (0: choose from the schedule)
  int q = 10;                      ///< probe columns per block column
  int q_holdout = 4;               ///< extra columns for the error estimate
  std::uint64_t seed = 1;
};

std::vector<int> default_p_schedule();

struct ProbedBlock {
  LedgerEntry entry;
  BasisSpec spec;
  int p = 0;                       ///< basis size used
  int q = 0;
  CMatrix M_tilde;
  Conditioning cond;
  ProbingMetrics metrics;          ///< probing_error only with a dense reference
  std::vector<std::pair<int, double>> estimated_curve;  ///< (p, held-out estimate) over the schedule
  bool reached_target = false;
};

struct ProbedDtN {
  BlockLedger ledger;
  std::vector<ProbedBlock> blocks;
  int N = 0;
  double normD = 0.0;
  bool normD_exact = false;
  double total_error = -1.0;       ///< exact, needs the dense reference
  double total_estimated = 0.0;
  long solves = 0;                 ///< exterior solves spent (Q)

  DtNRealization realization() const;
  std::vector<CMatrix> representatives() const;
};

/// Probes every ledger representative. One set of q + q_holdout exterior
/// solves per distinct input side is shared by all representatives in that
/// block column. Each block takes the smallest p of the schedule whose
/// held-out estimate is within target * sqrt(m / 16); if none is, the best.
ProbedDtN probe_dtn(const Medium& medium, const ExteriorSolver& exterior, const ProbePlan& plan,
                    const CMatrix* D_ref = nullptr);

struct CompressedBlock {
  PLRMatrix plr;
  double epsilon = 0.0;
  int r_max = 0;
  double error = 0.0;              ///< ||M_bar - M_tilde||_F / ||M_tilde||_F
};

struct CompressedDtN {
  BlockLedger ledger;
  std::vector<CompressedBlock> blocks;
  long long ops = 0;               ///< one application, every copy counted
  long long dense_ops = 0;         ///< 2 (4N)^2

  DtNRealization realization() const;
  double speedup() const { return ops > 0 ? static_cast<double>(dense_ops) / ops : 0.0; }
};

/// PLR compression of each probed representative with epsilon from
/// choose_epsilon(block error, ||D||, divisor) and r_max by distance unless
/// r_max_override > 0.
CompressedDtN compress_dtn(const ProbedDtN& probed, double eps_divisor = 25.0, int r_max_override = 0,
                           std::uint64_t seed = 1);

}  // namespace cabc
