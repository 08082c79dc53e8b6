#include "cabc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cabc/rng.hpp"

namespace cabc {

std::vector<int> default_p_schedule() { return {1, 2, 4, 6, 8, 12, 16, 20, 25, 30, 40, 50, 60}; }

namespace {

BasisSet prefix(const BasisSet& b, int p) {
  BasisSet out;
  out.matrices.assign(b.matrices.begin(), b.matrices.begin() + p);
  out.orthonormal = b.orthonormal;
  out.gram_condition = b.gram_condition;
  return out;
}

CMatrix combine(const BasisSet& b, const CVector& c) {
  CMatrix M = CMatrix::Zero(b.matrices[0].rows(), b.matrices[0].cols());
  for (Eigen::Index j = 0; j < c.size(); ++j) M += c(j) * b.matrices[j];
  return M;
}

std::vector<int> candidates_for(const ProbePlan& plan, int distance) {
  const int fixed = distance == 0 ? plan.p_same : distance == 1 ? plan.p_adjacent : plan.p_opposite;
  if (fixed > 0) return {fixed};
  std::vector<int> s = plan.p_schedule.empty() ? default_p_schedule() : plan.p_schedule;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (distance == 2) {
    // a single around-the-corner phase carries opposite blocks
    std::vector<int> small;
    for (int p : s)
      if (p <= 8) small.push_back(p);
    if (small.empty()) small.push_back(1);
    return small;
  }
  return s;
}

}  // namespace

ProbedDtN probe_dtn(const Medium& medium, const ExteriorSolver& exterior, const ProbePlan& plan,
                    const CMatrix* D_ref) {
  const GridSpec& grid = exterior.grid();
  const int N = grid.N;
  if (plan.q < 1 || plan.q_holdout < 1) throw ConfigError("probe plan: q and q_holdout must be >= 1");
  if (!(plan.target > 0.0)) throw ConfigError("probe plan: target must be positive");
  if (D_ref && (D_ref->rows() != 4 * N || D_ref->cols() != 4 * N))
    throw ConfigError("probe_dtn: reference D has the wrong size");

  ProbedDtN out;
  out.N = N;
  out.ledger = ledger_for(medium);
  const long solves0 = exterior.solves();

  // one batch of solves per input side
  struct Column {
    CMatrix Z, Zh, W;
    std::uint64_t stream = 0, held_stream = 0;
  };
  std::map<int, Column> columns;
  for (const auto& e : out.ledger) {
    const int c = e.representative.col;
    if (columns.count(c)) continue;
    Column col;
    col.stream = substream(plan.seed, "probe", c);
    col.held_stream = substream(plan.seed, "holdout", c);
    col.Z = probe_vectors(N, plan.q, col.stream);
    col.Zh = probe_vectors(N, plan.q_holdout, col.held_stream);
    CMatrix both(N, plan.q + plan.q_holdout);
    both << col.Z, col.Zh;
    col.W = exterior.apply_block_column(c, both);
    columns.emplace(c, std::move(col));
  }
  out.solves = exterior.solves() - solves0;

  if (D_ref) {
    out.normD = D_ref->norm();
    out.normD_exact = true;
  } else {
    double s = 0.0;
    for (const auto& e : out.ledger) {
      const Column& col = columns.at(e.representative.col);
      const CMatrix Wh = col.W.block((e.representative.row - 1) * N, plan.q, N, plan.q_holdout);
      s += e.multiplicity * Wh.squaredNorm() / plan.q_holdout;
    }
    out.normD = std::sqrt(s);
  }
  if (!(out.normD > 0.0)) throw NumericError("probe_dtn: DtN map has zero norm");

  std::vector<double> exact, estimated;
  for (const auto& e : out.ledger) {
    const BlockId b = e.representative;
    const Column& col = columns.at(b.col);
    const CMatrix W = col.W.block((b.row - 1) * N, 0, N, plan.q);
    HeldOut held{col.Zh, col.W.block((b.row - 1) * N, plan.q, N, plan.q_holdout), col.held_stream};

    ProbedBlock pb;
    pb.entry = e;
    pb.q = plan.q;
    pb.spec = default_block_spec(b, plan.target);
    const std::vector<int> cand = candidates_for(plan, block_distance(b));
    pb.spec.p = std::min(*std::max_element(cand.begin(), cand.end()), N * plan.q);
    const BasisSet ortho = orthonormalize(build_basis(pb.spec, medium, grid, b));
    const CMatrix psi = build_psi(ortho, col.Z);
    const CVector w = stack_columns(W);
    const double threshold = plan.target * std::sqrt(e.multiplicity / 16.0);
    const CMatrix M_ref = D_ref ? get_block(*D_ref, b) : CMatrix();

    double best = std::numeric_limits<double>::infinity();
    ProbeResult best_res;
    for (int p : cand) {
      if (p > ortho.size() || p > N * plan.q) break;
      ProbeResult res;
      try {
        res = probe_from_psi(psi.leftCols(p), w, plan.q, col.stream);
      } catch (const NumericError&) {
        continue;
      }
      const BasisSet pre = prefix(ortho, p);
      const CMatrix Mt = combine(pre, res.c);
      const ProbingMetrics m = probing_errors(nullptr, Mt, e.multiplicity, out.normD, nullptr, &held, col.stream);
      pb.estimated_curve.emplace_back(p, m.estimated_error);
      if (m.estimated_error < best) {
        best = m.estimated_error;
        pb.p = p;
        pb.M_tilde = Mt;
        best_res = res;
      }
      if (m.estimated_error <= threshold) {
        pb.p = p;
        pb.M_tilde = Mt;
        best_res = res;
        pb.reached_target = true;
        break;
      }
    }
    if (pb.p == 0) throw NumericError("probe_dtn: no usable basis size for a block");

    const BasisSet used = prefix(ortho, pb.p);
    pb.metrics = probing_errors(D_ref ? &M_ref : nullptr, pb.M_tilde, e.multiplicity, out.normD,
                                D_ref ? &used : nullptr, &held, col.stream);
    pb.cond.cond_psi = best_res.cond_psi;
    pb.cond.kappa = ortho.gram_condition;
    estimated.push_back(pb.metrics.estimated_error);
    if (D_ref) exact.push_back(pb.metrics.probing_error);
    out.blocks.push_back(std::move(pb));
  }
  out.total_estimated = total_error(estimated);
  if (D_ref) out.total_error = total_error(exact);
  return out;
}

std::vector<CMatrix> ProbedDtN::representatives() const {
  std::vector<CMatrix> reps;
  for (const auto& b : blocks) reps.push_back(b.M_tilde);
  return reps;
}

DtNRealization ProbedDtN::realization() const { return DtNRealization::probed(ledger, representatives()); }

CompressedDtN compress_dtn(const ProbedDtN& probed, double eps_divisor, int r_max_override, std::uint64_t seed) {
  CompressedDtN out;
  out.ledger = probed.ledger;
  const long long n = 4LL * probed.N;
  out.dense_ops = 2 * n * n;
  for (const auto& pb : probed.blocks) {
    const BlockId b = pb.entry.representative;
    const double err = std::isfinite(pb.metrics.probing_error) ? pb.metrics.probing_error : pb.metrics.estimated_error;
    CompressedBlock cb;
    cb.epsilon = choose_epsilon(err, probed.normD, eps_divisor);
    cb.r_max = r_max_override > 0 ? r_max_override : default_rmax(block_distance(b));
    cb.plr = plr_compress(pb.M_tilde, cb.r_max, cb.epsilon, substream(seed, "plr", b.row, b.col));
    const double nm = pb.M_tilde.norm();
    cb.error = nm > 0.0 ? (cb.plr.dense() - pb.M_tilde).norm() / nm : 0.0;
    out.ops += static_cast<long long>(pb.entry.copies.size()) * matvec_cost(cb.plr);
    out.blocks.push_back(std::move(cb));
  }
  return out;
}

DtNRealization CompressedDtN::realization() const {
  std::vector<PLRMatrix> reps;
  for (const auto& b : blocks) reps.push_back(b.plr);
  return DtNRealization::compressed(ledger, reps);
}

}  // namespace cabc
