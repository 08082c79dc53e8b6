#include "cabc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cabc/analysis.hpp"
#include "cabc/io.hpp"
#include "cabc/pipeline.hpp"
#include "cabc/rng.hpp"

namespace cabc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names = {
      {ExperimentKind::OracleCheck, "OracleCheck"},         {ExperimentKind::ProbeBlocks, "ProbeBlocks"},
      {ExperimentKind::CondNumbers, "CondNumbers"},         {ExperimentKind::PlrCompress, "PlrCompress"},
      {ExperimentKind::CompressedSolve, "CompressedSolve"}, {ExperimentKind::GrazingScan, "GrazingScan"},
      {ExperimentKind::ChebConvergence, "ChebConvergence"}, {ExperimentKind::SepExpansion, "SepExpansion"},
      {ExperimentKind::RankScan, "RankScan"},               {ExperimentKind::PvsN, "PvsN"}};
  return names;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row(header); }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::logic_error("csv row width");
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::size_t cols_;
  std::string text_;
};

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + ": " + e.what());
  }
}

std::string block_tag(BlockId b) { return std::to_string(b.row) + std::to_string(b.col); }

GridSpec grid_of(const ExperimentConfig& c) {
  GridSpec g;
  g.N = c.N;
  g.omega = c.omega > 0.0 ? c.omega : omega_from_pollution(c.N);
  g.pml_width = c.pml_width;
  g.strip_gap = c.strip_gap;
  g.pml_strength = c.pml_strength;
  return g;
}

Medium medium_of(const ExperimentConfig& c) { return make_medium(c.medium, c.medium_params); }

ProbePlan plan_of(const ExperimentConfig& c, double target) {
  ProbePlan plan;
  plan.target = target;
  plan.p_schedule = c.p_schedule;
  plan.q = c.q;
  plan.q_holdout = c.q_holdout;
  plan.seed = c.seed;
  return plan;
}

double wavenumber(const ExperimentConfig& c) { return c.k > 0.0 ? c.k : 2.0 * kPi * 51.2; }

struct Output {
  fs::path dir;
  std::vector<std::string> artifacts;

  void text(const std::string& name, const std::string& body) {
    io::write_text_atomic(dir / name, body);
    artifacts.push_back((dir / name).string());
  }
  void matrix(const std::string& name, const CMatrix& m) {
    fs::create_directories((dir / name).parent_path());
    io::write_matrix(dir / name, m);
    artifacts.push_back((dir / name).string());
  }
};

// ---- experiments --------------------------------------------------------

json oracle_check(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const GridSpec g = grid_of(c);
  const CMatrix Dd = stage("exterior solves", [&] { return assemble_dense_dtn(m, g); });
  const CMatrix Do = stage("one-pass elimination", [&] { return eliminate_dtn_oracle(m, g, EliminationMode::OnePass); });
  const CMatrix Dl =
      stage("layer elimination", [&] { return eliminate_dtn_oracle(m, g, EliminationMode::LayerByLayer); });
  auto rel = [](const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); };
  const double a = rel(Dd, Do), b = rel(Dd, Dl), d = rel(Do, Dl);
  const double sym = rel(Dd.transpose(), Dd);
  Csv csv({"pair", "relative_difference"});
  csv.row({"solves_vs_onepass", num(a)});
  csv.row({"solves_vs_layers", num(b)});
  csv.row({"onepass_vs_layers", num(d)});
  csv.row({"symmetry", num(sym)});
  out.text("oracle_check.csv", csv.text());
  out.matrix("D.cabc", Dd);
  return {{"max_discrepancy", std::max({a, b, d})}, {"symmetry", sym}};
}

struct ScanRow {
  BlockId block;
  int multiplicity, p, q;
  double approx, probing, estimated, cond_psi;
  Conditioning cond;
};

// Fixed-p probing of every representative for each p of the schedule.
std::vector<ScanRow> probe_scan(const ExperimentConfig& c, const Medium& m, const ExteriorSolver& ex,
                                const CMatrix* D, bool conditioning) {
  const GridSpec& g = ex.grid();
  const int N = g.N;
  const BlockLedger ledger = ledger_for(m);
  std::vector<int> ps = c.p_schedule.empty() ? default_p_schedule() : c.p_schedule;
  const int pmax = *std::max_element(ps.begin(), ps.end());
  std::map<int, std::pair<CMatrix, CMatrix>> cols;  // side -> (Z, W) with held-out columns appended
  std::uint64_t rec_stream = 0, held_stream = 0;
  double normD = D ? D->norm() : 0.0;
  for (const auto& e : ledger) {
    const int side = e.representative.col;
    if (cols.count(side)) continue;
    CMatrix Z(N, c.q + c.q_holdout);
    Z << probe_vectors(N, c.q, substream(c.seed, "probe", side)),
        probe_vectors(N, c.q_holdout, substream(c.seed, "holdout", side));
    cols[side] = {Z, ex.apply_block_column(side, Z)};
  }
  if (!D) {
    double s = 0.0;
    for (const auto& e : ledger) {
      const auto& [Z, W] = cols.at(e.representative.col);
      s += e.multiplicity * W.block((e.representative.row - 1) * N, c.q, N, c.q_holdout).squaredNorm() / c.q_holdout;
    }
    normD = std::sqrt(s);
  }
  std::vector<ScanRow> rows;
  for (const auto& e : ledger) {
    const BlockId b = e.representative;
    const auto& [Zall, Wall] = cols.at(b.col);
    rec_stream = substream(c.seed, "probe", b.col);
    held_stream = substream(c.seed, "holdout", b.col);
    const CMatrix Z = Zall.leftCols(c.q);
    const CMatrix W = Wall.block((b.row - 1) * N, 0, N, c.q);
    HeldOut held{Zall.rightCols(c.q_holdout), Wall.block((b.row - 1) * N, c.q, N, c.q_holdout), held_stream};
    BasisSpec spec = default_block_spec(b, c.target);
    if (block_distance(b) != 2) spec.p = pmax;
    const BasisSet ortho = orthonormalize(build_basis(spec, m, g, b));
    const CMatrix psi = build_psi(ortho, Z);
    const CVector w = stack_columns(W);
    const CMatrix M = D ? get_block(*D, b) : CMatrix();
    std::vector<int> usable;
    for (int p : ps)
      if (p <= ortho.size() && p <= N * c.q) usable.push_back(p);
    if (usable.empty()) usable.push_back(std::min(ortho.size(), N * c.q));
    for (int p : usable) {
      ScanRow r{b, e.multiplicity, p, c.q, NAN, NAN, NAN, NAN, {}};
      BasisSet pre;
      pre.matrices.assign(ortho.matrices.begin(), ortho.matrices.begin() + p);
      pre.orthonormal = true;
      try {
        const ProbeResult res = probe_from_psi(psi.leftCols(p), w, c.q, rec_stream);
        const CMatrix Mt = res.reconstruct(pre);
        const ProbingMetrics pm = probing_errors(D ? &M : nullptr, Mt, e.multiplicity, normD, D ? &pre : nullptr,
                                                 &held, rec_stream);
        r.approx = pm.approximation_error;
        r.probing = pm.probing_error;
        r.estimated = pm.estimated_error;
        r.cond_psi = res.cond_psi;
      } catch (const NumericError&) {
        r.cond_psi = INFINITY;
      }
      if (conditioning) r.cond = condition_numbers(pre, psi.leftCols(p));
      rows.push_back(r);
    }
  }
  return rows;
}

std::optional<CMatrix> maybe_dense(const ExperimentConfig& c, const ExteriorSolver& ex) {
  if (!c.dense_reference) return std::nullopt;
  if (c.N > 256) return std::nullopt;
  return stage("dense reference", [&] { return assemble_dense_dtn(ex); });
}

void save_probed(const ProbedDtN& P, const ExperimentConfig& c, Output& out) {
  json blocks = json::array();
  for (const auto& b : P.blocks) {
    const std::string file = "blocks/block_" + block_tag(b.entry.representative) + ".cabc";
    out.matrix(file, b.M_tilde);
    blocks.push_back({{"row", b.entry.representative.row},
                      {"col", b.entry.representative.col},
                      {"multiplicity", b.entry.multiplicity},
                      {"p", b.p},
                      {"q", b.q},
                      {"probing_error", std::isfinite(b.metrics.probing_error) ? json(b.metrics.probing_error) : json()},
                      {"estimated_error", b.metrics.estimated_error},
                      {"file", file}});
  }
  json manifest = {{"N", P.N},          {"medium", c.medium},
                   {"normD", P.normD},  {"normD_exact", P.normD_exact},
                   {"seed", c.seed},    {"solves", P.solves},
                   {"blocks", blocks}};
  out.text("probed.json", manifest.dump(2) + "\n");
}

ProbedDtN load_probed(const ExperimentConfig& c) {
  const fs::path dir = c.input_dir;
  std::ifstream in(dir / "probed.json");
  if (!in) throw ConfigError("config.input_dir: no probed.json in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("probed.json: ") + e.what());
  }
  ProbedDtN P;
  P.N = j.at("N").get<int>();
  if (P.N != c.N) throw ConfigError("config.N: does not match the probed blocks (N = " + std::to_string(P.N) + ")");
  P.normD = j.at("normD").get<double>();
  P.normD_exact = j.at("normD_exact").get<bool>();
  P.solves = j.at("solves").get<long>();
  P.ledger = ledger_for(medium_of(c));
  for (const auto& e : P.ledger) {
    const json* found = nullptr;
    for (const auto& b : j.at("blocks"))
      if (b.at("row").get<int>() == e.representative.row && b.at("col").get<int>() == e.representative.col) found = &b;
    if (!found) throw ConfigError("config.input_dir: probed blocks do not match the medium's ledger");
    ProbedBlock pb;
    pb.entry = e;
    pb.p = found->at("p").get<int>();
    pb.q = found->at("q").get<int>();
    if (!found->at("probing_error").is_null()) pb.metrics.probing_error = found->at("probing_error").get<double>();
    pb.metrics.estimated_error = found->at("estimated_error").get<double>();
    pb.M_tilde = io::read_matrix(dir / found->at("file").get<std::string>());
    P.blocks.push_back(std::move(pb));
  }
  return P;
}

json probe_blocks(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const GridSpec g = grid_of(c);
  const ExteriorSolver ex = stage("exterior factorization", [&] { return ExteriorSolver(m, g); });
  const auto D = maybe_dense(c, ex);
  const auto rows = stage("probing scan", [&] { return probe_scan(c, m, ex, D ? &*D : nullptr, false); });
  Csv csv({"block", "multiplicity", "p", "q", "approximation_error", "probing_error", "estimated_error", "cond_psi",
           "seed"});
  json curves = json::object();
  for (const auto& r : rows) {
    csv.row({block_tag(r.block), std::to_string(r.multiplicity), std::to_string(r.p), std::to_string(r.q),
             num(r.approx), num(r.probing), num(r.estimated), num(r.cond_psi), std::to_string(c.seed)});
    curves[block_tag(r.block)].push_back({r.p, D ? r.probing : r.estimated});
  }
  out.text("probe_blocks.csv", csv.text());
  const ProbedDtN P = stage("probing", [&] { return probe_dtn(m, ex, plan_of(c, c.target), D ? &*D : nullptr); });
  save_probed(P, c, out);
  return {{"curves", curves},
          {"total_probing_error", P.total_error},
          {"total_estimated_error", P.total_estimated},
          {"Q", P.solves}};
}

json cond_numbers(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const GridSpec g = grid_of(c);
  const ExteriorSolver ex = stage("exterior factorization", [&] { return ExteriorSolver(m, g); });
  const auto rows = stage("conditioning", [&] { return probe_scan(c, m, ex, nullptr, true); });
  Csv csv({"block", "p", "q", "lambda", "kappa", "cond_psi", "seed"});
  double worst_kappa = 0.0;
  for (const auto& r : rows) {
    csv.row({block_tag(r.block), std::to_string(r.p), std::to_string(r.q), num(r.cond.lambda), num(r.cond.kappa),
             num(r.cond.cond_psi), std::to_string(c.seed)});
    worst_kappa = std::max(worst_kappa, std::abs(r.cond.kappa - 1.0));
  }
  out.text("cond_numbers.csv", csv.text());
  return {{"max_kappa_deviation", worst_kappa}};
}

json plr_table(const ExperimentConfig& c, const ProbedDtN& P, const CompressedDtN& C, Output& out) {
  Csv csv({"block", "multiplicity", "epsilon", "r_max", "leaves", "depth", "cost", "relative_error", "seed"});
  for (std::size_t i = 0; i < C.blocks.size(); ++i) {
    const auto& b = C.blocks[i];
    csv.row({block_tag(P.blocks[i].entry.representative), std::to_string(P.blocks[i].entry.multiplicity),
             num(b.epsilon), std::to_string(b.r_max), std::to_string(b.plr.leaf_count()),
             std::to_string(b.plr.max_depth()), std::to_string(matvec_cost(b.plr)), num(b.error),
             std::to_string(c.seed)});
    write_plr((out.dir / ("plr/block_" + block_tag(P.blocks[i].entry.representative) + ".plr")).string(), b.plr);
  }
  out.text("plr_compress.csv", csv.text());
  return {{"ops", C.ops}, {"dense_ops", C.dense_ops}, {"speedup", C.speedup()}};
}

json plr_compress_exp(const ExperimentConfig& c, Output& out) {
  ProbedDtN P;
  if (!c.input_dir.empty()) {
    P = load_probed(c);
  } else {
    const Medium m = medium_of(c);
    const ExteriorSolver ex = stage("exterior factorization", [&] { return ExteriorSolver(m, grid_of(c)); });
    P = stage("probing", [&] { return probe_dtn(m, ex, plan_of(c, c.target), nullptr); });
  }
  fs::create_directories(out.dir / "plr");
  const CompressedDtN C = stage("compression", [&] { return compress_dtn(P, c.eps_divisor, c.r_max, c.seed); });
  return plr_table(c, P, C, out);
}

json compressed_solve(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const GridSpec g = grid_of(c);
  const ExteriorSolver ex = stage("exterior factorization", [&] { return ExteriorSolver(m, g); });
  const CMatrix D = stage("dense reference", [&] { return assemble_dense_dtn(ex); });
  const InteriorSolver S = stage("interior factorization", [&] { return InteriorSolver(m, g); });
  const CVector f = point_source(g.N, c.source[0], c.source[1]);
  const DtNRealization dense = DtNRealization::dense(D);
  const CVector u = stage("reference solve", [&] { return S.solve(dense, f).u; });
  const std::vector<double> targets = c.targets.empty() ? std::vector<double>{c.target} : c.targets;

  std::vector<std::string> header = {"target"};
  for (const auto& e : ledger_for(m)) header.push_back("p_" + block_tag(e.representative));
  for (std::string h : {"q", "Q", "total_probing_error", "solution_error", "plr_error", "solution_error_plr",
                        "speedup", "seed"})
    header.push_back(h);
  Csv csv(header);
  json rows = json::array();
  for (double t : targets) {
    const ProbedDtN P = stage("probing", [&] { return probe_dtn(m, ex, plan_of(c, t), &D); });
    const CompressedDtN C = stage("compression", [&] { return compress_dtn(P, c.eps_divisor, c.r_max, c.seed); });
    const DtNRealization Rp = P.realization(), Rc = C.realization();
    const double plr_err = (Rc.to_dense() - D).norm() / D.norm();
    const double ep = solution_error(stage("probed solve", [&] { return S.solve(Rp, f).u; }), u);
    const double ec = solution_error(stage("compressed solve", [&] { return S.solve(Rc, f).u; }), u);
    std::vector<std::string> cells = {num(t)};
    for (const auto& b : P.blocks) cells.push_back(std::to_string(b.p));
    for (std::string s : {std::to_string(c.q), std::to_string(P.solves), num(P.total_error), num(ep), num(plr_err),
                          num(ec), num(C.speedup()), std::to_string(c.seed)})
      cells.push_back(s);
    csv.row(cells);
    rows.push_back({{"target", t},
                    {"total_probing_error", P.total_error},
                    {"solution_error", ep},
                    {"plr_error", plr_err},
                    {"solution_error_plr", ec},
                    {"speedup", C.speedup()}});
  }
  out.text("compressed_solve.csv", csv.text());
  return {{"rows", rows}};
}

json grazing(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const GridSpec g = grid_of(c);
  const ExteriorSolver ex = stage("exterior factorization", [&] { return ExteriorSolver(m, g); });
  const CMatrix D = stage("dense reference", [&] { return assemble_dense_dtn(ex); });
  const ProbedDtN P = stage("probing", [&] { return probe_dtn(m, ex, plan_of(c, c.target), &D); });
  const InteriorSolver S = stage("interior factorization", [&] { return InteriorSolver(m, g); });
  std::vector<double> offsets = c.offsets;
  if (offsets.empty()) {
    for (double o : {0.25, 0.1, 0.02})
      if (o > 2.0 * g.h()) offsets.push_back(o);
    offsets.push_back(2.0 * g.h());
  }
  const auto pts =
      stage("grazing solves", [&] { return grazing_scan(S, P.realization(), DtNRealization::dense(D), offsets); });
  Csv csv({"offset", "solution_error", "total_probing_error", "seed"});
  double lo = INFINITY, hi = 0.0;
  for (const auto& p : pts) {
    csv.row({num(p.offset), num(p.error), num(P.total_error), std::to_string(c.seed)});
    lo = std::min(lo, p.error);
    hi = std::max(hi, p.error);
  }
  out.text("grazing_scan.csv", csv.text());
  return {{"total_probing_error", P.total_error}, {"max_over_min", lo > 0 ? hi / lo : INFINITY}};
}

json cheb_convergence(const ExperimentConfig& c, Output& out) {
  const double k = wavenumber(c);
  const double r0 = c.r0 > 0.0 ? c.r0 : 1.0 / k;
  std::vector<int> ps = c.p_schedule;
  if (ps.empty())
    for (int p = 10; p <= 60; p += 5) ps.push_back(p);
  Csv csv({"alpha", "p", "error", "power_basis_error", "overflow"});
  json summary = json::array();
  for (double a : c.alphas) {
    std::vector<double> errs, perrs;
    bool overflow = false;
    for (int p : ps) {
      const ChebFit f = cheb_fit_error(k, r0, a, p);
      errs.push_back(f.error);
      perrs.push_back(f.power_error);
      overflow = overflow || f.overflow;
      csv.row({num(a), std::to_string(p), num(f.error), num(f.power_error), f.overflow ? "1" : "0"});
    }
    summary.push_back({{"alpha", a},
                       {"slope", loglog_slope(ps, errs)},
                       {"power_basis_plateau", has_plateau(ps, perrs)},
                       {"overflow", overflow}});
  }
  out.text("cheb_convergence.csv", csv.text());
  return {{"k", k}, {"r0", r0}, {"alphas", summary}};
}

json sep_expansion(const ExperimentConfig& c, Output& out) {
  const std::vector<double> ks = c.ks.empty() ? std::vector<double>{wavenumber(c)} : c.ks;
  const std::vector<double> eps = c.epsilons.empty() ? std::vector<double>{1e-6} : c.epsilons;
  Csv csv({"k", "eps", "M", "n", "J", "max_error", "bound_3_log2k_lneps", "escalated"});
  double worst = 0.0;
  for (double k : ks)
    for (double e : eps) {
      const double r0 = c.r0 > 0.0 ? c.r0 : 1.0 / k;
      const SeparableExpansion s = stage("quadrature", [&] { return separable_inv_kr(k, r0, e); });
      csv.row({num(k), num(e), std::to_string(s.M), std::to_string(s.n), std::to_string(s.terms()), num(s.max_error),
               num(3.0 * std::log2(k) * std::abs(std::log(e))), s.escalated ? "1" : "0"});
      worst = std::max(worst, s.max_error / e);
    }
  out.text("sep_expansion.csv", csv.text());
  return {{"max_error_over_eps", worst}};
}

int pollution_N(double k) {
  return std::max(8, static_cast<int>(std::lround(1023.0 * std::pow(k / (2.0 * kPi * 51.2), 1.5))));
}

json rank_scan(const ExperimentConfig& c, Output& out) {
  const std::vector<double> ks = c.ks.empty() ? std::vector<double>{32, 64, 128} : c.ks;
  const std::vector<double> eps = c.epsilons.empty() ? std::vector<double>{1e-4} : c.epsilons;
  Csv csv({"k", "N", "eps", "r0_over_h", "max_rank", "blocks"});
  json rows = json::array();
  for (double k : ks) {
    const int N = pollution_N(k);
    CMatrix D;
    if (c.rank_source == "sampled") {
      D = sampled_halfspace_dtn(k, N);
    } else {
      GridSpec g;
      g.N = N;
      g.omega = k;
      g.pml_width = c.pml_width;
      g.strip_gap = c.strip_gap;
      g.pml_strength = c.pml_strength;
      const Medium m = medium_of(c);
      D = stage("layer stripping", [&] {
        return layer_strip_halfspace([&](double x) { return eval_speed(m, {x, 0.0}); }, g, N).D;
      });
    }
    for (double e : eps)
      for (double r : c.r0_over_h) {
        const RankScan s = offdiag_rank_scan(D, 1.0 / N, r / N, e);
        csv.row({num(k), std::to_string(N), num(e), num(r), std::to_string(s.max_rank), std::to_string(s.blocks)});
        rows.push_back({{"k", k}, {"N", N}, {"eps", e}, {"r0_over_h", r}, {"max_rank", s.max_rank}});
      }
  }
  out.text("rank_scan.csv", csv.text());
  return {{"rows", rows}};
}

json p_vs_n(const ExperimentConfig& c, Output& out) {
  const Medium m = medium_of(c);
  const std::vector<int> Ns = c.Ns.empty() ? std::vector<int>{32, 64, 128} : c.Ns;
  const std::vector<double> targets = c.targets.empty() ? std::vector<double>{1e-1, 1e-2} : c.targets;
  std::vector<int> ps = c.p_schedule;
  if (ps.empty()) ps = default_p_schedule();
  const int pmax = *std::max_element(ps.begin(), ps.end());
  Csv csv({"N", "omega", "target", "p"});
  for (int N : Ns) {
    ExperimentConfig cn = c;
    cn.N = N;
    const GridSpec g = grid_of(cn);
    const CMatrix D = stage("dense reference", [&] { return assemble_dense_dtn(m, g); });
    const BlockId b{1, 1};
    BasisSpec spec = default_block_spec(b, c.target);
    spec.p = pmax;
    const BasisSet ortho = orthonormalize(build_basis(spec, m, g, b));
    int mult = 1;
    for (const auto& e : ledger_for(m))
      if (e.representative == b) mult = e.multiplicity;
    const std::vector<double> curve = approximation_curve(get_block(D, b), ortho, mult, D.norm());
    for (double t : targets) {
      int found = -1;
      for (int p : ps)
        if (p <= static_cast<int>(curve.size()) && curve[p - 1] <= t) {
          found = p;
          break;
        }
      csv.row({std::to_string(N), num(g.omega), num(t), std::to_string(found)});
    }
  }
  out.text("p_vs_n.csv", csv.text());
  return json::object();
}

template <class T>
void read_field(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config.") + key + ": wrong type");
  }
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
  for (const auto& [k, n] : kind_names())
    if (k == kind) return n;
  return "unknown";
}

ExperimentKind experiment_from_name(const std::string& name) {
  for (const auto& [k, n] : kind_names())
    if (n == name) return k;
  throw ConfigError("config.experiment: unknown experiment '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> known = {
      "experiment", "medium", "medium_params", "N", "omega", "pml_width", "strip_gap", "pml_strength",
      "p_schedule", "q", "q_holdout", "target", "targets", "eps_divisor", "r_max", "dense_reference",
      "offsets", "source", "k", "r0", "alphas", "ks", "epsilons", "r0_over_h", "rank_source", "Ns", "seed",
      "output_dir", "input_dir"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("config." + key + ": unknown field");
  if (!j.contains("experiment")) throw ConfigError("config.experiment: required");
  ExperimentConfig c;
  std::string name;
  read_field(j, "experiment", name);
  c.kind = experiment_from_name(name);
  read_field(j, "medium", c.medium);
  read_field(j, "medium_params", c.medium_params);
  read_field(j, "N", c.N);
  read_field(j, "omega", c.omega);
  read_field(j, "pml_width", c.pml_width);
  read_field(j, "strip_gap", c.strip_gap);
  read_field(j, "pml_strength", c.pml_strength);
  read_field(j, "p_schedule", c.p_schedule);
  read_field(j, "q", c.q);
  read_field(j, "q_holdout", c.q_holdout);
  read_field(j, "target", c.target);
  read_field(j, "targets", c.targets);
  read_field(j, "eps_divisor", c.eps_divisor);
  read_field(j, "r_max", c.r_max);
  read_field(j, "dense_reference", c.dense_reference);
  read_field(j, "offsets", c.offsets);
  read_field(j, "source", c.source);
  read_field(j, "k", c.k);
  read_field(j, "r0", c.r0);
  read_field(j, "alphas", c.alphas);
  read_field(j, "ks", c.ks);
  read_field(j, "epsilons", c.epsilons);
  read_field(j, "r0_over_h", c.r0_over_h);
  read_field(j, "rank_source", c.rank_source);
  read_field(j, "Ns", c.Ns);
  read_field(j, "seed", c.seed);
  read_field(j, "output_dir", c.output_dir);
  read_field(j, "input_dir", c.input_dir);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment_name(kind)},
          {"medium", medium},
          {"medium_params", medium_params},
          {"N", N},
          {"omega", omega > 0.0 ? omega : omega_from_pollution(N)},
          {"pml_width", pml_width},
          {"strip_gap", strip_gap},
          {"pml_strength", pml_strength},
          {"p_schedule", p_schedule},
          {"q", q},
          {"q_holdout", q_holdout},
          {"target", target},
          {"targets", targets},
          {"eps_divisor", eps_divisor},
          {"r_max", r_max},
          {"dense_reference", dense_reference},
          {"offsets", offsets},
          {"source", source},
          {"k", k},
          {"r0", r0},
          {"alphas", alphas},
          {"ks", ks},
          {"epsilons", epsilons},
          {"r0_over_h", r0_over_h},
          {"rank_source", rank_source},
          {"Ns", Ns},
          {"seed", seed},
          {"output_dir", output_dir},
          {"input_dir", input_dir}};
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("config." + field + ": " + why); };
  try {
    (void)medium_kind_from_name(medium);
  } catch (const ConfigError&) {
    fail("medium", "unknown medium '" + medium + "'");
  }
  if (N < 8) fail("N", "must be >= 8");
  if (omega < 0.0 || !std::isfinite(omega)) fail("omega", "must be positive (or 0 for the pollution rule)");
  if (pml_width < 1) fail("pml_width", "must be >= 1");
  if (strip_gap < 1) fail("strip_gap", "must be >= 1");
  if (!(pml_strength >= 0.0)) fail("pml_strength", "must be >= 0");
  for (int p : p_schedule)
    if (p < 1) fail("p_schedule", "entries must be >= 1");
  if (q < 1) fail("q", "must be >= 1");
  if (q_holdout < 1) fail("q_holdout", "must be >= 1");
  if (!(target > 0.0)) fail("target", "must be positive");
  for (double t : targets)
    if (!(t > 0.0)) fail("targets", "entries must be positive");
  if (!(eps_divisor >= 1.0 && eps_divisor <= 100.0)) fail("eps_divisor", "must lie in [1, 100]");
  if (r_max < 0) fail("r_max", "must be >= 0");
  for (double o : offsets)
    if (!(o > 0.0 && o <= 0.5)) fail("offsets", "entries must lie in (0, 1/2]");
  if (source.size() != 2 || !(source[0] >= 0 && source[0] <= 1 && source[1] >= 0 && source[1] <= 1))
    fail("source", "must be [x, y] inside the unit square");
  if (k < 0.0) fail("k", "must be positive");
  if (r0 < 0.0 || r0 >= 1.0) fail("r0", "must lie in (0, 1)");
  for (double a : alphas)
    if (!(a > 0.0)) fail("alphas", "entries must be positive");
  for (double v : ks)
    if (!(v >= 4.0)) fail("ks", "entries must be >= 4");
  for (double e : epsilons)
    if (!(e > 0.0 && e <= 0.5)) fail("epsilons", "entries must lie in (0, 1/2]");
  for (double r : r0_over_h)
    if (!(r >= 1.0)) fail("r0_over_h", "entries must be >= 1");
  if (rank_source != "sampled" && rank_source != "layer") fail("rank_source", "must be 'sampled' or 'layer'");
  for (int n : Ns)
    if (n < 8) fail("Ns", "entries must be >= 8");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

std::string resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("CABC_OUT"); env && *env) return env;
  return config.output_dir;
}

ExperimentReport run(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  out.dir = resolve_output_dir(config);
  fs::create_directories(out.dir);

  ExperimentReport rep;
  rep.config = config.to_json();
  switch (config.kind) {
    case ExperimentKind::OracleCheck: rep.metrics = oracle_check(config, out); break;
    case ExperimentKind::ProbeBlocks: rep.metrics = probe_blocks(config, out); break;
    case ExperimentKind::CondNumbers: rep.metrics = cond_numbers(config, out); break;
    case ExperimentKind::PlrCompress: rep.metrics = plr_compress_exp(config, out); break;
    case ExperimentKind::CompressedSolve: rep.metrics = compressed_solve(config, out); break;
    case ExperimentKind::GrazingScan: rep.metrics = grazing(config, out); break;
    case ExperimentKind::ChebConvergence: rep.metrics = cheb_convergence(config, out); break;
    case ExperimentKind::SepExpansion: rep.metrics = sep_expansion(config, out); break;
    case ExperimentKind::RankScan: rep.metrics = rank_scan(config, out); break;
    case ExperimentKind::PvsN: rep.metrics = p_vs_n(config, out); break;
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.artifacts = out.artifacts;
  json report = {{"config", rep.config},
                 {"metrics", rep.metrics},
                 {"seed", config.seed},
                 {"wall_time", rep.wall_time},
                 {"artifacts", rep.artifacts}};
  io::write_text_atomic(out.dir / "report.json", report.dump(2) + "\n");
  return rep;
}

}  // namespace cabc
