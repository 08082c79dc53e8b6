#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cabc/dtn.hpp"
#include "cabc/rng.hpp"

using namespace cabc;

namespace {

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

GridSpec small_grid(int N, int w) {
  GridSpec g;
  g.N = N;
  g.omega = 2.0 * kPi * 2.0;
  g.pml_width = w;
  return g;
}

}  // namespace

TEST_CASE("zero data gives zero output") {
  const auto m = make_medium(MediumKind::Uniform);
  const auto g = small_grid(8, 4);
  CHECK(dtn_apply(m, g, CVector::Zero(32)).norm() == 0.0);
}

TEST_CASE("oracle triangle on small grids") {
  for (auto kind : {MediumKind::Uniform, MediumKind::VerticalFault, MediumKind::Waveguide}) {
    const auto m = make_medium(kind);
    for (int N : {8, 16}) {
      const auto g = small_grid(N, 8);
      const CMatrix Dd = assemble_dense_dtn(m, g);
      const CMatrix Do = eliminate_dtn_oracle(m, g, EliminationMode::OnePass);
      const CMatrix Dl = eliminate_dtn_oracle(m, g, EliminationMode::LayerByLayer);
      CHECK(rel(Dd, Do) <= 1e-8);
      CHECK(rel(Dl, Do) <= 1e-10);
      CHECK(rel(Dd.transpose(), Dd) <= 1e-8);

      Philox rng(7);
      CVector x = gaussian_complex(4 * N, 1, rng).col(0);
      const CVector y = dtn_apply(m, g, x);
      CHECK((y - Do * x).norm() / (Do * x).norm() <= 1e-8);
      CVector e = CVector::Zero(4 * N);
      e(3) = 1.0;
      CHECK((dtn_apply(m, g, e) - Dd.col(3)).norm() <= 1e-10 * Dd.col(3).norm());
    }
  }
}

TEST_CASE("opposite block is small for the uniform medium") {
  const auto m = make_medium(MediumKind::Uniform);
  const auto g = small_grid(8, 8);
  const CMatrix D = assemble_dense_dtn(m, g);
  CHECK(get_block(D, {3, 1}).norm() / D.norm() <= 1e-2);
}

TEST_CASE("orient_block") {
  CMatrix M(2, 2);
  M << 1, 2, 3, 4;
  CHECK(orient_block(M, Orientation::Id) == M);
  CHECK(orient_block(orient_block(M, Orientation::Transpose), Orientation::Transpose) == M);
  CMatrix F(2, 2);
  F << 2, 1, 4, 3;
  CHECK(orient_block(M, Orientation::FlipCols) == F);
  Philox rng(3);
  const CMatrix R = gaussian_complex(5, 5, rng);
  for (auto o : {Orientation::Id, Orientation::Transpose, Orientation::FlipCols, Orientation::TransposeFlipCols,
                 Orientation::FlipBoth, Orientation::TransposeFlipBoth})
    CHECK(orient_block(unorient_block(R, o), o) == R);
}

namespace {
std::map<std::pair<int, int>, int> mults(const BlockLedger& l) {
  std::map<std::pair<int, int>, int> out;
  int total = 0;
  for (const auto& e : l) {
    out[{e.representative.row, e.representative.col}] = e.multiplicity;
    total += e.multiplicity;
    CHECK(e.multiplicity == static_cast<int>(e.copies.size()));
  }
  CHECK(total == 16);
  return out;
}
}  // namespace

TEST_CASE("ledgers") {
  using P = std::map<std::pair<int, int>, int>;
  CHECK(mults(ledger_for(make_medium(MediumKind::Uniform))) == P{{{1, 1}, 4}, {{2, 1}, 8}, {{3, 1}, 4}});
  CHECK(mults(ledger_for(make_medium(MediumKind::Periodic))) == P{{{1, 1}, 4}, {{2, 1}, 8}, {{3, 1}, 4}});
  CHECK(mults(ledger_for(make_medium(MediumKind::Waveguide))) ==
        P{{{1, 1}, 2}, {{2, 1}, 8}, {{3, 1}, 2}, {{2, 2}, 2}, {{4, 2}, 2}});
  CHECK(mults(ledger_for(make_medium(MediumKind::VerticalFault))) ==
        P{{{1, 1}, 2}, {{2, 2}, 1}, {{4, 4}, 1}, {{2, 1}, 4}, {{4, 1}, 4}, {{3, 1}, 2}, {{4, 2}, 2}});
  CHECK(mults(ledger_for(make_medium(MediumKind::DiagonalFault))) ==
        P{{{1, 1}, 2}, {{2, 2}, 2}, {{2, 1}, 4}, {{3, 1}, 4}, {{4, 1}, 2}, {{3, 2}, 2}});
  CHECK(trivial_ledger().size() == 16);

  const auto wg = ledger_for(make_medium(MediumKind::Waveguide));
  std::map<std::pair<int, int>, Orientation> copies;
  for (const auto& e : wg)
    if (e.representative == BlockId{2, 1})
      for (const auto& c : e.copies) copies[{c.position.row, c.position.col}] = c.orientation;
  CHECK(copies.at({1, 2}) == Orientation::Transpose);
  CHECK(copies.at({3, 4}) == Orientation::Transpose);
  CHECK(copies.at({4, 1}) == Orientation::FlipBoth);
  CHECK(copies.at({2, 3}) == Orientation::FlipBoth);
  CHECK(copies.at({1, 4}) == Orientation::TransposeFlipBoth);
  CHECK(copies.at({3, 2}) == Orientation::TransposeFlipBoth);
}

TEST_CASE("ledger reconstruction of dense D") {
  for (auto kind : {MediumKind::Uniform, MediumKind::Waveguide, MediumKind::VerticalFault, MediumKind::DiagonalFault}) {
    const auto m = make_medium(kind);
    const auto g = small_grid(16, 8);
    const CMatrix D = assemble_dense_dtn(m, g);
    const auto ledger = ledger_for(m);
    std::vector<CMatrix> reps;
    for (const auto& e : ledger) reps.push_back(get_block(D, e.representative));
    CHECK(rel(assemble_from_ledger(ledger, reps), D) <= 1e-8);
  }
}

TEST_CASE("norm estimate from 15 probes") {
  const auto m = make_medium(MediumKind::Uniform);
  const auto g = small_grid(16, 8);
  ExteriorSolver ext(m, g);
  const CMatrix D = assemble_dense_dtn(ext);
  Philox rng(11);
  const CMatrix Z = gaussian_real(64, 15, rng).cast<cplx>();
  const double est = estimate_frobenius(ext.apply(Z));
  CHECK(est >= 0.5 * D.norm());
  CHECK(est <= 2.0 * D.norm());
}

TEST_CASE("layer stripping: two steps unrolled") {
  GridSpec g;
  g.N = 8;
  g.omega = 5.0;
  g.pml_width = 1;
  g.strip_gap = 1;
  g.pml_strength = 0.0;  // no stretch: the plain recursion
  const auto strip = layer_strip_halfspace([](double) { return 1.0; }, g, 2);
  const int L = 8 + 4;
  const double h = g.h();
  CMatrix M = CMatrix::Zero(L, L);
  for (int a = 0; a < L; ++a) {
    M(a, a) = -4.0 + h * h * g.omega * g.omega;
    if (a + 1 < L) M(a, a + 1) = M(a + 1, a) = 1.0;
  }
  const CMatrix S2 = M - M.inverse();
  const CMatrix D2 = (S2 + CMatrix::Identity(L, L)) / h;
  CHECK(rel(strip.D, D2.block(2, 2, 8, 8)) <= 1e-12);
}

TEST_CASE("layer stripping agrees with the 2-D half strip") {
  GridSpec g;
  g.N = 16;
  g.omega = 20.0;
  g.strip_gap = 6;
  g.pml_width = 2;
  const auto m = make_medium(MediumKind::Uniform);
  const auto strip = layer_strip_halfspace([](double) { return 1.0; }, g, 8);
  CHECK(rel(strip.neumann, halfstrip_dtn(m, g)) <= 1e-10);
}
