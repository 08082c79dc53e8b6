#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cabc/helmholtz.hpp"

using namespace cabc;

namespace {

GridSpec grid(int N, int w, double omega) {
  GridSpec g;
  g.N = N;
  g.pml_width = w;
  g.omega = omega;
  return g;
}

cplx entry(const SparseSystem& s, int r, int c) {
  cplx v = 0.0;
  for (const auto& e : s.entries)
    if (e.row == r && e.col == c) v += e.value;
  return v;
}

// Interior solve of u = sin(pi x) sin(pi y) with exact ghost values.
double manufactured_error(int N, double omega) {
  const GridSpec g = grid(N, 4, omega);
  const double h = g.h();
  auto u = [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); };
  const auto ports = boundary_ports(N);
  CVector ghost(4 * N);
  for (int k = 0; k < 4 * N; ++k) ghost(k) = u((ports[k].gi + 0.5) * h, (ports[k].gj + 0.5) * h);
  AssembledSystem a = assemble_system(make_medium(MediumKind::Uniform), g, SystemConfig::Interior, &ghost);
  const NodeMap& map = *a.system.nodes;
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i)
      a.rhs(map.at(i, j)) = (omega * omega - 2.0 * kPi * kPi) * u((i + 0.5) * h, (j + 0.5) * h);
  const Field f = factor_solve(a.system, a.rhs);
  double err = 0.0;
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) err = std::max(err, std::abs(f.values(map.at(i, j)) - u((i + 0.5) * h, (j + 0.5) * h)));
  return err;
}

}  // namespace

TEST_CASE("pml profile") {
  CHECK(pml_sigma(0.0, 7.0) == 0.0);
  CHECK(pml_sigma(1.0, 7.0) == doctest::Approx(7.0));
  CHECK(pml_sigma(0.5, 7.0) == doctest::Approx(7.0 * 0.125));
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double s = pml_sigma(i / 20.0, 3.0);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("pollution rule") {
  CHECK(omega_from_pollution(1023) == doctest::Approx(2.0 * kPi * 51.2));
  CHECK(omega_from_pollution(8 * 1023) == doctest::Approx(4.0 * 2.0 * kPi * 51.2));
}

TEST_CASE("interior stencil diagonal") {
  const double omega = 3.0;
  const AssembledSystem a = assemble_system(make_medium(MediumKind::Uniform), grid(4, 4, omega), SystemConfig::Interior);
  const int r = a.system.nodes->at(1, 2);
  CHECK(std::abs(entry(a.system, r, r) - cplx(-4.0 * 16.0 + omega * omega)) < 1e-12);
  CHECK(std::abs(entry(a.system, r, a.system.nodes->at(2, 2)) - cplx(16.0)) < 1e-12);
  CHECK(a.system.dimension == 36);
}

TEST_CASE("geometry counts") {
  const Medium m = make_medium(MediumKind::Uniform);
  GridSpec g = grid(16, 8, 10.0);
  g.strip_gap = 2;
  CHECK(assemble_system(m, g, SystemConfig::Exterior).system.dimension == 36 * 36 - 16 * 16);
  CHECK(assemble_system(m, g, SystemConfig::HalfStrip).system.dimension == 36 * 10);
  CHECK(assemble_system(m, g, SystemConfig::Full).system.dimension == 36 * 36);
}

TEST_CASE("boundary data of the wrong length is rejected") {
  const Medium m = make_medium(MediumKind::Uniform);
  const CVector g = CVector::Zero(5);
  CHECK_THROWS_AS(assemble_system(m, grid(8, 4, 5.0), SystemConfig::Exterior, &g), ConfigError);
  CHECK_THROWS_AS(assemble_system(m, grid(8, 4, 5.0), SystemConfig::HalfStrip, &g), ConfigError);
}

TEST_CASE("boundary ports are counter-clockwise with doubled corners") {
  const auto p = boundary_ports(4);
  REQUIRE(p.size() == 16);
  CHECK((p[0].i == 0 && p[0].j == 0 && p[0].gj == -1));
  CHECK((p[3].i == 3 && p[3].j == 0));
  CHECK((p[4].i == 3 && p[4].j == 0 && p[4].gi == 4));
  CHECK((p[8].i == 3 && p[8].j == 3 && p[8].gj == 4));
  CHECK((p[15].i == 0 && p[15].j == 0 && p[15].gi == -1));
}

TEST_CASE("unstretched exterior operator is complex symmetric") {
  GridSpec g = grid(8, 4, 6.0);
  g.pml_strength = 0.0;
  const auto A = assemble_system(make_medium(MediumKind::Waveguide), g, SystemConfig::Exterior).system.to_sparse();
  const Eigen::SparseMatrix<cplx> At = A.transpose();
  CHECK((Eigen::SparseMatrix<cplx>(A - At)).norm() <= 1e-14 * A.norm());
}

TEST_CASE("identity system") {
  SparseSystem s;
  s.dimension = 3;
  for (int i = 0; i < 3; ++i) s.entries.push_back({i, i, 1.0});
  CVector e1 = CVector::Zero(3);
  e1(0) = 1.0;
  CHECK((factor_solve(s, e1).values - e1).norm() == 0.0);
}

TEST_CASE("singular system is reported") {
  SparseSystem s;
  s.dimension = 2;
  s.entries = {{0, 0, 1.0}, {1, 1, 0.0}};
  CHECK_THROWS_AS(BandedLU{s}, NumericError);
}

TEST_CASE("manufactured solution converges at second order") {
  const double e1 = manufactured_error(16, 5.0);
  const double e2 = manufactured_error(32, 5.0);
  const double e3 = manufactured_error(64, 5.0);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.15));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("factorization is reusable and the residual small") {
  const GridSpec g = grid(16, 8, omega_from_pollution(16));
  const auto a = assemble_system(make_medium(MediumKind::Uniform), g, SystemConfig::Exterior);
  const BandedLU lu(a.system);
  CMatrix B = CMatrix::Zero(a.system.dimension, 3);
  for (int c = 0; c < 3; ++c) B(7 * c + 1, c) = 1.0;
  const CMatrix X = lu.solve(B);
  for (int c = 0; c < 3; ++c) CHECK(relative_residual(a.system, X.col(c), B.col(c)) <= 1e-10);
}

TEST_CASE("layer damps an impulse by three orders of magnitude") {
  GridSpec g = grid(32, 16, omega_from_pollution(32));
  CVector data = CVector::Zero(4 * 32);
  data(16) = 1.0;  // middle of the bottom side
  const auto a = assemble_system(make_medium(MediumKind::Uniform), g, SystemConfig::Exterior, &data);
  const Field f = factor_solve(a.system, a.rhs);
  const NodeMap& map = *f.nodes;
  const int start = -(g.strip_gap + 1), outer = -(g.strip_gap + g.pml_width);
  double at_start = 0.0, at_outer = 0.0;
  for (int i = 0; i < 32; ++i) {
    at_start = std::max(at_start, std::abs(f.values(map.at(i, start))));
    at_outer = std::max(at_outer, std::abs(f.values(map.at(i, outer))));
  }
  CHECK(at_start / at_outer >= 1e3);
}
