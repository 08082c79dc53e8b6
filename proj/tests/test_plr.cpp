#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "cabc/plr.hpp"
#include "cabc/rng.hpp"

using namespace cabc;

namespace {

CMatrix rank_one(int n, double sigma, std::uint64_t seed) {
  Philox r(seed);
  CVector u = gaussian_complex(n, 1, r).col(0), v = gaussian_complex(n, 1, r).col(0);
  return sigma * (u / u.norm()) * (v / v.norm()).adjoint();
}

CMatrix kernel_matrix(int n) {
  CMatrix K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = 1.0 / (1.0 + std::abs(i - j));
  return K;
}

int ilog2(long long v) {
  int l = 0;
  while ((1LL << l) < v) ++l;
  return l;
}

// Closed forms from summing 4 N_B R over the leaves of each definition.
long long weak_cost(long long n, long long R) { return 4 * n * R * ilog2(2 * n / R); }
long long corner_cost(long long n, long long R) { return 12 * n * R - 8 * R * R; }
long long strong_cost(long long n, long long R) {
  const int L = ilog2(n / R);
  long long c = 0;
  for (int l = 2; l < L; ++l) c += (6LL * (1LL << (l - 1)) - 6) * 4 * (n >> l) * R;
  c += (6LL * (1LL << L) - 8) * 4 * R * R;
  return c;
}

std::set<std::pair<int, int>> leaves_at_depth(const PLRMatrix& H, int depth) {
  std::set<std::pair<int, int>> s;
  for (int id : H.leaves()) {
    const PLRNode& nd = H.nodes[id];
    if (nd.depth == depth) s.insert({nd.row0 / nd.size + 1, nd.col0 / nd.size + 1});
  }
  return s;
}

}  // namespace

TEST_CASE("rsvd on exact inputs") {
  const RsvdResult z = rsvd(CMatrix::Zero(20, 20), 3, 1);
  CHECK(z.sigma.maxCoeff() == 0.0);
  const RsvdResult r = rsvd(rank_one(40, 7.0, 2), 2, 3);
  CHECK(std::abs(r.sigma(0) - 7.0) <= 1e-10 * 7.0);
  for (int k = 1; k < r.sigma.size(); ++k) CHECK(r.sigma(k) <= 1e-10 * 7.0);
}

TEST_CASE("rsvd singular values of a gaussian matrix") {
  Philox g(4);
  const CMatrix A = gaussian_complex(64, 64, g);
  const RVector exact = Eigen::JacobiSVD<CMatrix>(A).singularValues();
  const RsvdResult r = rsvd(A, 8, 5);
  REQUIRE(r.sigma.size() == 9);
  for (int k = 0; k < 8; ++k) {
    CHECK(r.sigma(k) <= 1.5 * exact(k));
    CHECK(r.sigma(k) >= exact(k) / 1.5);
  }
}

TEST_CASE("compression of exactly low-rank matrices") {
  const PLRMatrix H = plr_compress(rank_one(8, 3.0, 6), 2, 1e-12);
  REQUIRE(H.nodes.size() == 1);
  CHECK(H.nodes[0].tag == PLRNode::Tag::Compressed);
  CHECK(H.nodes[0].rank() == 1);
  const PLRMatrix Z = plr_compress(CMatrix::Zero(16, 16), 4, 1e-8);
  REQUIRE(Z.nodes.size() == 1);
  CHECK(Z.nodes[0].rank() == 0);
  CHECK(plr_matvec(Z, CVector(CVector::Ones(16))).norm() == 0.0);
}

TEST_CASE("kernel matrix: level-1 off-diagonal blocks follow their dense rank") {
  const int n = 256;
  const CMatrix K = kernel_matrix(n);
  int rank = 0;
  for (auto [r0, c0] : {std::pair{0, 128}, {128, 0}}) {
    const RVector s = Eigen::JacobiSVD<CMatrix>(K.block(r0, c0, 128, 128)).singularValues();
    int r = 0;
    while (r < s.size() && s(r) >= 1e-6) ++r;
    rank = std::max(rank, r);
  }
  for (int r_max : {8, 16}) {
    const PLRMatrix H = plr_compress(K, r_max, 1e-6);
    REQUIRE(H.nodes[0].tag == PLRNode::Tag::Hierarchical);
    const auto want = rank <= r_max ? PLRNode::Tag::Compressed : PLRNode::Tag::Hierarchical;
    CHECK(H.nodes[H.nodes[0].child[1]].tag == want);
    CHECK(H.nodes[H.nodes[0].child[2]].tag == want);
    CHECK(H.nodes[H.nodes[0].child[0]].tag == PLRNode::Tag::Hierarchical);
    CHECK(H.max_depth() <= ilog2(n / r_max));
    CHECK((H.dense() - K).norm() <= 1e-4 * K.norm());
  }
}

TEST_CASE("leaf reconstruction error is within the randomized slack") {
  const CMatrix K = kernel_matrix(128);
  const double eps = 1e-5;
  const PLRMatrix H = plr_compress(K, 4, eps, 7);
  for (int id : H.leaves()) {
    const PLRNode& nd = H.nodes[id];
    const CMatrix blk = K.block(nd.row0, nd.col0, nd.size, nd.size);
    const CMatrix diff = blk - (nd.rank() > 0 ? CMatrix(nd.U * nd.Vh) : CMatrix::Zero(nd.size, nd.size));
    const double err = nd.size > 0 ? Eigen::JacobiSVD<CMatrix>(diff).singularValues()(0) : 0.0;
    CHECK(err <= 1.5 * eps);
  }
}

TEST_CASE("matvec equals the dense leaf reconstruction") {
  Philox r(8);
  for (int n : {32, 64, 128}) {
    CMatrix M = kernel_matrix(n) + 1e-3 * gaussian_complex(n, n, r);
    const PLRMatrix H = plr_compress(M, 4, 1e-2, 9);
    const CMatrix Hd = H.dense();
    const double n2 = Eigen::JacobiSVD<CMatrix>(Hd).singularValues()(0);
    const CMatrix X = gaussian_complex(n, 3, r);
    CHECK((plr_matvec(H, X) - Hd * X).norm() <= 1e-12 * n2 * X.norm());
    CHECK((plr_matvec_transpose(H, X) - Hd.transpose() * X).norm() <= 1e-12 * n2 * X.norm());
    const CVector x = X.col(0), y = X.col(1);
    const cplx a(0.5, -2.0), b(3.0, 1.0);
    const CVector lhs = plr_matvec(H, CVector(a * x + b * y));
    const CVector rhs = a * plr_matvec(H, x) + b * plr_matvec(H, y);
    CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
  }
  CHECK_THROWS_AS(plr_matvec(plr_compress(kernel_matrix(16), 2, 1e-3), CVector(CVector::Ones(5))), ConfigError);
}

TEST_CASE("non power of two dimension is padded") {
  const CMatrix K = kernel_matrix(40);
  const PLRMatrix H = plr_compress(K, 4, 1e-9);
  CHECK(H.n == 64);
  CHECK(H.n_orig == 40);
  CHECK((H.dense() - K).norm() <= 1e-7 * K.norm());
  const CVector x = CVector::LinSpaced(40, 0.0, 1.0);
  CHECK((plr_matvec(H, x) - K * x).norm() <= 1e-7 * (K * x).norm());
}

TEST_CASE("cost of a single leaf") {
  PLRMatrix H;
  H.n = H.n_orig = 64;
  PLRNode leaf;
  leaf.size = 64;
  leaf.U = CMatrix::Zero(64, 4);
  leaf.Vh = CMatrix::Zero(4, 64);
  H.nodes = {leaf};
  CHECK(matvec_cost(H) == 1024);
}

TEST_CASE("reference structure leaf patterns") {
  const PLRMatrix weak = reference_structure(ReferenceKind::Weak, 64, 8);
  CHECK(weak.leaf_count() == 2 + 4 + 8 + 8);
  CHECK(leaves_at_depth(weak, 1) == std::set<std::pair<int, int>>{{1, 2}, {2, 1}});

  const PLRMatrix strong = reference_structure(ReferenceKind::Strong, 64, 4);
  CHECK(leaves_at_depth(strong, 1).empty());
  CHECK(leaves_at_depth(strong, 2) == std::set<std::pair<int, int>>{{1, 3}, {1, 4}, {2, 4}, {3, 1}, {4, 1}, {4, 2}});

  const PLRMatrix corner = reference_structure(ReferenceKind::Corner, 64, 8);
  CHECK(leaves_at_depth(corner, 1).size() == 3);
  CHECK(leaves_at_depth(corner, 2).size() == 3);
  CHECK(leaves_at_depth(corner, 3).size() == 4);
  CHECK(corner.leaf_count() == 10);
  CHECK_THROWS_AS(reference_structure(ReferenceKind::Weak, 48, 4), ConfigError);
}

TEST_CASE("cost identities of the reference structures") {
  CHECK(matvec_cost(reference_structure(ReferenceKind::Weak, 64, 4)) == 5120);
  for (auto [n, R] : {std::pair{64, 4}, {256, 8}, {128, 2}}) {
    CHECK(matvec_cost(reference_structure(ReferenceKind::Weak, n, R)) == weak_cost(n, R));
    CHECK(matvec_cost(reference_structure(ReferenceKind::Strong, n, R)) == strong_cost(n, R));
    CHECK(matvec_cost(reference_structure(ReferenceKind::Corner, n, R)) == corner_cost(n, R));
    const long long headline = 12LL * n * R * ilog2(n / (2 * R));
    CHECK(std::llabs(matvec_cost(reference_structure(ReferenceKind::Strong, n, R)) - headline) <= 12LL * n * R);
  }
}

TEST_CASE("rank selection") {
  const RmaxChoice c = choose_rmax(rank_one(64, 2.0, 10), 1e-8);
  CHECK(c.r_max == 1);
  CHECK(c.cost == 4 * 64);
  CHECK(c.scanned.size() == 6);
}

TEST_CASE("epsilon and default ranks") {
  CHECK(choose_epsilon(1e-3, 50.0, 25.0) == doctest::Approx(2e-3));
  CHECK_THROWS_AS(choose_epsilon(1e-3, 50.0, 200.0), ConfigError);
  CHECK(default_rmax(0) == 8);
  CHECK(default_rmax(1) == 4);
  CHECK(default_rmax(2) == 2);
}

TEST_CASE("serialization round trip") {
  const PLRMatrix H = plr_compress(kernel_matrix(64), 4, 1e-6, 3);
  std::stringstream s;
  write_plr(s, H);
  const PLRMatrix G = read_plr(s);
  CHECK(G.n == H.n);
  CHECK(G.leaf_count() == H.leaf_count());
  CHECK(matvec_cost(G) == matvec_cost(H));
  CHECK((G.dense() - H.dense()).norm() == 0.0);
  std::stringstream bad("PLRX garbage");
  CHECK_THROWS_AS(read_plr(bad), FormatError);
}
