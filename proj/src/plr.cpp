#include "cabc/plr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "cabc/io.hpp"
#include "cabc/rng.hpp"

namespace cabc {

namespace {

CMatrix orth(const CMatrix& Y) {
  Eigen::HouseholderQR<CMatrix> qr(Y);
  return qr.householderQ() * CMatrix::Identity(Y.rows(), std::min(Y.rows(), Y.cols()));
}

RsvdResult truncate(const CMatrix& U, const RVector& s, const CMatrix& V, int k, Eigen::Index n) {
  RsvdResult r;
  r.U = CMatrix::Zero(n, k);
  r.V = CMatrix::Zero(n, k);
  r.sigma = RVector::Zero(k);
  const Eigen::Index m = std::min<Eigen::Index>(k, s.size());
  r.U.leftCols(m) = U.leftCols(m);
  r.V.leftCols(m) = V.leftCols(m);
  r.sigma.head(m) = s.head(m);
  return r;
}

}  // namespace

RsvdResult rsvd(const std::function<CMatrix(const CMatrix&)>& apply,
                const std::function<CMatrix(const CMatrix&)>& apply_adjoint, int n, int r_max,
                std::uint64_t stream) {
  if (n < 1 || r_max < 0) throw ConfigError("rsvd: n >= 1 and r_max >= 0 required");
  const int k = r_max + 1;
  const int l = k + 10;
  if (n <= l) {
    const CMatrix A = apply(CMatrix(CMatrix::Identity(n, n)));
    Eigen::BDCSVD<CMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return truncate(svd.matrixU(), svd.singularValues(), svd.matrixV(), k, n);
  }
  Philox rng(stream);
  const CMatrix omega = gaussian_complex(n, l, rng);
  CMatrix Q = orth(apply(omega));
  Q = orth(apply(apply_adjoint(Q)));  // one power iteration
  const CMatrix B = apply_adjoint(Q).adjoint();  // l x n = Q^H A
  Eigen::BDCSVD<CMatrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return truncate(Q * svd.matrixU(), svd.singularValues(), svd.matrixV(), k, n);
}

RsvdResult rsvd(const CMatrix& A, int r_max, std::uint64_t stream) {
  if (A.rows() != A.cols()) throw ConfigError("rsvd: square blocks only");
  return rsvd([&](const CMatrix& X) { return CMatrix(A * X); },
              [&](const CMatrix& X) { return CMatrix(A.adjoint() * X); }, static_cast<int>(A.rows()), r_max, stream);
}

std::vector<int> PLRMatrix::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (nodes[i].tag == PLRNode::Tag::Compressed) out.push_back(i);
  return out;
}

int PLRMatrix::max_depth() const {
  int d = 0;
  for (const auto& nd : nodes) d = std::max(d, nd.depth);
  return d;
}

CMatrix PLRMatrix::dense() const {
  CMatrix D = CMatrix::Zero(n, n);
  for (int i : leaves()) {
    const PLRNode& nd = nodes[i];
    if (nd.rank() > 0) D.block(nd.row0, nd.col0, nd.size, nd.size) = nd.U * nd.Vh;
  }
  return D.topLeftCorner(n_orig, n_orig);
}

namespace {

int next_pow2(int v) {
  int p = 1;
  while (p < v) p *= 2;
  return p;
}

struct Compressor {
  const CMatrix& M;
  int r_max;
  double eps;
  std::uint64_t seed;
  PLRMatrix& H;

  void leaf(PLRNode& nd, const CMatrix& U, const RVector& s, const CMatrix& V) {
    int R = 0;
    while (R < s.size() && s(R) >= eps) ++R;
    nd.tag = PLRNode::Tag::Compressed;
    nd.U = U.leftCols(R) * s.head(R).asDiagonal();
    nd.Vh = V.leftCols(R).adjoint();
  }

  int build(int r0, int c0, int size, int depth) {
    const int id = static_cast<int>(H.nodes.size());
    H.nodes.push_back({});
    PLRNode nd;
    nd.row0 = r0;
    nd.col0 = c0;
    nd.size = size;
    nd.depth = depth;
    const CMatrix B = M.block(r0, c0, size, size);
    if (size <= r_max) {
      Eigen::BDCSVD<CMatrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
      leaf(nd, svd.matrixU(), svd.singularValues(), svd.matrixV());
      H.nodes[id] = std::move(nd);
      return id;
    }
    const std::uint64_t stream = substream(seed, "plr", r0, c0 + size * 65536);
    const RsvdResult r = rsvd(B, r_max, stream);
    if (r.sigma(r_max) < eps) {
      leaf(nd, r.U, r.sigma.head(r_max), r.V);
      H.nodes[id] = std::move(nd);
      return id;
    }
    nd.tag = PLRNode::Tag::Hierarchical;
    const int half = size / 2;
    std::array<int, 4> ch{};
    ch[0] = build(r0, c0, half, depth + 1);
    ch[1] = build(r0, c0 + half, half, depth + 1);
    ch[2] = build(r0 + half, c0, half, depth + 1);
    ch[3] = build(r0 + half, c0 + half, half, depth + 1);
    nd.child = ch;
    H.nodes[id] = std::move(nd);
    return id;
  }
};

}  // namespace

PLRMatrix plr_compress(const CMatrix& M, int r_max, double epsilon, std::uint64_t seed) {
  if (M.rows() != M.cols() || M.rows() == 0) throw ConfigError("plr_compress: square nonempty matrix required");
  if (r_max < 1) throw ConfigError("plr_compress: r_max must be >= 1");
  if (!(epsilon >= 0.0)) throw ConfigError("plr_compress: epsilon must be >= 0");
  PLRMatrix H;
  H.n_orig = static_cast<int>(M.rows());
  H.n = next_pow2(H.n_orig);
  H.r_max = r_max;
  H.epsilon = epsilon;
  CMatrix padded = CMatrix::Zero(H.n, H.n);
  padded.topLeftCorner(H.n_orig, H.n_orig) = M;
  Compressor c{padded, r_max, epsilon, seed, H};
  c.build(0, 0, H.n, 0);
  return H;
}

CMatrix plr_matvec(const PLRMatrix& H, const CMatrix& X) {
  if (X.rows() != H.n_orig) throw ConfigError("plr_matvec: dimension mismatch");
  CMatrix Xp = CMatrix::Zero(H.n, X.cols());
  Xp.topRows(H.n_orig) = X;
  CMatrix Y = CMatrix::Zero(H.n, X.cols());
  for (const PLRNode& nd : H.nodes) {
    if (nd.tag != PLRNode::Tag::Compressed || nd.rank() == 0) continue;
    const CMatrix t = nd.Vh * Xp.middleRows(nd.col0, nd.size);
    Y.middleRows(nd.row0, nd.size) += nd.U * t;
  }
  return Y.topRows(H.n_orig);
}

CMatrix plr_matvec_transpose(const PLRMatrix& H, const CMatrix& X) {
  if (X.rows() != H.n_orig) throw ConfigError("plr_matvec_transpose: dimension mismatch");
  CMatrix Xp = CMatrix::Zero(H.n, X.cols());
  Xp.topRows(H.n_orig) = X;
  CMatrix Y = CMatrix::Zero(H.n, X.cols());
  for (const PLRNode& nd : H.nodes) {
    if (nd.tag != PLRNode::Tag::Compressed || nd.rank() == 0) continue;
    const CMatrix t = nd.U.transpose() * Xp.middleRows(nd.row0, nd.size);
    Y.middleRows(nd.col0, nd.size) += nd.Vh.transpose() * t;
  }
  return Y.topRows(H.n_orig);
}

CVector plr_matvec(const PLRMatrix& H, const CVector& x) {
  CMatrix y = plr_matvec(H, CMatrix(x));
  return y.col(0);
}

long long matvec_cost(const PLRMatrix& H) {
  long long cost = 0;
  for (const PLRNode& nd : H.nodes)
    if (nd.tag == PLRNode::Tag::Compressed) cost += 4LL * nd.size * nd.rank();
  return cost;
}

PLRMatrix reference_structure(ReferenceKind kind, int n, int r_max) {
  if (r_max < 1 || n < 2 * r_max || n % r_max != 0 || next_pow2(n / r_max) != n / r_max)
    throw ConfigError("reference_structure: n / r_max must be a power of two >= 2");
  PLRMatrix H;
  H.n = H.n_orig = n;
  H.r_max = r_max;
  auto divide = [&](int r0, int c0, int size) {
    if (size <= r_max) return false;
    switch (kind) {
      case ReferenceKind::Weak: return r0 == c0;
      case ReferenceKind::Strong: return std::abs(r0 - c0) / size <= 1;
      case ReferenceKind::Corner: return r0 == 0 && c0 + size == n;
    }
    return false;
  };
  std::function<int(int, int, int, int)> build = [&](int r0, int c0, int size, int depth) {
    const int id = static_cast<int>(H.nodes.size());
    H.nodes.push_back({});
    PLRNode nd;
    nd.row0 = r0;
    nd.col0 = c0;
    nd.size = size;
    nd.depth = depth;
    if (!divide(r0, c0, size)) {
      const int R = std::min(r_max, size);
      nd.U = CMatrix::Zero(size, R);
      nd.Vh = CMatrix::Zero(R, size);
    } else {
      nd.tag = PLRNode::Tag::Hierarchical;
      const int half = size / 2;
      nd.child = {build(r0, c0, half, depth + 1), build(r0, c0 + half, half, depth + 1),
                  build(r0 + half, c0, half, depth + 1), build(r0 + half, c0 + half, half, depth + 1)};
    }
    H.nodes[id] = std::move(nd);
    return id;
  };
  build(0, 0, n, 0);
  return H;
}

RmaxChoice choose_rmax(const CMatrix& M, double epsilon, const std::vector<int>& candidates, std::uint64_t seed) {
  if (candidates.empty()) throw ConfigError("choose_rmax: no candidates");
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  RmaxChoice best;
  best.cost = -1;
  for (int r : sorted) {
    const long long c = matvec_cost(plr_compress(M, r, epsilon, seed));
    best.scanned.emplace_back(r, c);
    if (best.cost < 0 || c < best.cost) {
      best.cost = c;
      best.r_max = r;
    }
  }
  return best;
}

double choose_epsilon(double block_probing_error, double normD, double divisor) {
  if (!(divisor >= 1.0 && divisor <= 100.0)) throw ConfigError("epsilon divisor must lie in [1, 100]");
  if (!(block_probing_error >= 0.0) || !(normD > 0.0)) throw ConfigError("choose_epsilon: bad inputs");
  return block_probing_error * normD / divisor;
}

int default_rmax(int block_distance) {
  switch (block_distance) {
    case 0: return 8;
    case 1: return 4;
    default: return 2;
  }
}

// ---- serialization --------------------------------------------------------

namespace {

constexpr char kPlrMagic[4] = {'C', 'P', 'L', 'R'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("PLR file truncated");
  return v;
}

void write_node(std::ostream& os, const PLRMatrix& H, int id) {
  const PLRNode& nd = H.nodes[id];
  put<std::uint8_t>(os, nd.tag == PLRNode::Tag::Compressed ? 0 : 1);
  put<std::uint32_t>(os, nd.row0);
  put<std::uint32_t>(os, nd.col0);
  put<std::uint32_t>(os, nd.size);
  if (nd.tag == PLRNode::Tag::Compressed) {
    put<std::uint32_t>(os, nd.rank());
    io::write_matrix(os, nd.U);
    io::write_matrix(os, nd.Vh);
  } else {
    for (int c : nd.child) write_node(os, H, c);
  }
}

int read_node(std::istream& is, PLRMatrix& H, int depth) {
  const auto tag = get<std::uint8_t>(is);
  if (tag > 1) throw FormatError("PLR file: bad node tag");
  const int id = static_cast<int>(H.nodes.size());
  H.nodes.push_back({});
  PLRNode nd;
  nd.row0 = static_cast<int>(get<std::uint32_t>(is));
  nd.col0 = static_cast<int>(get<std::uint32_t>(is));
  nd.size = static_cast<int>(get<std::uint32_t>(is));
  nd.depth = depth;
  if (nd.size < 1 || nd.row0 + nd.size > H.n || nd.col0 + nd.size > H.n) throw FormatError("PLR file: bad node extent");
  if (tag == 0) {
    const auto R = static_cast<Eigen::Index>(get<std::uint32_t>(is));
    nd.U = io::read_matrix(is);
    nd.Vh = io::read_matrix(is);
    if (nd.U.rows() != nd.size || nd.U.cols() != R || nd.Vh.rows() != R || nd.Vh.cols() != nd.size)
      throw FormatError("PLR file: factor shape does not match its header");
  } else {
    nd.tag = PLRNode::Tag::Hierarchical;
    if (nd.size < 2) throw FormatError("PLR file: cannot split a 1x1 block");
    for (int k = 0; k < 4; ++k) nd.child[k] = read_node(is, H, depth + 1);
  }
  H.nodes[id] = std::move(nd);
  return id;
}

}  // namespace

void write_plr(std::ostream& os, const PLRMatrix& H) {
  os.write(kPlrMagic, 4);
  put<std::uint16_t>(os, 1);
  put<std::uint32_t>(os, H.n);
  put<std::uint32_t>(os, H.n_orig);
  put<std::uint32_t>(os, H.r_max);
  put<double>(os, H.epsilon);
  if (!H.nodes.empty()) write_node(os, H, 0);
  if (!os) throw FormatError("PLR write failed");
}

PLRMatrix read_plr(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kPlrMagic, 4) != 0) throw FormatError("PLR file: bad magic");
  if (get<std::uint16_t>(is) != 1) throw FormatError("PLR file: unsupported version");
  PLRMatrix H;
  H.n = static_cast<int>(get<std::uint32_t>(is));
  H.n_orig = static_cast<int>(get<std::uint32_t>(is));
  H.r_max = static_cast<int>(get<std::uint32_t>(is));
  H.epsilon = get<double>(is);
  if (H.n_orig > H.n) throw FormatError("PLR file: bad dimensions");
  if (H.n > 0) read_node(is, H, 0);
  return H;
}

void write_plr(const std::string& path, const PLRMatrix& H) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path);
  write_plr(os, H);
}

PLRMatrix read_plr(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_plr(is);
}

}  // namespace cabc
