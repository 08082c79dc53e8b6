#include "cabc/rng.hpp"

#include <cmath>

namespace cabc {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Philox::Philox(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t k = splitmix(seed ^ splitmix(stream));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  counter_ = stream << 32;
}

std::uint32_t Philox::next_u32() {
  if (pos_ == 4) {
    buf_ = block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                  0u, 0u},
                 key_);
    ++counter_;
    pos_ = 0;
  }
  return buf_[pos_++];
}

std::uint64_t Philox::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Philox::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Philox::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

std::uint64_t substream(std::uint64_t seed, std::string_view purpose, int a, int b) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (char ch : purpose) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001B3ull;
  }
  std::uint64_t x = splitmix(seed);
  x = splitmix(x ^ h);
  x = splitmix(x ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)));
  x = splitmix(x ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 1));
  return x;
}

CMatrix gaussian_real(int rows, int cols, Philox& rng) {
  CMatrix z(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) z(i, j) = cplx(rng.normal(), 0.0);
  return z;
}

CMatrix gaussian_complex(int rows, int cols, Philox& rng) {
  CMatrix z(rows, cols);
  const double s = std::sqrt(0.5);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      z(i, j) = cplx(s * re, s * im);
    }
  return z;
}

}  // namespace cabc
