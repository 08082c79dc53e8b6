#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "cabc/types.hpp"

namespace cabc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// The stream is fully determined by (key, counter); no hidden state besides
/// the position inside the current 128-bit block.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in the open interval (0,1).
  double uniform();
  /// Standard normal via Box-Muller (platform independent).
  double normal();

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derive a substream id from (seed, purpose, a, b) by hashing.
std::uint64_t substream(std::uint64_t seed, std::string_view purpose, int a = 0, int b = 0);

/// rows x cols matrix of iid real N(0,1) entries stored as complex.
CMatrix gaussian_real(int rows, int cols, Philox& rng);
/// rows x cols matrix of iid complex Gaussian entries, E|z|^2 = 1.
CMatrix gaussian_complex(int rows, int cols, Philox& rng);

}  // namespace cabc
