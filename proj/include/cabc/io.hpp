#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cabc/types.hpp"

namespace cabc::io {

inline constexpr char kMagic[4] = {'C', 'A', 'B', 'C'};
inline constexpr std::uint16_t kVersion = 1;

/// Binary layout: "CABC", u16 version, u32 rows, u32 cols, then rows*cols
/// row-major little-endian (re, im) f64 pairs.
void write_matrix(std::ostream& out, const CMatrix& m);
CMatrix read_matrix(std::istream& in);

void write_matrix(const std::filesystem::path& path, const CMatrix& m);
CMatrix read_matrix(const std::filesystem::path& path);

/// Whole-file atomic write: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace cabc::io
