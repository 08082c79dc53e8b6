#include "cabc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cabc::io {

namespace {

static_assert(std::endian::native == std::endian::little, "CABC I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) throw FormatError("CABC: truncated header");
  return v;
}

std::filesystem::path temp_name(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

}  // namespace

void write_matrix(std::ostream& out, const CMatrix& m) {
  out.write(kMagic, 4);
  put<std::uint16_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  std::vector<double> row(2 * static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row[2 * j] = m(i, j).real();
      row[2 * j + 1] = m(i, j).imag();
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw FormatError("CABC: write failed");
}

CMatrix read_matrix(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("CABC: bad magic");
  const auto version = get<std::uint16_t>(in);
  if (version != kVersion) throw FormatError("CABC: unsupported version " + std::to_string(version));
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  const std::size_t count = 2 * static_cast<std::size_t>(rows) * cols;
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw FormatError("CABC: truncated payload");
  CMatrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      const std::size_t k = 2 * (static_cast<std::size_t>(i) * cols + j);
      m(i, j) = cplx(data[k], data[k + 1]);
    }
  return m;
}

void write_matrix(const std::filesystem::path& path, const CMatrix& m) {
  std::ostringstream buf(std::ios::binary);
  write_matrix(buf, m);
  write_text_atomic(path, buf.str());
}

CMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("CABC: cannot open " + path.string());
  return read_matrix(in);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = temp_name(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cabc::io
