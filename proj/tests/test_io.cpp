#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cabc/io.hpp"
#include "cabc/rng.hpp"

using namespace cabc;
namespace fs = std::filesystem;

namespace {
fs::path tmp_dir() {
  const fs::path d = fs::temp_directory_path() / "cabc_test_io";
  fs::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("empty matrix roundtrip") {
  std::stringstream s;
  io::write_matrix(s, CMatrix(0, 0));
  const CMatrix m = io::read_matrix(s);
  CHECK(m.rows() == 0);
  CHECK(m.cols() == 0);
}

TEST_CASE("random complex matrix roundtrip is bit identical") {
  Philox r(11);
  const CMatrix a = gaussian_complex(16, 16, r);
  const fs::path p = tmp_dir() / "a.cabc";
  io::write_matrix(p, a);
  const CMatrix b = io::read_matrix(p);
  REQUIRE(b.rows() == 16);
  REQUIRE(b.cols() == 16);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(cplx) * 256) == 0);
}

TEST_CASE("rectangular roundtrip keeps the shape") {
  Philox r(12);
  const CMatrix a = gaussian_complex(3, 7, r);
  std::stringstream s;
  io::write_matrix(s, a);
  CHECK(s.str().size() == 4 + 2 + 4 + 4 + 21 * 16);
  CHECK(io::read_matrix(s) == a);
}

TEST_CASE("corrupted magic raises FormatError") {
  std::stringstream s;
  io::write_matrix(s, CMatrix::Identity(2, 2));
  std::string bytes = s.str();
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  CHECK_THROWS_AS(io::read_matrix(bad), FormatError);
}

TEST_CASE("truncated payload raises FormatError") {
  std::stringstream s;
  io::write_matrix(s, CMatrix::Identity(4, 4));
  const std::string bytes = s.str();
  std::stringstream bad(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(io::read_matrix(bad), FormatError);
}

TEST_CASE("wrong version raises FormatError") {
  std::stringstream s;
  io::write_matrix(s, CMatrix::Identity(2, 2));
  std::string bytes = s.str();
  bytes[4] = 9;
  std::stringstream bad(bytes);
  CHECK_THROWS_AS(io::read_matrix(bad), FormatError);
}

TEST_CASE("missing file raises") {
  CHECK_THROWS(io::read_matrix(tmp_dir() / "does_not_exist.cabc"));
}

TEST_CASE("atomic text write replaces the whole file") {
  const fs::path p = tmp_dir() / "t.txt";
  io::write_text_atomic(p, "first version, longer\n");
  io::write_text_atomic(p, "second\n");
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "second\n");
  for (const auto& e : fs::directory_iterator(tmp_dir()))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}
