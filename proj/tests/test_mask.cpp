#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mrsnn/mask.hpp"

using namespace mrsnn;

TEST_CASE("full mask has a zero diagonal") {
  const auto m = MotifMask::full(4);
  CHECK(m.size() == 4);
  CHECK(m.m.sum() == 12.0f);
  for (int i = 0; i < 4; ++i) CHECK(m.m(i, i) == 0.0f);
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("validate rejects malformed masks") {
  MotifMask diag = MotifMask::zeros(3);
  diag.m(1, 1) = 1.0f;
  CHECK_THROWS_AS(diag.validate(), DomainError);
  MotifMask range = MotifMask::zeros(3);
  range.m(0, 2) = 1.5f;
  CHECK_THROWS_AS(range.validate(), DomainError);
  MotifMask rect{Matrix::Zero(2, 3)};
  CHECK_THROWS_AS(rect.validate(), DomainError);
}

TEST_CASE("text format round-trips exactly") {
  Matrix m(3, 3);
  m << 0, 0.5f, 1, 1, 0, 0.5f, 0, 1, 0;
  std::stringstream ss;
  write_matrix_text(ss, m);
  CHECK(ss.str().rfind("3\n", 0) == 0);
  CHECK(read_matrix_text(ss) == m);

  std::stringstream odd("# produced elsewhere\n2\n0 0.1\n0.3 0\n");
  const auto r = read_matrix_text(odd);
  CHECK(r(0, 1) == 0.1f);
  CHECK(r(1, 0) == 0.3f);
}

TEST_CASE("truncated text is rejected") {
  std::stringstream ss("3\n0 1 1\n1 0\n");
  CHECK_THROWS(read_matrix_text(ss));
}

TEST_CASE("save and load with a comment line") {
  const auto dir = std::filesystem::temp_directory_path() / "mrsnn_test_mask";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.txt";
  auto mask = MotifMask::full(5);
  mask.m(2, 3) = 0.5f;
  save_mask(path, mask, "config_sha256 abc");
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "# config_sha256 abc");
  CHECK(load_mask(path) == mask);
  std::filesystem::remove_all(dir);
}
