#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mrsnn/common.hpp"

namespace mrsnn {

// N x N gate over the recurrent weights (and their updates). Entries lie in
// [0,1] and the diagonal is zero.
struct MotifMask {
  Matrix m;

  static MotifMask zeros(int n) { return {Matrix::Zero(n, n)}; }
  // All-ones off the diagonal: a fully recurrent layer.
  static MotifMask full(int n);

  int size() const { return static_cast<int>(m.rows()); }
  // Throws DomainError on a non-square matrix, a nonzero diagonal or an
  // entry outside [0,1].
  void validate() const;
  bool operator==(const MotifMask& o) const { return m == o.m; }
};

// Whitespace-delimited text: first line N, then N rows of N values. Lines
// starting with '#' before the header are comments.
void write_matrix_text(std::ostream& os, const Matrix& m);
Matrix read_matrix_text(std::istream& is);
void save_mask(const std::filesystem::path& path, const MotifMask& mask,
               const std::string& comment = {});
MotifMask load_mask(const std::filesystem::path& path);

}  // namespace mrsnn
