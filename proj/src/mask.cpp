#include "mrsnn/mask.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <string>

namespace mrsnn {

MotifMask MotifMask::full(int n) {
  MotifMask mask{Matrix::Ones(n, n)};
  mask.m.diagonal().setZero();
  return mask;
}

void MotifMask::validate() const {
  if (m.rows() != m.cols()) throw DomainError("MotifMask: matrix must be square");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) != 0.0f) throw DomainError("MotifMask: nonzero diagonal at " + std::to_string(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!(m(i, j) >= 0.0f && m(i, j) <= 1.0f)) {
        throw DomainError("MotifMask: entry (" + std::to_string(i) + "," + std::to_string(j) +
                          ") outside [0,1]");
      }
    }
  }
}

void write_matrix_text(std::ostream& os, const Matrix& m) {
  os << m.rows() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
      if (j) os << ' ';
      os.write(buf, end - buf);
    }
    os << '\n';
  }
}

Matrix read_matrix_text(std::istream& is) {
  while ((is >> std::ws).peek() == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  long n = -1;
  if (!(is >> n) || n < 0) throw ParseError("matrix text: missing or invalid size header");
  Matrix m(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      std::string tok;
      if (!(is >> tok)) {
        throw ParseError("matrix text: truncated at row " + std::to_string(i) + " col " +
                         std::to_string(j));
      }
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("matrix text: bad value '" + tok + "'");
      }
      m(i, j) = v;
    }
  }
  std::string extra;
  if (is >> extra) throw ParseError("matrix text: trailing data after " + std::to_string(n) + " rows");
  return m;
}

void save_mask(const std::filesystem::path& path, const MotifMask& mask, const std::string& comment) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write mask " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  write_matrix_text(os, mask.m);
  if (!os) throw ConfigError("short write to mask " + path.string());
}

MotifMask load_mask(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read mask " + path.string());
  MotifMask mask{read_matrix_text(is)};
  mask.validate();
  return mask;
}

}  // namespace mrsnn
