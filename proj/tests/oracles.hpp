#pragma once

// Reference implementations shared by the unit tests and the acceptance
// binary. They are deliberately naive and independent of the library code.

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "mrsnn/motif.hpp"

namespace oracle {

// 9-bit triad id: bit (8 - (3*r + c)) holds arc r -> c.
inline int triad_code(const std::array<std::array<int, 3>, 3>& a) {
  int code = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) code = (code << 1) | a[r][c];
  return code;
}

inline int canonical_code(const std::array<std::array<int, 3>, 3>& a) {
  std::array<int, 3> p{0, 1, 2};
  int best = 1 << 10;
  do {
    std::array<std::array<int, 3>, 3> b{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) b[r][c] = a[p[r]][p[c]];
    best = std::min(best, triad_code(b));
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

inline std::array<std::array<int, 3>, 3> from_code(int code) {
  std::array<std::array<int, 3>, 3> a{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] = (code >> (8 - (3 * r + c))) & 1;
  return a;
}

// Class ids in numbering order.
inline constexpr std::array<int, 13> kClassIds = {6, 12, 14, 36, 38, 46, 74, 78, 98, 102, 108, 110, 238};

// 0-based class of an induced triple or -1 when it is not weakly connected.
inline int classify(const mrsnn::Adjacency& g, int i, int j, int k) {
  const int v[3] = {i, j, k};
  std::array<std::array<int, 3>, 3> a{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] = (r != c && g.edge(v[r], v[c])) ? 1 : 0;
  const int key = canonical_code(a);
  for (int cls = 0; cls < 13; ++cls) {
    if (canonical_code(from_code(kClassIds[static_cast<std::size_t>(cls)])) == key) return cls;
  }
  return -1;
}

struct Census {
  mrsnn::TriadCounts counts{};
  std::int64_t disconnected = 0;
};

inline Census census(const mrsnn::Adjacency& g) {
  Census out;
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        const int c = classify(g, i, j, k);
        if (c < 0) ++out.disconnected;
        else ++out.counts[static_cast<std::size_t>(c)];
      }
  return out;
}

// Kolmogorov-Smirnov distance of a sample from U[0,1].
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - p[i], p[i] - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace oracle
