#include "mrsnn/motif.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "mrsnn/coverage.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

const std::array<std::vector<Arc>, kTriadClasses> kTriadClassArcs = {{
    {{2, 0}, {2, 1}},                                  // 6
    {{1, 2}, {2, 0}},                                  // 12
    {{1, 2}, {2, 0}, {2, 1}},                          // 14
    {{1, 0}, {2, 0}},                                  // 36
    {{1, 0}, {2, 0}, {2, 1}},                          // 38
    {{1, 0}, {1, 2}, {2, 0}, {2, 1}},                  // 46
    {{0, 2}, {1, 2}, {2, 1}},                          // 74
    {{0, 2}, {1, 2}, {2, 0}, {2, 1}},                  // 78
    {{0, 2}, {1, 0}, {2, 1}},                          // 98
    {{0, 2}, {1, 0}, {2, 0}, {2, 1}},                  // 102
    {{0, 2}, {1, 0}, {1, 2}, {2, 0}},                  // 108
    {{0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}},          // 110
    {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}},  // 238
}};

namespace {

// Bit of arc (x -> y) between triple slots x, y in the 6-bit triple code:
// slot pair (0,1) -> bits 0/1, (0,2) -> bits 2/3, (1,2) -> bits 4/5, the
// lower bit of each pair being the arc from the lower slot.
int arc_bit(int x, int y) {
  const int lo = std::min(x, y), hi = std::max(x, y);
  const int pair = lo == 0 ? (hi == 1 ? 0 : 1) : 2;
  return 2 * pair + (x < y ? 0 : 1);
}

struct ClassTable {
  std::array<std::int8_t, 64> cls{};
  ClassTable() {
    cls.fill(-1);
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int c = 0; c < kTriadClasses; ++c) {
      for (const auto& p : perms) {
        int code = 0;
        for (const Arc& a : kTriadClassArcs[c]) code |= 1 << arc_bit(p[a.from], p[a.to]);
        cls[code] = static_cast<std::int8_t>(c);
      }
    }
  }
};

const ClassTable& table() {
  static const ClassTable t;
  return t;
}

void require_triads(const Adjacency& adj) {
  if (adj.size() < 3) throw DomainError("triad census needs N >= 3, got " + std::to_string(adj.size()));
}

}  // namespace

void Adjacency::set(int i, int j, bool on) {
  if (i == j) throw DomainError("Adjacency: self-loop at node " + std::to_string(i));
  a_[static_cast<std::size_t>(i) * n_ + j] = on ? 1 : 0;
}

std::int64_t Adjacency::edge_count() const {
  std::int64_t c = 0;
  for (auto v : a_) c += v;
  return c;
}

Adjacency Adjacency::permuted(std::span<const int> perm) const {
  Adjacency out(n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (edge(i, j)) out.set(perm[i], perm[j]);
    }
  }
  return out;
}

Matrix Adjacency::to_matrix() const {
  Matrix m(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) m(i, j) = edge(i, j) ? 1.0f : 0.0f;
  }
  return m;
}

Adjacency Adjacency::from_matrix(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("Adjacency: matrix must be square");
  Adjacency a(static_cast<int>(m.rows()));
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      if (i != j && m(i, j) != 0.0f) a.set(i, j);
    }
  }
  return a;
}

int triad_class(const Adjacency& adj, int i, int j, int k) {
  const int code = (adj.edge(i, j) ? 1 : 0) | (adj.edge(j, i) ? 2 : 0) | (adj.edge(i, k) ? 4 : 0) |
                   (adj.edge(k, i) ? 8 : 0) | (adj.edge(j, k) ? 16 : 0) |
                   (adj.edge(k, j) ? 32 : 0);
  return table().cls[code];
}

TriadCounts triad_census(const Adjacency& adj) {
  coverage::mark("triad_census");
  require_triads(adj);
  const int n = adj.size();
  std::vector<std::uint8_t> pc(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      pc[static_cast<std::size_t>(i) * n + j] =
          static_cast<std::uint8_t>((adj.edge(i, j) ? 1 : 0) | (adj.edge(j, i) ? 2 : 0));
    }
  }
  std::array<std::int64_t, 64> by_code{};
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* ri = pc.data() + static_cast<std::size_t>(i) * n;
    for (int j = i + 1; j < n; ++j) {
      const std::uint8_t* rj = pc.data() + static_cast<std::size_t>(j) * n;
      const int base = ri[j];
      for (int k = j + 1; k < n; ++k) ++by_code[base | (ri[k] << 2) | (rj[k] << 4)];
    }
  }
  TriadCounts counts{};
  for (int code = 0; code < 64; ++code) {
    if (const int c = table().cls[code]; c >= 0) counts[c] += by_code[code];
  }
  return counts;
}

TriadCounts triad_census_sparse(const Adjacency& adj) {
  require_triads(adj);
  const int n = adj.size();
  std::vector<std::vector<int>> nb(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && (adj.edge(i, j) || adj.edge(j, i))) nb[i].push_back(j);
    }
  }
  auto linked = [&](int u, int w) { return adj.edge(u, w) || adj.edge(w, u); };
  TriadCounts counts{};
  for (int v = 0; v < n; ++v) {
    const auto& nv = nb[v];
    for (std::size_t a = 0; a < nv.size(); ++a) {
      for (std::size_t b = a + 1; b < nv.size(); ++b) {
        const int u = nv[a], w = nv[b];
        // Closed triples are seen from every vertex; keep the visit from the smallest.
        if (linked(u, w) && v > u) continue;
        ++counts[triad_class(adj, v, u, w)];
      }
    }
  }
  return counts;
}

std::int64_t choose3(std::int64_t n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

std::int64_t connected_triples(const TriadCounts& counts) {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

Matrix normalize_weights(const Matrix& w) {
  coverage::mark("normalize_weights");
  Matrix s = w.unaryExpr([](float x) { return 1.0f / (1.0f + std::exp(-x)); });
  s.diagonal().setZero();
  return s;
}

Adjacency binarize(const Matrix& s, double theta) {
  coverage::mark("binarize");
  if (s.rows() != s.cols()) throw DomainError("binarize: matrix must be square");
  Adjacency a(static_cast<int>(s.rows()));
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      if (i != j && s(i, j) > theta) a.set(i, j);
    }
  }
  return a;
}

std::array<double, kTriadClasses> null_pvalues(const TriadCounts& observed, int n,
                                               std::int64_t n_edges, int n_random,
                                               std::uint64_t seed) {
  coverage::mark("null_pvalues");
  if (n_random < 1) throw DomainError("null_pvalues: n_random must be >= 1");
  if (n < 3) throw DomainError("null_pvalues: need N >= 3");
  const double density =
      std::clamp(static_cast<double>(n_edges) / (static_cast<double>(n) * (n - 1)), 0.0, 1.0);
  std::array<std::int64_t, kTriadClasses> at_least{};
  Adjacency g(n);
  for (int r = 0; r < n_random; ++r) {
    Rng rng(derive_seed(seed, 0x6E756C6CULL, static_cast<std::uint64_t>(r)));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) g.set(i, j, uniform01(rng) < density);
      }
    }
    const auto c = triad_census(g);
    for (int k = 0; k < kTriadClasses; ++k) at_least[k] += c[k] >= observed[k] ? 1 : 0;
  }
  std::array<double, kTriadClasses> p{};
  for (int k = 0; k < kTriadClasses; ++k) {
    p[k] = static_cast<double>(1 + at_least[k]) / static_cast<double>(1 + n_random);
  }
  return p;
}

std::array<double, kTriadClasses> frequencies(const TriadCounts& counts) {
  const auto total = connected_triples(counts);
  std::array<double, kTriadClasses> f{};
  if (total == 0) return f;
  for (int k = 0; k < kTriadClasses; ++k) {
    f[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  }
  return f;
}

std::array<double, kTriadClasses> credible_frequency(const TriadCensus& census) {
  coverage::mark("credible_frequency");
  std::array<double, kTriadClasses> c{};
  for (int k = 0; k < kTriadClasses; ++k) c[k] = census.frequencies[k] * (1.0 - census.p_values[k]);
  return c;
}

TriadCensus analyze(const Adjacency& adj, int n_random, std::uint64_t seed) {
  TriadCensus t;
  t.counts = triad_census(adj);
  t.frequencies = frequencies(t.counts);
  t.p_values = null_pvalues(t.counts, adj.size(), adj.edge_count(), n_random, seed);
  t.credible = credible_frequency(t);
  return t;
}

MotifMask extract_mask(const Matrix& w_r, double theta) {
  coverage::mark("extract_mask");
  return {binarize(normalize_weights(w_r), theta).to_matrix()};
}

MotifMask integrate_masks(const MotifMask& spatial, const MotifMask& temporal) {
  coverage::mark("integrate_masks");
  if (spatial.m.rows() != temporal.m.rows() || spatial.m.cols() != temporal.m.cols()) {
    throw DomainError("integrate_masks: shape mismatch");
  }
  return {0.5f * (spatial.m + temporal.m)};
}

void write_census_json(std::ostream& os, const TriadCensus& census) {
  nlohmann::json arr = nlohmann::json::array();
  for (int k = 0; k < kTriadClasses; ++k) {
    arr.push_back({{"class_index", k + 1},
                   {"count", census.counts[k]},
                   {"frequency", census.frequencies[k]},
                   {"p_value", census.p_values[k]},
                   {"credible", census.credible[k]}});
  }
  os << arr.dump(2) << '\n';
}

TriadCensus read_census_json(std::istream& is) {
  nlohmann::json arr;
  try {
    is >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("census json: ") + e.what());
  }
  if (!arr.is_array() || arr.size() != kTriadClasses) {
    throw ParseError("census json: expected an array of 13 classes");
  }
  TriadCensus t;
  for (const auto& row : arr) {
    const int k = row.at("class_index").get<int>() - 1;
    if (k < 0 || k >= kTriadClasses) throw ParseError("census json: bad class_index");
    t.counts[k] = row.at("count").get<std::int64_t>();
    t.frequencies[k] = row.at("frequency").get<double>();
    t.p_values[k] = row.at("p_value").get<double>();
    t.credible[k] = row.at("credible").get<double>();
  }
  return t;
}

}  // namespace mrsnn
