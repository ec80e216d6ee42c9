#pragma once

// 3-node motif analysis of recurrent connectivity.
//
// The 13 weakly connected directed triad classes are numbered 1..13 in the
// conventional order of their 9-bit adjacency ids (a11 is the most
// significant bit, rows read left to right):
//
//   1: 6    2: 12   3: 14   4: 36   5: 38   6: 46   7: 74
//   8: 78   9: 98  10: 102 11: 108 12: 110 13: 238 (all six arcs)
//
// `kTriadClassArcs` lists one canonical arc set per class; everything else
// (lookup tables, tests) is derived from it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "mrsnn/common.hpp"
#include "mrsnn/mask.hpp"

namespace mrsnn {

inline constexpr int kTriadClasses = 13;

struct Arc {
  int from;
  int to;
};

// Canonical arc sets on nodes {0,1,2}, indexed by class - 1.
extern const std::array<std::vector<Arc>, kTriadClasses> kTriadClassArcs;

// Binary directed graph without self-loops.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0) {}

  int size() const { return n_; }
  bool edge(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j] != 0; }
  // Self-loops are rejected with DomainError.
  void set(int i, int j, bool on = true);
  std::int64_t edge_count() const;
  const std::uint8_t* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * n_; }

  // P A P^T for the permutation new_index = perm[old_index].
  Adjacency permuted(std::span<const int> perm) const;
  Matrix to_matrix() const;
  static Adjacency from_matrix(const Matrix& m);  // nonzero off-diagonal -> edge

  bool operator==(const Adjacency&) const = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> a_;
};

using TriadCounts = std::array<std::int64_t, kTriadClasses>;

struct TriadCensus {
  TriadCounts counts{};
  std::array<double, kTriadClasses> frequencies{};
  std::array<double, kTriadClasses> p_values{};
  std::array<double, kTriadClasses> credible{};
};

// Class (0-based) of the subgraph induced on an ordered node triple, or -1
// when the triple is not weakly connected.
int triad_class(const Adjacency& adj, int i, int j, int k);

// Direct O(N^3) enumeration over all unordered triples.
TriadCounts triad_census(const Adjacency& adj);
// Neighbourhood-pruned enumeration, O(sum deg^2); agrees exactly with
// triad_census.
TriadCounts triad_census_sparse(const Adjacency& adj);

std::int64_t choose3(std::int64_t n);
std::int64_t connected_triples(const TriadCounts& counts);

Matrix normalize_weights(const Matrix& w);
Adjacency binarize(const Matrix& s, double theta);

// Density-matched Erdos-Renyi null; p = (1 + #{null >= observed}) / (1 + n_random).
std::array<double, kTriadClasses> null_pvalues(const TriadCounts& observed, int n,
                                               std::int64_t n_edges, int n_random,
                                               std::uint64_t seed);

std::array<double, kTriadClasses> frequencies(const TriadCounts& counts);
std::array<double, kTriadClasses> credible_frequency(const TriadCensus& census);

// counts -> frequencies -> null p-values -> credible frequencies.
TriadCensus analyze(const Adjacency& adj, int n_random, std::uint64_t seed);

MotifMask extract_mask(const Matrix& w_r, double theta = 0.5);
MotifMask integrate_masks(const MotifMask& spatial, const MotifMask& temporal);

// JSON array of {class_index, count, frequency, p_value, credible}.
void write_census_json(std::ostream& os, const TriadCensus& census);
TriadCensus read_census_json(std::istream& is);

}  // namespace mrsnn
