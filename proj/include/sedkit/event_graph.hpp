#pragma once
// Event co-occurrence graph: adjacency matrix built from clip-level label
// presence, its degree matrix and Laplacian L = Delta - A, and the
// quadratic penalty v' L v used to regularize training.

#include <sedkit/events.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

// Symmetric matrix of pairwise co-occurrence strengths with zero
// diagonal. Holds raw clip counts as produced by count_cooccurrence, or
// entries normalized into [0,1] once passed through normalize().
struct AdjacencyMatrix {
  std::size_t m = 0;
  std::vector<double> a;  // row-major m x m

  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(std::size_t size) : m(size), a(size * size, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * m + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * m + j]; }
};

struct GraphLaplacian {
  std::size_t m = 0;
  std::vector<double> l;       // row-major m x m, L = Delta - A
  std::vector<double> degree;  // diagonal of Delta

  double at(std::size_t i, std::size_t j) const { return l[i * m + j]; }
};

// Counts, for each label pair, the number of clips in which both labels
// are present at least once. Presence is binary per clip; the diagonal
// stays zero.
inline AdjacencyMatrix count_cooccurrence(const std::vector<EventList>& clips,
                                          const EventVocabulary& vocab) {
  const std::size_t m = vocab.size();
  AdjacencyMatrix counts(m);
  std::vector<std::uint8_t> present(m);
  for (const auto& events : clips) {
    std::fill(present.begin(), present.end(), 0);
    for (const auto& e : events) present[vocab.index_of(e.label)] = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (!present[i]) continue;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!present[j]) continue;
        counts.at(i, j) += 1.0;
        counts.at(j, i) += 1.0;
      }
    }
  }
  return counts;
}

// Scales raw counts into [0,1] by the single largest count, preserving
// relative pair strengths. All-zero counts stay zero.
inline AdjacencyMatrix normalize(const AdjacencyMatrix& counts) {
  AdjacencyMatrix out(counts.m);
  double max_count = 0.0;
  for (double v : counts.a) max_count = std::max(max_count, v);
  if (max_count > 0.0)
    for (std::size_t i = 0; i < counts.a.size(); ++i) out.a[i] = counts.a[i] / max_count;
  return out;
}

inline void require_symmetric_nonnegative(const AdjacencyMatrix& a, double tol = 1e-12) {
  for (std::size_t i = 0; i < a.m; ++i)
    for (std::size_t j = 0; j < a.m; ++j) {
      if (a.at(i, j) < 0.0)
        throw std::invalid_argument("adjacency: negative entry at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      if (std::abs(a.at(i, j) - a.at(j, i)) > tol)
        throw std::invalid_argument("adjacency: asymmetric at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
    }
}

inline GraphLaplacian laplacian(const AdjacencyMatrix& a) {
  require_symmetric_nonnegative(a);
  GraphLaplacian g;
  g.m = a.m;
  g.l.assign(a.m * a.m, 0.0);
  g.degree.assign(a.m, 0.0);
  for (std::size_t i = 0; i < a.m; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < a.m; ++j) deg += a.at(i, j);
    g.degree[i] = deg;
    for (std::size_t j = 0; j < a.m; ++j) g.l[i * a.m + j] = -a.at(i, j);
    g.l[i * a.m + i] += deg;
  }
  return g;
}

// v' L v. For L built from a symmetric nonnegative A this equals
// (1/2) sum_ij A_ij (v_i - v_j)^2 and is therefore nonnegative.
inline double penalty(const GraphLaplacian& g, const std::vector<double>& v) {
  if (v.size() != g.m)
    throw std::invalid_argument("penalty: vector length " + std::to_string(v.size()) +
                                " does not match graph size " + std::to_string(g.m));
  double acc = 0.0;
  for (std::size_t i = 0; i < g.m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < g.m; ++j) row += g.l[i * g.m + j] * v[j];
    acc += v[i] * row;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Graph file format: line 1 = M, line 2 = tab-separated labels, then M
// tab-separated rows of A with 9 significant digits.
// ---------------------------------------------------------------------------

inline void write_graph_file(const std::string& path, const EventVocabulary& vocab,
                             const AdjacencyMatrix& a) {
  if (vocab.size() != a.m) throw std::invalid_argument("write_graph_file: vocabulary/matrix size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_graph_file: cannot open '" + path + "'");
  out << a.m << "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) out << (i ? "\t" : "") << vocab.label(i);
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < a.m; ++i) {
    for (std::size_t j = 0; j < a.m; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", a.at(i, j));
      out << (j ? "\t" : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_graph_file: write failed for '" + path + "'");
}

struct EventGraph {
  EventVocabulary vocab;
  AdjacencyMatrix adjacency;
};

inline EventGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_graph_file: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_graph_file: missing size line");
  std::size_t m = 0;
  try {
    m = static_cast<std::size_t>(std::stoul(line));
  } catch (const std::exception&) {
    throw std::runtime_error("read_graph_file: bad size line '" + line + "'");
  }
  if (!std::getline(in, line)) throw std::runtime_error("read_graph_file: missing label line");
  std::vector<std::string> labels;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) labels.push_back(tok);
  }
  if (labels.size() != m)
    throw std::runtime_error("read_graph_file: expected " + std::to_string(m) + " labels, got " +
                             std::to_string(labels.size()));
  AdjacencyMatrix a(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("read_graph_file: missing matrix row " + std::to_string(i));
    std::stringstream ss(line);
    std::string tok;
    std::size_t j = 0;
    while (std::getline(ss, tok, '\t')) {
      if (j >= m) throw std::runtime_error("read_graph_file: too many columns in row " + std::to_string(i));
      a.at(i, j++) = std::stod(tok);
    }
    if (j != m) throw std::runtime_error("read_graph_file: row " + std::to_string(i) + " has " +
                                         std::to_string(j) + " columns, expected " + std::to_string(m));
  }
  require_symmetric_nonnegative(a, 1e-9);
  return EventGraph{EventVocabulary(std::move(labels)), std::move(a)};
}

}  // namespace sedkit
