#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "factexplain/matrix.hpp"

namespace fx {

/// Undirected edge in canonical form (u < v).
struct Edge {
  int u = 0;
  int v = 0;

  [[nodiscard]] static Edge canonical(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

/// Optional per-graph metadata. Edge sets are given as node pairs so they survive the
/// canonical re-ordering done by the Graph constructor.
struct GraphAnnotations {
  std::optional<int> label;
  std::vector<int> node_labels;
  std::optional<std::vector<Edge>> gt_mask;
  /// Edge sets of the individual motif copies planted in the graph (for coverage rate).
  std::vector<std::vector<Edge>> motifs;
};

/// Simple undirected graph with a node feature matrix. Immutable after construction:
/// the edge list is sorted lexicographically and every edge id used elsewhere refers to
/// a position in that order.
class Graph {
 public:
  Graph() = default;
  /// Throws ArgumentError on self-loops, out-of-range endpoints, or a gt_mask edge that
  /// is not in the edge set. Duplicate pairs (including reversed duplicates) are merged.
  Graph(int node_count, std::vector<Edge> edges, Matrix features = {},
        GraphAnnotations annotations = {});

  [[nodiscard]] int node_count() const { return node_count_; }
  [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const Matrix& features() const { return features_; }
  [[nodiscard]] std::size_t feature_dim() const { return features_.cols(); }

  [[nodiscard]] const std::vector<int>& neighbors(int v) const;
  [[nodiscard]] int degree(int v) const { return static_cast<int>(neighbors(v).size()); }
  [[nodiscard]] bool valid_node(int v) const { return v >= 0 && v < node_count_; }
  [[nodiscard]] std::optional<std::size_t> edge_index(int a, int b) const;
  [[nodiscard]] bool has_edge(int a, int b) const { return edge_index(a, b).has_value(); }

  [[nodiscard]] const std::optional<int>& label() const { return annotations_.label; }
  [[nodiscard]] const std::vector<int>& node_labels() const { return annotations_.node_labels; }
  [[nodiscard]] bool has_gt_mask() const { return annotations_.gt_mask.has_value(); }
  [[nodiscard]] const std::vector<std::size_t>& gt_edge_ids() const { return gt_ids_; }
  /// 0/1 indicator per edge; all zeros when no mask is present.
  [[nodiscard]] std::vector<char> gt_indicator() const;
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& motif_edge_ids() const {
    return motif_ids_;
  }
  [[nodiscard]] const GraphAnnotations& annotations() const { return annotations_; }

  [[nodiscard]] Graph with_annotations(GraphAnnotations annotations) const;
  [[nodiscard]] Graph with_features(Matrix features) const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  GraphAnnotations annotations_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::size_t> gt_ids_;
  std::vector<std::vector<std::size_t>> motif_ids_;
};

/// Convenience: builds a graph from (a, b) pairs with all-ones features of width `dim`.
[[nodiscard]] Graph make_graph(int node_count, const std::vector<std::pair<int, int>>& pairs,
                               std::size_t feature_dim = 1);

/// A small connected pattern whose presence drives a label.
struct Motif {
  std::string name;
  Graph graph;
  std::optional<int> anchor;
};

/// Validates connectivity; throws ArgumentError otherwise.
[[nodiscard]] Motif make_motif(std::string name, Graph graph, std::optional<int> anchor = {});

/// Per-edge Bernoulli parameters, indexed by the canonical edge order of a graph.
class EdgeProbabilities {
 public:
  EdgeProbabilities() = default;
  /// Throws ArgumentError if any entry is outside [0, 1] or NaN.
  explicit EdgeProbabilities(std::vector<double> values);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] double sum() const;

  friend bool operator==(const EdgeProbabilities&, const EdgeProbabilities&) = default;

 private:
  std::vector<double> values_;
};

/// BFS distances from `source`; entries beyond `max_radius` (or unreachable) are
/// kInfiniteDistance.
[[nodiscard]] std::vector<int> bfs_distances(const Graph& g, int source,
                                             int max_radius = kInfiniteDistance);

/// Shortest-path length in edges; kInfiniteDistance when disconnected.
[[nodiscard]] int geodesic_distance(const Graph& g, int u, int v);

/// Largest pairwise geodesic distance among `nodes`, measured in g.
[[nodiscard]] int geodesic_diameter(const Graph& g, const std::vector<int>& nodes);
[[nodiscard]] int geodesic_diameter(const Graph& g);

/// Induced subgraph on the ball of radius r around v, with index maps.
struct Restriction {
  Graph graph;
  int center = 0;                          // index of v inside `graph`
  std::vector<int> old_to_new;             // -1 for nodes outside the ball
  std::vector<int> new_to_old;
  std::vector<std::size_t> edge_new_to_old;
};

[[nodiscard]] Restriction restrict_graph(const Graph& g, int v, int r);

/// Induced subgraph on an arbitrary node set (kept in ascending old-index order).
[[nodiscard]] Restriction induced_subgraph(const Graph& g, std::vector<int> nodes);

inline constexpr int kMaxMotifNodes = 12;

/// Injective node map motif -> g embedding every motif edge (non-induced containment).
/// Returns the first witness found, or nullopt. Throws UnsupportedSizeError when the
/// motif has more than kMaxMotifNodes nodes.
[[nodiscard]] std::optional<std::vector<int>> find_subgraph(const Graph& g, const Graph& motif);
[[nodiscard]] bool contains_subgraph(const Graph& g, const Motif& m);

struct ThresholdMask {
  double threshold = 0.5;
};
struct TopRMask {
  std::size_t r = 0;
};
using MaskMode = std::variant<ThresholdMask, TopRMask>;

/// Edge ids of the r highest-probability edges, ties broken by lower edge id. Returned
/// in rank order.
[[nodiscard]] std::vector<std::size_t> top_r_edge_ids(const EdgeProbabilities& probs,
                                                      std::size_t r);

/// Keeps the selected edges; node set, features and annotations restricted accordingly.
/// A TopRMask with r > |E| is clamped and a warning is emitted.
[[nodiscard]] Graph apply_mask(const Graph& g, const EdgeProbabilities& probs,
                               const MaskMode& mode);

/// Exact betweenness centrality (Brandes accumulation, unnormalized, undirected).
[[nodiscard]] std::vector<double> betweenness_centrality(const Graph& g);

enum class CoverRanking { ByDegree, ByBetweenness };

struct CoverElement {
  int center = 0;
  std::vector<int> nodes;  // ascending
};

/// Result of the greedy cover. Every element lies within `radius` hops of its center.
struct Cover {
  std::vector<CoverElement> elements;
  int radius = 0;

  [[nodiscard]] std::size_t size() const { return elements.size(); }
};

/// Greedy r-hop cover of `targets`: repeatedly takes the lowest-ranked uncovered target
/// (ascending degree or betweenness, node index breaks ties), removes every target within
/// r hops of it, and records the removed set as one element.
[[nodiscard]] Cover greedy_r_cover(const Graph& g, const std::vector<int>& targets, int r,
                                   CoverRanking ranking = CoverRanking::ByDegree);

}  // namespace fx
