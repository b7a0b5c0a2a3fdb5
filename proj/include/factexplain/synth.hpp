#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "factexplain/dataset.hpp"
#include "factexplain/graph.hpp"

namespace fx {

enum class DatasetKind {
  BaShapes,
  BaCommunity,
  TreeCycles,
  TreeGrid,
  Ba2Motifs,
  Ba4Motifs,
  MotifUnion,
};

[[nodiscard]] std::string to_string(DatasetKind kind);
[[nodiscard]] DatasetKind parse_dataset_kind(const std::string& text);
[[nodiscard]] bool is_node_task(DatasetKind kind);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::BaShapes;
  /// BA base size (node tasks: per community), or per-graph base size for graph tasks.
  int base_nodes = 300;
  /// Edges added per BA growth step.
  int ba_m = 5;
  /// Binary-tree depth for tree tasks (2^(depth+1) - 1 nodes).
  int tree_depth = 8;
  int motif_count = 80;
  int graph_count = 1000;
  int feature_dim = 10;
  /// Random edges joining the two communities of ba_community.
  int community_edges = 50;
  /// Minimum base-graph distance between the attachment sites of motifs in one graph.
  int min_site_distance = 2;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Defaults for a kind: graph tasks use a 20-node base with m = 1, the rest keep the
/// struct defaults.
[[nodiscard]] DatasetSpec default_spec(DatasetKind kind);

/// Throws ArgumentError for non-positive sizes.
void validate(const DatasetSpec& spec);

/// Preferential attachment: a clique on m+1 nodes, then each new node links to m distinct
/// existing nodes chosen with probability proportional to degree.
[[nodiscard]] Graph gen_ba(int n, int m, std::uint64_t seed, std::size_t feature_dim = 1);

/// Balanced binary tree of the given depth (root 0, children 2i+1 and 2i+2).
[[nodiscard]] Graph gen_binary_tree(int depth, std::size_t feature_dim = 1);

/// house, cycle_5, cycle_6, complete_4, grid_3x3. Node labels inside each motif give the
/// per-position class used by node tasks (house: bottom 1, middle 2, top 3; others 1).
[[nodiscard]] const std::map<std::string, Motif>& motif_library();
/// Throws ArgumentError for unknown names.
[[nodiscard]] const Motif& library_motif(const std::string& name);

/// Motifs associated with each label of ba_4motifs (two per label).
[[nodiscard]] std::vector<std::vector<std::string>> ba4_label_motifs();

struct Attachment {
  Graph graph;
  std::vector<Edge> motif_edges;  // motif-internal edges in the new graph, bridge excluded
  Edge bridge;
  int first_motif_node = 0;
  int base_site = 0;
};

/// Appends the motif's nodes and edges and one bridge from a uniformly chosen motif node to
/// a uniformly chosen base node (restricted to `sites` when non-empty). New nodes take the
/// base's feature width filled with ones; annotations of the base are carried over.
[[nodiscard]] Attachment attach_motif(const Graph& base, const Motif& m, std::uint64_t seed,
                                      const std::vector<int>& sites = {});

[[nodiscard]] Dataset gen_node_dataset(const DatasetSpec& spec);
[[nodiscard]] Dataset gen_graph_dataset(const DatasetSpec& spec);
/// Dispatches on spec.kind (motif_union is not available here; use gen_motif_union_task).
[[nodiscard]] Dataset generate_dataset(const DatasetSpec& spec);

struct MotifUnionConfig {
  std::vector<Motif> motifs;
  double p = 0.1;
  std::vector<double> p_i;
  int n = 8;
  int count = 100;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 1;
};

/// Probability that Erdős–Rényi(p) contains a fixed placed copy of the motif: p^|E(g)|.
[[nodiscard]] double placed_motif_probability(const Motif& m, double p);

/// G0 ~ ER(n, p), E_i ~ Bernoulli(p_i), present motifs placed on reserved disjoint node
/// blocks (motif i occupies the nodes after those of motifs 0..i-1), Y = max_i E_i.
/// Throws ConfigError when p is outside (0, 1/2), the blocks do not fit, or
/// placed_motif_probability(g_i) > p_i.
[[nodiscard]] Dataset gen_motif_union_task(const MotifUnionConfig& config);

/// Reads DS_A.txt, DS_graph_indicator.txt, DS_graph_labels.txt and the optional
/// DS_node_labels.txt from `dir`, where DS is the directory name.
[[nodiscard]] Dataset load_tu_dataset(const std::filesystem::path& dir, std::uint64_t seed = 0);

}  // namespace fx
