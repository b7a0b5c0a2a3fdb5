#pragma once

// Graph builders and trained-model fixtures shared by the test files.

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "factexplain/gnn.hpp"
#include "factexplain/graph.hpp"
#include "factexplain/rng.hpp"
#include "factexplain/synth.hpp"
#include "support/gradcheck.hpp"

namespace fx::testing {

inline Graph random_graph(Rng& rng, int n, double p, std::size_t dim) {
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (rng.bernoulli(p)) edges.push_back({a, b});
    }
  }
  return Graph(n, std::move(edges), random_matrix(rng, static_cast<std::size_t>(n), dim));
}

/// Same graph with node ids permuted by `perm` (new id of old node i is perm[i]).
/// Annotations are dropped.
inline Graph relabel(const Graph& g, const std::vector<int>& perm) {
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) edges.push_back({perm[e.u], perm[e.v]});
  Matrix f(g.features().rows(), g.features().cols());
  for (int v = 0; v < g.node_count(); ++v) {
    auto src = g.features().row(static_cast<std::size_t>(v));
    std::copy(src.begin(), src.end(), f.row(static_cast<std::size_t>(perm[v])).begin());
  }
  return Graph(g.node_count(), std::move(edges), std::move(f));
}

/// Position in `h` of each edge of `g` under the node permutation.
inline std::vector<std::size_t> edge_permutation(const Graph& g, const Graph& h, const std::vector<int>& perm) {
  std::vector<std::size_t> out;
  for (const Edge& e : g.edges()) out.push_back(*h.edge_index(perm[e.u], perm[e.v]));
  return out;
}

struct TrainedFixture {
  Dataset data;
  GnnModel model;
  AccuracyReport report;
};

/// Classifier trained with default settings on a seeded dataset; cached per process.
/// Graph tasks use 20-node BA bases with `graphs` graphs.
inline const TrainedFixture& trained(DatasetKind kind, std::uint64_t seed = 0, int graphs = 300) {
  static std::map<std::tuple<DatasetKind, std::uint64_t, int>, TrainedFixture> cache;
  auto key = std::make_tuple(kind, seed, graphs);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  DatasetSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  if (!is_node_task(kind)) {
    spec.base_nodes = 20;
    spec.ba_m = 1;
    spec.graph_count = graphs;
  }
  TrainedFixture f;
  f.data = generate_dataset(spec);
  GnnConfig cfg;
  cfg.task = f.data.task;
  cfg.classes = f.data.num_classes;
  cfg.seed = seed;
  f.model = train_classifier(cfg, f.data, &f.report);
  return cache.emplace(key, std::move(f)).first->second;
}

}  // namespace fx::testing
