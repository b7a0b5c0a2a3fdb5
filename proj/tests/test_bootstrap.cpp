#include <algorithm>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "factexplain/bootstrap.hpp"
#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"
#include "factexplain/synth.hpp"
#include "support/graphs.hpp"

using namespace fx;

namespace {

Dataset graph_dataset(DatasetKind kind, int graphs, std::uint64_t seed = 0) {
  DatasetSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.base_nodes = 20;
  spec.ba_m = 1;
  spec.graph_count = graphs;
  return generate_dataset(spec);
}

/// Untrained model: the bootstrap only needs its layer count and instance building.
GnnModel shell_model(const Dataset& d) {
  GnnConfig cfg;
  cfg.task = d.task;
  cfg.classes = d.num_classes;
  return GnnModel(cfg, d.graphs.front().feature_dim());
}

EdgeProbabilities indicator(const Graph& g, const std::vector<std::size_t>& on) {
  std::vector<double> v(g.edge_count(), 0.0);
  for (auto e : on) v[e] = 1.0;
  return EdgeProbabilities(std::move(v));
}

}  // namespace

TEST_CASE("cover count by hand") {
  // Two triangles joined by a 4-edge path: 0-1-2 triangle, 2-3-4-5-6, 6-7-8 triangle.
  Graph g = make_graph(9, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}, {6, 8}}, 1);
  const auto both = indicator(g, {*g.edge_index(0, 1), *g.edge_index(1, 2), *g.edge_index(0, 2),
                                  *g.edge_index(6, 7), *g.edge_index(7, 8), *g.edge_index(6, 8)});
  CHECK(active_nodes(g, both, 0.5) == std::vector<int>{0, 1, 2, 6, 7, 8});
  CHECK(cover_count(g, both, 1, 0.5, CoverRanking::ByDegree) == 2);
  CHECK(cover_count(g, both, 2, 0.5, CoverRanking::ByDegree) == 2);
  // Node 0 reaches 8 in 6 hops; a 6-hop ball around it covers everything.
  CHECK(cover_count(g, both, 6, 0.5, CoverRanking::ByDegree) == 1);
  CHECK(cover_count(g, both, 1, 0.5, CoverRanking::ByBetweenness) == 2);
  CHECK(cover_count(g, EdgeProbabilities(std::vector<double>(g.edge_count(), 0.49)), 1, 0.5, CoverRanking::ByDegree) == 0);
  CHECK_THROWS_AS((void)active_nodes(g, EdgeProbabilities({0.5}), 0.5), ShapeError);
}

TEST_CASE("configuration checks") {
  CHECK_THROWS_AS(validate(BootstrapConfig{.threshold = 0.0}), ConfigError);
  CHECK_THROWS_AS(validate(BootstrapConfig{.threshold = 1.0}), ConfigError);
  CHECK_THROWS_AS(validate(BootstrapConfig{.radius = -1}), ConfigError);
  CHECK_NOTHROW(validate(BootstrapConfig{}));
  CHECK_THROWS_AS((void)estimate_k(std::vector<ExplainInstance>{}, oracle_probabilities, BootstrapConfig{}), ConfigError);
}

TEST_CASE("oracle masks on two-motif graphs give k-hat 2") {
  const Dataset d = graph_dataset(DatasetKind::Ba4Motifs, 120);
  const GnnModel m = shell_model(d);
  const auto r = estimate_k(m, d, oracle_probabilities, BootstrapConfig{});
  CHECK(r.radius == 3);
  CHECK(r.k_hat == 2);
  CHECK(r.instances.size() == r.per_instance.size());
  CHECK(r.k_hat == *std::max_element(r.per_instance.begin(), r.per_instance.end()));
  const auto h = r.histogram();
  CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == r.instances.size());
  // Each graph's cover matches its motif count.
  for (std::size_t i = 0; i < r.instances.size(); ++i) {
    CHECK(r.per_instance[i] == static_cast<int>(d.graphs[r.instances[i]].motif_edge_ids().size()));
  }
  CHECK(estimate_k(m, d, oracle_probabilities, BootstrapConfig{}, 3).per_instance == r.per_instance);
}

TEST_CASE("single-motif graphs give k-hat 1") {
  const Dataset d = graph_dataset(DatasetKind::Ba2Motifs, 60);
  const auto r = estimate_k(shell_model(d), d, oracle_probabilities, BootstrapConfig{});
  CHECK(r.k_hat == 1);
}

TEST_CASE("empty masks give k-hat 0 with a warning") {
  const Dataset d = graph_dataset(DatasetKind::Ba2Motifs, 20);
  diag::ScopedWarningCapture warnings;
  const auto r = estimate_k(shell_model(d), d,
                            [](const ExplainInstance& in) {
                              return EdgeProbabilities(std::vector<double>(in.graph.edge_count(), 0.0));
                            },
                            BootstrapConfig{});
  CHECK(r.k_hat == 0);
  CHECK(warnings.count() == 1);
  CHECK(r.histogram() == std::vector<std::size_t>{r.instances.size()});
}

TEST_CASE("scorer failures name the instance") {
  const Dataset d = graph_dataset(DatasetKind::Ba2Motifs, 20);
  const GnnModel m = shell_model(d);
  auto instances = make_instances(m, d, {4, 9});
  auto failing = [](const ExplainInstance& in) -> EdgeProbabilities {
    if (in.instance == 9) throw TrainingError("boom");
    return oracle_probabilities(in);
  };
  CHECK_THROWS_WITH_AS((void)estimate_k(instances, failing, BootstrapConfig{.radius = 3}),
                       doctest::Contains("instance 9"), ArgumentError);
}

TEST_CASE("k-hat is the maximum and never grows with the radius") {
  Rng rng(41);
  std::vector<ExplainInstance> instances;
  for (int i = 0; i < 40; ++i) {
    ExplainInstance in;
    in.instance = static_cast<std::size_t>(i);
    in.graph = testing::random_graph(rng, 14, 0.15, 1);
    instances.push_back(std::move(in));
  }
  std::vector<EdgeProbabilities> masks;
  for (const auto& in : instances) masks.push_back(EdgeProbabilities(testing::random_matrix(rng, in.graph.edge_count(), 1, 0.0, 1.0).values()));
  auto scorer = [&](const ExplainInstance& in) { return masks[in.instance]; };
  for (auto ranking : {CoverRanking::ByDegree, CoverRanking::ByBetweenness}) {
    int previous = std::numeric_limits<int>::max();
    for (int radius = 1; radius <= 6; ++radius) {
      const auto r = estimate_k(instances, scorer, BootstrapConfig{.radius = radius, .ranking = ranking});
      for (int k : r.per_instance) CHECK(k <= r.k_hat);
      CHECK(r.k_hat <= previous);
      previous = r.k_hat;
    }
  }

  const Dataset d = graph_dataset(DatasetKind::Ba4Motifs, 60, 2);
  const GnnModel m = shell_model(d);
  int previous = std::numeric_limits<int>::max();
  for (int radius = 1; radius <= 5; ++radius) {
    const auto r = estimate_k(m, d, oracle_probabilities, BootstrapConfig{.radius = radius});
    CHECK(r.k_hat <= previous);
    previous = r.k_hat;
  }
}
