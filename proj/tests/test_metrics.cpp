#include <cmath>
#include <fstream>
#include <string>

#include "doctest.h"
#include "factexplain/errors.hpp"
#include "factexplain/metrics.hpp"
#include "factexplain/rng.hpp"
#include "json.hpp"
#include "support/dot_check.hpp"
#include "support/graphs.hpp"

using namespace fx;

namespace {

double brute_force_auc(const std::vector<double>& s, const std::vector<char>& pos) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      pairs += 1.0;
    }
  }
  return num / pairs;
}

nlohmann::json coverage_cases() {
  std::ifstream in(std::string(FX_FIXTURE_DIR) + "/coverage_cases.json");
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("auc_roc examples") {
  CHECK(auc_roc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc_roc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  CHECK(auc_roc({0.4, 0.4, 0.4}, {1, 0, 0}) == 0.5);
  CHECK(auc_roc({0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0}) == 0.75);
  CHECK_THROWS_AS((void)auc_roc({0.3, 0.2}, {1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS((void)auc_roc({0.3, 0.2}, {0, 0}), UndefinedMetricError);
  CHECK_THROWS_AS((void)auc_roc({0.3}, {1, 0}), ShapeError);
}

TEST_CASE("auc_roc equals the pairwise oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<char> pos(n);
    // Coarse grids force ties on most trials.
    const double grid = trial % 3 == 0 ? 0.0 : trial % 3 == 1 ? 10.0 : 3.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = grid > 0.0 ? std::round(rng.uniform() * grid) / grid : rng.uniform();
      pos[i] = rng.bernoulli(0.4);
    }
    pos[0] = 1;
    pos[1] = 0;
    CHECK(auc_roc(s, pos) == brute_force_auc(s, pos));
    if (grid == 0.0) {
      std::vector<double> neg(s);
      for (double& x : neg) x = -x;
      CHECK(auc_roc(s, pos) + auc_roc(neg, pos) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("coverage_rate fixtures") {
  for (const auto& c : coverage_cases()) {
    CAPTURE(c.at("name").get<std::string>());
    const EdgeProbabilities p(c.at("probs").get<std::vector<double>>());
    const auto motifs = c.at("motifs").get<std::vector<std::vector<std::size_t>>>();
    CHECK(coverage_rate(p, motifs, c.at("r").get<std::size_t>()) == c.at("expected").get<double>());
  }
  CHECK_THROWS_AS((void)coverage_rate(EdgeProbabilities({0.5}), {}), ArgumentError);
  CHECK_THROWS_AS((void)coverage_rate(EdgeProbabilities({0.5}), {{}}), ArgumentError);
  CHECK_THROWS_AS((void)coverage_rate(EdgeProbabilities({0.5}), {{3}}), ArgumentError);
}

TEST_CASE("coverage_rate is bounded and grows with the budget") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(20);
    const EdgeProbabilities p(testing::random_matrix(rng, n, 1, 0.0, 1.0).values());
    std::vector<std::vector<std::size_t>> motifs(1 + rng.below(3));
    for (auto& m : motifs) {
      for (std::size_t e = 0; e < n; ++e) {
        if (rng.bernoulli(0.3)) m.push_back(e);
      }
      if (m.empty()) m.push_back(rng.below(n));
    }
    double prev = 0.0;
    for (std::size_t r = 1; r <= n; ++r) {
      const double c = coverage_rate(p, motifs, r);
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("export_dot") {
  Graph lonely(3, {}, Matrix(3, 1, 1.0));
  const auto empty = testing::parse_dot(export_dot(lonely, EdgeProbabilities{}));
  REQUIRE(empty.has_value());
  CHECK(empty->nodes == 3);
  CHECK(empty->edges == 0);

  Rng rng(9);
  Graph g = testing::random_graph(rng, 9, 0.4, 1);
  GraphAnnotations a;
  a.gt_mask = std::vector<Edge>{g.edges()[0], g.edges()[2]};
  g = g.with_annotations(a);
  const auto all_on = testing::parse_dot(export_dot(g, EdgeProbabilities(std::vector<double>(g.edge_count(), 1.0)), 0.5, "all \"on\""));
  REQUIRE(all_on.has_value());
  CHECK(all_on->edges == g.edge_count());
  for (const auto& attrs : all_on->edge_attrs) CHECK(attrs.find("style=bold") != std::string::npos);

  const EdgeProbabilities p(testing::random_matrix(rng, g.edge_count(), 1, 0.0, 1.0).values());
  const std::string text = export_dot(g, p, 0.5);
  const auto parsed = testing::parse_dot(text);
  REQUIRE(parsed.has_value());
  CHECK(parsed->nodes == 9);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto& attrs = parsed->edge_attrs[e];
    char label[32];
    std::snprintf(label, sizeof label, "label=\"%.2f\"", p[e]);
    CHECK(attrs.find(label) != std::string::npos);
    CHECK((attrs.find("style=bold") != std::string::npos) == (p[e] >= 0.5));
    CHECK((attrs.find("color=red") != std::string::npos) == (e == 0 || e == 2));
  }
  CHECK_FALSE(testing::parse_dot("graph { 0 -- }").has_value());
  CHECK_FALSE(testing::parse_dot("digraph { 0 -> 1 }").has_value());
  CHECK_THROWS_AS((void)export_dot(g, EdgeProbabilities({0.1}), 0.5), ShapeError);
}

TEST_CASE("report summary, CSV and table") {
  EvalReport r;
  r.rows = {{"ba_2motifs", "kfact", 1, 0, "auc", 0.5},
            {"ba_2motifs", "kfact", 1, 1, "auc", 0.7},
            {"ba_2motifs", "kfact", 2, 0, "auc", 0.25},
            {"ba_2motifs", "oracle", 1, 0, "auc", 1.0}};
  const auto s = r.summary();
  REQUIRE(s.size() == 3);
  CHECK(s[0].mean == doctest::Approx(0.6));
  CHECK(s[0].stddev == doctest::Approx(std::sqrt(0.02)));
  CHECK(s[0].repetitions == 2);
  CHECK(s[1].k == 2);
  CHECK(s[1].stddev == 0.0);
  CHECK(r.to_csv() ==
        "dataset,method,k,seed,metric,value\n"
        "ba_2motifs,kfact,1,0,auc,0.5\n"
        "ba_2motifs,kfact,1,1,auc,0.69999999999999996\n"
        "ba_2motifs,kfact,2,0,auc,0.25\n"
        "ba_2motifs,oracle,1,0,auc,1\n");
  const std::string table = r.summary_table();
  CHECK(table.find("0.6000") != std::string::npos);
  CHECK(table.find("aggregation: per-instance mean") != std::string::npos);
}

TEST_CASE("run_benchmark") {
  BenchmarkConfig cfg;
  DatasetSpec spec;
  spec.kind = DatasetKind::Ba2Motifs;
  spec.base_nodes = 20;
  spec.ba_m = 1;
  spec.graph_count = 60;
  cfg.datasets = {spec};
  cfg.methods = {"oracle", "kfact"};
  cfg.ks = {1, 2};
  cfg.seeds = {0, 1};
  cfg.metrics = {"auc", "cr", "accuracy"};
  cfg.gnn.max_epochs = 200;
  cfg.explainer.epochs = 3;
  cfg.max_eval_instances = 20;
  const EvalReport r = run_benchmark(cfg);
  CHECK(r.failures.empty());
  for (const auto& row : r.rows) {
    if (row.method == "oracle") CHECK(row.value == 1.0);
    CHECK(row.value >= 0.0);
    CHECK(row.value <= 1.0);
  }
  const auto s = r.summary();
  // classifier accuracy, oracle auc/cr, kfact auc/cr for k = 1 and 2
  CHECK(s.size() == 7);
  for (const auto& row : s) {
    CHECK(row.repetitions == 2);
    CHECK(row.stddev >= 0.0);
  }
  cfg.jobs = 2;
  CHECK(run_benchmark(cfg).to_csv() == r.to_csv());

  cfg.methods = {"gnnexplainer"};
  cfg.gnnexplainer.epochs = 0;
  cfg.seeds = {0};
  const EvalReport broken = run_benchmark(cfg);
  CHECK(broken.failures.size() == 1);
  CHECK(broken.rows.size() == 1);  // the accuracy row survives

  cfg.methods = {"pgm"};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.methods = {"oracle"};
  cfg.metrics = {"fidelity"};
  CHECK_THROWS_AS((void)run_benchmark(cfg), ConfigError);
}
