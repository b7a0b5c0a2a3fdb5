#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "factexplain/explain.hpp"
#include "factexplain/gnn.hpp"
#include "factexplain/graph.hpp"
#include "factexplain/synth.hpp"

namespace fx {

/// Probability that a random positive outscores a random negative, ties counting one
/// half (Mann-Whitney U from average ranks). Throws UndefinedMetricError unless both
/// classes are present.
[[nodiscard]] double auc_roc(const std::vector<double>& scores, const std::vector<char>& positive);

/// max_i |E_i ∩ E_r| / max_i |E_i| with E_r the top-r edges (r defaults to max_i |E_i|).
/// Throws ArgumentError on an empty motif list or an empty motif.
[[nodiscard]] double coverage_rate(const EdgeProbabilities& probs, const std::vector<std::vector<std::size_t>>& motifs,
                                   std::size_t r = 0);

/// DOT text: edges with probability >= threshold are bold, ground-truth edges red, and
/// every edge is labelled with its probability to two decimals.
[[nodiscard]] std::string export_dot(const Graph& g, const EdgeProbabilities& probs, double threshold = 0.5,
                                     const std::string& name = "explanation");

struct MetricRow {
  std::string dataset;
  std::string method;
  int k = 1;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct SummaryRow {
  std::string dataset;
  std::string method;
  int k = 1;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single repetition
  std::size_t repetitions = 0;
};

struct EvalReport {
  std::vector<MetricRow> rows;
  std::vector<std::string> failures;
  std::string aggregation = "per-instance mean";

  /// One row per (dataset, method, k, metric) in first-seen order.
  [[nodiscard]] std::vector<SummaryRow> summary() const;
  /// Header `dataset,method,k,seed,metric,value`, values printed with 17 significant digits.
  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string summary_table() const;
};

/// Explanation methods accepted by run_benchmark.
inline const std::vector<std::string> kMethods = {"kfact", "mlp", "gnnexplainer", "oracle"};
/// Metrics accepted by run_benchmark: edge AUC, coverage rate, classifier test accuracy.
inline const std::vector<std::string> kMetrics = {"auc", "cr", "accuracy"};

struct BenchmarkConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<std::string> methods{"kfact"};
  std::vector<int> ks{1};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> metrics{"auc"};
  GnnConfig gnn;               // task, classes and seed are set per cell
  ExplainerConfig explainer;   // k and seed are set per cell
  GnnExplainerConfig gnnexplainer;
  std::size_t max_eval_instances = 0;  // 0 evaluates every explainable instance
  int jobs = 1;
};

/// Throws ConfigError on unknown methods or metrics, or empty lists.
void validate(const BenchmarkConfig& cfg);

/// Per (dataset, seed): trains a classifier, then evaluates every method (kfact once per
/// k, the others once with k = 1). A failing cell is recorded in `failures` and skipped.
[[nodiscard]] EvalReport run_benchmark(const BenchmarkConfig& cfg);

/// Mean AUC and coverage of explanations on the given instances; coverage skips instances
/// without motif annotations and is NaN when none remain.
struct InstanceScores {
  double auc = 0.0;
  double coverage = 0.0;
  std::size_t instances = 0;
};
[[nodiscard]] InstanceScores score_explanations(const std::vector<ExplanationResult>& results,
                                                const std::vector<ExplainInstance>& instances, std::size_t budget);

}  // namespace fx
