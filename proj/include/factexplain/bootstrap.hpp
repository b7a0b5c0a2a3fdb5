#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "factexplain/dataset.hpp"
#include "factexplain/explain.hpp"
#include "factexplain/graph.hpp"

namespace fx {

struct BootstrapConfig {
  int radius = 0;  // hop radius; 0 means the classifier's layer count
  double threshold = 0.5;
  CoverRanking ranking = CoverRanking::ByDegree;
};

/// Throws ConfigError unless 0 < threshold < 1 and radius >= 0.
void validate(const BootstrapConfig& cfg);

/// Edge probabilities for one instance's domain graph.
using EdgeScorer = std::function<EdgeProbabilities(const ExplainInstance&)>;

struct BootstrapResult {
  int k_hat = 0;
  int radius = 0;
  std::vector<std::size_t> instances;
  std::vector<int> per_instance;  // k' per instance, aligned with `instances`

  /// histogram[j] = number of instances with k' == j.
  [[nodiscard]] std::vector<std::size_t> histogram() const;
};

/// Nodes incident to at least one edge with probability >= threshold, ascending.
[[nodiscard]] std::vector<int> active_nodes(const Graph& g, const EdgeProbabilities& probs, double threshold);

/// k' for one graph: size of the greedy cover of the active nodes.
[[nodiscard]] int cover_count(const Graph& g, const EdgeProbabilities& probs, int radius, double threshold,
                              CoverRanking ranking);

/// Runs the scorer on every instance, covers its active nodes greedily, and reports the
/// largest cover. Scorer failures are rethrown as ArgumentError naming the instance.
/// Warns when every mask is empty.
[[nodiscard]] BootstrapResult estimate_k(const std::vector<ExplainInstance>& instances, const EdgeScorer& scorer,
                                         const BootstrapConfig& cfg, int jobs = 1);

/// Instances of the training split that have at least one edge, built with the model.
[[nodiscard]] BootstrapResult estimate_k(const GnnModel& model, const Dataset& d, const EdgeScorer& scorer,
                                         BootstrapConfig cfg, int jobs = 1);

}  // namespace fx
