#include "factexplain/bootstrap.hpp"

#include <algorithm>
#include <exception>
#include <string>

#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"
#include "factexplain/parallel.hpp"

namespace fx {

void validate(const BootstrapConfig& cfg) {
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("mask threshold must lie in (0, 1)");
  if (cfg.radius < 0) throw ConfigError("hop radius must be non-negative");
}

std::vector<std::size_t> BootstrapResult::histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(k_hat) + 1, 0);
  for (int k : per_instance) ++h[static_cast<std::size_t>(k)];
  return h;
}

std::vector<int> active_nodes(const Graph& g, const EdgeProbabilities& probs, double threshold) {
  if (probs.size() != g.edge_count()) {
    throw ShapeError(std::to_string(probs.size()) + " probabilities for " + std::to_string(g.edge_count()) + " edges");
  }
  std::vector<char> on(static_cast<std::size_t>(g.node_count()), 0);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    if (probs[e] >= threshold) on[static_cast<std::size_t>(g.edges()[e].u)] = on[static_cast<std::size_t>(g.edges()[e].v)] = 1;
  }
  std::vector<int> out;
  for (int v = 0; v < g.node_count(); ++v) {
    if (on[static_cast<std::size_t>(v)]) out.push_back(v);
  }
  return out;
}

int cover_count(const Graph& g, const EdgeProbabilities& probs, int radius, double threshold, CoverRanking ranking) {
  const auto nodes = active_nodes(g, probs, threshold);
  if (nodes.empty()) return 0;
  return static_cast<int>(greedy_r_cover(g, nodes, radius, ranking).size());
}

BootstrapResult estimate_k(const std::vector<ExplainInstance>& instances, const EdgeScorer& scorer,
                           const BootstrapConfig& cfg, int jobs) {
  validate(cfg);
  if (cfg.radius < 1) throw ConfigError("hop radius must be at least 1");
  BootstrapResult r;
  r.radius = cfg.radius;
  r.per_instance.assign(instances.size(), 0);
  parallel_for(instances.size(), jobs, [&](std::size_t i) {
    const ExplainInstance& inst = instances[i];
    EdgeProbabilities probs;
    try {
      probs = scorer(inst);
    } catch (const std::exception& e) {
      throw ArgumentError("explainer failed on instance " + std::to_string(inst.instance) + ": " + e.what());
    }
    r.per_instance[i] = cover_count(inst.graph, probs, cfg.radius, cfg.threshold, cfg.ranking);
  });
  for (const auto& inst : instances) r.instances.push_back(inst.instance);
  r.k_hat = r.per_instance.empty() ? 0 : *std::max_element(r.per_instance.begin(), r.per_instance.end());
  if (r.k_hat == 0) diag::warn("every explanation mask is empty at threshold " + std::to_string(cfg.threshold) +
                         "; the explainer looks degenerate");
  return r;
}

BootstrapResult estimate_k(const GnnModel& model, const Dataset& d, const EdgeScorer& scorer, BootstrapConfig cfg,
                           int jobs) {
  if (cfg.radius == 0) cfg.radius = model.config().layers;
  std::vector<std::size_t> ids;
  for (auto i : d.splits.train) {
    const Graph& g = d.task == TaskKind::GraphClassification ? d.graphs[i] : d.graphs.front();
    if (g.edge_count() > 0) ids.push_back(i);
  }
  std::sort(ids.begin(), ids.end());
  return estimate_k(make_instances(model, d, ids, jobs), scorer, cfg, jobs);
}

}  // namespace fx
