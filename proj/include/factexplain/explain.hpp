#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "factexplain/autodiff.hpp"
#include "factexplain/dataset.hpp"
#include "factexplain/gnn.hpp"
#include "factexplain/graph.hpp"

namespace fx {

/// Weights of the training objective alpha*CE + size_weight*sum(p) + entropy_weight*sum(H_b(p)).
struct GibWeights {
  double alpha = 1.0;
  double size_weight = 0.005;
  double entropy_weight = 0.1;
};

void validate(const GibWeights& w);

/// What an explainer sees for one dataset instance. For graph tasks `graph` is the input
/// graph; for node tasks it is the computation graph around the explained node.
struct ExplainInstance {
  std::size_t instance = 0;
  Graph graph;
  int target = -1;  // node task: explained node inside `graph`; -1 for graph tasks
  std::vector<std::size_t> source_edges;  // edge ids of `graph` in the dataset graph
  int predicted = 0;                      // the frozen model's class on `graph`
  Matrix node_embeddings;                 // n x hidden, final GNN layer
};

/// (Z_min || Z_max) per canonical edge: |E| x 2*hidden.
[[nodiscard]] Matrix edge_embeddings(const Matrix& node_embeddings, const Graph& g);
[[nodiscard]] Matrix edge_embeddings(const GnnModel& model, const Graph& g);

/// Model prediction on g: the graph class, or the class of node `target`.
[[nodiscard]] int model_prediction(const GnnModel& model, const Graph& g, int target = -1);

[[nodiscard]] ExplainInstance make_instance(const GnnModel& model, const Dataset& d,
                                            std::size_t instance);

/// Instances with both motif and non-motif edges in their explanation domain. For node
/// tasks the node itself must touch a motif edge.
[[nodiscard]] std::vector<std::size_t> explainable_instances(const Dataset& d, int layers);

/// Builds instances for the given indices, optionally in parallel.
[[nodiscard]] std::vector<ExplainInstance> make_instances(const GnnModel& model, const Dataset& d,
                                                          const std::vector<std::size_t>& indices,
                                                          int jobs = 1);

/// Training objective on one instance. The sampled graph reweights g's edges by binary
/// concrete samples of `probs` (|E| x 1) at temperature tau, driven by `noise` (|E| x 1
/// uniforms). `predicted` is the CE target; `target` selects the explained node.
[[nodiscard]] ad::Var gib_loss(const GnnModel& model, const Graph& g, ad::Var probs,
                               const GibWeights& w, double tau, const Matrix& noise, int predicted,
                               int target = -1);
/// Same, with the target set to the model's own prediction on g and noise drawn from seed.
[[nodiscard]] ad::Var gib_loss(const GnnModel& model, const Graph& g, ad::Var probs,
                               const GibWeights& w, double tau, std::uint64_t seed, int target = -1);

struct ExplainerConfig {
  int k = 1;
  int hidden = 64;
  GibWeights weights;
  std::size_t budget = 0;  // edges kept in top-r mode; 0 means the dataset's largest motif
  int epochs = 30;
  double learning_rate = 0.003;
  double tau_start = 5.0;
  double tau_end = 1.0;
  std::size_t batch_size = 8;
  std::size_t max_instances = 0;  // 0 trains on every explainable instance
  std::uint64_t seed = 0;
};

/// Throws ConfigError on k < 1, non-positive sizes, or negative weights.
void validate(const ExplainerConfig& cfg);

/// Geometric temperature at `epoch` of `epochs`, from tau_start to tau_end.
[[nodiscard]] double temperature(const ExplainerConfig& cfg, int epoch);

struct MixtureOutput {
  ad::Var probs;       // |E| x 1
  ad::Var gate;        // instances x k
  ad::Var components;  // |E| x k
};

/// k edge networks mixed per instance by a gating network over pooled node embeddings.
class KFactExplainer {
 public:
  KFactExplainer() = default;
  KFactExplainer(const ExplainerConfig& cfg, std::size_t embedding_dim);

  [[nodiscard]] const ExplainerConfig& config() const { return cfg_; }
  [[nodiscard]] int k() const { return cfg_.k; }
  [[nodiscard]] std::size_t embedding_dim() const { return embedding_dim_; }

  /// edge_emb: |E| x 2h, pooled: instances x h, edge_instance[e] < instances.
  /// Parameters are bound for training unless `frozen`.
  [[nodiscard]] MixtureOutput forward(ad::Tape& tape, ad::Var edge_emb, ad::Var pooled,
                                      std::span<const std::size_t> edge_instance, bool frozen);
  [[nodiscard]] MixtureOutput forward(ad::Tape& tape, ad::Var edge_emb, ad::Var pooled,
                                      std::span<const std::size_t> edge_instance) const;

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;
  /// Direct access for tests that hand-set the networks.
  [[nodiscard]] std::vector<ad::Mlp>& edge_nets() { return edge_nets_; }
  [[nodiscard]] ad::Mlp& gate_net() { return gate_; }

  [[nodiscard]] nlohmann::json to_json() const;
  /// Throws ConfigError when the stored k disagrees with the stored networks.
  [[nodiscard]] static KFactExplainer from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  [[nodiscard]] static KFactExplainer load(const std::filesystem::path& path);

 private:
  ExplainerConfig cfg_;
  std::size_t embedding_dim_ = 0;
  std::vector<ad::Mlp> edge_nets_;
  ad::Mlp gate_;
};

/// One shared edge network without gating. Initialized exactly like edge network 0 of a
/// KFactExplainer with the same config.
class MlpExplainer {
 public:
  MlpExplainer() = default;
  MlpExplainer(const ExplainerConfig& cfg, std::size_t embedding_dim);

  [[nodiscard]] const ExplainerConfig& config() const { return cfg_; }
  [[nodiscard]] ad::Var forward(ad::Tape& tape, ad::Var edge_emb, bool frozen);
  [[nodiscard]] ad::Var forward(ad::Tape& tape, ad::Var edge_emb) const;
  void collect(std::vector<ad::Parameter*>& out);

 private:
  ExplainerConfig cfg_;
  std::size_t embedding_dim_ = 0;
  ad::Mlp net_;
};

struct ExplainerTrainReport {
  std::vector<double> loss_curve;      // mean loss per epoch
  std::vector<double> expected_size;   // mean sum of probabilities per instance, per epoch
  std::size_t instances = 0;
};

/// Joint Adam training of every network over minibatches of instances. The model stays
/// frozen. Throws TrainingError with the epoch index on a non-finite loss.
[[nodiscard]] KFactExplainer train_kfact(const GnnModel& model, const std::vector<ExplainInstance>& instances,
                                         const ExplainerConfig& cfg, ExplainerTrainReport* report = nullptr);
[[nodiscard]] KFactExplainer train_kfact(const GnnModel& model, const Dataset& d, const ExplainerConfig& cfg,
                                         ExplainerTrainReport* report = nullptr, int jobs = 1);
[[nodiscard]] MlpExplainer train_mlp_explainer(const GnnModel& model,
                                               const std::vector<ExplainInstance>& instances,
                                               const ExplainerConfig& cfg,
                                               ExplainerTrainReport* report = nullptr);

struct GnnExplainerConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  GibWeights weights;
  double tau_start = 5.0;
  double tau_end = 1.0;
  std::uint64_t seed = 0;
};

/// Per-instance optimization of one free logit per edge. Empty for edgeless graphs.
[[nodiscard]] EdgeProbabilities gnnexplainer_explain(const GnnModel& model, const ExplainInstance& inst,
                                                     const GnnExplainerConfig& cfg);

struct ExplanationResult {
  std::size_t instance = 0;
  EdgeProbabilities probs;
  std::vector<double> gate;              // P_K; {1} for ungated methods
  std::vector<std::size_t> top_edges;    // rank order; empty in probabilities mode
  int predicted = 0;                     // Y-hat on the full domain
  std::optional<int> explained_prediction;  // Y' on the top-r subgraph
};

[[nodiscard]] ExplanationResult explain(const KFactExplainer& e, const GnnModel& model,
                                        const ExplainInstance& inst, std::optional<std::size_t> top_r = {});
[[nodiscard]] ExplanationResult explain(const MlpExplainer& e, const GnnModel& model,
                                        const ExplainInstance& inst, std::optional<std::size_t> top_r = {});
/// Wraps externally computed probabilities (per-instance methods, the oracle).
[[nodiscard]] ExplanationResult explain(EdgeProbabilities probs, const GnnModel& model,
                                        const ExplainInstance& inst, std::optional<std::size_t> top_r = {});

/// Ground-truth indicator of the instance's domain as probabilities.
[[nodiscard]] EdgeProbabilities oracle_probabilities(const ExplainInstance& inst);

/// Largest motif edge count over the dataset (the default top-r budget).
[[nodiscard]] std::size_t max_motif_edges(const Dataset& d);

/// {"instance", "predicted", "explained_prediction", "gate", "top_r",
///  "edges": [{"u", "v", "source_edge", "probability"}]}.
[[nodiscard]] nlohmann::json explanation_to_json(const ExplanationResult& r, const ExplainInstance& inst);

}  // namespace fx
