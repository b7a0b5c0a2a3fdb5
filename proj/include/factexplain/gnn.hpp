#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factexplain/autodiff.hpp"
#include "factexplain/dataset.hpp"
#include "factexplain/graph.hpp"

namespace fx {

/// Graph-task readout over final node embeddings.
enum class Readout { Mean, Max, MeanMax };

[[nodiscard]] std::string to_string(Readout r);
[[nodiscard]] Readout parse_readout(const std::string& text);

struct GnnConfig {
  int layers = 3;
  int hidden = 20;
  int classes = 2;
  TaskKind task = TaskKind::GraphClassification;
  /// 0 selects the task default: 1000 for node tasks, 1500 for graph tasks.
  int max_epochs = 0;
  int patience = 50;
  /// Early stopping is not considered before this many epochs, nor while the training
  /// loss is above plateau_ratio times its first value. Constant-feature graph tasks can
  /// sit on the initial plateau for several hundred epochs.
  int min_epochs = 200;
  double plateau_ratio = 0.8;
  double learning_rate = 0.003;
  Readout readout = Readout::MeanMax;  // graph tasks only
  /// Appends the weighted node degree to the input features.
  bool degree_channel = true;
  std::uint64_t seed = 0;

  [[nodiscard]] int effective_max_epochs() const;
};

/// Throws ArgumentError when layers, hidden or classes is below 1.
void validate(const GnnConfig& cfg);

struct GnnOutput {
  ad::Var logits;      // n x classes (node task) or 1 x classes (graph task)
  ad::Var embeddings;  // n x hidden, output of the last propagation layer
};

struct AccuracyReport {
  double train = 0.0;
  double validation = 0.0;
  double test = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::vector<double> loss_curve;
};

/// Graph-convolution classifier: `layers` rounds of H <- ReLU(Â H W + b) with
/// Â = D^{-1/2}(A_w + I)D^{-1/2}, then a two-layer MLP head on node embeddings (node
/// task) or on their mean (graph task).
class GnnModel {
 public:
  GnnModel() = default;
  GnnModel(const GnnConfig& cfg, std::size_t input_dim);

  [[nodiscard]] const GnnConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }

  /// Forward pass with a differentiable |E| x 1 edge-weight vector. Parameters enter the
  /// tape as constants, so gradients reach only the edge weights and the features.
  [[nodiscard]] GnnOutput forward(ad::Tape& tape, const Graph& g, ad::Var edge_weights) const;
  /// Unit edge weights.
  [[nodiscard]] GnnOutput forward(ad::Tape& tape, const Graph& g) const;
  /// Forward pass over a disjoint union of graphs; graph-task logits have one row per
  /// segment. Parameters are bound for training unless `frozen`.
  [[nodiscard]] GnnOutput forward_batch(ad::Tape& tape, const Graph& g, ad::Var edge_weights,
                                        std::span<const std::size_t> segment_of_node,
                                        std::size_t segments, bool frozen);
  [[nodiscard]] GnnOutput forward_batch(ad::Tape& tape, const Graph& g, ad::Var edge_weights,
                                        std::span<const std::size_t> segment_of_node,
                                        std::size_t segments) const;

  /// Class probabilities: n x classes or 1 x classes.
  [[nodiscard]] Matrix predict_proba(const Graph& g) const;
  /// Argmax class per row (lowest index wins ties).
  [[nodiscard]] std::vector<int> predict(const Graph& g) const;
  [[nodiscard]] Matrix embeddings(const Graph& g) const;

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;

  /// Checkpoint: {"config": {...}, "input_dim": d, "parameters": {...}}.
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] static GnnModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  [[nodiscard]] static GnnModel load(const std::filesystem::path& path);

 private:
  GnnConfig cfg_;
  std::size_t input_dim_ = 0;
  std::vector<ad::DenseLayer> conv_;
  ad::Mlp head_;

  /// conv_params holds (weight, bias) per layer as tape nodes.
  [[nodiscard]] ad::Var embed(ad::Var h, ad::Var edge_weights,
                              const std::vector<Edge>& edges, std::span<const ad::Var> conv_params) const;
  [[nodiscard]] std::vector<ad::Var> frozen_conv(ad::Tape& tape) const;
  [[nodiscard]] ad::Var readout(ad::Var z, std::span<const std::size_t> segment_of_node,
                                std::size_t segments) const;
};

/// Disjoint union of graphs (node ids offset in order) with the per-node graph index.
struct GraphBatch {
  Graph graph;
  std::vector<std::size_t> segment_of_node;
};
[[nodiscard]] GraphBatch make_batch(const std::vector<const Graph*>& graphs);

[[nodiscard]] std::vector<int> argmax_rows(const Matrix& m);

/// One bias-free propagation step ReLU(Â H W) with unit edge weights.
/// Throws ShapeError when H has the wrong row count or W the wrong row count.
[[nodiscard]] Matrix gcn_layer(const Matrix& h, const Graph& g, const Matrix& w);

/// Full-batch Adam training with cross-entropy on the train split; keeps the parameters
/// of the best validation-accuracy epoch (early stopping with cfg.patience). Graph tasks
/// batch all training graphs as one disjoint union. Throws TrainingError with the epoch
/// index on a non-finite loss, ArgumentError when cfg.task differs from the dataset's.
[[nodiscard]] GnnModel train_classifier(const GnnConfig& cfg, const Dataset& d,
                                        AccuracyReport* report = nullptr);

/// Accuracy of the model on the given instance indices.
[[nodiscard]] double accuracy(const GnnModel& model, const Dataset& d,
                              const std::vector<std::size_t>& instances);

/// restrict(g, v, layers): the subgraph a `layers`-layer model sees around v.
[[nodiscard]] Restriction khop_computation_graph(const Graph& g, int v, int layers);

}  // namespace fx
