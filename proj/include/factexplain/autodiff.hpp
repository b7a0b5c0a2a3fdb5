#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "factexplain/graph.hpp"
#include "factexplain/matrix.hpp"
#include "factexplain/rng.hpp"

namespace fx::ad {

/// A trainable tensor living outside any tape. Tapes accumulate into `grad`; the
/// optimizer consumes and clears it.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] std::size_t rows() const { return value().rows(); }
  [[nodiscard]] std::size_t cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode computation record. Nodes are appended in evaluation order, which is a
/// topological order, so backward() walks them in reverse exactly once.
/// Single-threaded; use one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value with no gradient tracking beyond the tape.
  Var constant(Matrix value);
  /// Differentiable leaf; its gradient is readable via Var::grad() after backward().
  Var variable(Matrix value);
  /// Leaf bound to a parameter; backward() adds this node's gradient into param.grad.
  Var param(Parameter& p);

  /// Records a new node. Used by the op implementations.
  Var record(Matrix value, BackwardFn backward);

  /// Populates gradients from a 1x1 loss. Throws ArgumentError for non-scalar losses.
  /// Recomputes every node gradient from scratch; bound parameters accumulate.
  void backward(Var loss);
  /// Clears every node gradient.
  void zero_grad();

  [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] Matrix& grad(std::size_t id) { return nodes_[id].grad; }
  [[nodiscard]] const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// Elementwise and linear-algebra ops. Shape mismatches throw ShapeError naming both shapes.
[[nodiscard]] Var matmul(Var a, Var b);
/// a + b; b may also be a 1 x cols row broadcast over the rows of a, or a 1x1 scalar.
[[nodiscard]] Var add(Var a, Var b);
[[nodiscard]] Var sub(Var a, Var b);
[[nodiscard]] Var mul(Var a, Var b);
[[nodiscard]] Var scale(Var a, double s);
[[nodiscard]] Var add_scalar(Var a, double s);
[[nodiscard]] Var transpose(Var a);
[[nodiscard]] Var relu(Var a);
[[nodiscard]] Var sigmoid(Var a);
/// Natural log with the argument clamped below at `floor`.
[[nodiscard]] Var log(Var a, double floor = 1e-300);
[[nodiscard]] Var softmax_rows(Var a);
[[nodiscard]] Var log_softmax_rows(Var a);
[[nodiscard]] Var concat_cols(std::span<const Var> parts);
[[nodiscard]] Var concat_cols(Var a, Var b);
[[nodiscard]] Var mean_rows(Var a);  // (r x c) -> (1 x c)
[[nodiscard]] Var sum_rows(Var a);   // (r x c) -> (1 x c)
[[nodiscard]] Var sum_all(Var a);    // -> (1 x 1)
[[nodiscard]] Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Row means per segment: out(s, :) = mean of the rows r with segment_of_row[r] == s.
/// Every segment must be non-empty.
[[nodiscard]] Var segment_mean_rows(Var a, std::span<const std::size_t> segment_of_row,
                                    std::size_t segments);
/// Column-wise maximum per segment; the gradient goes to the first maximizing row.
[[nodiscard]] Var segment_max_rows(Var a, std::span<const std::size_t> segment_of_row,
                                   std::size_t segments);
/// Element-wise log(p) - log(1-p) with p clamped to [eps, 1-eps].
[[nodiscard]] Var logit(Var p, double eps = 1e-6);
/// Element-wise binary entropy in nats, p clamped to [eps, 1-eps].
[[nodiscard]] Var binary_entropy(Var p, double eps = 1e-12);

/// Mean over rows of -sum_c target(r,c) * log_softmax(logits)(r,c).
[[nodiscard]] Var cross_entropy(Var logits, const Matrix& target_distribution);
/// Class-index targets, one per row.
[[nodiscard]] Var cross_entropy(Var logits, std::span<const int> targets);

inline constexpr double kConcreteClamp = 1e-12;

/// Binary concrete relaxation: sigmoid((logit + log u - log(1-u)) / temperature), with
/// the uniform noise `u` supplied explicitly. Output is clamped into
/// [kConcreteClamp, 1 - kConcreteClamp]. Throws ArgumentError if temperature <= 0.
[[nodiscard]] Var binary_concrete_sample(Var logits, double temperature, const Matrix& uniform_noise);
[[nodiscard]] Var binary_concrete_sample(Var logits, double temperature, Rng& rng);

/// Symmetric-normalized propagation with self loops over a weighted edge set:
///   out = D^{-1/2} (A_w + I) D^{-1/2} H,  D_ii = 1 + sum_j w_ij.
/// `edge_weights` is |E| x 1 and differentiable; pass the graph's edge list.
[[nodiscard]] Var normalized_propagate(Var features, Var edge_weights, const std::vector<Edge>& edges);

/// Node degrees under edge weights: out(i) = sum of w_e over edges incident to i (n x 1).
[[nodiscard]] Var weighted_degree(Var edge_weights, const std::vector<Edge>& edges, std::size_t node_count);

// Dense layers -----------------------------------------------------------------------

enum class Activation { None, Relu, Sigmoid };

[[nodiscard]] Var activate(Var x, Activation act);

struct DenseLayer {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out
  Activation activation = Activation::None;

  /// Xavier-uniform weights, zero bias.
  static DenseLayer xavier(std::string name, std::size_t in, std::size_t out, Activation act, Rng& rng);

  [[nodiscard]] Var forward(Tape& tape, Var x);
  /// Forward pass with parameters recorded as constants (no gradient flows to them).
  [[nodiscard]] Var forward_frozen(Tape& tape, Var x) const;
};

/// Stack of dense layers.
struct Mlp {
  std::vector<DenseLayer> layers;

  /// sizes = {in, hidden..., out}; hidden layers use `hidden_act`, the last `out_act`.
  static Mlp make(const std::string& name, const std::vector<std::size_t>& sizes,
                  Activation hidden_act, Activation out_act, Rng& rng);
  [[nodiscard]] Var forward(Tape& tape, Var x);
  [[nodiscard]] Var forward_frozen(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

// Optimizer -------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer. Moments are keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from each parameter's accumulated grad, then zeroes the grads.
  /// Throws TrainingError if any gradient entry is NaN or infinite.
  void step(std::span<Parameter* const> params);
  [[nodiscard]] std::int64_t step_count() const { return step_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

// Persistence -----------------------------------------------------------------------

/// JSON object {name: {"shape": [r, c], "values": [...]}}.
[[nodiscard]] nlohmann::json parameters_to_json(std::span<const Parameter* const> params);
/// Loads values by name into existing parameters. Throws ParseError on a missing name or
/// a shape mismatch.
void parameters_from_json(const nlohmann::json& doc, std::span<Parameter* const> params);

}  // namespace fx::ad
