#include "factexplain/gnn.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "factexplain/errors.hpp"
#include "factexplain/io.hpp"
#include "factexplain/rng.hpp"

namespace fx {

using ad::Var;

std::string to_string(Readout r) {
  switch (r) {
    case Readout::Mean: return "mean";
    case Readout::Max: return "max";
    case Readout::MeanMax: return "mean_max";
  }
  return "mean";
}

Readout parse_readout(const std::string& text) {
  for (auto r : {Readout::Mean, Readout::Max, Readout::MeanMax}) {
    if (to_string(r) == text) return r;
  }
  throw ArgumentError("unknown readout '" + text + "'");
}

int GnnConfig::effective_max_epochs() const {
  if (max_epochs > 0) return max_epochs;
  return task == TaskKind::NodeClassification ? 1000 : 1500;
}

void validate(const GnnConfig& cfg) {
  if (cfg.layers < 1) throw ArgumentError("GNN needs at least one layer");
  if (cfg.hidden < 1) throw ArgumentError("GNN hidden size must be positive");
  if (cfg.classes < 1) throw ArgumentError("GNN needs at least one class");
  if (cfg.patience < 1) throw ArgumentError("patience must be positive");
  if (!(cfg.plateau_ratio > 0.0 && cfg.plateau_ratio <= 1.0)) throw ArgumentError("plateau ratio must be in (0, 1]");
  if (!(cfg.learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
}

GnnModel::GnnModel(const GnnConfig& cfg, std::size_t input_dim) : cfg_(cfg), input_dim_(input_dim) {
  validate(cfg);
  if (input_dim == 0) throw ArgumentError("GNN input dimension must be positive");
  Rng rng(derive_seed(cfg.seed, "gnn_init"));
  const auto hidden = static_cast<std::size_t>(cfg.hidden);
  std::size_t in = input_dim + (cfg.degree_channel ? 1 : 0);
  for (int l = 0; l < cfg.layers; ++l) {
    conv_.push_back(ad::DenseLayer::xavier("conv" + std::to_string(l), in, hidden, ad::Activation::Relu, rng));
    in = hidden;
  }
  const std::size_t head_in = cfg.task == TaskKind::GraphClassification && cfg.readout == Readout::MeanMax
                                  ? 2 * hidden
                                  : hidden;
  head_ = ad::Mlp::make("head", {head_in, hidden, static_cast<std::size_t>(cfg.classes)},
                        ad::Activation::Relu, ad::Activation::None, rng);
}

Var GnnModel::embed(Var h, Var edge_weights, const std::vector<Edge>& edges,
                    std::span<const Var> conv_params) const {
  if (h.cols() != input_dim_) {
    throw ShapeError("feature matrix " + h.value().shape_string() + " for a model with input dimension " +
                     std::to_string(input_dim_));
  }
  if (cfg_.degree_channel) {
    h = ad::concat_cols(h, ad::log(ad::add_scalar(ad::weighted_degree(edge_weights, edges, h.rows()), 1.0)));
  }
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    Var x = ad::normalized_propagate(ad::matmul(h, conv_params[2 * l]), edge_weights, edges);
    h = ad::relu(ad::add(x, conv_params[2 * l + 1]));
  }
  return h;
}

std::vector<Var> GnnModel::frozen_conv(ad::Tape& tape) const {
  std::vector<Var> out;
  for (const auto& l : conv_) {
    out.push_back(tape.constant(l.weight.value));
    out.push_back(tape.constant(l.bias.value));
  }
  return out;
}

Var GnnModel::readout(Var z, std::span<const std::size_t> segment_of_node, std::size_t segments) const {
  if (cfg_.task == TaskKind::NodeClassification) return z;
  switch (cfg_.readout) {
    case Readout::Mean: return ad::segment_mean_rows(z, segment_of_node, segments);
    case Readout::Max: return ad::segment_max_rows(z, segment_of_node, segments);
    case Readout::MeanMax:
      return ad::concat_cols(ad::segment_mean_rows(z, segment_of_node, segments),
                             ad::segment_max_rows(z, segment_of_node, segments));
  }
  return z;
}

GnnOutput GnnModel::forward(ad::Tape& tape, const Graph& g, Var edge_weights) const {
  Var z = embed(tape.constant(g.features()), edge_weights, g.edges(), frozen_conv(tape));
  const std::vector<std::size_t> single(static_cast<std::size_t>(g.node_count()), 0);
  return {head_.forward_frozen(tape, readout(z, single, 1)), z};
}

GnnOutput GnnModel::forward(ad::Tape& tape, const Graph& g) const {
  return forward(tape, g, tape.constant(Matrix(g.edge_count(), 1, 1.0)));
}

GnnOutput GnnModel::forward_batch(ad::Tape& tape, const Graph& g, Var edge_weights,
                                  std::span<const std::size_t> segment_of_node, std::size_t segments,
                                  bool frozen) {
  if (frozen) return std::as_const(*this).forward_batch(tape, g, edge_weights, segment_of_node, segments);
  std::vector<Var> conv;
  for (auto& l : conv_) {
    conv.push_back(tape.param(l.weight));
    conv.push_back(tape.param(l.bias));
  }
  Var z = embed(tape.constant(g.features()), edge_weights, g.edges(), conv);
  return {head_.forward(tape, readout(z, segment_of_node, segments)), z};
}

GnnOutput GnnModel::forward_batch(ad::Tape& tape, const Graph& g, Var edge_weights,
                                  std::span<const std::size_t> segment_of_node, std::size_t segments) const {
  Var z = embed(tape.constant(g.features()), edge_weights, g.edges(), frozen_conv(tape));
  return {head_.forward_frozen(tape, readout(z, segment_of_node, segments)), z};
}

Matrix GnnModel::predict_proba(const Graph& g) const {
  ad::Tape tape;
  return ad::softmax_rows(forward(tape, g).logits).value();
}

std::vector<int> GnnModel::predict(const Graph& g) const { return argmax_rows(predict_proba(g)); }

Matrix GnnModel::embeddings(const Graph& g) const {
  ad::Tape tape;
  return forward(tape, g).embeddings.value();
}

void GnnModel::collect(std::vector<ad::Parameter*>& out) {
  for (auto& l : conv_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  head_.collect(out);
}

void GnnModel::collect(std::vector<const ad::Parameter*>& out) const {
  for (const auto& l : conv_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  head_.collect(out);
}

nlohmann::json GnnModel::to_json() const {
  std::vector<const ad::Parameter*> params;
  collect(params);
  nlohmann::json j;
  j["config"] = {{"layers", cfg_.layers},           {"hidden", cfg_.hidden},
                 {"classes", cfg_.classes},         {"task", to_string(cfg_.task)},
                 {"max_epochs", cfg_.max_epochs},   {"patience", cfg_.patience}, {"min_epochs", cfg_.min_epochs},
                 {"plateau_ratio", cfg_.plateau_ratio},
                 {"learning_rate", cfg_.learning_rate}, {"readout", to_string(cfg_.readout)}, {"degree_channel", cfg_.degree_channel},
                 {"seed", cfg_.seed}};
  j["input_dim"] = input_dim_;
  j["parameters"] = ad::parameters_to_json(params);
  return j;
}

GnnModel GnnModel::from_json(const nlohmann::json& j) {
  try {
    const auto& c = j.at("config");
    GnnConfig cfg;
    cfg.layers = c.at("layers").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.classes = c.at("classes").get<int>();
    cfg.task = parse_task_kind(c.at("task").get<std::string>());
    cfg.max_epochs = c.at("max_epochs").get<int>();
    cfg.patience = c.at("patience").get<int>();
    cfg.min_epochs = c.at("min_epochs").get<int>();
    cfg.plateau_ratio = c.at("plateau_ratio").get<double>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.degree_channel = c.at("degree_channel").get<bool>();
    cfg.readout = parse_readout(c.at("readout").get<std::string>());
    cfg.seed = c.at("seed").get<std::uint64_t>();
    GnnModel m(cfg, j.at("input_dim").get<std::size_t>());
    std::vector<ad::Parameter*> params;
    m.collect(params);
    ad::parameters_from_json(j.at("parameters"), params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model checkpoint: ") + e.what());
  }
}

void GnnModel::save(const std::filesystem::path& path) const { write_text_file(path, to_json().dump(1)); }

GnnModel GnnModel::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Matrix gcn_layer(const Matrix& h, const Graph& g, const Matrix& w) {
  if (h.rows() != static_cast<std::size_t>(g.node_count())) {
    throw ShapeError("gcn_layer: features " + h.shape_string() + " for " + std::to_string(g.node_count()) +
                     " nodes");
  }
  ad::Tape tape;
  Var x = ad::matmul(tape.constant(h), tape.constant(w));
  return ad::relu(ad::normalized_propagate(x, tape.constant(Matrix(g.edge_count(), 1, 1.0)), g.edges())).value();
}

GraphBatch make_batch(const std::vector<const Graph*>& graphs) {
  std::size_t total = 0, dim = 0;
  for (const Graph* g : graphs) {
    total += static_cast<std::size_t>(g->node_count());
    dim = std::max(dim, g->feature_dim());
  }
  Matrix features(total, dim);
  std::vector<Edge> edges;
  std::vector<std::size_t> seg;
  seg.reserve(total);
  int offset = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = *graphs[i];
    if (g.feature_dim() != dim) throw ShapeError("graphs in a batch need equal feature widths");
    for (const Edge& e : g.edges()) edges.push_back({e.u + offset, e.v + offset});
    for (int v = 0; v < g.node_count(); ++v) {
      auto src = g.features().row(static_cast<std::size_t>(v));
      std::copy(src.begin(), src.end(), features.row(static_cast<std::size_t>(offset + v)).begin());
      seg.push_back(i);
    }
    offset += g.node_count();
  }
  return {Graph(offset, std::move(edges), std::move(features)), std::move(seg)};
}

namespace {

struct BatchTargets {
  GraphBatch batch;
  std::vector<std::size_t> rows;  // node rows (node task) or segment rows (graph task)
  std::vector<int> labels;
};

BatchTargets targets_for(const Dataset& d, const std::vector<std::size_t>& instances) {
  BatchTargets t;
  if (d.task == TaskKind::NodeClassification) {
    t.batch.graph = d.graphs.front();
    t.rows = instances;
  } else {
    std::vector<const Graph*> gs;
    for (auto i : instances) gs.push_back(&d.graphs.at(i));
    t.batch = make_batch(gs);
    for (std::size_t i = 0; i < instances.size(); ++i) t.rows.push_back(i);
  }
  for (auto i : instances) t.labels.push_back(d.instance_label(i));
  return t;
}

struct Score {
  double accuracy = 0.0;
  double loss = 0.0;
};

Score batch_score(GnnModel& model, const BatchTargets& t) {
  if (t.rows.empty()) return {};
  ad::Tape tape;
  const Graph& g = t.batch.graph;
  const std::size_t segments = model.config().task == TaskKind::GraphClassification ? t.rows.size() : 0;
  auto out = model.forward_batch(tape, g, tape.constant(Matrix(g.edge_count(), 1, 1.0)),
                                 t.batch.segment_of_node, segments, true);
  Var logits = ad::gather_rows(out.logits, t.rows);
  const auto pred = argmax_rows(logits.value());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) hit += pred[i] == t.labels[i] ? 1 : 0;
  return {static_cast<double>(hit) / static_cast<double>(t.rows.size()),
          ad::cross_entropy(logits, t.labels).scalar()};
}

}  // namespace

GnnModel train_classifier(const GnnConfig& cfg, const Dataset& d, AccuracyReport* report) {
  validate(cfg);
  if (cfg.task != d.task) {
    throw ArgumentError("classifier configured for " + to_string(cfg.task) + " but dataset is " +
                        to_string(d.task));
  }
  if (d.graphs.empty()) throw ArgumentError("cannot train on an empty dataset");
  if (d.splits.train.empty()) throw ArgumentError("empty training split");
  GnnModel model(cfg, d.graphs.front().feature_dim());
  std::vector<ad::Parameter*> params;
  model.collect(params);
  ad::Adam opt(ad::AdamConfig{cfg.learning_rate});

  const BatchTargets train = targets_for(d, d.splits.train);
  const BatchTargets val = targets_for(d, d.splits.validation);
  const Graph& tg = train.batch.graph;
  const std::size_t segments = d.task == TaskKind::GraphClassification ? train.rows.size() : 0;

  AccuracyReport rep;
  std::vector<Matrix> best_params;
  Score best{-1.0, 0.0};
  double lowest_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.effective_max_epochs(); ++epoch) {
    ad::Tape tape;
    auto out = model.forward_batch(tape, tg, tape.constant(Matrix(tg.edge_count(), 1, 1.0)),
                                   train.batch.segment_of_node, segments, false);
    Var logits = d.task == TaskKind::NodeClassification ? ad::gather_rows(out.logits, train.rows) : out.logits;
    Var loss = ad::cross_entropy(logits, train.labels);
    if (!std::isfinite(loss.scalar())) {
      throw TrainingError("classifier loss became non-finite at epoch " + std::to_string(epoch));
    }
    rep.loss_curve.push_back(loss.scalar());
    tape.backward(loss);
    try {
      opt.step(params);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    }
    rep.epochs_run = epoch + 1;
    // The kept snapshot maximizes validation accuracy (lower validation loss breaks ties).
    // Patience runs out only when neither accuracy nor loss has improved, so an early
    // plateau in accuracy does not end a run whose loss is still falling.
    const Score v = val.rows.empty() ? Score{0.0, loss.scalar()} : batch_score(model, val);
    bool improved = false;
    if (v.accuracy > best.accuracy || (v.accuracy == best.accuracy && v.loss < best.loss)) {
      best = v;
      rep.best_epoch = epoch;
      best_params.clear();
      for (auto* p : params) best_params.push_back(p->value);
      improved = true;
    }
    if (v.loss < lowest_val_loss) {
      lowest_val_loss = v.loss;
      improved = true;
    }
    since_best = improved ? 0 : since_best + 1;
    const bool left_plateau = loss.scalar() < cfg.plateau_ratio * rep.loss_curve.front();
    if (epoch + 1 >= cfg.min_epochs && left_plateau && since_best >= cfg.patience) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  rep.train = accuracy(model, d, d.splits.train);
  rep.validation = accuracy(model, d, d.splits.validation);
  rep.test = accuracy(model, d, d.splits.test);
  if (report) *report = std::move(rep);
  return model;
}

double accuracy(const GnnModel& model, const Dataset& d, const std::vector<std::size_t>& instances) {
  if (instances.empty()) return 0.0;
  std::size_t hit = 0;
  if (d.task == TaskKind::NodeClassification) {
    const auto pred = model.predict(d.graphs.front());
    for (auto i : instances) hit += pred[i] == d.instance_label(i) ? 1 : 0;
  } else {
    GnnModel copy = model;
    hit = static_cast<std::size_t>(
        std::llround(batch_score(copy, targets_for(d, instances)).accuracy * static_cast<double>(instances.size())));
  }
  return static_cast<double>(hit) / static_cast<double>(instances.size());
}

Restriction khop_computation_graph(const Graph& g, int v, int layers) {
  return restrict_graph(g, v, layers);
}

}  // namespace fx
