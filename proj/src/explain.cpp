#include "factexplain/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"
#include "factexplain/io.hpp"
#include "factexplain/parallel.hpp"
#include "factexplain/rng.hpp"

namespace fx {

using ad::Var;

void validate(const GibWeights& w) {
  if (!(w.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (w.size_weight < 0.0 || w.entropy_weight < 0.0) throw ConfigError("loss weights must be non-negative");
}

Matrix edge_embeddings(const Matrix& z, const Graph& g) {
  if (z.rows() != static_cast<std::size_t>(g.node_count())) {
    throw ShapeError("node embeddings " + z.shape_string() + " for " + std::to_string(g.node_count()) + " nodes");
  }
  const std::size_t h = z.cols();
  Matrix out(g.edge_count(), 2 * h);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    // Canonical edges have u < v, so (u, v) is already the (min, max) order.
    auto a = z.row(static_cast<std::size_t>(g.edges()[e].u));
    auto b = z.row(static_cast<std::size_t>(g.edges()[e].v));
    auto dst = out.row(e);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(h));
  }
  return out;
}

Matrix edge_embeddings(const GnnModel& model, const Graph& g) { return edge_embeddings(model.embeddings(g), g); }

int model_prediction(const GnnModel& model, const Graph& g, int target) {
  const Matrix p = model.predict_proba(g);
  const auto pred = argmax_rows(p);
  if (target < 0) return pred.front();
  return pred[static_cast<std::size_t>(target)];
}

ExplainInstance make_instance(const GnnModel& model, const Dataset& d, std::size_t instance) {
  if (instance >= d.instance_count()) {
    throw ArgumentError("instance " + std::to_string(instance) + " out of range");
  }
  ExplainInstance out;
  out.instance = instance;
  if (d.task == TaskKind::NodeClassification) {
    auto r = khop_computation_graph(d.graphs.front(), static_cast<int>(instance), model.config().layers);
    out.graph = std::move(r.graph);
    out.target = r.center;
    out.source_edges = std::move(r.edge_new_to_old);
  } else {
    out.graph = d.graphs[instance];
    out.source_edges.resize(out.graph.edge_count());
    std::iota(out.source_edges.begin(), out.source_edges.end(), std::size_t{0});
  }
  ad::Tape tape;
  const auto fwd = model.forward(tape, out.graph);
  out.node_embeddings = fwd.embeddings.value();
  const auto pred = argmax_rows(fwd.logits.value());
  out.predicted = pred[out.target < 0 ? 0 : static_cast<std::size_t>(out.target)];
  return out;
}

std::vector<std::size_t> explainable_instances(const Dataset& d, int layers) {
  std::vector<std::size_t> out;
  if (d.task == TaskKind::GraphClassification) {
    for (std::size_t i = 0; i < d.graphs.size(); ++i) {
      const auto n_pos = d.graphs[i].gt_edge_ids().size();
      if (n_pos > 0 && n_pos < d.graphs[i].edge_count()) out.push_back(i);
    }
    return out;
  }
  const Graph& g = d.graphs.front();
  const auto gt = g.gt_indicator();
  std::vector<char> touches(static_cast<std::size_t>(g.node_count()), 0);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    if (gt[e]) touches[static_cast<std::size_t>(g.edges()[e].u)] = touches[static_cast<std::size_t>(g.edges()[e].v)] = 1;
  }
  for (int v = 0; v < g.node_count(); ++v) {
    if (!touches[static_cast<std::size_t>(v)]) continue;
    auto r = restrict_graph(g, v, layers);
    const auto n_pos = r.graph.gt_edge_ids().size();
    if (n_pos > 0 && n_pos < r.graph.edge_count()) out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<ExplainInstance> make_instances(const GnnModel& model, const Dataset& d,
                                            const std::vector<std::size_t>& indices, int jobs) {
  std::vector<ExplainInstance> out(indices.size());
  parallel_for(indices.size(), jobs, [&](std::size_t i) { out[i] = make_instance(model, d, indices[i]); });
  return out;
}

namespace {

/// Instances packed as one disjoint union.
struct Packed {
  GraphBatch batch;
  Matrix edge_emb;
  Matrix pooled;
  std::vector<std::size_t> edge_instance;
  std::vector<std::size_t> target_rows;  // node task: explained node rows in the union
  std::vector<int> predicted;
  bool node_task = false;
};

Packed pack(std::span<const ExplainInstance* const> items) {
  Packed p;
  std::vector<const Graph*> graphs;
  std::size_t edges = 0;
  for (const auto* it : items) {
    graphs.push_back(&it->graph);
    edges += it->graph.edge_count();
  }
  p.batch = make_batch(graphs);
  const std::size_t h = items.empty() ? 0 : items.front()->node_embeddings.cols();
  p.edge_emb = Matrix(edges, 2 * h);
  p.pooled = Matrix(items.size(), h);
  p.edge_instance.reserve(edges);
  std::size_t row = 0, node_offset = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const ExplainInstance& it = *items[i];
    const Matrix emb = edge_embeddings(it.node_embeddings, it.graph);
    std::copy(emb.values().begin(), emb.values().end(),
              p.edge_emb.values().begin() + static_cast<std::ptrdiff_t>(row * 2 * h));
    row += it.graph.edge_count();
    p.edge_instance.insert(p.edge_instance.end(), it.graph.edge_count(), i);
    auto pooled = p.pooled.row(i);
    for (std::size_t v = 0; v < it.node_embeddings.rows(); ++v) {
      auto zr = it.node_embeddings.row(v);
      for (std::size_t c = 0; c < h; ++c) pooled[c] += zr[c];
    }
    if (it.node_embeddings.rows() > 0) {
      for (double& x : pooled) x /= static_cast<double>(it.node_embeddings.rows());
    }
    if (it.target >= 0) {
      p.node_task = true;
      p.target_rows.push_back(node_offset + static_cast<std::size_t>(it.target));
    }
    p.predicted.push_back(it.predicted);
    node_offset += static_cast<std::size_t>(it.graph.node_count());
  }
  return p;
}

/// Mean over instances of the per-instance objective.
Var packed_loss(const GnnModel& model, const Packed& p, Var probs, const GibWeights& w, double tau,
                const Matrix& noise) {
  ad::Tape& tape = *probs.tape();
  Var sampled = ad::binary_concrete_sample(ad::logit(probs), tau, noise);
  const std::size_t n = p.predicted.size();
  auto out = model.forward_batch(tape, p.batch.graph, sampled, p.batch.segment_of_node, p.node_task ? 0 : n);
  Var logits = p.node_task ? ad::gather_rows(out.logits, p.target_rows) : out.logits;
  Var loss = ad::scale(ad::cross_entropy(logits, p.predicted), w.alpha);
  if (probs.rows() > 0) {
    const double per = 1.0 / static_cast<double>(n);
    loss = ad::add(loss, ad::scale(ad::sum_all(probs), w.size_weight * per));
    loss = ad::add(loss, ad::scale(ad::sum_all(ad::binary_entropy(probs)), w.entropy_weight * per));
  }
  return loss;
}

Matrix uniform_noise(Rng& rng, std::size_t n) {
  Matrix m(n, 1);
  for (double& v : m.values()) v = rng.uniform_open();
  return m;
}

}  // namespace

Var gib_loss(const GnnModel& model, const Graph& g, Var probs, const GibWeights& w, double tau,
             const Matrix& noise, int predicted, int target) {
  validate(w);
  if (probs.rows() != g.edge_count() || probs.cols() != 1) {
    throw ShapeError("edge probabilities " + probs.value().shape_string() + " for " +
                     std::to_string(g.edge_count()) + " edges");
  }
  Packed p;
  p.batch = {g, std::vector<std::size_t>(static_cast<std::size_t>(g.node_count()), 0)};
  p.predicted = {predicted};
  if (target >= 0) {
    if (!g.valid_node(target)) throw ArgumentError("invalid target node " + std::to_string(target));
    p.node_task = true;
    p.target_rows = {static_cast<std::size_t>(target)};
  }
  return packed_loss(model, p, probs, w, tau, noise);
}

Var gib_loss(const GnnModel& model, const Graph& g, Var probs, const GibWeights& w, double tau,
             std::uint64_t seed, int target) {
  Rng rng(seed);
  return gib_loss(model, g, probs, w, tau, uniform_noise(rng, g.edge_count()), model_prediction(model, g, target),
                  target);
}

void validate(const ExplainerConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  if (cfg.hidden < 1) throw ConfigError("explainer hidden width must be positive");
  if (cfg.epochs < 1) throw ConfigError("explainer epochs must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.tau_start > 0.0) || !(cfg.tau_end > 0.0)) throw ConfigError("temperatures must be positive");
  validate(cfg.weights);
}

double temperature(const ExplainerConfig& cfg, int epoch) {
  if (cfg.epochs <= 1) return cfg.tau_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, t);
}

namespace {

ad::Mlp make_edge_net(const ExplainerConfig& cfg, std::size_t embedding_dim, int t) {
  Rng rng(derive_seed(cfg.seed, "edge_net_" + std::to_string(t)));
  return ad::Mlp::make("edge" + std::to_string(t), {2 * embedding_dim, static_cast<std::size_t>(cfg.hidden), 1},
                       ad::Activation::Relu, ad::Activation::Sigmoid, rng);
}

}  // namespace

KFactExplainer::KFactExplainer(const ExplainerConfig& cfg, std::size_t embedding_dim)
    : cfg_(cfg), embedding_dim_(embedding_dim) {
  validate(cfg);
  for (int t = 0; t < cfg.k; ++t) edge_nets_.push_back(make_edge_net(cfg, embedding_dim, t));
  Rng rng(derive_seed(cfg.seed, "gate"));
  gate_ = ad::Mlp::make("gate", {embedding_dim, static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.k)},
                        ad::Activation::Relu, ad::Activation::None, rng);
}

namespace {

MixtureOutput mix(ad::Tape& tape, std::vector<Var> components, Var gate_logits,
                  std::span<const std::size_t> edge_instance) {
  const std::size_t k = components.size();
  Var gate = ad::softmax_rows(gate_logits);
  Var omega = k == 1 ? components.front() : ad::concat_cols(components);
  Var weights = ad::gather_rows(gate, edge_instance);
  Var probs = ad::matmul(ad::mul(weights, omega), tape.constant(Matrix(k, 1, 1.0)));
  return {probs, gate, omega};
}

void check_edge_inputs(Var edge_emb, Var pooled, std::span<const std::size_t> edge_instance, std::size_t dim) {
  if (edge_emb.cols() != 2 * dim || pooled.cols() != dim) {
    throw ShapeError("explainer for embedding width " + std::to_string(dim) + " got edges " +
                     edge_emb.value().shape_string() + " and pooled " + pooled.value().shape_string());
  }
  if (edge_instance.size() != edge_emb.rows()) throw ShapeError("one instance index per edge is required");
  for (auto i : edge_instance) {
    if (i >= pooled.rows()) throw ShapeError("edge instance index out of range");
  }
}

}  // namespace

MixtureOutput KFactExplainer::forward(ad::Tape& tape, Var edge_emb, Var pooled,
                                      std::span<const std::size_t> edge_instance, bool frozen) {
  if (frozen) return std::as_const(*this).forward(tape, edge_emb, pooled, edge_instance);
  check_edge_inputs(edge_emb, pooled, edge_instance, embedding_dim_);
  std::vector<Var> comps;
  for (auto& net : edge_nets_) comps.push_back(net.forward(tape, edge_emb));
  return mix(tape, std::move(comps), gate_.forward(tape, pooled), edge_instance);
}

MixtureOutput KFactExplainer::forward(ad::Tape& tape, Var edge_emb, Var pooled,
                                      std::span<const std::size_t> edge_instance) const {
  check_edge_inputs(edge_emb, pooled, edge_instance, embedding_dim_);
  std::vector<Var> comps;
  for (const auto& net : edge_nets_) comps.push_back(net.forward_frozen(tape, edge_emb));
  return mix(tape, std::move(comps), gate_.forward_frozen(tape, pooled), edge_instance);
}

void KFactExplainer::collect(std::vector<ad::Parameter*>& out) {
  for (auto& n : edge_nets_) n.collect(out);
  gate_.collect(out);
}

void KFactExplainer::collect(std::vector<const ad::Parameter*>& out) const {
  for (const auto& n : edge_nets_) n.collect(out);
  gate_.collect(out);
}

nlohmann::json KFactExplainer::to_json() const {
  std::vector<const ad::Parameter*> params;
  collect(params);
  nlohmann::json j;
  j["config"] = {{"k", cfg_.k},
                 {"hidden", cfg_.hidden},
                 {"alpha", cfg_.weights.alpha},
                 {"size_weight", cfg_.weights.size_weight},
                 {"entropy_weight", cfg_.weights.entropy_weight},
                 {"budget", cfg_.budget},
                 {"epochs", cfg_.epochs},
                 {"learning_rate", cfg_.learning_rate},
                 {"tau_start", cfg_.tau_start},
                 {"tau_end", cfg_.tau_end},
                 {"batch_size", cfg_.batch_size},
                 {"max_instances", cfg_.max_instances},
                 {"seed", cfg_.seed}};
  j["embedding_dim"] = embedding_dim_;
  j["edge_nets"] = edge_nets_.size();
  j["parameters"] = ad::parameters_to_json(params);
  return j;
}

KFactExplainer KFactExplainer::from_json(const nlohmann::json& j) {
  try {
    const auto& c = j.at("config");
    ExplainerConfig cfg;
    cfg.k = c.at("k").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.weights.alpha = c.at("alpha").get<double>();
    cfg.weights.size_weight = c.at("size_weight").get<double>();
    cfg.weights.entropy_weight = c.at("entropy_weight").get<double>();
    cfg.budget = c.at("budget").get<std::size_t>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.tau_start = c.at("tau_start").get<double>();
    cfg.tau_end = c.at("tau_end").get<double>();
    cfg.batch_size = c.at("batch_size").get<std::size_t>();
    cfg.max_instances = c.at("max_instances").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    const auto nets = j.at("edge_nets").get<std::size_t>();
    if (nets != static_cast<std::size_t>(cfg.k)) {
      throw ConfigError("explainer declares k=" + std::to_string(cfg.k) + " but stores " + std::to_string(nets) +
                        " edge networks");
    }
    KFactExplainer e(cfg, j.at("embedding_dim").get<std::size_t>());
    std::vector<ad::Parameter*> params;
    e.collect(params);
    ad::parameters_from_json(j.at("parameters"), params);
    return e;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed explainer checkpoint: ") + e.what());
  }
}

void KFactExplainer::save(const std::filesystem::path& path) const { write_text_file(path, to_json().dump(1)); }

KFactExplainer KFactExplainer::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

MlpExplainer::MlpExplainer(const ExplainerConfig& cfg, std::size_t embedding_dim)
    : cfg_(cfg), embedding_dim_(embedding_dim), net_(make_edge_net(cfg, embedding_dim, 0)) {
  validate(cfg);
}

Var MlpExplainer::forward(ad::Tape& tape, Var edge_emb, bool frozen) {
  if (edge_emb.cols() != 2 * embedding_dim_) {
    throw ShapeError("explainer for embedding width " + std::to_string(embedding_dim_) + " got edges " +
                     edge_emb.value().shape_string());
  }
  return frozen ? net_.forward_frozen(tape, edge_emb) : net_.forward(tape, edge_emb);
}

Var MlpExplainer::forward(ad::Tape& tape, Var edge_emb) const {
  if (edge_emb.cols() != 2 * embedding_dim_) {
    throw ShapeError("explainer for embedding width " + std::to_string(embedding_dim_) + " got edges " +
                     edge_emb.value().shape_string());
  }
  return net_.forward_frozen(tape, edge_emb);
}

void MlpExplainer::collect(std::vector<ad::Parameter*>& out) { net_.collect(out); }

namespace {

Var probabilities_for(KFactExplainer& e, ad::Tape& tape, const Packed& p) {
  return e.forward(tape, tape.constant(p.edge_emb), tape.constant(p.pooled), p.edge_instance, false).probs;
}

Var probabilities_for(MlpExplainer& e, ad::Tape& tape, const Packed& p) {
  return e.forward(tape, tape.constant(p.edge_emb), false);
}

template <class Explainer>
void train_parametric(Explainer& e, const GnnModel& model, const std::vector<ExplainInstance>& instances,
                      const ExplainerConfig& cfg, ExplainerTrainReport* report) {
  if (instances.empty()) throw ArgumentError("no instances to train the explainer on");
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pick(derive_seed(cfg.seed, "instances"));
  if (cfg.max_instances > 0 && order.size() > cfg.max_instances) {
    pick.shuffle(order.begin(), order.end());
    order.resize(cfg.max_instances);
    std::sort(order.begin(), order.end());
  }
  ExplainerTrainReport rep;
  rep.instances = order.size();
  Rng shuffle(derive_seed(cfg.seed, "order"));
  Rng noise(derive_seed(cfg.seed, "noise"));
  std::vector<ad::Parameter*> params;
  e.collect(params);
  ad::Adam opt({.learning_rate = cfg.learning_rate});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double tau = temperature(cfg, epoch);
    shuffle.shuffle(order.begin(), order.end());
    double total = 0.0, size = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const ExplainInstance*> items;
      for (std::size_t i = start; i < end; ++i) items.push_back(&instances[order[i]]);
      const Packed p = pack(items);
      ad::Tape tape;
      Var probs = probabilities_for(e, tape, p);
      Var loss = packed_loss(model, p, probs, cfg.weights, tau, uniform_noise(noise, p.edge_instance.size()));
      if (!std::isfinite(loss.scalar())) {
        throw TrainingError("explainer loss is not finite at epoch " + std::to_string(epoch));
      }
      total += loss.scalar() * static_cast<double>(items.size());
      for (double v : probs.value().values()) size += v;
      tape.backward(loss);
      try {
        opt.step(params);
      } catch (const TrainingError& err) {
        throw TrainingError(std::string(err.what()) + " at epoch " + std::to_string(epoch));
      }
    }
    rep.loss_curve.push_back(total / static_cast<double>(order.size()));
    rep.expected_size.push_back(size / static_cast<double>(order.size()));
  }
  if (report != nullptr) *report = std::move(rep);
}

}  // namespace

KFactExplainer train_kfact(const GnnModel& model, const std::vector<ExplainInstance>& instances,
                           const ExplainerConfig& cfg, ExplainerTrainReport* report) {
  KFactExplainer e(cfg, static_cast<std::size_t>(model.config().hidden));
  train_parametric(e, model, instances, cfg, report);
  return e;
}

KFactExplainer train_kfact(const GnnModel& model, const Dataset& d, const ExplainerConfig& cfg,
                           ExplainerTrainReport* report, int jobs) {
  const auto ids = explainable_instances(d, model.config().layers);
  return train_kfact(model, make_instances(model, d, ids, jobs), cfg, report);
}

MlpExplainer train_mlp_explainer(const GnnModel& model, const std::vector<ExplainInstance>& instances,
                                 const ExplainerConfig& cfg, ExplainerTrainReport* report) {
  MlpExplainer e(cfg, static_cast<std::size_t>(model.config().hidden));
  train_parametric(e, model, instances, cfg, report);
  return e;
}

EdgeProbabilities gnnexplainer_explain(const GnnModel& model, const ExplainInstance& inst,
                                       const GnnExplainerConfig& cfg) {
  validate(cfg.weights);
  if (cfg.epochs < 1) throw ConfigError("epochs must be positive");
  const std::size_t m = inst.graph.edge_count();
  if (m == 0) return EdgeProbabilities{};
  Rng rng(derive_seed(cfg.seed, inst.instance));
  Matrix init(m, 1);
  for (double& v : init.values()) v = rng.normal(1.0, 0.1);
  ad::Parameter logits("mask", std::move(init));
  ad::Adam opt({.learning_rate = cfg.learning_rate});
  ad::Parameter* params[] = {&logits};
  const std::vector<const ExplainInstance*> items{&inst};
  const Packed p = pack(items);
  ExplainerConfig sched;
  sched.epochs = cfg.epochs;
  sched.tau_start = cfg.tau_start;
  sched.tau_end = cfg.tau_end;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    Var probs = ad::sigmoid(tape.param(logits));
    Var loss = packed_loss(model, p, probs, cfg.weights, temperature(sched, epoch), uniform_noise(rng, m));
    if (!std::isfinite(loss.scalar())) {
      throw TrainingError("mask loss is not finite at epoch " + std::to_string(epoch));
    }
    tape.backward(loss);
    opt.step(params);
  }
  std::vector<double> out(m);
  for (std::size_t e = 0; e < m; ++e) out[e] = 1.0 / (1.0 + std::exp(-logits.value[e]));
  return EdgeProbabilities(std::move(out));
}

namespace {

ExplanationResult finish(EdgeProbabilities probs, std::vector<double> gate, const GnnModel& model,
                         const ExplainInstance& inst, std::optional<std::size_t> top_r) {
  if (probs.size() != inst.graph.edge_count()) {
    throw ShapeError("explanation has " + std::to_string(probs.size()) + " probabilities for " +
                     std::to_string(inst.graph.edge_count()) + " edges");
  }
  ExplanationResult r;
  r.instance = inst.instance;
  r.gate = std::move(gate);
  r.predicted = inst.predicted;
  if (top_r) {
    r.top_edges = top_r_edge_ids(probs, std::min(*top_r, probs.size()));
    const Graph sub = apply_mask(inst.graph, probs, TopRMask{std::min(*top_r, probs.size())});
    r.explained_prediction = model_prediction(model, sub, inst.target);
  }
  r.probs = std::move(probs);
  return r;
}

EdgeProbabilities to_probabilities(const Matrix& m) {
  std::vector<double> v(m.values());
  // Sigmoid outputs can round to exactly 0 or 1 but never leave [0, 1].
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return EdgeProbabilities(std::move(v));
}

}  // namespace

ExplanationResult explain(const KFactExplainer& e, const GnnModel& model, const ExplainInstance& inst,
                          std::optional<std::size_t> top_r) {
  const std::vector<const ExplainInstance*> items{&inst};
  const Packed p = pack(items);
  ad::Tape tape;
  auto out = e.forward(tape, tape.constant(p.edge_emb), tape.constant(p.pooled), p.edge_instance);
  return finish(to_probabilities(out.probs.value()), out.gate.value().values(), model, inst, top_r);
}

ExplanationResult explain(const MlpExplainer& e, const GnnModel& model, const ExplainInstance& inst,
                          std::optional<std::size_t> top_r) {
  ad::Tape tape;
  Var probs = e.forward(tape, tape.constant(edge_embeddings(inst.node_embeddings, inst.graph)));
  return finish(to_probabilities(probs.value()), {1.0}, model, inst, top_r);
}

ExplanationResult explain(EdgeProbabilities probs, const GnnModel& model, const ExplainInstance& inst,
                          std::optional<std::size_t> top_r) {
  return finish(std::move(probs), {1.0}, model, inst, top_r);
}

EdgeProbabilities oracle_probabilities(const ExplainInstance& inst) {
  const auto gt = inst.graph.gt_indicator();
  return EdgeProbabilities(std::vector<double>(gt.begin(), gt.end()));
}

std::size_t max_motif_edges(const Dataset& d) {
  std::size_t best = 0;
  for (const Graph& g : d.graphs) {
    for (const auto& m : g.motif_edge_ids()) best = std::max(best, m.size());
  }
  return best;
}

nlohmann::json explanation_to_json(const ExplanationResult& r, const ExplainInstance& inst) {
  nlohmann::json j;
  j["instance"] = r.instance;
  j["predicted"] = r.predicted;
  j["explained_prediction"] = r.explained_prediction ? nlohmann::json(*r.explained_prediction) : nlohmann::json();
  j["gate"] = r.gate;
  j["top_r"] = r.top_edges;
  auto& edges = j["edges"] = nlohmann::json::array();
  for (std::size_t e = 0; e < inst.graph.edge_count(); ++e) {
    edges.push_back({{"u", inst.graph.edges()[e].u},
                     {"v", inst.graph.edges()[e].v},
                     {"source_edge", inst.source_edges[e]},
                     {"probability", r.probs[e]}});
  }
  return j;
}

}  // namespace fx
