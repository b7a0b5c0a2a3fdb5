// factexplain: dataset generation, classifier training, explanation, bootstrap-k,
// benchmarking and the exact theory checks from one binary.
//
// Every subcommand accepts --config FILE with `key = value` lines; command-line flags
// override the file and FACTEXPLAIN_OUT overrides the output directory unless --out is
// given. The effective configuration is written to <out>/config.txt, so
//   factexplain <command> --config <out>/config.txt --out <other>
// reproduces every result file. Log lines (the only timestamped output) go to
// <out>/run.log and, with -v, to stderr.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "factexplain/bootstrap.hpp"
#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"
#include "factexplain/explain.hpp"
#include "factexplain/gnn.hpp"
#include "factexplain/io.hpp"
#include "factexplain/metrics.hpp"
#include "factexplain/rng.hpp"
#include "factexplain/runtime.hpp"
#include "factexplain/synth.hpp"
#include "factexplain/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

/// Raised for problems the user can fix on the command line (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}
template <class T>
  requires std::is_integral_v<T>
std::string format_value(T v) {
  return std::to_string(v);
}
std::string format_value(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& s : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError(what + ": expected a comma-separated integer list, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError(what + " must not be empty");
  return out;
}

/// `key = value` lines; '#' starts a comment. Keys use underscores or dashes.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

// Logging ---------------------------------------------------------------------------

struct Logger {
  int verbosity = 0;
  std::ofstream file;

  void line(const std::string& level, const std::string& message) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
    const std::string text = std::string(stamp) + " " + level + " " + message;
    if (file) file << text << '\n' << std::flush;
    if (verbosity > 0 || level != "info") std::cerr << text << '\n';
  }
  void info(const std::string& m) { line("info", m); }
  void warn(const std::string& m) { line("warn", m); }
};

Logger logger;

// Subcommand plumbing ---------------------------------------------------------------

/// Options shared by every subcommand plus the list of keys echoed to config.txt.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)), name_(name) {
    app_->add_option("--config", config_, "key = value file; flags override it")->check(CLI::ExistingFile);
    app_->add_option("--out", out_, "output directory (env FACTEXPLAIN_OUT)");
    app_->add_flag("-v,--verbose", verbose_, "echo log lines to stderr");
    option("seed", seed_, "global seed");
  }
  virtual ~Command() = default;

  template <class T>
  CLI::Option* option(const std::string& key, T& var, const std::string& help) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    echo_.emplace_back(key, [&var] { return format_value(var); });
    return app_->add_option("--" + flag, var, help)->capture_default_str();
  }

  [[nodiscard]] CLI::App* app() const { return app_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const fs::path& out() const { return resolved_out_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Resolves the output directory once flags are parsed: flag, then environment,
  /// then config file, then runs/<command>.
  void resolve_out(bool out_on_command_line, const std::string& out_from_config) {
    if (out_on_command_line) {
      resolved_out_ = out_;
    } else if (const char* env = std::getenv("FACTEXPLAIN_OUT"); env && *env) {
      resolved_out_ = env;
    } else if (!out_from_config.empty()) {
      resolved_out_ = out_from_config;
    } else {
      resolved_out_ = fs::path("runs") / name_;
    }
    logger.verbosity = verbose_;
  }

  void write_config() const {
    std::string text = "# factexplain " + name_ + "\n";
    for (const auto& [key, get] : echo_) text += key + " = " + get() + "\n";
    fx::write_text_file(resolved_out_ / "config.txt", text);
  }

  /// Fills in defaults that depend on other options; runs before config.txt is written.
  virtual void resolve() {}
  virtual void run() = 0;

 protected:
  CLI::App* app_;
  std::string name_;
  std::string config_;
  std::string out_;
  int verbose_ = 0;
  std::uint64_t seed_ = 0;
  fs::path resolved_out_;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

void write_json(const fs::path& path, const json& j) { fx::write_text_file(path, j.dump(2) + "\n"); }

fx::DatasetKind parse_kind(const std::string& text) {
  try {
    return fx::parse_dataset_kind(text);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

fx::Readout parse_readout_flag(const std::string& text) {
  try {
    return fx::parse_readout(text);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

// generate --------------------------------------------------------------------------

class Generate : public Command {
 public:
  explicit Generate(CLI::App& parent) : Command(parent, "generate", "write a synthetic dataset") {
    option("kind", kind_, "ba_shapes, ba_community, tree_cycles, tree_grid, ba_2motifs or ba_4motifs")
        ->required();
    option("count", count_, "graphs (graph tasks) or motifs (node tasks); 0 keeps the default");
    option("base_nodes", base_nodes_, "BA base size; 0 keeps the default for the kind");
    option("ba_m", ba_m_, "BA edges per growth step; 0 keeps the default");
    option("tree_depth", tree_depth_, "binary tree depth for tree tasks");
    option("feature_dim", feature_dim_, "node feature columns");
    option("min_site_distance", min_site_distance_, "base distance between motif sites");
    option("jobs", jobs_, "worker threads");
  }

  void resolve() override {
    const fx::DatasetSpec spec = fx::default_spec(parse_kind(kind_));
    if (count_ == 0) count_ = fx::is_node_task(spec.kind) ? spec.motif_count : spec.graph_count;
    if (base_nodes_ == 0) base_nodes_ = spec.base_nodes;
    if (ba_m_ == 0) ba_m_ = spec.ba_m;
  }

  void run() override {
    fx::DatasetSpec spec = fx::default_spec(parse_kind(kind_));
    (fx::is_node_task(spec.kind) ? spec.motif_count : spec.graph_count) = count_;
    spec.base_nodes = base_nodes_;
    spec.ba_m = ba_m_;
    spec.tree_depth = tree_depth_;
    spec.feature_dim = feature_dim_;
    spec.min_site_distance = min_site_distance_;
    spec.seed = seed_;
    spec.jobs = jobs_;
    logger.info("generating " + kind_);
    const fx::Dataset d = fx::generate_dataset(spec);
    fx::write_dataset(out() / "dataset.jsonl", d);

    std::map<int, std::size_t> labels;
    std::size_t edges = 0;
    for (std::size_t i = 0; i < d.instance_count(); ++i) ++labels[d.instance_label(i)];
    for (const auto& g : d.graphs) edges += g.edge_count();
    json summary = {{"name", d.name},
                    {"task", fx::to_string(d.task)},
                    {"graphs", d.graphs.size()},
                    {"instances", d.instance_count()},
                    {"edges", edges},
                    {"classes", d.num_classes},
                    {"splits", {{"train", d.splits.train.size()},
                                {"validation", d.splits.validation.size()},
                                {"test", d.splits.test.size()}}}};
    for (const auto& [label, n] : labels) summary["label_counts"][std::to_string(label)] = n;
    write_json(out() / "dataset_summary.json", summary);
    logger.info("wrote " + std::to_string(d.graphs.size()) + " graphs");
  }

 private:
  std::string kind_;
  int count_ = 0;
  int base_nodes_ = 0;
  int ba_m_ = 0;
  int tree_depth_ = 8;
  int feature_dim_ = 10;
  int min_site_distance_ = 2;
  int jobs_ = 1;
};

// train -----------------------------------------------------------------------------

struct ClassifierOptions {
  int layers = 3;
  int hidden = 20;
  int max_epochs = 0;
  int patience = 50;
  double lr = 0.003;
  std::string readout = "mean_max";
  bool degree_channel = true;

  void add(Command& c) {
    c.option("layers", layers, "propagation layers");
    c.option("hidden", hidden, "hidden width");
    c.option("max_epochs", max_epochs, "epoch cap; 0 selects the task default");
    c.option("patience", patience, "early-stopping patience");
    c.option("lr", lr, "Adam learning rate");
    c.option("readout", readout, "graph readout: mean, max or mean_max");
    c.option("degree_channel", degree_channel, "append log(1 + degree) to the features");
  }

  [[nodiscard]] fx::GnnConfig config(const fx::Dataset& d, std::uint64_t seed) const {
    fx::GnnConfig cfg;
    cfg.layers = layers;
    cfg.hidden = hidden;
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    cfg.learning_rate = lr;
    cfg.readout = parse_readout_flag(readout);
    cfg.degree_channel = degree_channel;
    cfg.task = d.task;
    cfg.classes = d.num_classes;
    cfg.seed = seed;
    return cfg;
  }
};

class Train : public Command {
 public:
  explicit Train(CLI::App& parent) : Command(parent, "train", "train the GCN classifier") {
    option("data", data_, "dataset file from generate")->required()->check(CLI::ExistingFile);
    gnn_.add(*this);
  }

  void run() override {
    const fx::Dataset d = fx::read_dataset(data_);
    const fx::GnnConfig cfg = gnn_.config(d, fx::derive_seed(seed_, "classifier"));
    logger.info("training on " + d.name + " (" + std::to_string(d.instance_count()) + " instances)");
    fx::AccuracyReport rep;
    const fx::GnnModel model = fx::train_classifier(cfg, d, &rep);
    model.save(out() / "model.json");
    write_json(out() / "accuracy.json", {{"train", rep.train},
                                         {"validation", rep.validation},
                                         {"test", rep.test},
                                         {"epochs_run", rep.epochs_run},
                                         {"best_epoch", rep.best_epoch},
                                         {"loss_curve", rep.loss_curve}});
    logger.info("test accuracy " + format_value(rep.test));
  }

 private:
  std::string data_;
  ClassifierOptions gnn_;
};

// explain ---------------------------------------------------------------------------

struct ExplainerOptions {
  int k = 1;
  int epochs = 30;
  int hidden = 64;
  double lr = 0.003;
  double alpha = 1.0;
  double size_weight = 0.005;
  double entropy_weight = 0.1;
  int max_instances = 0;

  /// Commands that sweep k themselves pass with_k = false.
  void add(Command& c, bool with_k = true) {
    if (with_k) c.option("k", k, "edge networks in the mixture");
    c.option("epochs", epochs, "explainer training epochs");
    c.option("explainer_hidden", hidden, "explainer MLP width");
    c.option("explainer_lr", lr, "explainer learning rate");
    c.option("alpha", alpha, "weight of the cross-entropy term");
    c.option("size_weight", size_weight, "weight of the expected mask size");
    c.option("entropy_weight", entropy_weight, "weight of the mask entropy");
    c.option("max_instances", max_instances, "training instances; 0 uses all");
  }

  [[nodiscard]] fx::ExplainerConfig config(std::uint64_t seed) const {
    fx::ExplainerConfig cfg;
    cfg.k = k;
    cfg.epochs = epochs;
    cfg.hidden = hidden;
    cfg.learning_rate = lr;
    cfg.weights = {alpha, size_weight, entropy_weight};
    cfg.max_instances = static_cast<std::size_t>(max_instances);
    cfg.seed = seed;
    return cfg;
  }
};

class Explain : public Command {
 public:
  explicit Explain(CLI::App& parent) : Command(parent, "explain", "explain a trained classifier") {
    option("data", data_, "dataset file")->required()->check(CLI::ExistingFile);
    option("model", model_, "model.json from train")->required()->check(CLI::ExistingFile);
    option("method", method_, "kfact, mlp, gnnexplainer or oracle");
    option("top_r", top_r_, "edges kept in the explanation; 0 uses the largest motif");
    option("dot", dot_, "DOT files written for the first N instances");
    option("jobs", jobs_, "worker threads");
    explainer_.add(*this);
  }

  void run() override {
    if (method_ != "kfact" && method_ != "mlp" && method_ != "gnnexplainer" && method_ != "oracle") {
      throw UsageError("unknown method '" + method_ + "'");
    }
    const fx::Dataset d = fx::read_dataset(data_);
    const fx::GnnModel model = fx::GnnModel::load(model_);
    const auto ids = fx::explainable_instances(d, model.config().layers);
    const auto instances = fx::make_instances(model, d, ids, jobs_);
    const std::size_t budget = top_r_ > 0 ? static_cast<std::size_t>(top_r_) : fx::max_motif_edges(d);
    const fx::ExplainerConfig ecfg = explainer_.config(fx::derive_seed(seed_, "explainer"));
    logger.info(method_ + " on " + std::to_string(instances.size()) + " instances");

    std::vector<fx::ExplanationResult> results;
    if (method_ == "kfact") {
      const auto e = fx::train_kfact(model, instances, ecfg);
      e.save(out() / "explainer.json");
      for (const auto& inst : instances) results.push_back(fx::explain(e, model, inst, budget));
    } else if (method_ == "mlp") {
      const auto e = fx::train_mlp_explainer(model, instances, ecfg);
      for (const auto& inst : instances) results.push_back(fx::explain(e, model, inst, budget));
    } else {
      fx::GnnExplainerConfig gcfg;
      gcfg.weights = ecfg.weights;
      gcfg.seed = ecfg.seed;
      for (const auto& inst : instances) {
        auto probs = method_ == "oracle" ? fx::oracle_probabilities(inst) : fx::gnnexplainer_explain(model, inst, gcfg);
        results.push_back(fx::explain(std::move(probs), model, inst, budget));
      }
    }

    json all = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) all.push_back(fx::explanation_to_json(results[i], instances[i]));
    write_json(out() / "explanations.json", all);
    const auto scores = fx::score_explanations(results, instances, budget);
    write_json(out() / "scores.json", {{"method", method_},
                                       {"instances", scores.instances},
                                       {"auc", scores.auc},
                                       {"coverage", std::isnan(scores.coverage) ? json(nullptr) : json(scores.coverage)}});
    const std::size_t dots = std::min<std::size_t>(static_cast<std::size_t>(std::max(dot_, 0)), results.size());
    if (dots > 0) fs::create_directories(out() / "dot");
    for (std::size_t i = 0; i < dots; ++i) {
      const std::string name = "instance_" + std::to_string(instances[i].instance);
      fx::write_text_file(out() / "dot" / (name + ".dot"), fx::export_dot(instances[i].graph, results[i].probs, 0.5, name));
    }
  }

 private:
  std::string data_;
  std::string model_;
  std::string method_ = "kfact";
  int top_r_ = 0;
  int dot_ = 5;
  int jobs_ = 1;
  ExplainerOptions explainer_;
};

// bootstrap-k -----------------------------------------------------------------------

class BootstrapK : public Command {
 public:
  explicit BootstrapK(CLI::App& parent) : Command(parent, "bootstrap-k", "estimate the number of edge networks") {
    option("data", data_, "dataset file")->required()->check(CLI::ExistingFile);
    option("model", model_, "model.json from train")->required()->check(CLI::ExistingFile);
    option("scorer", scorer_, "kfact (a pretrained explainer) or oracle (ground-truth masks)");
    option("threshold", threshold_, "edge probability that makes a node active");
    option("radius", radius_, "cover radius; 0 uses the classifier's layer count");
    option("ranking", ranking_, "cover ranking: degree or betweenness");
    option("jobs", jobs_, "worker threads");
    explainer_.add(*this);
  }

  void run() override {
    if (scorer_ != "kfact" && scorer_ != "oracle") throw UsageError("unknown scorer '" + scorer_ + "'");
    if (ranking_ != "degree" && ranking_ != "betweenness") throw UsageError("unknown ranking '" + ranking_ + "'");
    const fx::Dataset d = fx::read_dataset(data_);
    const fx::GnnModel model = fx::GnnModel::load(model_);
    fx::BootstrapConfig cfg;
    cfg.radius = radius_;
    cfg.threshold = threshold_;
    cfg.ranking = ranking_ == "degree" ? fx::CoverRanking::ByDegree : fx::CoverRanking::ByBetweenness;

    fx::EdgeScorer scorer = [](const fx::ExplainInstance& inst) { return fx::oracle_probabilities(inst); };
    fx::KFactExplainer pretrained;
    if (scorer_ == "kfact") {
      logger.info("pretraining a k=" + std::to_string(explainer_.k) + " explainer");
      pretrained = fx::train_kfact(model, d, explainer_.config(fx::derive_seed(seed_, "explainer")), nullptr, jobs_);
      scorer = [&](const fx::ExplainInstance& inst) { return fx::explain(pretrained, model, inst).probs; };
    }
    const fx::BootstrapResult r = fx::estimate_k(model, d, scorer, cfg, jobs_);
    const auto hist = r.histogram();
    write_json(out() / "bootstrap.json", {{"k_hat", r.k_hat},
                                          {"radius", r.radius},
                                          {"scorer", scorer_},
                                          {"histogram", hist},
                                          {"instances", r.instances},
                                          {"per_instance", r.per_instance}});
    std::string table = "k_hat  " + std::to_string(r.k_hat) + "\nradius " + std::to_string(r.radius) +
                        "\n\n  k'  graphs\n";
    for (std::size_t j = 0; j < hist.size(); ++j) {
      char row[64];
      std::snprintf(row, sizeof row, "%4zu  %6zu\n", j, hist[j]);
      table += row;
    }
    fx::write_text_file(out() / "bootstrap.txt", table);
    logger.info("k_hat " + std::to_string(r.k_hat));
  }

 private:
  std::string data_;
  std::string model_;
  std::string scorer_ = "kfact";
  double threshold_ = 0.5;
  int radius_ = 0;
  std::string ranking_ = "degree";
  int jobs_ = 1;
  ExplainerOptions explainer_;
};

// evaluate --------------------------------------------------------------------------

class Evaluate : public Command {
 public:
  explicit Evaluate(CLI::App& parent) : Command(parent, "evaluate", "benchmark explainers on generated datasets") {
    option("dataset", datasets_, "comma-separated dataset kinds")->required()->delimiter(',');
    option("count", count_, "graphs (graph tasks) or motifs (node tasks); 0 keeps the default");
    option("method", methods_, "comma-separated: kfact, mlp, gnnexplainer, oracle")->delimiter(',');
    option("k", ks_, "comma-separated k values for kfact");
    option("seeds", seeds_, "repetitions, seeds seed .. seed + N - 1");
    option("metrics", metrics_, "comma-separated: auc, cr, accuracy")->delimiter(',');
    option("max_eval_instances", max_eval_, "evaluated instances per cell; 0 uses all");
    option("jobs", jobs_, "worker threads");
    gnn_.add(*this);
    explainer_.add(*this, false);
  }

  void run() override {
    fx::BenchmarkConfig cfg;
    for (const auto& name : datasets_) {
      fx::DatasetSpec spec = fx::default_spec(parse_kind(name));
      if (count_ > 0) (fx::is_node_task(spec.kind) ? spec.motif_count : spec.graph_count) = count_;
      cfg.datasets.push_back(spec);
    }
    cfg.methods = methods_;
    cfg.ks = int_list(ks_, "k");
    if (seeds_ < 1) throw UsageError("seeds must be positive");
    cfg.seeds.clear();
    for (int i = 0; i < seeds_; ++i) cfg.seeds.push_back(seed_ + static_cast<std::uint64_t>(i));
    cfg.metrics = metrics_;
    fx::Dataset shape;
    shape.task = fx::TaskKind::GraphClassification;
    cfg.gnn = gnn_.config(shape, 0);
    cfg.explainer = explainer_.config(0);
    cfg.max_eval_instances = static_cast<std::size_t>(max_eval_);
    cfg.jobs = jobs_;
    try {
      fx::validate(cfg);
    } catch (const fx::ConfigError& e) {
      throw UsageError(e.what());
    }
    logger.info("benchmark over " + std::to_string(cfg.datasets.size()) + " datasets, " +
                std::to_string(cfg.seeds.size()) + " seeds");
    const fx::EvalReport r = fx::run_benchmark(cfg);
    fx::write_text_file(out() / "results.csv", r.to_csv());
    fx::write_text_file(out() / "summary.txt", r.summary_table());
    std::string failures;
    for (const auto& f : r.failures) failures += f + "\n";
    fx::write_text_file(out() / "failures.txt", failures);
    for (const auto& f : r.failures) logger.warn(f);
    if (r.rows.empty()) throw std::runtime_error("every benchmark cell failed");
  }

 private:
  std::vector<std::string> datasets_;
  int count_ = 0;
  std::vector<std::string> methods_{"kfact"};
  std::string ks_ = "1";
  int seeds_ = 1;
  std::vector<std::string> metrics_{"auc"};
  int max_eval_ = 0;
  int jobs_ = 1;
  ClassifierOptions gnn_;
  ExplainerOptions explainer_;
};

// theory ----------------------------------------------------------------------------

class Theory : public Command {
 public:
  explicit Theory(CLI::App& parent) : Command(parent, "theory", "run the exact information-theoretic checks") {
    option("trials", cfg_.mdpi_trials, "random Markov triples");
    option("tasks", cfg_.signaling_tasks, "random degraded tasks for the signaling check");
    option("alpha", cfg_.signaling_alpha, "GIB weight in the signaling check");
  }

  void run() override {
    cfg_.seed = seed_;
    if (cfg_.mdpi_trials < 1 || cfg_.signaling_tasks < 1) throw UsageError("trials and tasks must be positive");
    logger.info("running the theory suite");
    const auto reports = fx::theory::run_theory_suite(cfg_);
    json j = json::array();
    bool ok = true;
    for (const auto& r : reports) {
      j.push_back(fx::theory::to_json(r));
      ok = ok && (r.passed || r.skipped);
    }
    write_json(out() / "theory.json", {{"passed", ok}, {"checks", j}});
    fx::write_text_file(out() / "theory.txt", fx::theory::report_table(reports));
    logger.info(ok ? "all checks passed" : "some checks failed");
  }

 private:
  fx::theory::TheoryConfig cfg_;
};

// report ----------------------------------------------------------------------------

class Report : public Command {
 public:
  explicit Report(CLI::App& parent) : Command(parent, "report", "merge earlier run directories into one summary") {
    echo_.emplace_back("runs", [this] { return format_value(runs_); });
    app_->add_option("runs,--runs", runs_, "run directories (positional or comma-separated)")
        ->required()
        ->delimiter(',')
        ->check(CLI::ExistingDirectory);
  }

  void run() override {
    std::string text;
    for (const auto& dir : runs_) {
      const fs::path root(dir);
      text += "== " + dir + "\n";
      if (fs::exists(root / "config.txt")) {
        text += "-- config\n" + fx::read_text_file(root / "config.txt");
      }
      for (const char* name : {"dataset_summary.json", "accuracy.json", "scores.json", "bootstrap.txt", "summary.txt",
                               "theory.txt"}) {
        const fs::path p = root / name;
        if (!fs::exists(p)) continue;
        std::string body = fx::read_text_file(p);
        if (std::string(name) == "accuracy.json") {
          json a = json::parse(body);
          a.erase("loss_curve");
          body = a.dump(2) + "\n";
        }
        text += "-- " + std::string(name) + "\n" + body;
      }
      if (fs::exists(root / "failures.txt")) {
        const std::string f = fx::read_text_file(root / "failures.txt");
        if (!f.empty()) text += "-- failures\n" + f;
      }
      text += "\n";
    }
    fx::write_text_file(out() / "report.txt", text);
  }

 private:
  std::vector<std::string> runs_;
};

/// Rebuilds argv with config entries ahead of the real flags, so flags win.
struct Arguments {
  std::vector<std::string> tokens;
  std::string out_from_config;
  bool out_on_command_line = false;
};

Arguments expand_config(int argc, char** argv) {
  Arguments a;
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == "--config" && i + 1 < raw.size()) config = raw[i + 1];
    if (raw[i].rfind("--config=", 0) == 0) config = raw[i].substr(9);
    if (raw[i] == "--out" || raw[i].rfind("--out=", 0) == 0) a.out_on_command_line = true;
  }
  if (raw.empty()) return a;
  a.tokens.push_back(raw[0]);
  if (!config.empty()) {
    for (const auto& [key, value] : read_config(config)) {
      if (key == "out") {
        a.out_from_config = value;
        continue;
      }
      a.tokens.push_back("--" + key);
      a.tokens.push_back(value);
    }
  }
  a.tokens.insert(a.tokens.end(), raw.begin() + 1, raw.end());
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  fx::configure_allocator();
  CLI::App app{"Factorized GNN explanations: data, training, explainers, metrics and exact checks", "factexplain"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<Generate>(app));
  commands.push_back(std::make_unique<Train>(app));
  commands.push_back(std::make_unique<Explain>(app));
  commands.push_back(std::make_unique<BootstrapK>(app));
  commands.push_back(std::make_unique<Evaluate>(app));
  commands.push_back(std::make_unique<Theory>(app));
  commands.push_back(std::make_unique<Report>(app));

  Arguments args;
  try {
    args = expand_config(argc, argv);
    std::vector<std::string> reversed(args.tokens.rbegin(), args.tokens.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  for (auto& c : commands) {
    if (!c->app()->parsed()) continue;
    try {
      c->resolve_out(args.out_on_command_line, args.out_from_config);
      fs::create_directories(c->out());
      logger.file.open(c->out() / "run.log", std::ios::app);
      fx::diag::set_warning_handler([](const std::string& m) { logger.warn(m); });
      c->resolve();
      c->write_config();
      logger.info("factexplain " + c->name() + " -> " + c->out().string());
      c->run();
      logger.info("done");
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const std::exception& e) {
      logger.line("error", e.what());
      return kRuntimeError;
    }
  }
  return kUsageError;
}
