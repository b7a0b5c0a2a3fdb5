#include "factexplain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "factexplain/errors.hpp"
#include "factexplain/parallel.hpp"
#include "factexplain/rng.hpp"

namespace fx {

double auc_roc(const std::vector<double>& scores, const std::vector<char>& positive) {
  if (scores.size() != positive.size()) {
    throw ShapeError(std::to_string(scores.size()) + " scores for " + std::to_string(positive.size()) + " labels");
  }
  const auto n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](char c) { return c != 0; }));
  const auto n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC needs at least one positive and one negative");
  for (double s : scores) {
    if (std::isnan(s)) throw ArgumentError("AUC score is NaN");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Tied runs share the average of their 1-based ranks.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) rank_sum += avg;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double coverage_rate(const EdgeProbabilities& probs, const std::vector<std::vector<std::size_t>>& motifs,
                     std::size_t r) {
  if (motifs.empty()) throw ArgumentError("coverage rate needs at least one motif");
  std::size_t largest = 0;
  for (const auto& m : motifs) {
    if (m.empty()) throw ArgumentError("coverage rate got an empty motif");
    for (auto e : m) {
      if (e >= probs.size()) throw ArgumentError("motif edge " + std::to_string(e) + " outside the scored edges");
    }
    largest = std::max(largest, m.size());
  }
  if (r == 0) r = largest;
  const auto top = top_r_edge_ids(probs, std::min(r, probs.size()));
  std::vector<char> in_top(probs.size(), 0);
  for (auto e : top) in_top[e] = 1;
  std::size_t best = 0;
  for (const auto& m : motifs) {
    best = std::max(best, static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [&](std::size_t e) { return in_top[e] != 0; })));
  }
  return static_cast<double>(best) / static_cast<double>(largest);
}

namespace {

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string export_dot(const Graph& g, const EdgeProbabilities& probs, double threshold, const std::string& name) {
  if (probs.size() != g.edge_count()) {
    throw ShapeError(std::to_string(probs.size()) + " probabilities for " + std::to_string(g.edge_count()) + " edges");
  }
  const auto gt = g.gt_indicator();
  std::ostringstream os;
  os << "graph " << dot_quote(name) << " {\n  node [shape=circle];\n";
  for (int v = 0; v < g.node_count(); ++v) os << "  " << v << ";\n";
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    os << "  " << g.edges()[e].u << " -- " << g.edges()[e].v << " [label=\"" << fixed2(probs[e]) << "\", style="
       << (probs[e] >= threshold ? "bold" : "dashed");
    if (gt[e]) os << ", color=red";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<SummaryRow> EvalReport::summary() const {
  using Key = std::tuple<std::string, std::string, int, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows) {
    Key key{r.dataset, r.method, r.k, r.metric};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& v = groups.at(key);
    SummaryRow s{std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), 0.0, 0.0, v.size()};
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "dataset,method,k,seed,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << r.dataset << ',' << r.method << ',' << r.k << ',' << r.seed << ',' << r.metric << ',' << buf << '\n';
  }
  return os.str();
}

std::string EvalReport::summary_table() const {
  const auto sum = summary();
  std::vector<std::vector<std::string>> cells{{"dataset", "method", "k", "metric", "mean", "std", "n"}};
  char buf[32];
  for (const auto& s : sum) {
    std::vector<std::string> row{s.dataset, s.method, std::to_string(s.k), s.metric};
    std::snprintf(buf, sizeof buf, "%.4f", s.mean);
    row.emplace_back(buf);
    std::snprintf(buf, sizeof buf, "%.4f", s.stddev);
    row.emplace_back(buf);
    row.push_back(std::to_string(s.repetitions));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << "  ";
      // Text columns left-aligned, numbers right-aligned.
      const bool numeric = c == 2 || c >= 4;
      const std::string pad(width[c] - row[c].size(), ' ');
      os << (numeric ? pad + row[c] : c + 1 == row.size() ? row[c] : row[c] + pad);
    }
    os << '\n';
  }
  os << "aggregation: " << aggregation << '\n';
  return os.str();
}

void validate(const BenchmarkConfig& cfg) {
  auto known = [](const std::vector<std::string>& universe, const std::string& s) {
    return std::find(universe.begin(), universe.end(), s) != universe.end();
  };
  if (cfg.datasets.empty()) throw ConfigError("benchmark needs at least one dataset");
  if (cfg.methods.empty() || cfg.ks.empty() || cfg.seeds.empty() || cfg.metrics.empty()) {
    throw ConfigError("benchmark methods, k values, seeds and metrics must be non-empty");
  }
  for (const auto& m : cfg.methods) {
    if (!known(kMethods, m)) throw ConfigError("unknown method '" + m + "'");
  }
  for (const auto& m : cfg.metrics) {
    if (!known(kMetrics, m)) throw ConfigError("unknown metric '" + m + "'");
  }
  for (int k : cfg.ks) {
    if (k < 1) throw ConfigError("k values must be positive");
  }
  if (cfg.jobs < 1) throw ConfigError("jobs must be positive");
  validate(cfg.explainer);
}

InstanceScores score_explanations(const std::vector<ExplanationResult>& results,
                                  const std::vector<ExplainInstance>& instances, std::size_t budget) {
  if (results.size() != instances.size()) throw ArgumentError("one explanation per instance is required");
  InstanceScores s;
  s.instances = instances.size();
  double auc = 0.0, cov = 0.0;
  std::size_t with_motifs = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Graph& g = instances[i].graph;
    auc += auc_roc(results[i].probs.values(), g.gt_indicator());
    if (!g.motif_edge_ids().empty()) {
      cov += coverage_rate(results[i].probs, g.motif_edge_ids(), budget);
      ++with_motifs;
    }
  }
  s.auc = instances.empty() ? std::numeric_limits<double>::quiet_NaN() : auc / static_cast<double>(instances.size());
  s.coverage = with_motifs == 0 ? std::numeric_limits<double>::quiet_NaN() : cov / static_cast<double>(with_motifs);
  return s;
}

namespace {

bool wants(const std::vector<std::string>& list, const std::string& s) {
  return std::find(list.begin(), list.end(), s) != list.end();
}

template <class Fn>
std::vector<ExplanationResult> explain_all(const std::vector<ExplainInstance>& instances, int jobs, Fn&& fn) {
  std::vector<ExplanationResult> out(instances.size());
  parallel_for(instances.size(), jobs, [&](std::size_t i) { out[i] = fn(instances[i]); });
  return out;
}

}  // namespace

EvalReport run_benchmark(const BenchmarkConfig& cfg) {
  validate(cfg);
  EvalReport report;
  for (const DatasetSpec& base : cfg.datasets) {
    for (std::uint64_t seed : cfg.seeds) {
      DatasetSpec spec = base;
      spec.seed = seed;
      const std::string name = to_string(spec.kind);
      const std::string where = name + " seed " + std::to_string(seed);
      Dataset d;
      GnnModel model;
      std::vector<ExplainInstance> all, eval;
      try {
        d = generate_dataset(spec);
        GnnConfig gc = cfg.gnn;
        gc.task = d.task;
        gc.classes = d.num_classes;
        gc.seed = seed;
        AccuracyReport acc;
        model = train_classifier(gc, d, &acc);
        if (wants(cfg.metrics, "accuracy")) report.rows.push_back({name, "classifier", 0, seed, "accuracy", acc.test});
        const auto ids = explainable_instances(d, gc.layers);
        if (ids.empty()) throw ArgumentError("no explainable instances");
        all = make_instances(model, d, ids, cfg.jobs);
        std::vector<std::size_t> pick(all.size());
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        if (cfg.max_eval_instances > 0 && pick.size() > cfg.max_eval_instances) {
          Rng rng(derive_seed(seed, "evaluation"));
          rng.shuffle(pick.begin(), pick.end());
          pick.resize(cfg.max_eval_instances);
          std::sort(pick.begin(), pick.end());
        }
        for (auto i : pick) eval.push_back(all[i]);
      } catch (const std::exception& e) {
        report.failures.push_back(where + ": " + e.what());
        continue;
      }

      auto record = [&](const std::string& method, int k, const std::vector<ExplanationResult>& results) {
        const auto s = score_explanations(results, eval, 0);
        if (wants(cfg.metrics, "auc")) report.rows.push_back({name, method, k, seed, "auc", s.auc});
        if (wants(cfg.metrics, "cr")) {
          if (std::isnan(s.coverage)) {
            report.failures.push_back(where + " " + method + ": no motif annotations for coverage");
          } else {
            report.rows.push_back({name, method, k, seed, "cr", s.coverage});
          }
        }
      };
      const bool explains = wants(cfg.metrics, "auc") || wants(cfg.metrics, "cr");
      if (!explains) continue;

      for (const auto& method : cfg.methods) {
        const std::vector<int> ks = method == "kfact" ? cfg.ks : std::vector<int>{1};
        for (int k : ks) {
          try {
            ExplainerConfig ec = cfg.explainer;
            ec.k = k;
            ec.seed = seed;
            if (method == "kfact") {
              const KFactExplainer e = train_kfact(model, all, ec);
              record(method, k, explain_all(eval, cfg.jobs, [&](const ExplainInstance& in) { return explain(e, model, in); }));
            } else if (method == "mlp") {
              const MlpExplainer e = train_mlp_explainer(model, all, ec);
              record(method, k, explain_all(eval, cfg.jobs, [&](const ExplainInstance& in) { return explain(e, model, in); }));
            } else if (method == "gnnexplainer") {
              GnnExplainerConfig gc = cfg.gnnexplainer;
              gc.seed = seed;
              record(method, k, explain_all(eval, cfg.jobs, [&](const ExplainInstance& in) {
                       return explain(gnnexplainer_explain(model, in, gc), model, in);
                     }));
            } else {
              record(method, k, explain_all(eval, cfg.jobs, [&](const ExplainInstance& in) {
                       return explain(oracle_probabilities(in), model, in);
                     }));
            }
          } catch (const std::exception& e) {
            report.failures.push_back(where + " " + method + " k=" + std::to_string(k) + ": " + e.what());
          }
        }
      }
    }
  }
  return report;
}

}  // namespace fx
