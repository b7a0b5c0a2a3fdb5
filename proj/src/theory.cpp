#include "factexplain/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "factexplain/errors.hpp"

namespace fx::theory {

namespace {

constexpr double kTableTol = 1e-12;

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Rounding can leave an information quantity a few ulps below zero.
double clamp_rounding(double v) { return v < 0.0 && v > -1e-13 ? 0.0 : v; }

void check_table(const Matrix& t, const char* what) {
  double total = 0.0;
  for (double v : t.values()) {
    if (!(v >= 0.0)) throw ArgumentError(std::string(what) + ": negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kTableTol) {
    throw ArgumentError(std::string(what) + ": entries sum to " + std::to_string(total));
  }
}

std::vector<double> random_distribution(Rng& rng, std::size_t n, double zero_rate) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) {
    v = rng.bernoulli(zero_rate) ? 0.0 : rng.uniform_open();
    total += v;
  }
  if (total == 0.0) {
    p[rng.below(n)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

int class_count(const FiniteTask& task) {
  return task.h ? *std::max_element(task.h->begin(), task.h->end()) + 1 : 0;
}

// Joint of (output, label): sum_g P(g, y) P(o | g).
Matrix output_label_joint(const FiniteTask& task, const Channel& ch) {
  Matrix j(ch.outputs.size(), static_cast<std::size_t>(task.labels));
  for (std::size_t g = 0; g < task.graphs.size(); ++g) {
    for (std::size_t o = 0; o < ch.outputs.size(); ++o) {
      const double w = ch.rows(g, o);
      if (w == 0.0) continue;
      for (int y = 0; y < task.labels; ++y) j(o, y) += w * task.joint(g, y);
    }
  }
  return j;
}

// Compositions of `units` into `parts` non-negative integers.
void compositions(int units, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(units);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int u = 0; u <= units; ++u) {
    cur.push_back(u);
    compositions(units - u, parts - 1, cur, out);
    cur.pop_back();
  }
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

int pair_slots(int nodes) { return nodes * (nodes - 1) / 2; }

GraphCode pair_bit(int nodes, int u, int v) {
  if (u == v || u < 0 || v < 0 || u >= nodes || v >= nodes) {
    throw ArgumentError("invalid pair (" + std::to_string(u) + ", " + std::to_string(v) + ") on " +
                        std::to_string(nodes) + " nodes");
  }
  if (u > v) std::swap(u, v);
  const int slot = u * nodes - u * (u + 1) / 2 + (v - u - 1);
  return GraphCode{1} << slot;
}

GraphCode encode(int nodes, const std::vector<std::pair<int, int>>& edges) {
  GraphCode g = 0;
  for (auto [u, v] : edges) g |= pair_bit(nodes, u, v);
  return g;
}

int edge_count(GraphCode g) { return std::popcount(g); }

std::vector<GraphCode> all_graphs(int nodes) {
  if (nodes < 1 || nodes > kMaxNodes) {
    throw ArgumentError("graph spaces need 1 to " + std::to_string(kMaxNodes) + " nodes");
  }
  const GraphCode count = GraphCode{1} << pair_slots(nodes);
  std::vector<GraphCode> out(count);
  for (GraphCode g = 0; g < count; ++g) out[g] = g;
  return out;
}

std::uint32_t ball(int nodes, GraphCode g, int v, int radius) {
  std::uint32_t seen = 1u << v, frontier = seen;
  for (int step = 0; step < radius && frontier; ++step) {
    std::uint32_t next = 0;
    for (int u = 0; u < nodes; ++u) {
      if (!(frontier >> u & 1u)) continue;
      for (int w = 0; w < nodes; ++w) {
        if (w != u && (g & pair_bit(nodes, u, w))) next |= 1u << w;
      }
    }
    frontier = next & ~seen;
    seen |= next;
  }
  return seen;
}

GraphCode induced(int nodes, GraphCode g, std::uint32_t node_set) {
  GraphCode out = 0;
  for (int u = 0; u < nodes; ++u) {
    if (!(node_set >> u & 1u)) continue;
    for (int w = u + 1; w < nodes; ++w) {
      if (node_set >> w & 1u) out |= g & pair_bit(nodes, u, w);
    }
  }
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) h -= plogp(v);
  return clamp_rounding(h);
}

double binary_entropy(double p) { return -plogp(p) - plogp(1.0 - p); }

double mutual_information(const Matrix& joint) {
  check_table(joint, "joint table");
  std::vector<double> px(joint.rows(), 0.0), py(joint.cols(), 0.0);
  for (std::size_t x = 0; x < joint.rows(); ++x) {
    for (std::size_t y = 0; y < joint.cols(); ++y) {
      px[x] += joint(x, y);
      py[y] += joint(x, y);
    }
  }
  double mi = 0.0;
  for (std::size_t x = 0; x < joint.rows(); ++x) {
    for (std::size_t y = 0; y < joint.cols(); ++y) {
      const double p = joint(x, y);
      if (p > 0.0) mi += p * std::log2(p / (px[x] * py[y]));
    }
  }
  return clamp_rounding(mi);
}

double conditional_entropy(const Matrix& joint) {
  check_table(joint, "joint table");
  double h = 0.0;
  for (std::size_t x = 0; x < joint.rows(); ++x) {
    double px = 0.0;
    for (std::size_t y = 0; y < joint.cols(); ++y) px += joint(x, y);
    for (std::size_t y = 0; y < joint.cols(); ++y) {
      const double p = joint(x, y);
      if (p > 0.0) h -= p * std::log2(p / px);
    }
  }
  return clamp_rounding(h);
}

std::vector<double> FiniteTask::graph_marginal() const {
  std::vector<double> p(joint.rows(), 0.0);
  for (std::size_t g = 0; g < joint.rows(); ++g) {
    for (std::size_t y = 0; y < joint.cols(); ++y) p[g] += joint(g, y);
  }
  return p;
}

std::vector<double> FiniteTask::label_marginal() const {
  std::vector<double> p(joint.cols(), 0.0);
  for (std::size_t g = 0; g < joint.rows(); ++g) {
    for (std::size_t y = 0; y < joint.cols(); ++y) p[y] += joint(g, y);
  }
  return p;
}

bool satisfies_markov_chain(const FiniteTask& task, const std::vector<int>& h, double tol) {
  if (h.size() != task.graphs.size()) throw ArgumentError("h needs one value per graph");
  const int classes = h.empty() ? 0 : *std::max_element(h.begin(), h.end()) + 1;
  const auto pg = task.graph_marginal();
  std::vector<double> pc(classes, 0.0);
  Matrix pcy(classes, static_cast<std::size_t>(task.labels));
  for (std::size_t g = 0; g < h.size(); ++g) {
    if (h[g] < 0) throw ArgumentError("h values must be non-negative");
    pc[h[g]] += pg[g];
    for (int y = 0; y < task.labels; ++y) pcy(h[g], y) += task.joint(g, y);
  }
  for (std::size_t g = 0; g < h.size(); ++g) {
    if (pg[g] == 0.0) continue;
    for (int y = 0; y < task.labels; ++y) {
      if (std::abs(task.joint(g, y) / pg[g] - pcy(h[g], y) / pc[h[g]]) > tol) return false;
    }
  }
  return true;
}

void validate(const FiniteTask& task) {
  if (task.labels < 1) throw ArgumentError("a task needs at least one label");
  if (task.joint.rows() != task.graphs.size() || task.joint.cols() != static_cast<std::size_t>(task.labels)) {
    throw ArgumentError("joint table is " + task.joint.shape_string() + ", expected one row per graph and one column per label");
  }
  check_table(task.joint, "task joint");
  if (!task.h) return;
  for (int c : *task.h) {
    if (c < 0 || c >= task.labels) throw ArgumentError("h maps outside the label alphabet");
  }
  if (!satisfies_markov_chain(task, *task.h)) throw ArgumentError("task is not statistically degraded under h");
}

void validate(const Channel& ch, const FiniteTask& task) {
  if (ch.rows.rows() != task.graphs.size() || ch.rows.cols() != ch.outputs.size()) {
    throw ArgumentError("channel is " + ch.rows.shape_string() + ", expected graphs x outputs");
  }
  for (std::size_t g = 0; g < ch.rows.rows(); ++g) {
    double total = 0.0;
    for (double v : ch.rows.row(g)) {
      if (!(v >= 0.0)) throw ArgumentError("channel has a negative or NaN entry");
      total += v;
    }
    if (std::abs(total - 1.0) > kTableTol) throw ArgumentError("channel row " + std::to_string(g) + " sums to " + std::to_string(total));
  }
}

Channel deterministic_channel(const FiniteTask& task, std::vector<GraphCode> outputs,
                              const std::vector<std::size_t>& choice) {
  if (choice.size() != task.graphs.size()) throw ArgumentError("one choice per graph is required");
  Channel ch{std::move(outputs), {}};
  ch.rows = Matrix(task.graphs.size(), ch.outputs.size());
  for (std::size_t g = 0; g < choice.size(); ++g) {
    if (choice[g] >= ch.outputs.size()) throw ArgumentError("choice outside the output space");
    ch.rows(g, choice[g]) = 1.0;
  }
  return ch;
}

Channel explainer_channel(const FiniteTask& task, const std::function<GraphCode(GraphCode)>& psi) {
  std::vector<GraphCode> images;
  images.reserve(task.graphs.size());
  for (GraphCode g : task.graphs) images.push_back(psi(g));
  std::vector<GraphCode> outputs = images;
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  std::vector<std::size_t> choice;
  choice.reserve(images.size());
  for (GraphCode img : images) {
    choice.push_back(static_cast<std::size_t>(std::lower_bound(outputs.begin(), outputs.end(), img) - outputs.begin()));
  }
  return deterministic_channel(task, std::move(outputs), choice);
}

double expected_size(const FiniteTask& task, const Channel& ch) {
  const auto pg = task.graph_marginal();
  double s = 0.0;
  for (std::size_t g = 0; g < pg.size(); ++g) {
    for (std::size_t o = 0; o < ch.outputs.size(); ++o) s += pg[g] * ch.rows(g, o) * edge_count(ch.outputs[o]);
  }
  return s;
}

double channel_information(const FiniteTask& task, const Channel& ch) {
  validate(ch, task);
  const auto pg = task.graph_marginal();
  Matrix j(pg.size(), ch.outputs.size());
  for (std::size_t g = 0; g < pg.size(); ++g) {
    for (std::size_t o = 0; o < ch.outputs.size(); ++o) j(g, o) = pg[g] * ch.rows(g, o);
  }
  return mutual_information(j);
}

double conditional_information_given_h(const FiniteTask& task, const Channel& ch) {
  if (!task.h) throw ArgumentError("conditional information needs h");
  validate(ch, task);
  const auto& h = *task.h;
  const auto pg = task.graph_marginal();
  const int classes = class_count(task);
  std::vector<double> pc(classes, 0.0);
  Matrix pco(classes, ch.outputs.size());
  for (std::size_t g = 0; g < pg.size(); ++g) {
    pc[h[g]] += pg[g];
    for (std::size_t o = 0; o < ch.outputs.size(); ++o) pco(h[g], o) += pg[g] * ch.rows(g, o);
  }
  double cmi = 0.0;
  for (std::size_t g = 0; g < pg.size(); ++g) {
    for (std::size_t o = 0; o < ch.outputs.size(); ++o) {
      const double p = pg[g] * ch.rows(g, o);
      if (p > 0.0) cmi += p * std::log2(p * pc[h[g]] / (pg[g] * pco(h[g], o)));
    }
  }
  return clamp_rounding(cmi);
}

double gib_objective(const FiniteTask& task, const Channel& ch, double alpha) {
  return channel_information(task, ch) + alpha * conditional_entropy(output_label_joint(task, ch));
}

double prediction_cross_entropy(const FiniteTask& task, const Channel& ch, const Classifier& f) {
  validate(ch, task);
  const Matrix oy = output_label_joint(task, ch);
  Matrix py(static_cast<std::size_t>(task.labels), static_cast<std::size_t>(task.labels));
  for (std::size_t o = 0; o < ch.outputs.size(); ++o) {
    double mass = 0.0;
    for (int y = 0; y < task.labels; ++y) mass += oy(o, y);
    if (mass == 0.0) continue;
    const auto pred = f(ch.outputs[o]);
    if (!pred) throw ArgumentError("classifier is undefined on explanation " + std::to_string(ch.outputs[o]));
    if (*pred < 0 || *pred >= task.labels) throw ArgumentError("classifier label outside the alphabet");
    for (int y = 0; y < task.labels; ++y) py(*pred, y) += oy(o, y);
  }
  return conditional_entropy(py);
}

double modified_gib_objective(const FiniteTask& task, const Channel& ch, const Classifier& f, double alpha) {
  return channel_information(task, ch) + alpha * prediction_cross_entropy(task, ch, f);
}

nlohmann::json to_json(const VerificationReport& r) {
  return {{"claim", r.claim},       {"instances", r.instances}, {"max_violation", r.max_violation},
          {"passed", r.passed},     {"skipped", r.skipped},     {"note", r.note}};
}

std::string report_table(const std::vector<VerificationReport>& reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.claim.size());
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %9s  %13s  %s\n", static_cast<int>(width), "claim", "instances",
                "max violation", "result");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-*s  %9zu  %13.3g  %s\n", static_cast<int>(width), r.claim.c_str(), r.instances,
                  r.max_violation, r.skipped ? "skipped" : r.passed ? "pass" : "FAIL");
    out << line;
    if (!r.note.empty()) out << "    " << r.note << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------------

MdpiValues mdpi_values(const MarkovTriple& t) {
  const std::size_t nb = t.b.size(), na = t.a_given_b.cols(), nc = t.c_given_b.cols();
  if (t.a_given_b.rows() != nb || t.c_given_b.rows() != nb) throw ShapeError("conditional tables need one row per value of B");
  Matrix ab(na, nb), ac(na, nc), bc(nb, nc);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t a = 0; a < na; ++a) {
      ab(a, b) = t.b[b] * t.a_given_b(b, a);
      for (std::size_t c = 0; c < nc; ++c) ac(a, c) += t.b[b] * t.a_given_b(b, a) * t.c_given_b(b, c);
    }
    for (std::size_t c = 0; c < nc; ++c) bc(b, c) = t.b[b] * t.c_given_b(b, c);
  }
  // P(a' | c) = P(a | c); values of C with no mass never reach A'.
  Matrix a_given_c(nc, na);
  for (std::size_t c = 0; c < nc; ++c) {
    double pc = 0.0;
    for (std::size_t a = 0; a < na; ++a) pc += ac(a, c);
    for (std::size_t a = 0; a < na; ++a) a_given_c(c, a) = pc > 0.0 ? ac(a, c) / pc : 1.0 / static_cast<double>(na);
  }
  Matrix apb(na, nb);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t a = 0; a < na; ++a) apb(a, b) += bc(b, c) * a_given_c(c, a);
    }
  }
  return {mutual_information(ab), mutual_information(apb)};
}

MarkovTriple random_markov_triple(Rng& rng, int max_alphabet) {
  if (max_alphabet < 1) throw ArgumentError("alphabets need at least one symbol");
  const auto na = static_cast<std::size_t>(rng.uniform_int(1, max_alphabet));
  const auto nb = static_cast<std::size_t>(rng.uniform_int(1, max_alphabet));
  const auto nc = static_cast<std::size_t>(rng.uniform_int(1, max_alphabet));
  MarkovTriple t{random_distribution(rng, nb, 0.2), Matrix(nb, na), Matrix(nb, nc)};
  for (std::size_t b = 0; b < nb; ++b) {
    const auto pa = random_distribution(rng, na, 0.2);
    const auto pc = random_distribution(rng, nc, 0.2);
    std::copy(pa.begin(), pa.end(), t.a_given_b.row(b).begin());
    std::copy(pc.begin(), pc.end(), t.c_given_b.row(b).begin());
  }
  return t;
}

VerificationReport verify_mdpi(int trials, std::uint64_t seed) {
  if (trials < 1) throw ArgumentError("trials must be positive");
  VerificationReport r;
  r.claim = "modified data processing inequality";
  std::size_t violations = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto v = mdpi_values(random_markov_triple(rng));
    const double excess = v.i_a_prime_b - v.i_ab;
    if (excess > 1e-9) ++violations;
    r.max_violation = std::max(r.max_violation, excess);
    tightest = std::min(tightest, -excess);
  }
  r.instances = static_cast<std::size_t>(trials);
  r.passed = violations == 0;
  r.note = std::to_string(violations) + " violations at tolerance 1e-9; smallest slack " + fmt(tightest) + " bits";
  return r;
}

// ---------------------------------------------------------------------------------

namespace {

class DeterministicSearch {
 public:
  DeterministicSearch(const FiniteTask& task, const std::vector<GraphCode>& outputs, double alpha, double gamma)
      : task_(task), alpha_(alpha), gamma_(gamma), ng_(task.graphs.size()), no_(outputs.size()),
        labels_(static_cast<std::size_t>(task.labels)), pg_(task.graph_marginal()), mass_(no_, 0.0),
        pj_(no_ * labels_, 0.0), term_(no_, 0.0), choice_(ng_, 0), best_choice_(ng_, 0) {
    for (GraphCode o : outputs) sizes_.push_back(edge_count(o));
  }

  void run() { descend(0, 0.0); }

  [[nodiscard]] double best() const { return best_; }
  [[nodiscard]] const std::vector<std::size_t>& best_choice() const { return best_choice_; }
  [[nodiscard]] std::size_t evaluated() const { return evaluated_; }

 private:
  void descend(std::size_t i, double size) {
    if (i == ng_) {
      leaf();
      return;
    }
    for (std::size_t o = 0; o < no_; ++o) {
      const double grown = size + pg_[i] * sizes_[o];
      if (grown > gamma_ + 1e-12) continue;
      const double saved_mass = mass_[o], saved_term = term_[o];
      double saved_pj[8];
      double* row = &pj_[o * labels_];
      std::copy(row, row + std::min<std::size_t>(labels_, 8), saved_pj);
      mass_[o] += pg_[i];
      double t = (alpha_ - 1.0) * plogp(mass_[o]);
      for (std::size_t y = 0; y < labels_; ++y) {
        row[y] += task_.joint(i, y);
        t -= alpha_ * plogp(row[y]);
      }
      term_[o] = t;
      choice_[i] = o;
      descend(i + 1, grown);
      mass_[o] = saved_mass;
      term_[o] = saved_term;
      std::copy(saved_pj, saved_pj + std::min<std::size_t>(labels_, 8), row);
    }
  }

  void leaf() {
    ++evaluated_;
    double v = 0.0;
    for (double t : term_) v += t;
    if (v < best_ - 1e-12) {
      take(v);
    } else if (v <= best_ + 1e-12 && !best_measurable_ && measurable()) {
      take(v);
    }
  }

  void take(double v) {
    best_ = v;
    best_choice_ = choice_;
    best_measurable_ = measurable();
  }

  [[nodiscard]] bool measurable() const {
    if (!task_.h) return false;
    const auto& h = *task_.h;
    std::map<int, std::size_t> seen;
    for (std::size_t g = 0; g < ng_; ++g) {
      if (pg_[g] == 0.0) continue;
      auto [it, fresh] = seen.emplace(h[g], choice_[g]);
      if (!fresh && it->second != choice_[g]) return false;
    }
    return true;
  }

  const FiniteTask& task_;
  double alpha_, gamma_;
  std::size_t ng_, no_, labels_;
  std::vector<double> pg_;
  std::vector<int> sizes_;
  std::vector<double> mass_, pj_, term_;
  std::vector<std::size_t> choice_, best_choice_;
  double best_ = std::numeric_limits<double>::infinity();
  bool best_measurable_ = false;
  std::size_t evaluated_ = 0;
};

}  // namespace

ChannelSearch best_deterministic_channel(const FiniteTask& task, const std::vector<GraphCode>& outputs, double alpha,
                                         double gamma) {
  validate(task);
  if (outputs.empty()) throw ArgumentError("the explanation space is empty");
  if (task.labels > 8) throw UnsupportedSizeError("deterministic search supports at most 8 labels");
  const double space = static_cast<double>(task.graphs.size()) * std::log2(static_cast<double>(outputs.size()));
  if (space > 26.0) {
    throw UnsupportedSizeError("deterministic search over " + std::to_string(outputs.size()) + "^" +
                               std::to_string(task.graphs.size()) + " channels exceeds 2^26");
  }
  DeterministicSearch s(task, outputs, alpha, gamma);
  s.run();
  if (!std::isfinite(s.best())) throw ArgumentError("no deterministic channel meets the size budget");
  ChannelSearch out{deterministic_channel(task, outputs, s.best_choice()), 0.0, s.evaluated()};
  out.objective = gib_objective(task, out.channel, alpha);
  return out;
}

ChannelSearch best_grid_channel(const FiniteTask& task, const std::vector<GraphCode>& outputs, double alpha,
                                double gamma, double step, std::size_t max_channels) {
  validate(task);
  if (!task.h) throw ArgumentError("grid channels factor through h");
  const int units = static_cast<int>(std::lround(1.0 / step));
  if (units < 1 || std::abs(units * step - 1.0) > 1e-12) throw ArgumentError("grid step must divide 1");
  const int classes = class_count(task);
  const int no = static_cast<int>(outputs.size());
  const double per_class = binomial(units + no - 1, no - 1);
  if (std::pow(per_class, classes) > static_cast<double>(max_channels)) {
    throw UnsupportedSizeError("grid search needs " + fmt(std::pow(per_class, classes)) + " channels, limit " +
                               std::to_string(max_channels));
  }
  std::vector<std::vector<int>> rows;
  std::vector<int> cur;
  compositions(units, no, cur, rows);

  const auto& h = *task.h;
  const auto pg = task.graph_marginal();
  std::vector<double> pc(classes, 0.0);
  Matrix pcy(classes, static_cast<std::size_t>(task.labels));
  for (std::size_t g = 0; g < pg.size(); ++g) {
    pc[h[g]] += pg[g];
    for (int y = 0; y < task.labels; ++y) pcy(h[g], y) += task.joint(g, y);
  }

  ChannelSearch best{{}, std::numeric_limits<double>::infinity(), 0};
  std::vector<std::size_t> pick(classes, 0), best_pick;
  Matrix co(classes, outputs.size()), oy(outputs.size(), static_cast<std::size_t>(task.labels));
  while (true) {
    double size = 0.0;
    for (int c = 0; c < classes; ++c) {
      for (int o = 0; o < no; ++o) size += pc[c] * rows[pick[c]][o] * step * edge_count(outputs[o]);
    }
    if (size <= gamma + 1e-12) {
      co.fill(0.0);
      oy.fill(0.0);
      for (int c = 0; c < classes; ++c) {
        for (int o = 0; o < no; ++o) {
          const double q = rows[pick[c]][o] * step;
          co(c, o) = pc[c] * q;
          for (int y = 0; y < task.labels; ++y) oy(o, y) += q * pcy(c, y);
        }
      }
      // G' depends on G only through h(G), so I(G, G') = I(h(G), G').
      const double v = mutual_information(co) + alpha * conditional_entropy(oy);
      ++best.evaluated;
      if (v < best.objective - 1e-12) {
        best.objective = v;
        best_pick = pick;
      }
    }
    int c = 0;
    while (c < classes && ++pick[c] == rows.size()) pick[c++] = 0;
    if (c == classes) break;
  }
  if (best_pick.empty()) throw ArgumentError("no grid channel meets the size budget");
  best.channel = Channel{outputs, Matrix(task.graphs.size(), outputs.size())};
  for (std::size_t g = 0; g < task.graphs.size(); ++g) {
    for (int o = 0; o < no; ++o) best.channel.rows(g, o) = rows[best_pick[h[g]]][o] * step;
  }
  best.objective = gib_objective(task, best.channel, alpha);
  return best;
}

Channel construct_signaling_explainer(const FiniteTask& task, const Channel& optimal) {
  if (!task.h) throw ArgumentError("the signaling construction needs a degrading map h");
  validate(optimal, task);
  const auto& h = *task.h;
  const auto pg = task.graph_marginal();
  const int classes = class_count(task);
  const std::size_t no = optimal.outputs.size();
  Matrix per_class(classes, no);
  std::vector<double> pc(classes, 0.0);
  std::vector<int> members(classes, 0);
  for (std::size_t g = 0; g < pg.size(); ++g) {
    pc[h[g]] += pg[g];
    ++members[h[g]];
    for (std::size_t o = 0; o < no; ++o) per_class(h[g], o) += pg[g] * optimal.rows(g, o);
  }
  for (int c = 0; c < classes; ++c) {
    if (pc[c] > 0.0) {
      for (std::size_t o = 0; o < no; ++o) per_class(c, o) /= pc[c];
      continue;
    }
    // A class without mass: any row will do; use the plain average of its members.
    for (std::size_t g = 0; g < pg.size(); ++g) {
      if (h[g] != c) continue;
      for (std::size_t o = 0; o < no; ++o) per_class(c, o) += optimal.rows(g, o) / members[c];
    }
  }
  Channel out{optimal.outputs, Matrix(pg.size(), no)};
  for (std::size_t g = 0; g < pg.size(); ++g) {
    for (std::size_t o = 0; o < no; ++o) out.rows(g, o) = per_class(h[g], o);
  }
  return out;
}

SignalingCheck verify_signaling(const FiniteTask& task, double alpha, double gamma) {
  if (!task.h) throw ArgumentError("task has no degrading map h");
  validate(task);
  const auto outputs = all_graphs(task.nodes);
  const auto det = best_deterministic_channel(task, outputs, alpha, gamma);
  SignalingCheck r;
  r.deterministic_optimum = det.objective;
  r.grid_optimum = std::numeric_limits<double>::quiet_NaN();
  const Channel* optimum = &det.channel;
  r.searched_optimum = det.objective;
  ChannelSearch grid;
  try {
    grid = best_grid_channel(task, outputs, alpha, gamma);
    r.grid_optimum = grid.objective;
    if (grid.objective < det.objective - 1e-12) {
      optimum = &grid.channel;
      r.searched_optimum = grid.objective;
    }
  } catch (const UnsupportedSizeError&) {
    // The grid is only a refinement; the deterministic optimum stands alone.
  }
  r.transmitted = channel_information(task, *optimum);
  const Channel signaling = construct_signaling_explainer(task, *optimum);
  r.signaling_objective = gib_objective(task, signaling, alpha);
  r.independence = conditional_information_given_h(task, signaling);
  const bool feasible = expected_size(task, signaling) <= gamma + 1e-9;
  r.passed = feasible && std::abs(r.signaling_objective - r.searched_optimum) <= 1e-9 && r.independence <= 1e-12;
  return r;
}

FiniteTask random_degraded_task(Rng& rng, int nodes, int labels) {
  FiniteTask t;
  t.nodes = nodes;
  t.graphs = all_graphs(nodes);
  t.labels = labels;
  const auto pg = random_distribution(rng, t.graphs.size(), 0.0);
  std::vector<int> h(t.graphs.size());
  for (auto& c : h) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(labels)));
  // Y mostly agrees with h(G), so that transmitting h can pay off.
  std::vector<std::vector<double>> y_given_c;
  for (int c = 0; c < labels; ++c) {
    const double noise = rng.uniform(0.0, 0.3);
    std::vector<double> row(static_cast<std::size_t>(labels), labels > 1 ? noise / (labels - 1) : 0.0);
    row[c] = labels > 1 ? 1.0 - noise : 1.0;
    y_given_c.push_back(std::move(row));
  }
  t.joint = Matrix(t.graphs.size(), static_cast<std::size_t>(labels));
  for (std::size_t g = 0; g < pg.size(); ++g) {
    for (int y = 0; y < labels; ++y) t.joint(g, y) = pg[g] * y_given_c[h[g]][y];
  }
  t.h = std::move(h);
  return t;
}

VerificationReport verify_signaling_suite(int tasks, std::uint64_t seed, double alpha) {
  if (tasks < 1) throw ArgumentError("tasks must be positive");
  VerificationReport r;
  r.claim = "signaling explainer attains the GIB optimum";
  int failures = 0, randomized = 0, informative = 0;
  for (int t = 0; t < tasks; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const FiniteTask task = random_degraded_task(rng);
    const auto c = verify_signaling(task, alpha, pair_slots(task.nodes));
    r.max_violation = std::max({r.max_violation, std::abs(c.signaling_objective - c.searched_optimum), c.independence});
    if (!c.passed) ++failures;
    if (c.grid_optimum < c.deterministic_optimum - 1e-12) ++randomized;
    if (c.transmitted > 1e-9) ++informative;
  }
  r.instances = static_cast<std::size_t>(tasks);
  r.passed = failures == 0;
  r.note = "alpha " + fmt(alpha) + ", 3-node graphs, size budget not binding; the optimum carries information on " +
           std::to_string(informative) + " tasks; grid channels beat the deterministic optimum on " +
           std::to_string(randomized);
  return r;
}

int degrading_boolean_maps(double p) {
  FiniteTask t;
  t.graphs = {0, 1, 2, 3};
  t.joint = Matrix(4, 2);
  for (GraphCode x = 0; x < 4; ++x) {
    const double one = p * (x & 1u) + (1.0 - p) * (x >> 1 & 1u);
    t.joint(x, 1) = 0.25 * one;
    t.joint(x, 0) = 0.25 * (1.0 - one);
  }
  int count = 0;
  for (int code = 0; code < 16; ++code) {
    std::vector<int> h(4);
    for (int x = 0; x < 4; ++x) h[x] = code >> x & 1;
    if (satisfies_markov_chain(t, h)) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------------

namespace {

std::uint32_t motif_nodes(int nodes, GraphCode m) {
  std::uint32_t set = 0;
  for (int u = 0; u < nodes; ++u) {
    for (int w = u + 1; w < nodes; ++w) {
      if (m & pair_bit(nodes, u, w)) set |= 1u << u | 1u << w;
    }
  }
  return set;
}

VerificationReport skipped_report(std::string claim, std::string why) {
  VerificationReport r;
  r.claim = std::move(claim);
  r.skipped = true;
  r.note = "assumption violated: " + std::move(why);
  return r;
}

// Aggregates per-instance reports into one line.
VerificationReport combine(std::string claim, const std::vector<VerificationReport>& parts) {
  VerificationReport r;
  r.claim = std::move(claim);
  std::size_t skipped = 0, failed = 0, checked = 0;
  for (const auto& p : parts) {
    if (p.skipped) {
      ++skipped;
      continue;
    }
    ++checked;
    r.instances += p.instances;
    r.max_violation = std::max(r.max_violation, p.max_violation);
    if (!p.passed) ++failed;
  }
  r.passed = failed == 0 && checked > 0;
  r.note = std::to_string(checked) + " models checked, " + std::to_string(failed) + " failed, " +
           std::to_string(skipped) + " skipped for violating an assumption";
  return r;
}

}  // namespace

int MotifModel::max_motif_size() const {
  int m = 0;
  for (GraphCode g : motifs) m = std::max(m, edge_count(g));
  return m;
}

std::optional<std::string> assumption_violation(const MotifModel& m) {
  if (m.nodes < 2 || m.nodes > 5) return "node count must lie in [2, 5] for enumeration";
  if (!(m.p > 0.0 && m.p < 0.5)) return "p = " + fmt(m.p) + " is outside (0, 1/2)";
  if (m.motifs.empty()) return "no motifs";
  if (m.p_i.size() != m.motifs.size()) return "one p_i per motif is required";
  const GraphCode all = (GraphCode{1} << pair_slots(m.nodes)) - 1;
  std::uint32_t used = 0;
  for (std::size_t i = 0; i < m.motifs.size(); ++i) {
    if (m.motifs[i] == 0 || (m.motifs[i] & ~all)) return "motif " + std::to_string(i) + " is empty or out of range";
    const std::uint32_t nodes = motif_nodes(m.nodes, m.motifs[i]);
    if (nodes & used) return "motifs " + std::to_string(i) + " and an earlier one share a node";
    used |= nodes;
    const double chance = std::pow(m.p, edge_count(m.motifs[i]));
    if (!(m.p_i[i] >= chance && m.p_i[i] <= 1.0)) {
      return "p_" + std::to_string(i) + " = " + fmt(m.p_i[i]) + " is below P_G0(g_i) = " + fmt(chance);
    }
  }
  return std::nullopt;
}

FiniteTask motif_task(const MotifModel& m) {
  if (auto why = assumption_violation(m)) throw ConfigError(*why);
  FiniteTask t;
  t.nodes = m.nodes;
  t.graphs = all_graphs(m.nodes);
  t.labels = 2;
  t.joint = Matrix(t.graphs.size(), 2);
  const int slots = pair_slots(m.nodes);
  const std::size_t s = m.motifs.size();
  for (std::uint32_t e = 0; e < (1u << s); ++e) {
    double pe = 1.0;
    GraphCode ge = 0;
    for (std::size_t i = 0; i < s; ++i) {
      const bool on = e >> i & 1u;
      pe *= on ? m.p_i[i] : 1.0 - m.p_i[i];
      if (on) ge |= m.motifs[i];
    }
    const int y = e != 0 ? 1 : 0;
    for (GraphCode g0 : t.graphs) {
      const int k = edge_count(g0);
      t.joint(g0 | ge, y) += pe * std::pow(m.p, k) * std::pow(1.0 - m.p, slots - k);
    }
  }
  return t;
}

int motif_indicator(const MotifModel& m, GraphCode g) {
  for (GraphCode motif : m.motifs) {
    if ((g & motif) == motif) return 1;
  }
  return 0;
}

std::vector<int> bayes_rule(const MotifModel& m) {
  const FiniteTask t = motif_task(m);
  std::vector<int> rule(t.graphs.size());
  for (std::size_t g = 0; g < rule.size(); ++g) rule[g] = t.joint(g, 1) > t.joint(g, 0) ? 1 : 0;
  return rule;
}

VerificationReport verify_bayes_indicator(const MotifModel& m) {
  const std::string claim = "Bayes rule is the motif indicator";
  if (auto why = assumption_violation(m)) return skipped_report(claim, *why);
  const FiniteTask t = motif_task(m);
  VerificationReport r;
  r.claim = claim;
  std::size_t mismatches = 0;
  for (std::size_t g = 0; g < t.graphs.size(); ++g) {
    const double pg = t.joint(g, 0) + t.joint(g, 1);
    const double margin = (t.joint(g, 1) - t.joint(g, 0)) / pg;  // P(1|g) - P(0|g)
    const bool present = motif_indicator(m, t.graphs[g]) == 1;
    // A tie is a mismatch: the indicator claims a strict preference.
    const bool agrees = present ? margin > 0.0 : margin < 0.0;
    if (!agrees) {
      ++mismatches;
      r.max_violation = std::max(r.max_violation, present ? -margin : margin);
    }
  }
  r.instances = t.graphs.size();
  r.passed = mismatches == 0;
  r.note = std::to_string(mismatches) + " graphs disagree";
  return r;
}

std::vector<MotifModel> small_motif_models(int max_nodes) {
  const std::vector<double> ps{0.05, 0.1, 0.25, 0.45};
  const std::vector<double> pis{0.05, 0.3, 0.6, 0.9};
  std::vector<MotifModel> out;
  for (int n = 2; n <= max_nodes; ++n) {
    std::vector<GraphCode> shapes;
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) shapes.push_back(pair_bit(n, u, v));
    }
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        for (int c = b + 1; c < n; ++c) shapes.push_back(encode(n, {{a, b}, {b, c}, {a, c}}));
      }
    }
    std::vector<std::vector<GraphCode>> families;
    for (GraphCode s : shapes) families.push_back({s});
    for (GraphCode s : shapes) {
      for (GraphCode t : shapes) {
        if (!(motif_nodes(n, s) & motif_nodes(n, t))) families.push_back({s, t});
      }
    }
    for (const auto& motifs : families) {
      for (double p : ps) {
        for (double p1 : pis) {
          if (motifs.size() == 1) {
            out.push_back({n, motifs, p, {p1}});
            continue;
          }
          for (double p2 : pis) out.push_back({n, motifs, p, {p1, p2}});
        }
      }
    }
  }
  return out;
}

std::function<GraphCode(GraphCode)> patched_explainer(const MotifModel& m) {
  return [motifs = m.motifs](GraphCode g) -> GraphCode {
    for (GraphCode motif : motifs) {
      if ((g & motif) == motif) return motif;
    }
    return 0;
  };
}

Classifier table_classifier(const std::vector<int>& rule) {
  return [rule](GraphCode g) -> std::optional<int> {
    if (g >= rule.size()) return std::nullopt;
    return rule[g];
  };
}

VerificationReport verify_patched_explainer(const MotifModel& m, double alpha) {
  const std::string claim = "patched explainer keeps the Bayes label";
  if (auto why = assumption_violation(m)) return skipped_report(claim, *why);
  const FiniteTask t = motif_task(m);
  const auto rule = bayes_rule(m);
  const auto f = table_classifier(rule);
  const auto psi = patched_explainer(m);
  const int gamma = m.max_motif_size();
  std::size_t bad = 0;
  for (GraphCode g : t.graphs) {
    const GraphCode out = psi(g);
    if ((out & g) != out || edge_count(out) > gamma) ++bad;
    if (rule[g] == 1 && (rule[out] != 1 || out == 0)) ++bad;
  }
  const Channel patched = explainer_channel(t, psi);
  Channel identity = explainer_channel(t, [](GraphCode g) { return g; });
  const double ce = prediction_cross_entropy(t, patched, f);
  const double floor = prediction_cross_entropy(t, identity, f);
  VerificationReport r;
  r.claim = claim;
  r.instances = t.graphs.size();
  r.max_violation = std::abs(ce - floor);
  r.passed = bad == 0 && r.max_violation <= 1e-12;
  r.note = std::to_string(bad) + " graphs lose the label or exceed the budget; CE " + fmt(ce) + " bits, objective " +
           fmt(modified_gib_objective(t, patched, f, alpha)) + " at alpha " + fmt(alpha);
  return r;
}

LocalBound local_explainer_bound(const MotifModel& m, int r, double alpha, int max_log2) {
  if (r < 0) throw ArgumentError("radius must be non-negative");
  const FiniteTask t = motif_task(m);
  const auto rule = bayes_rule(m);
  const auto f = table_classifier(rule);
  const int n = m.nodes;
  const std::size_t ng = t.graphs.size();

  // Each node's decision is a function of its restriction; index the distinct ones.
  std::vector<std::vector<int>> key_index(n, std::vector<int>(ng));
  std::vector<int> offset(n, 0);
  int bits = 0;
  for (int v = 0; v < n; ++v) {
    std::map<std::uint64_t, int> keys;
    for (std::size_t g = 0; g < ng; ++g) {
      const std::uint32_t b = ball(n, t.graphs[g], v, r);
      const std::uint64_t key = std::uint64_t{b} << 32 | induced(n, t.graphs[g], b);
      key_index[v][g] = keys.emplace(key, static_cast<int>(keys.size())).first->second;
    }
    offset[v] = bits;
    bits += static_cast<int>(keys.size());
  }
  if (bits > max_log2) {
    throw UnsupportedSizeError("r-local search over 2^" + std::to_string(bits) + " explainers exceeds 2^" +
                               std::to_string(max_log2));
  }

  LocalBound out;
  out.gamma = m.max_motif_size();
  out.single_motif = m.motifs.size() < 2;
  out.explainers = std::size_t{1} << bits;
  out.local_best_ce = out.local_best_objective = std::numeric_limits<double>::infinity();
  const auto pg = t.graph_marginal();
  std::vector<double> out_mass(std::size_t{1} << pair_slots(n));
  Matrix ty(2, 2);
  for (std::uint64_t a = 0; a < out.explainers; ++a) {
    std::fill(out_mass.begin(), out_mass.end(), 0.0);
    ty.fill(0.0);
    double size = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      std::uint32_t keep = 0;
      for (int v = 0; v < n; ++v) {
        if (a >> (offset[v] + key_index[v][g]) & 1u) keep |= 1u << v;
      }
      const GraphCode e = induced(n, t.graphs[g], keep);
      size += pg[g] * edge_count(e);
      out_mass[e] += pg[g];
      for (int y = 0; y < 2; ++y) ty(rule[e], y) += t.joint(g, y);
    }
    if (size > out.gamma + 1e-12) continue;
    ++out.feasible;
    const double ce = conditional_entropy(ty);
    out.local_best_ce = std::min(out.local_best_ce, ce);
    // Deterministic explainer: I(G, G') = H(G').
    out.local_best_objective = std::min(out.local_best_objective, entropy(out_mass) + alpha * ce);
  }
  const Channel patched = explainer_channel(t, patched_explainer(m));
  out.patched_ce = prediction_cross_entropy(t, patched, f);
  out.patched_objective = modified_gib_objective(t, patched, f, alpha);
  return out;
}

VerificationReport verify_local_gap(const MotifModel& m, int r, double alpha) {
  const std::string claim = "local explainers fall short of the patched explainer";
  if (auto why = assumption_violation(m)) return skipped_report(claim, *why);
  const LocalBound b = local_explainer_bound(m, r, alpha);
  VerificationReport rep;
  rep.claim = claim;
  rep.instances = b.explainers;
  const double gap = b.local_best_ce - b.patched_ce;
  if (b.single_motif) {
    // One motif: nothing forces a gap, and a local explainer may match the patched one.
    rep.passed = gap >= -1e-12;
    rep.max_violation = std::max(0.0, -gap);
    rep.note = "single motif, no gap required; ";
  } else {
    rep.passed = gap > 1e-9 && b.local_best_objective > b.patched_objective;
    rep.max_violation = std::max(0.0, -gap);
  }
  rep.note += "radius " + std::to_string(r) + ", " + std::to_string(b.feasible) + " explainers within budget " +
              fmt(b.gamma) + "; best local CE " + fmt(b.local_best_ce) + " vs patched " + fmt(b.patched_ce) +
              " bits; objectives " + fmt(b.local_best_objective) + " vs " + fmt(b.patched_objective);
  return rep;
}

std::vector<VerificationReport> run_theory_suite(const TheoryConfig& cfg) {
  std::vector<VerificationReport> out;
  out.push_back(verify_mdpi(cfg.mdpi_trials, derive_seed(cfg.seed, "mdpi")));
  out.push_back(verify_signaling_suite(cfg.signaling_tasks, derive_seed(cfg.seed, "signaling"), cfg.signaling_alpha));

  const auto models = small_motif_models(4);
  std::vector<VerificationReport> bayes, patched;
  for (const auto& m : models) {
    bayes.push_back(verify_bayes_indicator(m));
    patched.push_back(verify_patched_explainer(m));
  }
  out.push_back(combine("Bayes rule is the motif indicator", bayes));
  out.push_back(combine("patched explainer keeps the Bayes label", patched));

  const MotifModel two_edges{4, {encode(4, {{0, 1}}), encode(4, {{2, 3}})}, 0.1, {0.3, 0.3}};
  out.push_back(verify_local_gap(two_edges, 0));

  VerificationReport mixture;
  mixture.claim = "mixture task has no Boolean sufficient statistic";
  int degrading = 0;
  for (double p : {0.25, 0.5, 0.75}) degrading += degrading_boolean_maps(p);
  mixture.instances = 48;
  mixture.passed = degrading == 0;
  mixture.max_violation = degrading;
  mixture.note = std::to_string(degrading) + " of 16 maps degrade the task, over p in {0.25, 0.5, 0.75}";
  out.push_back(mixture);
  return out;
}

}  // namespace fx::theory
