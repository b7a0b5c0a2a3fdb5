#pragma once

// Exact information-theoretic checks on enumerable graph spaces. Logarithms are base 2
// throughout, so entropies, mutual information and cross-entropies are in bits.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "factexplain/matrix.hpp"
#include "factexplain/rng.hpp"
#include "json.hpp"

namespace fx::theory {

/// Graph on a fixed node set {0..n-1}, one bit per unordered pair in the order
/// (0,1), (0,2), ..., (0,n-1), (1,2), ...
using GraphCode = std::uint32_t;

inline constexpr int kMaxNodes = 7;

[[nodiscard]] int pair_slots(int nodes);
/// Throws ArgumentError for u == v or endpoints outside [0, nodes).
[[nodiscard]] GraphCode pair_bit(int nodes, int u, int v);
[[nodiscard]] GraphCode encode(int nodes, const std::vector<std::pair<int, int>>& edges);
[[nodiscard]] int edge_count(GraphCode g);
/// Every graph on `nodes` labelled nodes, in increasing code order.
[[nodiscard]] std::vector<GraphCode> all_graphs(int nodes);
/// Nodes within `radius` hops of v (bitmask over nodes).
[[nodiscard]] std::uint32_t ball(int nodes, GraphCode g, int v, int radius);
/// Edges of g with both endpoints in the node set.
[[nodiscard]] GraphCode induced(int nodes, GraphCode g, std::uint32_t node_set);

[[nodiscard]] double entropy(std::span<const double> p);
[[nodiscard]] double binary_entropy(double p);

/// Joint tables are rows X by columns Y. Both throw ArgumentError on negative entries or
/// a total that differs from 1 by more than 1e-12.
[[nodiscard]] double mutual_information(const Matrix& joint);
/// H(Y | X).
[[nodiscard]] double conditional_entropy(const Matrix& joint);

/// Joint law of a graph and its label over an explicit graph space.
struct FiniteTask {
  int nodes = 0;
  std::vector<GraphCode> graphs;
  int labels = 2;
  Matrix joint;  // graphs x labels
  /// Degrading map, one label per graph.
  std::optional<std::vector<int>> h;

  [[nodiscard]] std::vector<double> graph_marginal() const;
  [[nodiscard]] std::vector<double> label_marginal() const;
};

/// True when P(y | g) = P(y | h(g)) for every g of positive mass, within tol.
[[nodiscard]] bool satisfies_markov_chain(const FiniteTask& task, const std::vector<int>& h, double tol = 1e-12);

/// Throws ArgumentError on shape or normalization problems, or when h is present but the
/// chain G - h(G) - Y does not hold.
void validate(const FiniteTask& task);

/// P(G' | G) over an explicit explanation space.
struct Channel {
  std::vector<GraphCode> outputs;
  Matrix rows;  // task graphs x outputs
};

void validate(const Channel& channel, const FiniteTask& task);

/// Channel that sends graph i to outputs[choice[i]].
[[nodiscard]] Channel deterministic_channel(const FiniteTask& task, std::vector<GraphCode> outputs,
                                            const std::vector<std::size_t>& choice);
/// Deterministic channel of an explanation function; outputs are the distinct images in
/// code order.
[[nodiscard]] Channel explainer_channel(const FiniteTask& task, const std::function<GraphCode(GraphCode)>& psi);

/// E|G'| in edges.
[[nodiscard]] double expected_size(const FiniteTask& task, const Channel& channel);
/// I(G, G').
[[nodiscard]] double channel_information(const FiniteTask& task, const Channel& channel);
/// I(G, G' | h(G)); requires task.h.
[[nodiscard]] double conditional_information_given_h(const FiniteTask& task, const Channel& channel);

/// I(G, G') + alpha * H(Y | G').
[[nodiscard]] double gib_objective(const FiniteTask& task, const Channel& channel, double alpha);

/// Hard classifier; nullopt marks a graph it is not defined on.
using Classifier = std::function<std::optional<int>(GraphCode)>;

/// Expected log-loss of the label Y under the calibrated prediction q(y | y') =
/// P(Y = y | Y' = y'), where Y' = f(G'). This equals H(Y | Y'). Throws ArgumentError if f
/// is undefined, or out of range, on an output of positive mass.
[[nodiscard]] double prediction_cross_entropy(const FiniteTask& task, const Channel& channel, const Classifier& f);

/// I(G, G') + alpha * CE(Y, f(G')).
[[nodiscard]] double modified_gib_objective(const FiniteTask& task, const Channel& channel, const Classifier& f,
                                            double alpha);

/// One line of a verification report.
struct VerificationReport {
  std::string claim;
  std::size_t instances = 0;
  double max_violation = 0.0;
  bool passed = false;
  bool skipped = false;
  std::string note;
};

[[nodiscard]] nlohmann::json to_json(const VerificationReport& r);
[[nodiscard]] std::string report_table(const std::vector<VerificationReport>& reports);

// Modified data processing inequality ------------------------------------------------

/// A - B - C given by P_B, P_{A|B} (rows B) and P_{C|B} (rows B).
struct MarkovTriple {
  std::vector<double> b;
  Matrix a_given_b;
  Matrix c_given_b;
};

struct MdpiValues {
  double i_ab = 0.0;        // I(A, B)
  double i_a_prime_b = 0.0; // I(A', B) with P_{A'|C} = P_{A|C} and A, B - C - A'
};

[[nodiscard]] MdpiValues mdpi_values(const MarkovTriple& t);
/// Alphabet sizes uniform in [1, max_alphabet]; some entries are zeroed to reach the
/// boundary of the simplex.
[[nodiscard]] MarkovTriple random_markov_triple(Rng& rng, int max_alphabet = 4);
/// Violation is I(A', B) - I(A, B); a trial fails when it exceeds 1e-9.
[[nodiscard]] VerificationReport verify_mdpi(int trials, std::uint64_t seed);

// Signaling explainers ---------------------------------------------------------------

struct ChannelSearch {
  Channel channel;
  double objective = 0.0;
  std::size_t evaluated = 0;
};

/// Exhaustive search over deterministic channels into `outputs` with E|G'| <= gamma.
/// Among optima within 1e-12, one that depends on G only through h(G) is preferred.
[[nodiscard]] ChannelSearch best_deterministic_channel(const FiniteTask& task, const std::vector<GraphCode>& outputs,
                                                       double alpha, double gamma);

/// Randomized channels that factor through h(G), with P(G' | h) on a grid of the given
/// step. Throws UnsupportedSizeError beyond max_channels candidates.
[[nodiscard]] ChannelSearch best_grid_channel(const FiniteTask& task, const std::vector<GraphCode>& outputs,
                                              double alpha, double gamma, double step = 0.25,
                                              std::size_t max_channels = 2'000'000);

/// G' drawn from h(G) alone with P(G' | h) = P(G* | h). Throws ArgumentError without h.
[[nodiscard]] Channel construct_signaling_explainer(const FiniteTask& task, const Channel& optimal);

struct SignalingCheck {
  double deterministic_optimum = 0.0;
  double grid_optimum = 0.0;
  double searched_optimum = 0.0;
  double transmitted = 0.0;  // I(G, G*) of the searched optimum
  double signaling_objective = 0.0;
  double independence = 0.0;  // I(G, G' | h(G)) of the constructed channel
  bool passed = false;
};

/// Searches the optimum over all graphs of task.nodes nodes, builds the signaling
/// channel from it and compares objectives. Throws ArgumentError on a task that is not
/// statistically degraded.
[[nodiscard]] SignalingCheck verify_signaling(const FiniteTask& task, double alpha, double gamma);

/// Random P(G) on all graphs of `nodes` nodes and random h into the labels. Y equals h(G)
/// except with a random probability below 0.3, spread over the other labels.
[[nodiscard]] FiniteTask random_degraded_task(Rng& rng, int nodes = 3, int labels = 2);

[[nodiscard]] VerificationReport verify_signaling_suite(int tasks, std::uint64_t seed, double alpha);

/// X = (X1, X2) uniform bits, Y = X1 with probability p and X2 otherwise. Returns how many
/// of the 16 Boolean maps h satisfy X - h(X) - Y.
[[nodiscard]] int degrading_boolean_maps(double p);

// Multi-motif tasks ----------------------------------------------------------------

/// G = G0 ∪ (union of motifs with E_i = 1), G0 ~ ER(p), E_i ~ Bernoulli(p_i), Y = max E_i.
struct MotifModel {
  int nodes = 4;
  std::vector<GraphCode> motifs;
  double p = 0.1;
  std::vector<double> p_i;

  [[nodiscard]] int max_motif_size() const;
};

/// Describes the first failed modelling assumption, or nullopt. Checks p in (0, 1/2),
/// node-disjoint motifs (separation larger than any radius inside the motif union),
/// and p^|g_i| <= p_i.
[[nodiscard]] std::optional<std::string> assumption_violation(const MotifModel& m);

/// Exact joint over all graphs on m.nodes nodes, summing over (e^s, g0). Throws
/// ConfigError when an assumption fails.
[[nodiscard]] FiniteTask motif_task(const MotifModel& m);

/// 1 if some motif is contained in g.
[[nodiscard]] int motif_indicator(const MotifModel& m, GraphCode g);

/// argmax_y P(Y = y | G = g) for every graph (code order); ties map to 0.
[[nodiscard]] std::vector<int> bayes_rule(const MotifModel& m);

[[nodiscard]] VerificationReport verify_bayes_indicator(const MotifModel& m);

/// Every instance with 2 <= n <= max_nodes and one or two single-edge or triangle motifs
/// on disjoint nodes, over a grid of p and p_i. Instances that break an assumption are
/// included; verification reports them as skipped.
[[nodiscard]] std::vector<MotifModel> small_motif_models(int max_nodes = 4);

/// Smallest-index motif contained in g, or the empty graph.
[[nodiscard]] std::function<GraphCode(GraphCode)> patched_explainer(const MotifModel& m);

/// Classifier over all graphs of the model's node count from a rule in code order.
[[nodiscard]] Classifier table_classifier(const std::vector<int>& rule);

/// Checks that the patched explainer keeps the Bayes label on every motif graph, stays
/// within gamma = max_i |g_i| edges, and reaches CE = H(Y | f*(G)).
[[nodiscard]] VerificationReport verify_patched_explainer(const MotifModel& m, double alpha = 1e3);

struct LocalBound {
  std::size_t explainers = 0;
  std::size_t feasible = 0;
  double gamma = 0.0;
  double local_best_ce = 0.0;
  double patched_ce = 0.0;
  double local_best_objective = 0.0;  // modified GIB at alpha
  double patched_objective = 0.0;
  bool single_motif = false;
};

/// Exhaustive search over deterministic r-local explainers: each node's inclusion is a
/// function of its (v, r)-restriction, and the explanation is the induced subgraph on the
/// included nodes. Only explainers with E|G'| <= max motif size count. Throws
/// UnsupportedSizeError when the number of explainers exceeds 2^max_log2.
[[nodiscard]] LocalBound local_explainer_bound(const MotifModel& m, int r, double alpha = 1e3, int max_log2 = 22);

[[nodiscard]] VerificationReport verify_local_gap(const MotifModel& m, int r, double alpha = 1e3);

struct TheoryConfig {
  int mdpi_trials = 1000;
  int signaling_tasks = 10;
  double signaling_alpha = 4.0;
  std::uint64_t seed = 0;
};

/// Runs every check and returns one report line each.
[[nodiscard]] std::vector<VerificationReport> run_theory_suite(const TheoryConfig& cfg);

}  // namespace fx::theory
