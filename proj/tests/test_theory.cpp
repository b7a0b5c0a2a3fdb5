#include <cmath>

#include "doctest.h"
#include "factexplain/errors.hpp"
#include "factexplain/theory.hpp"

using namespace fx;
using namespace fx::theory;

namespace {

FiniteTask parity_task(std::uint64_t seed) {
  Rng rng(seed);
  FiniteTask t = random_degraded_task(rng);
  std::vector<int> h;
  for (std::size_t g = 0; g < t.graphs.size(); ++g) {
    const double pg = t.joint(g, 0) + t.joint(g, 1);
    const int y = edge_count(t.graphs[g]) % 2;
    t.joint(g, y) = pg;
    t.joint(g, 1 - y) = 0.0;
    h.push_back(y);
  }
  t.h = h;
  return t;
}

// Graphs on three nodes: the empty graph, (0,1), (0,2) and both edges.
FiniteTask toy_task() {
  FiniteTask t;
  t.nodes = 3;
  t.graphs = {0, 1, 2, 3};
  t.joint = Matrix{{0.4, 0.0}, {0.1, 0.2}, {0.0, 0.2}, {0.0, 0.1}};
  return t;
}

}  // namespace

TEST_CASE("graph codes") {
  CHECK(pair_slots(4) == 6);
  CHECK(pair_bit(4, 0, 1) == 1u);
  CHECK(pair_bit(4, 3, 2) == 1u << 5);
  CHECK(encode(4, {{0, 1}, {2, 3}}) == (1u | 1u << 5));
  CHECK(all_graphs(3).size() == 8);
  CHECK_THROWS_AS((void)pair_bit(3, 1, 1), ArgumentError);
  // Path 0-1-2 plus an isolated node 3.
  const GraphCode path = encode(4, {{0, 1}, {1, 2}});
  CHECK(ball(4, path, 0, 0) == 1u);
  CHECK(ball(4, path, 0, 1) == 3u);
  CHECK(ball(4, path, 0, 2) == 7u);
  CHECK(ball(4, path, 3, 5) == 8u);
  CHECK(induced(4, path, 0b0011) == pair_bit(4, 0, 1));
  CHECK(induced(4, path, 0b0101) == 0u);
}

TEST_CASE("mutual information examples") {
  CHECK(mutual_information(Matrix{{0.06, 0.14}, {0.24, 0.56}}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mutual_information(Matrix{{0.5, 0.0}, {0.0, 0.5}}) == 1.0);
  CHECK(mutual_information(Matrix{{0.45, 0.05}, {0.05, 0.45}}) == doctest::Approx(1.0 - binary_entropy(0.1)).epsilon(1e-14));
  CHECK(1.0 - binary_entropy(0.1) == doctest::Approx(0.531004).epsilon(1e-6));
  CHECK_THROWS_AS((void)mutual_information(Matrix{{0.5, 0.4}}), ArgumentError);
  CHECK_THROWS_AS((void)mutual_information(Matrix{{1.2, -0.2}}), ArgumentError);
  CHECK(conditional_entropy(Matrix{{0.25, 0.25}, {0.5, 0.0}}) == 0.5);
}

TEST_CASE("mutual information is bounded by both entropies") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nx = 1 + rng.below(5), ny = 1 + rng.below(5);
    Matrix j(nx, ny);
    double total = 0.0;
    for (double& v : j.values()) total += v = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    if (total == 0.0) j(0, 0) = total = 1.0;
    for (double& v : j.values()) v /= total;
    std::vector<double> px(nx, 0.0), py(ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t y = 0; y < ny; ++y) {
        px[x] += j(x, y);
        py[y] += j(x, y);
      }
    }
    const double mi = mutual_information(j);
    CHECK(mi >= 0.0);
    CHECK(mi <= std::min(entropy(px), entropy(py)) + 1e-12);
    CHECK(conditional_entropy(j) == doctest::Approx(entropy(j.values()) - entropy(px)).epsilon(1e-12));
  }
}

TEST_CASE("objectives on a hand-built channel") {
  const FiniteTask t = toy_task();
  CHECK_NOTHROW(validate(t));
  Channel ch{{0, 1}, Matrix{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {0.0, 1.0}}};
  // G' is uniform and only graph 2 (mass 0.2) is split evenly: I = 1 - 0.2.
  CHECK(channel_information(t, ch) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(expected_size(t, ch) == doctest::Approx(0.5).epsilon(1e-14));
  // Each output carries labels in proportion 0.8 / 0.2.
  CHECK(gib_objective(t, ch, 2.0) == doctest::Approx(0.8 + 2.0 * binary_entropy(0.2)).epsilon(1e-14));
  CHECK(gib_objective(t, ch, 2.0) == doctest::Approx(2.2438561897747247).epsilon(1e-14));

  const Classifier faithful = [](GraphCode g) -> std::optional<int> { return g == 0 ? 0 : 1; };
  const Classifier constant = [](GraphCode) -> std::optional<int> { return 1; };
  const Classifier partial = [](GraphCode g) -> std::optional<int> {
    if (g == 1) return std::nullopt;
    return 0;
  };
  CHECK(prediction_cross_entropy(t, ch, faithful) == doctest::Approx(binary_entropy(0.2)).epsilon(1e-14));
  CHECK(prediction_cross_entropy(t, ch, constant) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(modified_gib_objective(t, ch, faithful, 3.0) == doctest::Approx(0.8 + 3.0 * binary_entropy(0.2)).epsilon(1e-14));
  CHECK_THROWS_AS((void)prediction_cross_entropy(t, ch, partial), ArgumentError);

  // Identity: I(G, G) = H(G). Constant: nothing is transmitted.
  const Channel identity = explainer_channel(t, [](GraphCode g) { return g; });
  CHECK(gib_objective(t, identity, 0.0) == doctest::Approx(entropy(t.graph_marginal())).epsilon(1e-14));
  const Channel constant_channel = explainer_channel(t, [](GraphCode) { return GraphCode{3}; });
  CHECK(channel_information(t, constant_channel) == 0.0);
  CHECK(gib_objective(t, constant_channel, 1.5) == doctest::Approx(1.5 * entropy(t.label_marginal())).epsilon(1e-14));

  Channel bad{{0}, Matrix{{1.0}, {1.0}, {0.7}, {1.0}}};
  CHECK_THROWS_AS(validate(bad, t), ArgumentError);
}

TEST_CASE("task validation") {
  FiniteTask t = toy_task();
  t.h = std::vector<int>{0, 1, 1, 1};
  CHECK_THROWS_AS(validate(t), ArgumentError);  // graph 1 has P(Y=1) = 2/3, graphs 2 and 3 have 1
  FiniteTask d = parity_task(1);
  CHECK_NOTHROW(validate(d));
  d.joint(0, 0) *= 2.0;
  CHECK_THROWS_AS(validate(d), ArgumentError);
}

TEST_CASE("modified data processing inequality") {
  SUBCASE("copies give equality") {
    MarkovTriple t{{0.2, 0.3, 0.5}, Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    const auto v = mdpi_values(t);
    CHECK(v.i_ab == doctest::Approx(entropy(t.b)).epsilon(1e-14));
    CHECK(v.i_a_prime_b == doctest::Approx(v.i_ab).epsilon(1e-14));
  }
  SUBCASE("a tail independent of B carries nothing") {
    MarkovTriple t{{0.5, 0.5}, Matrix{{0.9, 0.1}, {0.2, 0.8}}, Matrix{{0.3, 0.7}, {0.3, 0.7}}};
    const auto v = mdpi_values(t);
    CHECK(v.i_a_prime_b == 0.0);
    CHECK(v.i_ab > 0.0);
  }
  SUBCASE("random triples") {
    const auto r = verify_mdpi(1000, 0);
    CHECK(r.passed);
    CHECK(r.instances == 1000);
    CHECK(r.max_violation <= 1e-9);
    CHECK(r.note.rfind("0 violations", 0) == 0);
  }
  CHECK_THROWS_AS((void)verify_mdpi(0, 0), ArgumentError);
}

TEST_CASE("signaling explainer on the parity task") {
  const FiniteTask t = parity_task(3);
  for (double alpha : {0.5, 3.0}) {
    CAPTURE(alpha);
    const auto c = verify_signaling(t, alpha, 3.0);
    CHECK(c.passed);
    CHECK(c.signaling_objective == doctest::Approx(c.searched_optimum).epsilon(1e-9));
    CHECK(c.independence <= 1e-12);
    CHECK(c.searched_optimum <= c.deterministic_optimum + 1e-12);
  }
  // With alpha = 0 the best channel transmits nothing.
  const auto zero = verify_signaling(t, 0.0, 3.0);
  CHECK(zero.passed);
  CHECK(zero.searched_optimum == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("signaling construction depends on G only through h") {
  const FiniteTask t = parity_task(4);
  const auto search = best_deterministic_channel(t, all_graphs(3), 1.0, 3.0);
  const Channel s = construct_signaling_explainer(t, search.channel);
  CHECK_NOTHROW(validate(s, t));
  for (std::size_t g = 0; g < t.graphs.size(); ++g) {
    for (std::size_t g2 = 0; g2 < t.graphs.size(); ++g2) {
      if ((*t.h)[g] != (*t.h)[g2]) continue;
      for (std::size_t o = 0; o < s.outputs.size(); ++o) CHECK(s.rows(g, o) == s.rows(g2, o));
    }
  }
  CHECK(conditional_information_given_h(t, s) <= 1e-12);
  CHECK(expected_size(t, s) == doctest::Approx(expected_size(t, search.channel)).epsilon(1e-12));

  FiniteTask plain = t;
  plain.h.reset();
  CHECK_THROWS_AS((void)construct_signaling_explainer(plain, search.channel), ArgumentError);
}

TEST_CASE("constant h makes the label independent of G") {
  Rng rng(8);
  FiniteTask t = random_degraded_task(rng);
  const auto py = std::vector<double>{0.3, 0.7};
  const auto pg = t.graph_marginal();
  for (std::size_t g = 0; g < pg.size(); ++g) {
    t.joint(g, 0) = pg[g] * py[0];
    t.joint(g, 1) = pg[g] * py[1];
  }
  t.h = std::vector<int>(pg.size(), 0);
  const auto c = verify_signaling(t, 2.0, 3.0);
  CHECK(c.passed);
  CHECK(c.searched_optimum == doctest::Approx(2.0 * entropy(py)).epsilon(1e-12));
}

TEST_CASE("signaling check rejects tasks that are not degraded") {
  FiniteTask t = toy_task();
  CHECK_THROWS_AS((void)verify_signaling(t, 1.0, 3.0), ArgumentError);
  t.h = std::vector<int>{0, 0, 1, 1};
  CHECK_THROWS_AS((void)verify_signaling(t, 1.0, 3.0), ArgumentError);
}

TEST_CASE("signaling suite on random degraded tasks") {
  const auto r = verify_signaling_suite(3, 21, 4.0);
  CHECK(r.passed);
  CHECK(r.instances == 3);
  CHECK(r.max_violation <= 1e-9);
}

TEST_CASE("a binding size budget never makes the signaling channel worse") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    const FiniteTask t = random_degraded_task(rng);
    const auto det = best_deterministic_channel(t, all_graphs(3), 2.0, 0.6);
    CHECK(expected_size(t, det.channel) <= 0.6 + 1e-12);
    const Channel s = construct_signaling_explainer(t, det.channel);
    CHECK(expected_size(t, s) <= 0.6 + 1e-9);
    CHECK(gib_objective(t, s, 2.0) <= det.objective + 1e-9);
  }
}

TEST_CASE("the two-bit mixture task has no Boolean sufficient statistic") {
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    CAPTURE(p);
    CHECK(degrading_boolean_maps(p) == 0);
  }
  // p = 1 makes Y = X1, which X1 and its complement both capture.
  CHECK(degrading_boolean_maps(1.0) == 2);
}

TEST_CASE("Bayes rule on motif models") {
  const MotifModel one{4, {encode(4, {{0, 1}})}, 0.1, {0.3}};
  const auto rule = bayes_rule(one);
  REQUIRE(rule.size() == 64);
  CHECK(rule[0] == 0);
  for (GraphCode g = 0; g < 64; ++g) CHECK(rule[g] == motif_indicator(one, g));
  const auto r = verify_bayes_indicator(one);
  CHECK(r.passed);
  CHECK(r.instances == 64);

  const MotifModel triangle{4, {encode(4, {{1, 2}, {2, 3}, {1, 3}})}, 0.25, {0.6}};
  CHECK(verify_bayes_indicator(triangle).passed);
  CHECK(bayes_rule(triangle)[triangle.motifs[0]] == 1);

  const auto task = motif_task(one);
  CHECK_NOTHROW(validate(task));

  MotifModel broken = one;
  broken.p_i = {0.05};
  const auto skipped = verify_bayes_indicator(broken);
  CHECK(skipped.skipped);
  CHECK(skipped.note.find("below P_G0") != std::string::npos);
  CHECK_THROWS_AS((void)motif_task(broken), ConfigError);
  broken = one;
  broken.motifs.push_back(encode(4, {{1, 2}}));
  broken.p_i.push_back(0.5);
  CHECK(assumption_violation(broken).value().find("share a node") != std::string::npos);
  broken = one;
  broken.p = 0.5;
  CHECK(assumption_violation(broken).has_value());
}

TEST_CASE("Bayes rule matches the indicator on every small model") {
  const auto models = small_motif_models(4);
  std::size_t checked = 0;
  for (const auto& m : models) {
    const auto r = verify_bayes_indicator(m);
    if (r.skipped) continue;
    ++checked;
    CHECK(r.passed);
  }
  CHECK(checked > 300);
}

TEST_CASE("patched explainer") {
  const GraphCode g1 = encode(4, {{0, 1}}), g2 = encode(4, {{2, 3}});
  const MotifModel m{4, {g1, g2}, 0.1, {0.3, 0.3}};
  const auto psi = patched_explainer(m);
  CHECK(psi(g2 | pair_bit(4, 0, 2)) == g2);
  CHECK(psi(g1 | g2) == g1);
  CHECK(psi(pair_bit(4, 1, 2)) == 0u);
  const auto r = verify_patched_explainer(m);
  CHECK(r.passed);
  CHECK(r.max_violation <= 1e-12);
  for (const auto& model : small_motif_models(4)) {
    const auto rep = verify_patched_explainer(model);
    if (!rep.skipped) CHECK(rep.passed);
  }
}

TEST_CASE("local explainers against the patched explainer") {
  const MotifModel two{4, {encode(4, {{0, 1}}), encode(4, {{2, 3}})}, 0.1, {0.3, 0.3}};
  const auto b = local_explainer_bound(two, 0);
  CHECK(b.explainers == 16);
  CHECK(b.feasible >= 1);
  CHECK(b.gamma == 1.0);
  CHECK(b.local_best_ce > b.patched_ce + 1e-3);
  CHECK(b.local_best_objective > b.patched_objective);
  CHECK(verify_local_gap(two, 0).passed);

  // A single motif leaves nothing for locality to miss.
  const MotifModel one{2, {encode(2, {{0, 1}})}, 0.1, {0.3}};
  const auto single = local_explainer_bound(one, 0);
  CHECK(single.single_motif);
  CHECK(single.local_best_ce == doctest::Approx(single.patched_ce).epsilon(1e-12));
  const auto rep = verify_local_gap(one, 0);
  CHECK(rep.passed);
  CHECK(rep.note.find("single motif") != std::string::npos);

  CHECK_THROWS_AS((void)local_explainer_bound(two, 1), UnsupportedSizeError);
  CHECK_THROWS_AS((void)local_explainer_bound(two, -1), ArgumentError);
}

TEST_CASE("theory suite and report") {
  TheoryConfig cfg;
  cfg.mdpi_trials = 50;
  cfg.signaling_tasks = 2;
  const auto reports = run_theory_suite(cfg);
  REQUIRE(reports.size() == 6);
  for (const auto& r : reports) {
    CAPTURE(r.claim);
    CAPTURE(r.note);
    CHECK(r.passed);
  }
  const auto j = to_json(reports[0]);
  CHECK(j.at("claim") == "modified data processing inequality");
  CHECK(j.at("instances") == 50);
  const std::string table = report_table(reports);
  CHECK(table.find("claim") == 0);
  CHECK(table.find("FAIL") == std::string::npos);
}
