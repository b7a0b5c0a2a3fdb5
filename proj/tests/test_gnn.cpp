#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "factexplain/errors.hpp"
#include "factexplain/gnn.hpp"
#include "factexplain/rng.hpp"
#include "factexplain/synth.hpp"
#include "support/gradcheck.hpp"
#include "support/graphs.hpp"
#include "support/op_catalogue.hpp"

using namespace fx;
using fx::testing::random_graph;
using fx::testing::relabel;

namespace {

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("gcn_layer examples") {
  Matrix eye{{1.0, 0.0}, {0.0, 1.0}};
  Graph single(1, {}, Matrix{{0.3, 2.0}});
  CHECK(gcn_layer(single.features(), single, eye) == single.features());

  Graph pair = make_graph(2, {{0, 1}}, 2);
  CHECK(gcn_layer(Matrix(2, 2), pair, eye) == Matrix(2, 2));

  // Both nodes have degree 1, so Â = [[1/2, 1/2], [1/2, 1/2]].
  Matrix h{{1.0, 2.0}, {3.0, -4.0}};
  Matrix w{{1.0, 0.5}, {-1.0, 2.0}};
  // H W = [[-1, 4.5], [7, -6.5]]; Â H W = [[3, -1], [3, -1]]; ReLU -> [[3, 0], [3, 0]].
  Matrix out = gcn_layer(h, pair, w);
  CHECK(out(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(out(0, 1) == 0.0);
  CHECK(out(1, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)gcn_layer(Matrix(3, 2), pair, w), ShapeError);
  CHECK_THROWS_AS((void)gcn_layer(h, pair, Matrix(3, 1)), ShapeError);
}

TEST_CASE("forward contract") {
  Rng rng(1);
  GnnConfig cfg;
  cfg.classes = 3;
  cfg.task = TaskKind::GraphClassification;
  GnnModel graph_model(cfg, 4);
  cfg.task = TaskKind::NodeClassification;
  GnnModel node_model(cfg, 4);
  for (int t = 0; t < 20; ++t) {
    Graph g = random_graph(rng, 1 + static_cast<int>(rng.below(8)), 0.4, 4);
    Matrix pg = graph_model.predict_proba(g);
    CHECK(pg.rows() == 1);
    CHECK(pg.cols() == 3);
    CHECK(pg.all_finite());
    Matrix pn = node_model.predict_proba(g);
    CHECK(pn.rows() == static_cast<std::size_t>(g.node_count()));
    CHECK(pn.all_finite());
    CHECK(node_model.embeddings(g).cols() == 20);
  }
  CHECK_THROWS_AS((void)graph_model.predict_proba(make_graph(3, {{0, 1}}, 5)), ShapeError);
}

TEST_CASE("isomorphic inputs give identical outputs") {
  Rng rng(2);
  GnnConfig cfg;
  cfg.task = TaskKind::GraphClassification;
  for (auto readout : {Readout::Mean, Readout::Max, Readout::MeanMax}) {
    cfg.readout = readout;
    GnnModel m(cfg, 3);
    for (int t = 0; t < 10; ++t) {
      Graph g = random_graph(rng, 6, 0.5, 3);
      std::vector<int> perm{0, 1, 2, 3, 4, 5};
      rng.shuffle(perm.begin(), perm.end());
      Matrix a = m.predict_proba(g);
      Matrix b = m.predict_proba(relabel(g, perm));
      for (std::size_t c = 0; c < a.cols(); ++c) CHECK(a(0, c) == doctest::Approx(b(0, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("edgeless graph: each node sees only itself") {
  GnnConfig cfg;
  cfg.task = TaskKind::NodeClassification;
  GnnModel m(cfg, 2);
  Graph g(3, {}, Matrix{{1.0, 2.0}, {1.0, 2.0}, {-3.0, 0.5}});
  Matrix z = m.embeddings(g);
  for (std::size_t c = 0; c < z.cols(); ++c) CHECK(z(0, c) == z(1, c));
  Graph alone(1, {}, Matrix{{-3.0, 0.5}});
  Matrix za = m.embeddings(alone);
  for (std::size_t c = 0; c < z.cols(); ++c) CHECK(z(2, c) == doctest::Approx(za(0, c)).epsilon(1e-14));
  CHECK(m.predict_proba(g).all_finite());
}

TEST_CASE("forward pass matches finite differences") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    GnnConfig cfg;
    cfg.hidden = 4;
    cfg.task = t % 2 ? TaskKind::NodeClassification : TaskKind::GraphClassification;
    cfg.readout = t % 3 == 0 ? Readout::MeanMax : Readout::Mean;
    cfg.seed = rng.next_u64();
    GnnModel m(cfg, 3);
    std::vector<ad::Parameter*> params;
    m.collect(params);
    // Zero biases put ReLU inputs exactly on the kink; move them off it.
    for (auto* p : params) p->value = testing::random_matrix(rng, p->value.rows(), p->value.cols());
    Graph g = random_graph(rng, 3 + static_cast<int>(rng.below(4)), 0.6, 3);
    if (g.edge_count() == 0) continue;
    const Matrix dir = testing::random_matrix(rng, cfg.task == TaskKind::NodeClassification ? g.node_count() : 1, 2);
    auto weights = [&](ad::Tape& tape, const std::vector<ad::Var>& x) {
      return testing::project(tape, m.forward(tape, g, x[0]).logits, dir);
    };
    auto res = testing::grad_check(weights, {testing::random_matrix(rng, g.edge_count(), 1, 0.2, 1.0)});
    CHECK(res.max_rel_error < 1e-4);

    const std::vector<std::size_t> seg(static_cast<std::size_t>(g.node_count()), 0);
    auto loss = [&](ad::Tape& tape) {
      auto out = m.forward_batch(tape, g, tape.constant(Matrix(g.edge_count(), 1, 1.0)), seg,
                                 cfg.task == TaskKind::GraphClassification ? 1 : 0, false);
      return testing::project(tape, out.logits, dir);
    };
    CHECK(testing::grad_check_params(loss, params).max_rel_error < 1e-4);
  }
}

TEST_CASE("locality: edits beyond the receptive field leave the output unchanged") {
  Rng rng(4);
  GnnConfig cfg;
  cfg.task = TaskKind::NodeClassification;
  cfg.classes = 3;
  GnnModel m(cfg, 1);
  int edits = 0;
  for (int t = 0; t < 40; ++t) {
    Graph g = gen_ba(40, 1, rng.next_u64());
    const int v = static_cast<int>(rng.below(40));
    const auto dist = bfs_distances(g, v);
    std::vector<int> far;
    for (int u = 0; u < 40; ++u) {
      if (dist[static_cast<std::size_t>(u)] > cfg.layers) far.push_back(u);
    }
    if (far.size() < 2) continue;
    std::vector<Edge> edges = g.edges();
    const int a = far[rng.below(far.size())], b = far[rng.below(far.size())];
    if (a == b) continue;
    if (g.has_edge(a, b)) {
      edges.erase(std::find(edges.begin(), edges.end(), Edge::canonical(a, b)));
    } else {
      edges.push_back({a, b});
    }
    Graph edited(40, edges, g.features());
    ++edits;
    Matrix p0 = m.predict_proba(g), p1 = m.predict_proba(edited);
    for (std::size_t c = 0; c < 3; ++c) CHECK(p0(static_cast<std::size_t>(v), c) == p1(static_cast<std::size_t>(v), c));

    // The prediction at v is fully determined by the (layers+1)-ball.
    auto r = restrict_graph(g, v, cfg.layers + 1);
    Matrix pr = m.predict_proba(r.graph);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(pr(static_cast<std::size_t>(r.center), c) == doctest::Approx(p0(static_cast<std::size_t>(v), c)).epsilon(1e-12));
    }
  }
  CHECK(edits > 10);
}

TEST_CASE("khop computation graph") {
  Graph tree = gen_binary_tree(2);
  auto whole = khop_computation_graph(tree, 0, 3);
  CHECK(whole.graph.node_count() == 7);
  CHECK(whole.graph.edge_count() == 6);
  auto alone = khop_computation_graph(tree, 4, 0);
  CHECK(alone.graph.node_count() == 1);
  auto r = restrict_graph(tree, 1, 1);
  auto k = khop_computation_graph(tree, 1, 1);
  CHECK(k.graph == r.graph);
  CHECK(k.new_to_old == r.new_to_old);
  CHECK_THROWS_AS((void)khop_computation_graph(tree, 99, 1), ArgumentError);
}

TEST_CASE("checkpoint round trip") {
  GnnConfig cfg;
  cfg.hidden = 7;
  cfg.readout = Readout::MeanMax;
  cfg.seed = 9;
  GnnModel m(cfg, 3);
  auto path = std::filesystem::temp_directory_path() / "fx_test_model.json";
  m.save(path);
  GnnModel back = GnnModel::load(path);
  Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, 3);
  CHECK(back.predict_proba(g) == m.predict_proba(g));
  CHECK(back.config().readout == Readout::MeanMax);
  CHECK(back.to_json() == m.to_json());
}

TEST_CASE("classifier training: ba_shapes") {
  std::vector<double> acc;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    DatasetSpec spec;
    spec.kind = DatasetKind::BaShapes;
    spec.seed = seed;
    Dataset d = gen_node_dataset(spec);
    GnnConfig cfg;
    cfg.task = d.task;
    cfg.classes = d.num_classes;
    cfg.seed = seed;
    AccuracyReport rep;
    (void)train_classifier(cfg, d, &rep);
    acc.push_back(rep.test);
    CHECK(*std::min_element(rep.loss_curve.begin(), rep.loss_curve.end()) < 0.5 * rep.loss_curve.front());
  }
  CHECK(median3(acc) >= 0.90);
}

TEST_CASE("classifier training: ba_2motifs and determinism") {
  DatasetSpec spec;
  spec.kind = DatasetKind::Ba2Motifs;
  spec.base_nodes = 20;
  spec.ba_m = 1;
  spec.graph_count = 200;
  Dataset d = gen_graph_dataset(spec);
  GnnConfig cfg;
  cfg.task = d.task;
  AccuracyReport a, b;
  GnnModel m1 = train_classifier(cfg, d, &a);
  CHECK(a.test >= 0.95);
  GnnModel m2 = train_classifier(cfg, d, &b);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(m1.to_json() == m2.to_json());

  cfg.task = TaskKind::NodeClassification;
  CHECK_THROWS_AS((void)train_classifier(cfg, d), ArgumentError);
}

TEST_CASE("classifier training: random labels carry no signal") {
  DatasetSpec spec;
  spec.kind = DatasetKind::TreeCycles;
  spec.seed = 3;
  Dataset d = gen_node_dataset(spec);
  Rng rng(11);
  GraphAnnotations a = d.graphs.front().annotations();
  for (int& l : a.node_labels) l = static_cast<int>(rng.below(2));
  d.graphs.front() = d.graphs.front().with_annotations(a);
  GnnConfig cfg;
  cfg.task = d.task;
  AccuracyReport rep;
  (void)train_classifier(cfg, d, &rep);
  CHECK(std::abs(rep.test - 0.5) <= 0.1);
}
