#include "factexplain/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <queue>

#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"

namespace fx {

namespace {

std::vector<std::size_t> edge_ids_of(const std::vector<Edge>& sorted_edges,
                                     const std::vector<Edge>& subset, const char* what) {
  std::vector<std::size_t> ids;
  ids.reserve(subset.size());
  for (const Edge& raw : subset) {
    const Edge e = Edge::canonical(raw.u, raw.v);
    auto it = std::lower_bound(sorted_edges.begin(), sorted_edges.end(), e);
    if (it == sorted_edges.end() || *it != e) {
      throw ArgumentError(std::string(what) + " edge (" + std::to_string(e.u) + "," +
                          std::to_string(e.v) + ") is not an edge of the graph");
    }
    ids.push_back(static_cast<std::size_t>(it - sorted_edges.begin()));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<Edge> edges_from_ids(const std::vector<Edge>& edges,
                                 const std::vector<std::size_t>& ids) {
  std::vector<Edge> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(edges[id]);
  return out;
}

}  // namespace

Graph::Graph(int node_count, std::vector<Edge> edges, Matrix features,
             GraphAnnotations annotations)
    : node_count_(node_count), features_(std::move(features)), annotations_(std::move(annotations)) {
  if (node_count_ < 0) throw ArgumentError("negative node count");
  for (Edge& e : edges) {
    if (e.u == e.v) throw ArgumentError("self-loop on node " + std::to_string(e.u));
    if (!valid_node(e.u) || !valid_node(e.v)) {
      throw ArgumentError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                          ") references a node outside [0," + std::to_string(node_count_) + ")");
    }
    e = Edge::canonical(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  if (features_.empty() && node_count_ > 0 && features_.cols() == 0) {
    features_ = Matrix(static_cast<std::size_t>(node_count_), 1, 1.0);
  }
  if (features_.rows() != static_cast<std::size_t>(node_count_)) {
    throw ShapeError("feature matrix " + features_.shape_string() + " for " +
                     std::to_string(node_count_) + " nodes");
  }
  if (!annotations_.node_labels.empty() &&
      annotations_.node_labels.size() != static_cast<std::size_t>(node_count_)) {
    throw ArgumentError("node_labels length does not match node count");
  }

  adjacency_.assign(static_cast<std::size_t>(node_count_), {});
  for (const Edge& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());

  if (annotations_.gt_mask) {
    gt_ids_ = edge_ids_of(edges_, *annotations_.gt_mask, "gt_mask");
    annotations_.gt_mask = edges_from_ids(edges_, gt_ids_);
  }
  for (auto& m : annotations_.motifs) {
    motif_ids_.push_back(edge_ids_of(edges_, m, "motif"));
    m = edges_from_ids(edges_, motif_ids_.back());
  }
}

const std::vector<int>& Graph::neighbors(int v) const {
  if (!valid_node(v)) throw ArgumentError("invalid node index " + std::to_string(v));
  return adjacency_[v];
}

std::optional<std::size_t> Graph::edge_index(int a, int b) const {
  if (a == b) return std::nullopt;
  const Edge e = Edge::canonical(a, b);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
  if (it == edges_.end() || *it != e) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

std::vector<char> Graph::gt_indicator() const {
  std::vector<char> out(edges_.size(), 0);
  for (auto id : gt_ids_) out[id] = 1;
  return out;
}

Graph Graph::with_annotations(GraphAnnotations annotations) const {
  return Graph(node_count_, edges_, features_, std::move(annotations));
}

Graph Graph::with_features(Matrix features) const {
  return Graph(node_count_, edges_, std::move(features), annotations_);
}

bool operator==(const Graph& a, const Graph& b) {
  return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ && a.features_ == b.features_ &&
         a.annotations_.label == b.annotations_.label &&
         a.annotations_.node_labels == b.annotations_.node_labels &&
         a.annotations_.gt_mask == b.annotations_.gt_mask &&
         a.annotations_.motifs == b.annotations_.motifs;
}

Graph make_graph(int node_count, const std::vector<std::pair<int, int>>& pairs,
                 std::size_t feature_dim) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [a, b] : pairs) edges.push_back({a, b});
  return Graph(node_count, std::move(edges),
               Matrix(static_cast<std::size_t>(node_count), feature_dim, 1.0));
}

Motif make_motif(std::string name, Graph graph, std::optional<int> anchor) {
  if (graph.node_count() == 0) throw ArgumentError("motif '" + name + "' is empty");
  const auto dist = bfs_distances(graph, 0);
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d == kInfiniteDistance; })) {
    throw ArgumentError("motif '" + name + "' is not connected");
  }
  if (anchor && !graph.valid_node(*anchor)) throw ArgumentError("motif anchor out of range");
  return Motif{std::move(name), std::move(graph), anchor};
}

EdgeProbabilities::EdgeProbabilities(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double p = values_[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ArgumentError("edge probability " + std::to_string(i) + " = " + std::to_string(p) +
                          " outside [0,1]");
    }
  }
}

double EdgeProbabilities::sum() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

std::vector<int> bfs_distances(const Graph& g, int source, int max_radius) {
  if (!g.valid_node(source)) throw ArgumentError("invalid node index " + std::to_string(source));
  std::vector<int> dist(static_cast<std::size_t>(g.node_count()), kInfiniteDistance);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (dist[u] >= max_radius) continue;
    for (int w : g.neighbors(u)) {
      if (dist[w] == kInfiniteDistance) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

int geodesic_distance(const Graph& g, int u, int v) {
  if (!g.valid_node(v)) throw ArgumentError("invalid node index " + std::to_string(v));
  return bfs_distances(g, u)[v];
}

int geodesic_diameter(const Graph& g, const std::vector<int>& nodes) {
  int best = 0;
  for (int a : nodes) {
    const auto dist = bfs_distances(g, a);
    for (int b : nodes) best = std::max(best, dist[b]);
  }
  return best;
}

int geodesic_diameter(const Graph& g) {
  std::vector<int> all(static_cast<std::size_t>(g.node_count()));
  std::iota(all.begin(), all.end(), 0);
  return geodesic_diameter(g, all);
}

Restriction induced_subgraph(const Graph& g, std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  Restriction out;
  out.old_to_new.assign(static_cast<std::size_t>(g.node_count()), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!g.valid_node(nodes[i])) throw ArgumentError("invalid node index " + std::to_string(nodes[i]));
    out.old_to_new[nodes[i]] = static_cast<int>(i);
  }
  out.new_to_old = nodes;

  // Old edges are sorted and the node map is monotone, so new edges come out sorted too.
  std::vector<Edge> edges;
  for (std::size_t id = 0; id < g.edge_count(); ++id) {
    const Edge& e = g.edges()[id];
    const int a = out.old_to_new[e.u];
    const int b = out.old_to_new[e.v];
    if (a >= 0 && b >= 0) {
      edges.push_back({a, b});
      out.edge_new_to_old.push_back(id);
    }
  }

  const auto& src = g.features();
  Matrix feats(nodes.size(), src.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto from = src.row(static_cast<std::size_t>(nodes[i]));
    std::copy(from.begin(), from.end(), feats.row(i).begin());
  }

  GraphAnnotations ann;
  ann.label = g.label();
  if (!g.node_labels().empty()) {
    for (int v : nodes) ann.node_labels.push_back(g.node_labels()[v]);
  }
  auto remap = [&](const std::vector<std::size_t>& ids) {
    std::vector<Edge> kept;
    for (auto id : ids) {
      const Edge& e = g.edges()[id];
      const int a = out.old_to_new[e.u];
      const int b = out.old_to_new[e.v];
      if (a >= 0 && b >= 0) kept.push_back({a, b});
    }
    return kept;
  };
  if (g.has_gt_mask()) ann.gt_mask = remap(g.gt_edge_ids());
  for (const auto& m : g.motif_edge_ids()) {
    auto kept = remap(m);
    if (!kept.empty()) ann.motifs.push_back(std::move(kept));
  }
  out.graph = Graph(static_cast<int>(nodes.size()), std::move(edges), std::move(feats), std::move(ann));
  return out;
}

Restriction restrict_graph(const Graph& g, int v, int r) {
  if (r < 0) throw ArgumentError("restriction radius must be non-negative");
  const auto dist = bfs_distances(g, v, r);
  std::vector<int> ball;
  for (int u = 0; u < g.node_count(); ++u) {
    if (dist[u] <= r) ball.push_back(u);
  }
  Restriction out = induced_subgraph(g, std::move(ball));
  out.center = out.old_to_new[v];
  return out;
}

namespace {

struct Matcher {
  const Graph& host;
  const Graph& pattern;
  std::vector<int> order;              // pattern nodes in search order
  std::vector<int> mapping;            // pattern -> host, -1 unmapped
  std::vector<char> used;              // host nodes already taken

  bool search(std::size_t depth) {
    if (depth == order.size()) return true;
    const int p = order[depth];
    for (int h = 0; h < host.node_count(); ++h) {
      if (used[h] || host.degree(h) < pattern.degree(p)) continue;
      bool ok = true;
      for (int q : pattern.neighbors(p)) {
        if (mapping[q] >= 0 && !host.has_edge(h, mapping[q])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      mapping[p] = h;
      used[h] = 1;
      if (search(depth + 1)) return true;
      mapping[p] = -1;
      used[h] = 0;
    }
    return false;
  }
};

}  // namespace

std::optional<std::vector<int>> find_subgraph(const Graph& g, const Graph& motif) {
  if (motif.node_count() > kMaxMotifNodes) {
    throw UnsupportedSizeError("motif has " + std::to_string(motif.node_count()) +
                               " nodes; containment search supports at most " +
                               std::to_string(kMaxMotifNodes));
  }
  if (motif.node_count() > g.node_count() || motif.edge_count() > g.edge_count()) {
    return std::nullopt;
  }
  Matcher m{g, motif, {}, std::vector<int>(static_cast<std::size_t>(motif.node_count()), -1),
            std::vector<char>(static_cast<std::size_t>(g.node_count()), 0)};

  // Search order: repeatedly take the unplaced node with most already-placed neighbours,
  // then highest degree. Keeps the partial map connected so edge checks prune early.
  std::vector<char> placed(static_cast<std::size_t>(motif.node_count()), 0);
  for (int step = 0; step < motif.node_count(); ++step) {
    int best = -1;
    std::pair<int, int> best_key{-1, -1};
    for (int p = 0; p < motif.node_count(); ++p) {
      if (placed[p]) continue;
      int links = 0;
      for (int q : motif.neighbors(p)) links += placed[q];
      const std::pair<int, int> key{links, motif.degree(p)};
      if (key > best_key) {
        best_key = key;
        best = p;
      }
    }
    placed[best] = 1;
    m.order.push_back(best);
  }
  if (m.search(0)) return m.mapping;
  return std::nullopt;
}

bool contains_subgraph(const Graph& g, const Motif& m) { return find_subgraph(g, m.graph).has_value(); }

std::vector<std::size_t> top_r_edge_ids(const EdgeProbabilities& probs, std::size_t r) {
  std::vector<std::size_t> ids(probs.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  ids.resize(std::min(r, ids.size()));
  return ids;
}

Graph apply_mask(const Graph& g, const EdgeProbabilities& probs, const MaskMode& mode) {
  if (probs.size() != g.edge_count()) {
    throw ShapeError("mask has " + std::to_string(probs.size()) + " entries for " +
                     std::to_string(g.edge_count()) + " edges");
  }
  std::vector<char> keep(g.edge_count(), 0);
  if (const auto* t = std::get_if<ThresholdMask>(&mode)) {
    for (std::size_t i = 0; i < probs.size(); ++i) keep[i] = probs[i] >= t->threshold;
  } else {
    const auto r = std::get<TopRMask>(mode).r;
    if (r > g.edge_count()) {
      diag::warn("top_r(" + std::to_string(r) + ") exceeds edge count " +
                 std::to_string(g.edge_count()) + "; clamped");
    }
    for (auto id : top_r_edge_ids(probs, r)) keep[id] = 1;
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) edges.push_back(g.edges()[i]);
  }
  GraphAnnotations ann = g.annotations();
  auto filter = [&](const std::vector<std::size_t>& ids) {
    std::vector<Edge> kept;
    for (auto id : ids) {
      if (keep[id]) kept.push_back(g.edges()[id]);
    }
    return kept;
  };
  if (g.has_gt_mask()) ann.gt_mask = filter(g.gt_edge_ids());
  ann.motifs.clear();
  for (const auto& m : g.motif_edge_ids()) {
    auto kept = filter(m);
    if (!kept.empty()) ann.motifs.push_back(std::move(kept));
  }
  return Graph(g.node_count(), std::move(edges), g.features(), std::move(ann));
}

std::vector<double> betweenness_centrality(const Graph& g) {
  const auto n = static_cast<std::size_t>(g.node_count());
  std::vector<double> cb(n, 0.0);
  std::vector<int> stack;
  std::vector<std::vector<int>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<int> dist(n);
  for (int s = 0; s < g.node_count(); ++s) {
    stack.clear();
    for (auto& p : pred) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      stack.push_back(v);
      for (int w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      for (int v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  // Each undirected pair was counted from both endpoints.
  for (double& c : cb) c /= 2.0;
  return cb;
}

Cover greedy_r_cover(const Graph& g, const std::vector<int>& targets, int r,
                     CoverRanking ranking) {
  if (r < 0) throw ArgumentError("cover radius must be non-negative");
  Cover cover;
  cover.radius = r;
  if (targets.empty()) return cover;

  std::vector<double> score(static_cast<std::size_t>(g.node_count()), 0.0);
  if (ranking == CoverRanking::ByBetweenness) {
    score = betweenness_centrality(g);
  } else {
    for (int v = 0; v < g.node_count(); ++v) score[v] = g.degree(v);
  }

  std::vector<int> order = targets;
  for (int v : order) {
    if (!g.valid_node(v)) throw ArgumentError("invalid target node " + std::to_string(v));
  }
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score[a] < score[b]; });

  std::vector<char> remaining(static_cast<std::size_t>(g.node_count()), 0);
  for (int v : order) remaining[v] = 1;

  for (int v : order) {
    if (!remaining[v]) continue;
    const auto dist = bfs_distances(g, v, r);
    CoverElement element{v, {}};
    for (int u = 0; u < g.node_count(); ++u) {
      if (remaining[u] && dist[u] <= r) {
        element.nodes.push_back(u);
        remaining[u] = 0;
      }
    }
    cover.elements.push_back(std::move(element));
  }
  return cover;
}

}  // namespace fx
