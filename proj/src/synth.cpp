#include "factexplain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "factexplain/diag.hpp"
#include "factexplain/errors.hpp"
#include "factexplain/parallel.hpp"
#include "factexplain/rng.hpp"

namespace fx {

namespace {

Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 1.0); }

Motif build_motif(const std::string& name, int n, const std::vector<std::pair<int, int>>& pairs,
                  std::vector<int> position_labels) {
  std::vector<Edge> edges;
  for (auto [a, b] : pairs) edges.push_back({a, b});
  GraphAnnotations a;
  a.node_labels = std::move(position_labels);
  return make_motif(name, Graph(n, std::move(edges), {}, std::move(a)));
}

Motif cycle(const std::string& name, int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) pairs.emplace_back(i, (i + 1) % n);
  return build_motif(name, n, pairs, std::vector<int>(static_cast<std::size_t>(n), 1));
}

std::vector<int> label_vector(const Graph& g) {
  if (!g.node_labels().empty()) return g.node_labels();
  return std::vector<int>(static_cast<std::size_t>(g.node_count()), 0);
}

/// Nodes of `base` at distance >= min_distance from every node in `taken`.
std::vector<int> separated_sites(const Graph& base, const std::vector<int>& taken, int min_distance) {
  std::vector<int> dist(static_cast<std::size_t>(base.node_count()), kInfiniteDistance);
  for (int t : taken) {
    auto d = bfs_distances(base, t, min_distance);
    for (std::size_t i = 0; i < d.size(); ++i) dist[i] = std::min(dist[i], d[i]);
  }
  std::vector<int> out;
  for (int v = 0; v < base.node_count(); ++v) {
    if (dist[static_cast<std::size_t>(v)] >= min_distance) out.push_back(v);
  }
  return out;
}

Dataset shapes_like(const DatasetSpec& spec, const Graph& base, const std::string& motif_name,
                    std::uint64_t seed) {
  const Motif& m = library_motif(motif_name);
  GraphAnnotations a;
  a.node_labels.assign(static_cast<std::size_t>(base.node_count()), 0);
  a.gt_mask = std::vector<Edge>{};
  Graph g = base.with_annotations(a);
  const std::uint64_t attach_seed = derive_seed(seed, "attach");
  const int base_n = base.node_count();
  std::vector<int> sites(static_cast<std::size_t>(base_n));
  for (int i = 0; i < base_n; ++i) sites[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < spec.motif_count; ++i) {
    g = attach_motif(g, m, derive_seed(attach_seed, static_cast<std::uint64_t>(i)), sites).graph;
  }
  Dataset d;
  d.task = TaskKind::NodeClassification;
  d.graphs.push_back(g.with_features(ones(static_cast<std::size_t>(g.node_count()),
                                          static_cast<std::size_t>(spec.feature_dim))));
  return d;
}

}  // namespace

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::BaShapes: return "ba_shapes";
    case DatasetKind::BaCommunity: return "ba_community";
    case DatasetKind::TreeCycles: return "tree_cycles";
    case DatasetKind::TreeGrid: return "tree_grid";
    case DatasetKind::Ba2Motifs: return "ba_2motifs";
    case DatasetKind::Ba4Motifs: return "ba_4motifs";
    case DatasetKind::MotifUnion: return "motif_union";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  for (auto k : {DatasetKind::BaShapes, DatasetKind::BaCommunity, DatasetKind::TreeCycles,
                 DatasetKind::TreeGrid, DatasetKind::Ba2Motifs, DatasetKind::Ba4Motifs,
                 DatasetKind::MotifUnion}) {
    if (to_string(k) == text) return k;
  }
  throw ArgumentError("unknown dataset kind '" + text + "'");
}

bool is_node_task(DatasetKind kind) {
  return kind == DatasetKind::BaShapes || kind == DatasetKind::BaCommunity ||
         kind == DatasetKind::TreeCycles || kind == DatasetKind::TreeGrid;
}

DatasetSpec default_spec(DatasetKind kind) {
  DatasetSpec spec;
  spec.kind = kind;
  if (!is_node_task(kind)) {
    spec.base_nodes = 20;
    spec.ba_m = 1;
  }
  return spec;
}

void validate(const DatasetSpec& spec) {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ArgumentError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(spec.base_nodes, "base_nodes");
  positive(spec.ba_m, "ba_m");
  positive(spec.tree_depth, "tree_depth");
  positive(spec.motif_count, "motif_count");
  positive(spec.graph_count, "graph_count");
  positive(spec.feature_dim, "feature_dim");
  if (spec.community_edges < 0) throw ArgumentError("community_edges must be non-negative");
  if (spec.min_site_distance < 0) throw ArgumentError("min_site_distance must be non-negative");
}

Graph gen_ba(int n, int m, std::uint64_t seed, std::size_t feature_dim) {
  if (m < 1 || m >= n) {
    throw ArgumentError("gen_ba needs 1 <= m < n, got n=" + std::to_string(n) + " m=" + std::to_string(m));
  }
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> endpoints;  // each node repeated once per incident edge
  for (int a = 0; a <= m; ++a) {
    for (int b = a + 1; b <= m; ++b) {
      edges.push_back({a, b});
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }
  for (int v = m + 1; v < n; ++v) {
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < m) {
      const int t = endpoints[rng.below(endpoints.size())];
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
    }
    for (int t : chosen) {
      edges.push_back({t, v});
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return Graph(n, std::move(edges), ones(static_cast<std::size_t>(n), feature_dim));
}

Graph gen_binary_tree(int depth, std::size_t feature_dim) {
  if (depth < 0) throw ArgumentError("tree depth must be non-negative");
  const int n = (1 << (depth + 1)) - 1;
  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) edges.push_back({(v - 1) / 2, v});
  return Graph(n, std::move(edges), ones(static_cast<std::size_t>(n), feature_dim));
}

const std::map<std::string, Motif>& motif_library() {
  static const std::map<std::string, Motif> lib = [] {
    std::map<std::string, Motif> m;
    // Bottom 0-1, walls 0-2 and 1-3, ceiling 2-3, roof 2-4 and 3-4.
    m.emplace("house", build_motif("house", 5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}},
                                   {1, 1, 2, 2, 3}));
    m.emplace("cycle_5", cycle("cycle_5", 5));
    m.emplace("cycle_6", cycle("cycle_6", 6));
    m.emplace("complete_4", build_motif("complete_4", 4,
                                        {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}},
                                        {1, 1, 1, 1}));
    std::vector<std::pair<int, int>> grid;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (c + 1 < 3) grid.emplace_back(3 * r + c, 3 * r + c + 1);
        if (r + 1 < 3) grid.emplace_back(3 * r + c, 3 * (r + 1) + c);
      }
    }
    m.emplace("grid_3x3", build_motif("grid_3x3", 9, grid, std::vector<int>(9, 1)));
    return m;
  }();
  return lib;
}

const Motif& library_motif(const std::string& name) {
  const auto& lib = motif_library();
  auto it = lib.find(name);
  if (it == lib.end()) throw ArgumentError("unknown motif '" + name + "'");
  return it->second;
}

std::vector<std::vector<std::string>> ba4_label_motifs() {
  return {{"house", "cycle_5"}, {"cycle_6", "complete_4"}};
}

Attachment attach_motif(const Graph& base, const Motif& m, std::uint64_t seed,
                        const std::vector<int>& sites) {
  if (base.node_count() == 0) throw ArgumentError("attach_motif needs a non-empty base graph");
  Rng rng(seed);
  const int offset = base.node_count();
  const int mn = m.graph.node_count();
  const int motif_node = offset + static_cast<int>(rng.below(static_cast<std::uint64_t>(mn)));
  const int site = sites.empty() ? static_cast<int>(rng.below(static_cast<std::uint64_t>(offset)))
                                 : sites[rng.below(sites.size())];
  if (!base.valid_node(site)) throw ArgumentError("attachment site outside the base graph");

  std::vector<Edge> edges = base.edges();
  std::vector<Edge> motif_edges;
  for (const Edge& e : m.graph.edges()) motif_edges.push_back({e.u + offset, e.v + offset});
  edges.insert(edges.end(), motif_edges.begin(), motif_edges.end());
  const Edge bridge = Edge::canonical(site, motif_node);
  edges.push_back(bridge);

  const std::size_t dim = std::max<std::size_t>(1, base.feature_dim());
  Matrix features(static_cast<std::size_t>(offset + mn), dim, 1.0);
  for (std::size_t r = 0; r < base.features().rows(); ++r) {
    for (std::size_t c = 0; c < base.features().cols(); ++c) features(r, c) = base.features()(r, c);
  }

  GraphAnnotations a = base.annotations();
  if (a.gt_mask) {
    std::vector<Edge> gt;
    for (auto id : base.gt_edge_ids()) gt.push_back(base.edges()[id]);
    gt.insert(gt.end(), motif_edges.begin(), motif_edges.end());
    a.gt_mask = std::move(gt);
  } else {
    a.gt_mask = motif_edges;
  }
  a.motifs.clear();
  for (const auto& ids : base.motif_edge_ids()) {
    std::vector<Edge> es;
    for (auto id : ids) es.push_back(base.edges()[id]);
    a.motifs.push_back(std::move(es));
  }
  a.motifs.push_back(motif_edges);
  if (!a.node_labels.empty()) {
    const auto motif_labels = label_vector(m.graph);
    a.node_labels.insert(a.node_labels.end(), motif_labels.begin(), motif_labels.end());
  }
  Attachment out{Graph(offset + mn, std::move(edges), std::move(features), std::move(a)),
                 std::move(motif_edges), bridge, offset, site};
  return out;
}

Dataset gen_node_dataset(const DatasetSpec& spec) {
  validate(spec);
  const auto dim = static_cast<std::size_t>(spec.feature_dim);
  Dataset d;
  switch (spec.kind) {
    case DatasetKind::BaShapes: {
      d = shapes_like(spec, gen_ba(spec.base_nodes, spec.ba_m, derive_seed(spec.seed, "base"), dim),
                      "house", spec.seed);
      d.num_classes = 4;
      break;
    }
    case DatasetKind::TreeCycles:
    case DatasetKind::TreeGrid: {
      const bool cycles = spec.kind == DatasetKind::TreeCycles;
      d = shapes_like(spec, gen_binary_tree(spec.tree_depth, dim), cycles ? "cycle_6" : "grid_3x3",
                      spec.seed);
      d.num_classes = 2;
      break;
    }
    case DatasetKind::BaCommunity: {
      Graph parts[2];
      for (int c = 0; c < 2; ++c) {
        const auto s = derive_seed(spec.seed, c == 0 ? "community0" : "community1");
        parts[c] = shapes_like(spec, gen_ba(spec.base_nodes, spec.ba_m, derive_seed(s, "base"), dim),
                               "house", s)
                       .graphs.front();
      }
      const int n0 = parts[0].node_count();
      const int n = n0 + parts[1].node_count();
      std::vector<Edge> edges = parts[0].edges();
      GraphAnnotations a;
      a.node_labels = parts[0].node_labels();
      std::vector<Edge> gt;
      for (auto id : parts[0].gt_edge_ids()) gt.push_back(parts[0].edges()[id]);
      for (const auto& ids : parts[0].motif_edge_ids()) {
        std::vector<Edge> es;
        for (auto id : ids) es.push_back(parts[0].edges()[id]);
        a.motifs.push_back(es);
      }
      for (const Edge& e : parts[1].edges()) edges.push_back({e.u + n0, e.v + n0});
      for (int l : parts[1].node_labels()) a.node_labels.push_back(l + 4);
      for (auto id : parts[1].gt_edge_ids()) {
        const Edge e = parts[1].edges()[id];
        gt.push_back({e.u + n0, e.v + n0});
      }
      for (const auto& ids : parts[1].motif_edge_ids()) {
        std::vector<Edge> es;
        for (auto id : ids) es.push_back({parts[1].edges()[id].u + n0, parts[1].edges()[id].v + n0});
        a.motifs.push_back(es);
      }
      Rng rng(derive_seed(spec.seed, "community_edges"));
      for (int i = 0; i < spec.community_edges; ++i) {
        const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.base_nodes)));
        const int v = n0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.base_nodes)));
        edges.push_back({u, v});
      }
      a.gt_mask = std::move(gt);
      Rng feat_rng(derive_seed(spec.seed, "features"));
      Matrix features(static_cast<std::size_t>(n), dim);
      for (int v = 0; v < n; ++v) {
        const double mean = v < n0 ? -0.5 : 0.5;
        for (std::size_t c = 0; c < dim; ++c) features(static_cast<std::size_t>(v), c) = feat_rng.normal(mean, 0.1);
      }
      d.task = TaskKind::NodeClassification;
      d.graphs.push_back(Graph(n, std::move(edges), std::move(features), std::move(a)));
      d.num_classes = 8;
      break;
    }
    default:
      throw ArgumentError("gen_node_dataset does not handle kind " + to_string(spec.kind));
  }
  d.name = to_string(spec.kind);
  d.splits = make_splits(d.instance_count(), spec.seed);
  return d;
}

Dataset gen_graph_dataset(const DatasetSpec& spec) {
  validate(spec);
  if (spec.kind != DatasetKind::Ba2Motifs && spec.kind != DatasetKind::Ba4Motifs) {
    throw ArgumentError("gen_graph_dataset does not handle kind " + to_string(spec.kind));
  }
  const auto dim = static_cast<std::size_t>(spec.feature_dim);
  const auto label_motifs = spec.kind == DatasetKind::Ba2Motifs
                                ? std::vector<std::vector<std::string>>{{"house"}, {"cycle_5"}}
                                : ba4_label_motifs();
  Dataset d;
  d.name = to_string(spec.kind);
  d.task = TaskKind::GraphClassification;
  d.num_classes = 2;
  d.graphs.resize(static_cast<std::size_t>(spec.graph_count));
  parallel_for(d.graphs.size(), spec.jobs, [&](std::size_t i) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    const int label = static_cast<int>(rng.below(2));
    Graph base = gen_ba(spec.base_nodes, spec.ba_m, rng.next_u64(), dim);
    const auto& names = label_motifs[static_cast<std::size_t>(label)];
    std::vector<char> present(names.size(), 1);
    if (names.size() > 1) {
      do {
        for (auto& e : present) e = rng.bernoulli(0.5) ? 1 : 0;
      } while (std::find(present.begin(), present.end(), 1) == present.end());
    }
    GraphAnnotations a;
    a.label = label;
    a.gt_mask = std::vector<Edge>{};
    Graph g = base.with_annotations(a);
    std::vector<int> taken;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!present[k]) continue;
      auto sites = separated_sites(base, taken, spec.min_site_distance);
      if (sites.empty()) {
        throw ConfigError("no attachment site at distance >= " + std::to_string(spec.min_site_distance) +
                          " in a base graph of " + std::to_string(spec.base_nodes) + " nodes");
      }
      auto att = attach_motif(g, library_motif(names[k]), rng.next_u64(), sites);
      taken.push_back(att.base_site);
      g = std::move(att.graph);
    }
    d.graphs[i] = std::move(g);
  });
  d.splits = make_splits(d.graphs.size(), spec.seed);
  return d;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::MotifUnion) {
    throw ArgumentError("motif_union datasets are built with gen_motif_union_task");
  }
  return is_node_task(spec.kind) ? gen_node_dataset(spec) : gen_graph_dataset(spec);
}

double placed_motif_probability(const Motif& m, double p) {
  return std::pow(p, static_cast<double>(m.graph.edge_count()));
}

Dataset gen_motif_union_task(const MotifUnionConfig& c) {
  if (!(c.p > 0.0 && c.p < 0.5)) throw ConfigError("Erdős–Rényi parameter must lie in (0, 1/2)");
  if (c.p_i.size() != c.motifs.size()) throw ConfigError("one p_i per motif is required");
  if (c.count < 0) throw ConfigError("count must be non-negative");
  int used = 0;
  std::vector<int> offsets;
  for (std::size_t i = 0; i < c.motifs.size(); ++i) {
    const double pi = c.p_i[i];
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("p_i must lie in [0, 1]");
    const double pg = placed_motif_probability(c.motifs[i], c.p);
    // Degenerate indicators (p_i of 0 or 1) carry no assumption to check.
    if (pi > 0.0 && pi < 1.0 && pg > pi) {
      throw ConfigError("motif " + c.motifs[i].name + ": P_G0(g_i) = " + std::to_string(pg) +
                        " exceeds p_i = " + std::to_string(pi));
    }
    offsets.push_back(used);
    used += c.motifs[i].graph.node_count();
  }
  if (used > c.n) {
    throw ConfigError("motif blocks need " + std::to_string(used) + " nodes, n = " + std::to_string(c.n));
  }
  Dataset d;
  d.name = "motif_union";
  d.task = TaskKind::GraphClassification;
  d.num_classes = 2;
  d.graphs.reserve(static_cast<std::size_t>(c.count));
  for (int s = 0; s < c.count; ++s) {
    Rng rng(derive_seed(c.seed, static_cast<std::uint64_t>(s)));
    std::vector<Edge> edges;
    for (int u = 0; u < c.n; ++u) {
      for (int v = u + 1; v < c.n; ++v) {
        if (rng.bernoulli(c.p)) edges.push_back({u, v});
      }
    }
    GraphAnnotations a;
    a.label = 0;
    std::vector<Edge> gt;
    for (std::size_t i = 0; i < c.motifs.size(); ++i) {
      if (!rng.bernoulli(c.p_i[i])) continue;
      a.label = 1;
      std::vector<Edge> placed;
      for (const Edge& e : c.motifs[i].graph.edges()) placed.push_back({e.u + offsets[i], e.v + offsets[i]});
      edges.insert(edges.end(), placed.begin(), placed.end());
      gt.insert(gt.end(), placed.begin(), placed.end());
      a.motifs.push_back(std::move(placed));
    }
    a.gt_mask = std::move(gt);
    d.graphs.emplace_back(c.n, std::move(edges), ones(static_cast<std::size_t>(c.n), c.feature_dim),
                          std::move(a));
  }
  d.splits = make_splits(d.graphs.size(), c.seed);
  return d;
}

namespace {

std::vector<std::vector<long long>> read_int_rows(const std::filesystem::path& path, std::size_t width,
                                                  bool required) {
  std::vector<std::vector<long long>> rows;
  std::ifstream in(path);
  if (!in) {
    if (required) throw ParseError("missing TU file " + path.string());
    return rows;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<long long> row;
    long long v = 0;
    while (ss >> v) row.push_back(v);
    ss.clear();
    std::string rest;
    ss >> rest;
    if (row.empty() && rest.empty()) continue;  // blank line
    if (!rest.empty() || row.size() != width) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " integer(s)");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> dense_codes(const std::vector<long long>& raw, std::size_t& classes) {
  std::set<long long> distinct(raw.begin(), raw.end());
  std::vector<long long> sorted(distinct.begin(), distinct.end());
  classes = sorted.size();
  std::vector<int> out;
  for (long long r : raw) {
    out.push_back(static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), r) - sorted.begin()));
  }
  return out;
}

}  // namespace

Dataset load_tu_dataset(const std::filesystem::path& dir, std::uint64_t seed) {
  const std::string ds = dir.filename().empty() ? dir.parent_path().filename().string()
                                                : dir.filename().string();
  auto file = [&](const char* suffix) { return dir / (ds + "_" + suffix + ".txt"); };
  const auto adjacency = read_int_rows(file("A"), 2, true);
  const auto indicator = read_int_rows(file("graph_indicator"), 1, true);
  const auto graph_labels = read_int_rows(file("graph_labels"), 1, true);
  const auto node_labels = read_int_rows(file("node_labels"), 1, false);

  Dataset d;
  d.name = ds;
  d.task = TaskKind::GraphClassification;
  if (indicator.empty() && graph_labels.empty()) {
    diag::warn("TU dataset " + ds + " is empty");
    d.num_classes = 0;
    return d;
  }
  const std::size_t graph_count = graph_labels.size();
  const std::size_t node_count = indicator.size();
  std::vector<int> graph_of(node_count), local(node_count);
  std::vector<int> sizes(graph_count, 0);
  for (std::size_t v = 0; v < node_count; ++v) {
    const long long gid = indicator[v][0];
    if (gid < 1 || static_cast<std::size_t>(gid) > graph_count) {
      throw IntegrityError(file("graph_indicator").string() + ":" + std::to_string(v + 1) +
                           ": graph id " + std::to_string(gid) + " outside [1," +
                           std::to_string(graph_count) + "]");
    }
    graph_of[v] = static_cast<int>(gid - 1);
    local[v] = sizes[static_cast<std::size_t>(gid - 1)]++;
  }
  if (!node_labels.empty() && node_labels.size() != node_count) {
    throw IntegrityError("node label count " + std::to_string(node_labels.size()) +
                         " differs from node count " + std::to_string(node_count));
  }
  std::vector<std::vector<Edge>> edges(graph_count);
  for (std::size_t k = 0; k < adjacency.size(); ++k) {
    const long long a = adjacency[k][0], b = adjacency[k][1];
    for (long long x : {a, b}) {
      if (x < 1 || static_cast<std::size_t>(x) > node_count) {
        throw IntegrityError(file("A").string() + ":" + std::to_string(k + 1) + ": node " +
                             std::to_string(x) + " outside [1," + std::to_string(node_count) + "]");
      }
    }
    const auto ia = static_cast<std::size_t>(a - 1), ib = static_cast<std::size_t>(b - 1);
    if (graph_of[ia] != graph_of[ib]) {
      throw IntegrityError(file("A").string() + ":" + std::to_string(k + 1) + ": edge joins graphs " +
                           std::to_string(graph_of[ia] + 1) + " and " + std::to_string(graph_of[ib] + 1));
    }
    if (ia == ib) {
      diag::warn(file("A").string() + ":" + std::to_string(k + 1) + ": self-loop dropped");
      continue;
    }
    edges[static_cast<std::size_t>(graph_of[ia])].push_back({local[ia], local[ib]});
  }
  std::vector<long long> raw_graph_labels;
  for (const auto& r : graph_labels) raw_graph_labels.push_back(r[0]);
  std::size_t classes = 0;
  const auto codes = dense_codes(raw_graph_labels, classes);
  d.num_classes = static_cast<int>(std::max<std::size_t>(classes, 2));

  std::size_t label_classes = 1;
  std::vector<int> node_codes(node_count, 0);
  if (!node_labels.empty()) {
    std::vector<long long> raw;
    for (const auto& r : node_labels) raw.push_back(r[0]);
    node_codes = dense_codes(raw, label_classes);
  }
  std::vector<Matrix> features;
  for (std::size_t g = 0; g < graph_count; ++g) {
    features.emplace_back(static_cast<std::size_t>(sizes[g]), label_classes, node_labels.empty() ? 1.0 : 0.0);
  }
  if (!node_labels.empty()) {
    for (std::size_t v = 0; v < node_count; ++v) {
      features[static_cast<std::size_t>(graph_of[v])](static_cast<std::size_t>(local[v]),
                                                     static_cast<std::size_t>(node_codes[v])) = 1.0;
    }
  }
  for (std::size_t g = 0; g < graph_count; ++g) {
    if (sizes[g] == 0) throw IntegrityError("graph " + std::to_string(g + 1) + " has no nodes");
    GraphAnnotations a;
    a.label = codes[g];
    d.graphs.emplace_back(sizes[g], std::move(edges[g]), std::move(features[g]), std::move(a));
  }
  d.splits = make_splits(d.graphs.size(), seed);
  return d;
}

}  // namespace fx
