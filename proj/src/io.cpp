#include "factexplain/io.hpp"

#include <fstream>
#include <sstream>

#include "factexplain/errors.hpp"

namespace fx {

using nlohmann::json;

namespace {

json edges_to_json(const std::vector<Edge>& edges) {
  json out = json::array();
  for (const Edge& e : edges) out.push_back({e.u, e.v});
  return out;
}

std::vector<Edge> edges_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("field '") + field + "' must be an array");
  std::vector<Edge> edges;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) {
      throw ParseError(std::string("field '") + field + "' needs [i,j] pairs");
    }
    edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }
  return edges;
}

json index_list(const std::vector<std::size_t>& v) { return json(v); }

}  // namespace

json graph_to_json(const Graph& g) {
  json j;
  j["nodes"] = g.node_count();
  j["edges"] = edges_to_json(g.edges());
  json feats = json::array();
  const Matrix& f = g.features();
  for (std::size_t r = 0; r < f.rows(); ++r) {
    auto row = f.row(r);
    feats.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["features"] = std::move(feats);
  const auto& a = g.annotations();
  if (a.label) j["label"] = *a.label;
  if (!a.node_labels.empty()) j["node_labels"] = a.node_labels;
  if (a.gt_mask) {
    std::vector<Edge> gt;
    for (auto id : g.gt_edge_ids()) gt.push_back(g.edges()[id]);
    j["gt_mask"] = edges_to_json(gt);
  }
  if (!a.motifs.empty()) {
    json motifs = json::array();
    for (const auto& ids : g.motif_edge_ids()) {
      std::vector<Edge> m;
      for (auto id : ids) m.push_back(g.edges()[id]);
      motifs.push_back(edges_to_json(m));
    }
    j["motifs"] = std::move(motifs);
  }
  return j;
}

Graph graph_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ParseError("graph record must be a JSON object");
    if (!j.contains("nodes") || !j.contains("edges")) {
      throw ParseError("graph record needs 'nodes' and 'edges'");
    }
    const int n = j.at("nodes").get<int>();
    auto edges = edges_from_json(j.at("edges"), "edges");
    Matrix features;
    if (j.contains("features")) {
      const auto& rows = j.at("features");
      const std::size_t cols = rows.empty() ? 0 : rows.front().size();
      features = Matrix(rows.size(), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw ParseError("ragged feature matrix");
        for (std::size_t c = 0; c < cols; ++c) features(r, c) = rows[r][c].get<double>();
      }
    }
    GraphAnnotations a;
    if (j.contains("label")) a.label = j.at("label").get<int>();
    if (j.contains("node_labels")) a.node_labels = j.at("node_labels").get<std::vector<int>>();
    if (j.contains("gt_mask")) a.gt_mask = edges_from_json(j.at("gt_mask"), "gt_mask");
    if (j.contains("motifs")) {
      for (const auto& m : j.at("motifs")) a.motifs.push_back(edges_from_json(m, "motifs"));
    }
    return Graph(n, std::move(edges), std::move(features), std::move(a));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed graph record: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("invalid graph record: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("invalid graph record: ") + e.what());
  }
}

std::string dataset_to_jsonl(const Dataset& d) {
  json header;
  header["name"] = d.name;
  header["task"] = to_string(d.task);
  header["num_classes"] = d.num_classes;
  header["graph_count"] = d.graphs.size();
  header["splits"] = {{"train", index_list(d.splits.train)},
                      {"validation", index_list(d.splits.validation)},
                      {"test", index_list(d.splits.test)}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const Graph& g : d.graphs) {
    out += graph_to_json(g).dump();
    out.push_back('\n');
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  write_text_file(path, dataset_to_jsonl(d));
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        d.name = j.at("name").get<std::string>();
        d.task = parse_task_kind(j.at("task").get<std::string>());
        d.num_classes = j.at("num_classes").get<int>();
        expected = j.at("graph_count").get<std::size_t>();
        const auto& s = j.at("splits");
        d.splits.train = s.at("train").get<std::vector<std::size_t>>();
        d.splits.validation = s.at("validation").get<std::vector<std::size_t>>();
        d.splits.test = s.at("test").get<std::vector<std::size_t>>();
        have_header = true;
      } else {
        d.graphs.push_back(graph_from_json(j));
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError(path.string() + ": missing dataset header");
  if (d.graphs.size() != expected) {
    throw IntegrityError(path.string() + ": header declares " + std::to_string(expected) +
                         " graphs, file has " + std::to_string(d.graphs.size()));
  }
  validate_splits(d.splits, d.instance_count());
  return d;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace fx
