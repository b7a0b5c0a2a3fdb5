#pragma once

#include <filesystem>
#include <string>

#include "factexplain/dataset.hpp"
#include "json.hpp"

namespace fx {

/// One graph as a JSON object: nodes, edges ([[i,j],...]), features (row-major rows),
/// label, node_labels, gt_mask, motifs. Absent optional fields are omitted.
[[nodiscard]] nlohmann::json graph_to_json(const Graph& g);
/// Throws ParseError on missing or ill-typed fields.
[[nodiscard]] Graph graph_from_json(const nlohmann::json& j);

/// Line-delimited JSON: a header object (name, task, num_classes, splits) followed by
/// one graph per line.
void write_dataset(const std::filesystem::path& path, const Dataset& d);
[[nodiscard]] std::string dataset_to_jsonl(const Dataset& d);
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& path);

/// Whole-file helpers; throw std::runtime_error when the file cannot be opened.
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fx
