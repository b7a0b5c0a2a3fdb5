#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "factexplain/graph.hpp"

namespace fx {

enum class TaskKind { NodeClassification, GraphClassification };

[[nodiscard]] std::string to_string(TaskKind kind);
[[nodiscard]] TaskKind parse_task_kind(const std::string& text);

/// Disjoint index lists. For node tasks the indices are nodes of graphs[0]; for graph
/// tasks they are graph indices.
struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::GraphClassification;
  int num_classes = 2;
  std::vector<Graph> graphs;
  Splits splits;

  /// Number of classification instances (nodes of the single graph, or graphs).
  [[nodiscard]] std::size_t instance_count() const;
  /// Label of instance i.
  [[nodiscard]] int instance_label(std::size_t i) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Uniform shuffle of [0, count) cut 80/10/10 (rounded down for validation and test).
[[nodiscard]] Splits make_splits(std::size_t count, std::uint64_t seed);

/// Throws IntegrityError unless the three lists partition [0, count).
void validate_splits(const Splits& s, std::size_t count);

}  // namespace fx
