#include "factexplain/dataset.hpp"

#include <numeric>

#include "factexplain/errors.hpp"
#include "factexplain/rng.hpp"

namespace fx {

std::string to_string(TaskKind kind) {
  return kind == TaskKind::NodeClassification ? "node_classification" : "graph_classification";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "node_classification") return TaskKind::NodeClassification;
  if (text == "graph_classification") return TaskKind::GraphClassification;
  throw ArgumentError("unknown task kind '" + text + "'");
}

std::size_t Dataset::instance_count() const {
  if (task == TaskKind::NodeClassification) {
    return graphs.empty() ? 0 : static_cast<std::size_t>(graphs.front().node_count());
  }
  return graphs.size();
}

int Dataset::instance_label(std::size_t i) const {
  if (task == TaskKind::NodeClassification) return graphs.front().node_labels().at(i);
  const auto& label = graphs.at(i).label();
  if (!label) throw IntegrityError("graph " + std::to_string(i) + " has no label");
  return *label;
}

Splits make_splits(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "splits"));
  rng.shuffle(order.begin(), order.end());
  const std::size_t n_val = count / 10;
  const std::size_t n_test = count / 10;
  const std::size_t n_train = count - n_val - n_test;
  Splits s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

void validate_splits(const Splits& s, std::size_t count) {
  std::vector<int> seen(count, 0);
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (auto i : *part) {
      if (i >= count) throw IntegrityError("split index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw IntegrityError("split index " + std::to_string(i) + " repeated");
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!seen[i]) throw IntegrityError("split misses index " + std::to_string(i));
  }
}

}  // namespace fx
