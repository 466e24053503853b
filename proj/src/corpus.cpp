/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "redflag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "json.hpp"

namespace redflag {
namespace {

using nlohmann::json;

std::string at(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no) + ": ";
}

json parse_line(const std::filesystem::path& path, std::size_t line_no, const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(at(path, line_no) + "malformed JSON: " + e.what());
  }
  if (!obj.is_object()) throw DataError(at(path, line_no) + "expected a JSON object");
  return obj;
}

std::string require_string(const json& obj, const char* key, const std::filesystem::path& path,
                           std::size_t line_no) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw DataError(at(path, line_no) + "missing or non-string field '" + key + "'");
  return obj[key].get<std::string>();
}

Label parse_label(const json& value, const TaskSpec& spec, const std::filesystem::path& path,
                  std::size_t line_no) {
  switch (spec.kind) {
    case TaskKind::classification: {
      if (!value.is_number_integer())
        throw DataError(at(path, line_no) + "classification label must be an integer");
      return Label(value.get<int>());
    }
    case TaskKind::multilabel: {
      if (!value.is_array())
        throw DataError(at(path, line_no) + "multilabel label must be an array of booleans");
      MultiLabel bits;
      bits.reserve(value.size());
      for (const auto& item : value) {
        if (!item.is_boolean())
          throw DataError(at(path, line_no) + "multilabel entries must be booleans");
        bits.push_back(item.get<bool>() ? 1 : 0);
      }
      return Label(std::move(bits));
    }
    case TaskKind::regression: {
      if (!value.is_number())
        throw DataError(at(path, line_no) + "regression label must be a number");
      return Label(value.get<double>());
    }
  }
  throw DataError(at(path, line_no) + "unknown task kind");
}

json label_to_json(const Label& label) {
  if (std::holds_alternative<int>(label)) return std::get<int>(label);
  if (std::holds_alternative<double>(label)) return std::get<double>(label);
  json arr = json::array();
  for (const auto bit : std::get<MultiLabel>(label)) arr.push_back(bit != 0);
  return arr;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "multilabel") return TaskKind::multilabel;
  if (name == "regression") return TaskKind::regression;
  throw ConfigError("unknown task kind '" + name +
                    "' (expected classification, multilabel, or regression)");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::classification: return "classification";
    case TaskKind::multilabel: return "multilabel";
    case TaskKind::regression: return "regression";
  }
  return "unknown";
}

void TaskSpec::validate() const {
  if (name.empty()) throw ConfigError("task name must be non-empty");
  std::set<std::string> seen(label_names.begin(), label_names.end());
  if (seen.size() != label_names.size())
    throw ConfigError("task '" + name + "': label names must be unique");
  if (kind == TaskKind::regression) {
    if (!label_names.empty())
      throw ConfigError("task '" + name + "': regression takes no label names");
  } else if (num_classes() < 2) {
    throw ConfigError("task '" + name + "': " + to_string(kind) +
                      " needs at least 2 label names");
  }
}

std::string TaskSpec::effective_selection_metric() const {
  if (!selection_metric.empty()) return selection_metric;
  switch (kind) {
    case TaskKind::classification: return "macro_f1";
    case TaskKind::multilabel: return "jaccard";
    case TaskKind::regression: return "neg_mae";
  }
  return "macro_f1";
}

void validate_label(const Label& label, const TaskSpec& spec, const std::string& record_id) {
  switch (spec.kind) {
    case TaskKind::classification: {
      if (!std::holds_alternative<int>(label))
        throw DataError("record '" + record_id + "': expected a class index");
      const int cls = std::get<int>(label);
      if (cls < 0 || cls >= spec.num_classes())
        throw DataError("record '" + record_id + "': class index " + std::to_string(cls) +
                        " outside [0, " + std::to_string(spec.num_classes()) + ")");
      return;
    }
    case TaskKind::multilabel: {
      if (!std::holds_alternative<MultiLabel>(label))
        throw DataError("record '" + record_id + "': expected an indicator vector");
      const auto& bits = std::get<MultiLabel>(label);
      if (static_cast<int>(bits.size()) != spec.num_classes())
        throw DataError("record '" + record_id + "': indicator length " +
                        std::to_string(bits.size()) + " != " +
                        std::to_string(spec.num_classes()));
      return;
    }
    case TaskKind::regression: {
      if (!std::holds_alternative<double>(label))
        throw DataError("record '" + record_id + "': expected a numeric score");
      if (!std::isfinite(std::get<double>(label)))
        throw DataError("record '" + record_id + "': score must be finite");
      return;
    }
  }
}

Dataset load_task_dataset(const std::filesystem::path& path, const TaskSpec& spec) {
  spec.validate();
  auto in = open_for_read(path);

  Dataset dataset;
  dataset.spec = spec;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json obj = parse_line(path, line_no, line);
    TextRecord record;
    record.id = require_string(obj, "id", path, line_no);
    record.text = require_string(obj, "text", path, line_no);
    if (record.text.empty()) throw DataError(at(path, line_no) + "text must be non-empty");
    if (!obj.contains("label")) throw DataError(at(path, line_no) + "missing field 'label'");
    record.label = parse_label(obj["label"], spec, path, line_no);
    validate_label(record.label, spec, record.id);
    if (!ids.insert(record.id).second)
      throw DataError(at(path, line_no) + "duplicate id '" + record.id + "'");
    dataset.records.push_back(std::move(record));
  }
  if (dataset.records.empty()) throw DataError(path.string() + ": empty dataset");
  return dataset;
}

void save_task_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& record : dataset.records) {
    json obj;
    obj["id"] = record.id;
    obj["text"] = record.text;
    obj["label"] = label_to_json(record.label);
    out << obj.dump() << '\n';
  }
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 2) throw DataError("cannot split a dataset with fewer than 2 records");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");

  auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  shuffle_in_place(order, rng);

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<long>(n_test));
  std::sort(test_idx.begin(), test_idx.end());

  Dataset train;
  Dataset test;
  train.spec = dataset.spec;
  test.spec = dataset.spec;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cursor < test_idx.size() && test_idx[cursor] == i) {
      test.records.push_back(dataset.records[i]);
      ++cursor;
    } else {
      train.records.push_back(dataset.records[i]);
    }
  }
  return {std::move(train), std::move(test)};
}

std::vector<ResponseRecord> load_response_set(const std::filesystem::path& path) {
  auto in = open_for_read(path);

  std::vector<ResponseRecord> responses;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json obj = parse_line(path, line_no, line);
    ResponseRecord record;
    record.id = require_string(obj, "id", path, line_no);
    record.text = require_string(obj, "text", path, line_no);
    if (record.text.empty()) throw DataError(at(path, line_no) + "text must be non-empty");
    if (!obj.contains("disturbing") || !obj["disturbing"].is_number_integer())
      throw DataError(at(path, line_no) + "missing or non-integer field 'disturbing'");
    record.disturbing = obj["disturbing"].get<int>();
    if (record.disturbing != 0 && record.disturbing != 1)
      throw DataError(at(path, line_no) + "disturbing must be 0 or 1, got " +
                      std::to_string(record.disturbing));
    if (!ids.insert(record.id).second)
      throw DataError(at(path, line_no) + "duplicate id '" + record.id + "'");
    responses.push_back(std::move(record));
  }
  if (responses.empty()) throw DataError(path.string() + ": empty response set");
  return responses;
}

void save_response_set(const std::filesystem::path& path,
                       const std::vector<ResponseRecord>& responses) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& record : responses) {
    json obj;
    obj["id"] = record.id;
    obj["text"] = record.text;
    obj["disturbing"] = record.disturbing;
    out << obj.dump() << '\n';
  }
}

std::size_t count_positive(const std::vector<ResponseRecord>& responses) {
  return static_cast<std::size_t>(
      std::count_if(responses.begin(), responses.end(),
                    [](const ResponseRecord& r) { return r.disturbing == 1; }));
}

}  // namespace redflag
