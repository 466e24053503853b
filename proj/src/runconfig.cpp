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
#include "redflag/runconfig.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace redflag {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0)
      throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& raw) {
  const std::filesystem::path p(raw);
  return p.is_absolute() ? p : base / p;
}

void parse_encoder(const json& obj, EncoderConfig& cfg) {
  check_keys(obj,
             {"num_layers", "hidden_dim", "num_heads", "ff_dim", "max_positions", "dropout_p",
              "use_pooler"},
             "encoder");
  cfg.num_layers = get_or(obj, "num_layers", cfg.num_layers);
  cfg.hidden_dim = get_or(obj, "hidden_dim", cfg.hidden_dim);
  cfg.num_heads = get_or(obj, "num_heads", cfg.num_heads);
  cfg.ff_dim = get_or(obj, "ff_dim", cfg.ff_dim);
  cfg.max_positions = get_or(obj, "max_positions", cfg.max_positions);
  cfg.dropout_p = get_or(obj, "dropout_p", cfg.dropout_p);
  cfg.use_pooler = get_or(obj, "use_pooler", cfg.use_pooler);
}

}  // namespace

const TaskRunConfig& RunConfig::task(const std::string& name) const {
  for (const auto& task : tasks)
    if (task.spec.name == name) return task;
  throw ConfigError("unknown task '" + name + "'");
}

bool RunConfig::has_task(const std::string& name) const {
  return std::any_of(tasks.begin(), tasks.end(),
                     [&](const TaskRunConfig& t) { return t.spec.name == name; });
}

TrainConfig RunConfig::train_config_for(const TaskRunConfig& task) const {
  TrainConfig cfg = train;
  cfg.seed = task_seed(task.spec.name);
  if (task.max_len > 0) cfg.max_len = task.max_len;
  if (task.max_tokens_per_batch > 0) cfg.max_tokens_per_batch = task.max_tokens_per_batch;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string raw = buffer.str();

  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");

  check_keys(doc,
             {"seed", "threshold", "chunk_size", "reg_strength", "cv_folds", "output_root",
              "checkpoint_root", "encoder", "train", "tasks", "responses", "feature_groups",
              "ablation"},
             "config");

  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");

  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.threshold = get_or(doc, "threshold", 0.5);
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
    throw ConfigError("threshold must lie in [0, 1]");
  cfg.chunk_size = get_or<std::size_t>(doc, "chunk_size", 50);
  if (cfg.chunk_size < 1) throw ConfigError("chunk_size must be at least 1");
  cfg.reg_strength = get_or(doc, "reg_strength", 1.0);
  if (cfg.reg_strength < 0.0) throw ConfigError("reg_strength must be non-negative");
  cfg.cv_folds = get_or(doc, "cv_folds", 5);
  if (cfg.cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  cfg.output_root = resolve(base, get_or<std::string>(doc, "output_root", "runs"));
  if (doc.contains("checkpoint_root"))
    cfg.checkpoint_root = resolve(base, doc.at("checkpoint_root").get<std::string>());

  if (doc.contains("encoder")) parse_encoder(doc.at("encoder"), cfg.encoder);

  if (doc.contains("train")) {
    const json& train = doc.at("train");
    check_keys(train,
               {"lr", "max_epochs", "patience", "max_tokens_per_batch", "max_len", "adam_beta1",
                "adam_beta2", "adam_eps", "test_fraction", "dev_fraction", "head_dropout_p",
                "vocab_min_count"},
               "train");
    cfg.train.lr = get_or(train, "lr", cfg.train.lr);
    cfg.train.max_epochs = get_or(train, "max_epochs", cfg.train.max_epochs);
    cfg.train.patience = get_or(train, "patience", cfg.train.patience);
    cfg.train.max_tokens_per_batch =
        get_or(train, "max_tokens_per_batch", cfg.train.max_tokens_per_batch);
    cfg.train.max_len = get_or(train, "max_len", cfg.train.max_len);
    cfg.train.adam_beta1 = get_or(train, "adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = get_or(train, "adam_beta2", cfg.train.adam_beta2);
    cfg.train.adam_eps = get_or(train, "adam_eps", cfg.train.adam_eps);
    cfg.test_fraction = get_or(train, "test_fraction", cfg.test_fraction);
    cfg.dev_fraction = get_or(train, "dev_fraction", cfg.dev_fraction);
    cfg.head_dropout_p = get_or(train, "head_dropout_p", cfg.head_dropout_p);
    cfg.vocab_min_count = get_or(train, "vocab_min_count", cfg.vocab_min_count);
  }
  cfg.train.validate();
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  if (!(cfg.dev_fraction > 0.0 && cfg.dev_fraction < 1.0))
    throw ConfigError("dev_fraction must lie in (0, 1)");
  if (!(cfg.head_dropout_p >= 0.0 && cfg.head_dropout_p < 1.0))
    throw ConfigError("head_dropout_p must lie in [0, 1)");

  if (doc.contains("tasks")) {
    if (!doc.at("tasks").is_array()) throw ConfigError("'tasks' must be an array");
    for (const auto& entry : doc.at("tasks")) {
      check_keys(entry,
                 {"name", "kind", "labels", "selection_metric", "path", "max_len",
                  "max_tokens_per_batch", "head_hidden"},
                 "task");
      TaskRunConfig task;
      task.spec.name = entry.at("name").get<std::string>();
      task.spec.kind = task_kind_from_string(entry.at("kind").get<std::string>());
      task.spec.label_names = get_or(entry, "labels", std::vector<std::string>{});
      task.spec.selection_metric = get_or<std::string>(entry, "selection_metric", "");
      task.spec.validate();
      if (!entry.contains("path"))
        throw ConfigError("task '" + task.spec.name + "' is missing 'path'");
      task.path = resolve(base, entry.at("path").get<std::string>());
      task.max_len = get_or<std::size_t>(entry, "max_len", 0);
      task.max_tokens_per_batch = get_or<std::size_t>(entry, "max_tokens_per_batch", 0);
      task.head_hidden = get_or(entry, "head_hidden", std::vector<int>{});
      const std::size_t effective_max_len = task.max_len > 0 ? task.max_len : cfg.train.max_len;
      if (static_cast<std::size_t>(cfg.encoder.max_positions) < effective_max_len)
        throw ConfigError("task '" + task.spec.name + "': max_len " +
                          std::to_string(effective_max_len) + " exceeds encoder max_positions " +
                          std::to_string(cfg.encoder.max_positions));
      if (cfg.has_task(task.spec.name))
        throw ConfigError("duplicate task name '" + task.spec.name + "'");
      cfg.tasks.push_back(std::move(task));
    }
  }

  if (doc.contains("responses"))
    cfg.responses = resolve(base, doc.at("responses").get<std::string>());

  cfg.feature_groups = get_or(doc, "feature_groups", std::vector<std::string>{});
  for (const auto& group : cfg.feature_groups)
    if (!cfg.has_task(group))
      throw ConfigError("feature group '" + group + "' names no configured task");

  if (doc.contains("ablation")) {
    if (!doc.at("ablation").is_array()) throw ConfigError("'ablation' must be an array");
    for (const auto& combo : doc.at("ablation")) {
      std::vector<std::string> names = combo.get<std::vector<std::string>>();
      if (names.empty()) throw ConfigError("ablation combinations must be non-empty");
      for (const auto& name : names)
        if (std::find(cfg.feature_groups.begin(), cfg.feature_groups.end(), name) ==
            cfg.feature_groups.end())
          throw ConfigError("ablation group '" + name + "' is not in feature_groups");
      cfg.ablation.push_back(std::move(names));
    }
  }

  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(raw)));
  cfg.config_hash = hash;
  return cfg;
}

std::filesystem::path create_run_dir(const std::filesystem::path& output_root,
                                     const std::string& config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(output_root);

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_buf{};
  gmtime_r(&now, &tm_buf);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_buf);

  const std::string base = config_hash.substr(0, 8) + "-" + stamp;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    fs::path candidate = output_root / (attempt == 0 ? base : base + "-" + std::to_string(attempt));
    std::error_code ec;
    // create_directory is atomic: success means this process owns the dir
    if (fs::create_directory(candidate, ec) && !ec) return candidate;
  }
  throw DataError("cannot create a unique run directory under " + output_root.string());
}

}  // namespace redflag
