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

// Command-line surface for the disturbing-content pipeline:
//   train            fine-tune task models (all tasks, or --task NAME)
//   eval             metrics JSON for one task on a held-out split
//   extract-features chunk-averaged features for the response set
//   stack            train the logistic-regression stacker on a feature CSV
//   crossval         stratified k-fold cross-validation on a feature CSV
//   ablate           cross-validation per feature-group combination
//   predict          probability + flag per input text
//   report           full pipeline: features, ablation, stacker, confusions
//
// Exit codes: 0 success, 1 runtime failure, 2 config/validation failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "redflag/checkpoint.hpp"
#include "redflag/corpus.hpp"
#include "redflag/metrics.hpp"
#include "redflag/model.hpp"
#include "redflag/runconfig.hpp"
#include "redflag/stacking.hpp"
#include "redflag/textproc.hpp"
#include "redflag/trainer.hpp"

namespace fs = std::filesystem;
using namespace redflag;

namespace {

// the pipeline runs in float32 so checkpoints round-trip bit-exactly
using PipelineScalar = float;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint_root;
};

RunConfig load_config(const CliOptions& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threshold) {
    if (!(*opts.threshold >= 0.0 && *opts.threshold <= 1.0))
      throw ConfigError("threshold must lie in [0, 1]");
    cfg.threshold = *opts.threshold;
  }
  if (opts.out) cfg.output_root = *opts.out;
  if (opts.checkpoint_root) cfg.checkpoint_root = fs::path(*opts.checkpoint_root);
  return cfg;
}

fs::path output_root(const RunConfig& cfg, const CliOptions& opts) {
  if (opts.out) return fs::path(*opts.out);
  if (const char* env = std::getenv("REDFLAG_OUT")) return fs::path(env);
  return cfg.output_root;
}

fs::path checkpoint_root_or_throw(const RunConfig& cfg) {
  if (!cfg.checkpoint_root)
    throw ConfigError("no checkpoint root: set 'checkpoint_root' in the config or pass "
                      "--checkpoint-root (usually a previous train run directory)");
  if (!fs::exists(*cfg.checkpoint_root))
    throw ConfigError("checkpoint root does not exist: " + cfg.checkpoint_root->string());
  return *cfg.checkpoint_root;
}

struct TaskData {
  Dataset train;
  Dataset dev;
  Dataset test;
};

TaskData split_task_data(const RunConfig& cfg, const TaskRunConfig& task) {
  if (!fs::exists(task.path))
    throw ConfigError("dataset path does not exist: " + task.path.string());
  const Dataset data = load_task_dataset(task.path, task.spec);
  const std::uint64_t seed = cfg.task_seed(task.spec.name);
  auto [trainval, test] = split_train_test(data, cfg.test_fraction, seed);
  auto [train, dev] = split_train_test(trainval, cfg.dev_fraction, mix_seed(seed, 1));
  return {std::move(train), std::move(dev), std::move(test)};
}

Vocab build_task_vocab(const RunConfig& cfg, const TaskData& data) {
  std::vector<std::string> corpus;
  corpus.reserve(data.train.size() + data.dev.size());
  for (const auto& record : data.train.records) corpus.push_back(record.text);
  for (const auto& record : data.dev.records) corpus.push_back(record.text);
  return Vocab::build(corpus, cfg.vocab_min_count);
}

bool train_one_task(const RunConfig& cfg, const TaskRunConfig& task, const fs::path& run_dir) {
  const TaskData data = split_task_data(cfg, task);
  const Vocab vocab = build_task_vocab(cfg, data);

  EncoderConfig encoder = cfg.encoder;
  encoder.vocab_size = vocab.size();
  HeadSpec head = HeadSpec::for_task(task.spec, encoder.hidden_dim);
  if (!task.head_hidden.empty()) head.hidden_sizes = task.head_hidden;
  head.dropout_p = cfg.head_dropout_p;

  const std::uint64_t seed = cfg.task_seed(task.spec.name);
  auto model = init_task_model<PipelineScalar>(encoder, head, task.spec, seed);
  const TrainConfig train_cfg = cfg.train_config_for(task);

  const fs::path task_dir = run_dir / task.spec.name;
  fs::create_directories(task_dir);
  std::ofstream log(task_dir / "train_log.jsonl");
  if (!log) throw DataError("cannot write " + (task_dir / "train_log.jsonl").string());

  std::cerr << "training task '" << task.spec.name << "' (" << data.train.size() << " train / "
            << data.dev.size() << " dev / " << data.test.size() << " test, vocab "
            << vocab.size() << ")\n";
  const auto result = train_task(data.train, data.dev, std::move(model), vocab, train_cfg, &log);

  save_checkpoint(result.model, task_dir / "checkpoint");
  vocab.save(task_dir / "vocab.txt");

  nlohmann::json best;
  best["best_epoch"] = result.state.best_epoch;
  best["dev_metric"] = result.state.best_metric;
  best["epochs_run"] = result.state.epochs_run;
  best["selection_metric"] = task.spec.effective_selection_metric();
  best["checkpoint"] = "checkpoint";
  std::ofstream best_out(task_dir / "best.json");
  best_out << best.dump(2) << '\n';

  if (result.state.diverged) {
    std::cerr << "task '" << task.spec.name
              << "' diverged: " << result.state.diagnostic
              << " (best checkpoint so far was saved)\n";
    return false;
  }
  std::cerr << "task '" << task.spec.name << "' best " << task.spec.effective_selection_metric()
            << " = " << result.state.best_metric << " at epoch " << result.state.best_epoch
            << "\n";
  return true;
}

int run_train(const RunConfig& cfg, const CliOptions& opts, const std::string& task_name) {
  if (cfg.tasks.empty()) throw ConfigError("config defines no tasks");
  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  std::cerr << "run directory: " << run_dir.string() << "\n";

  bool ok = true;
  if (task_name.empty()) {
    for (const auto& task : cfg.tasks) ok = train_one_task(cfg, task, run_dir) && ok;
  } else {
    ok = train_one_task(cfg, cfg.task(task_name), run_dir);
  }
  std::cout << run_dir.string() << "\n";
  return ok ? 0 : 1;
}

std::size_t effective_max_len(const RunConfig& cfg, const TaskRunConfig& task) {
  return task.max_len > 0 ? task.max_len : cfg.train.max_len;
}

std::size_t effective_budget(const RunConfig& cfg, const TaskRunConfig& task) {
  return task.max_tokens_per_batch > 0 ? task.max_tokens_per_batch
                                       : cfg.train.max_tokens_per_batch;
}

int run_eval(const RunConfig& cfg, const std::string& task_name, const std::string& split) {
  const TaskRunConfig& task = cfg.task(task_name);
  const fs::path root = checkpoint_root_or_throw(cfg);
  const fs::path task_dir = root / task_name;
  const auto model = load_checkpoint<PipelineScalar>(task_dir / "checkpoint");
  const Vocab vocab = Vocab::load(task_dir / "vocab.txt");

  const TaskData data = split_task_data(cfg, task);
  const Dataset* chosen = &data.test;
  if (split == "dev") chosen = &data.dev;
  else if (split == "train") chosen = &data.train;
  else if (split != "test") throw ConfigError("unknown split '" + split + "'");

  const MetricsReport report =
      evaluate_task(model, *chosen, vocab, effective_max_len(cfg, task),
                    effective_budget(cfg, task));
  std::cout << metrics_report_to_json(report) << "\n";
  return 0;
}

std::vector<TaskPredictor<PipelineScalar>> load_predictors(const RunConfig& cfg) {
  if (cfg.feature_groups.empty()) throw ConfigError("config defines no feature_groups");
  const fs::path root = checkpoint_root_or_throw(cfg);
  std::vector<TaskPredictor<PipelineScalar>> predictors;
  predictors.reserve(cfg.feature_groups.size());
  for (const auto& name : cfg.feature_groups) {
    const TaskRunConfig& task = cfg.task(name);
    const fs::path task_dir = root / name;
    if (!fs::exists(task_dir / "checkpoint" / "manifest.json"))
      throw ConfigError("missing checkpoint for feature group '" + name + "' under " +
                        task_dir.string());
    predictors.push_back({load_checkpoint<PipelineScalar>(task_dir / "checkpoint"),
                          Vocab::load(task_dir / "vocab.txt"), effective_max_len(cfg, task)});
  }
  return predictors;
}

FeatureMatrix extract_all_features(const RunConfig& cfg) {
  if (cfg.responses.empty()) throw ConfigError("config sets no 'responses' path");
  if (!fs::exists(cfg.responses))
    throw ConfigError("responses path does not exist: " + cfg.responses.string());
  const auto responses = load_response_set(cfg.responses);
  std::cerr << "responses: " << responses.size() << " (" << count_positive(responses)
            << " disturbing)\n";
  const auto predictors = load_predictors(cfg);
  return extract_feature_matrix(responses, predictors, cfg.chunk_size);
}

int run_extract_features(const RunConfig& cfg, const CliOptions& opts) {
  const FeatureMatrix features = extract_all_features(cfg);
  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  const fs::path out = run_dir / "features.csv";
  save_feature_csv(out, features);
  std::cout << out.string() << "\n";
  return 0;
}

FeatureMatrix load_features_checked(const RunConfig& cfg, const std::string& features_path,
                                    bool regroup) {
  if (!fs::exists(features_path))
    throw ConfigError("features CSV does not exist: " + features_path);
  FeatureMatrix features = load_feature_csv(features_path);
  if (regroup) {
    std::vector<TaskSpec> specs;
    for (const auto& name : cfg.feature_groups) specs.push_back(cfg.task(name).spec);
    FeatureSchema schema = feature_schema(specs);
    if (schema.flat_slots() != features.schema.flat_slots())
      throw ConfigError("feature CSV columns do not match the configured feature groups");
    features.schema = std::move(schema);
  }
  return features;
}

int run_stack(const RunConfig& cfg, const CliOptions& opts, const std::string& features_path) {
  const FeatureMatrix features = load_features_checked(cfg, features_path, false);
  StackerModel model = train_stacker(features.values, features.labels, cfg.reg_strength,
                                     cfg.seed, features.schema.flat_slots());
  model.threshold = cfg.threshold;

  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  save_stacker(run_dir / "stacker.json", model);
  save_weight_csv(run_dir / "weights.csv", model);
  std::cout << (run_dir / "stacker.json").string() << "\n";
  return 0;
}

nlohmann::json fold_metrics_json(const FoldMetrics& metrics) {
  return {{"accuracy", metrics.accuracy},
          {"recall", metrics.recall},
          {"precision", metrics.precision},
          {"f1", metrics.f1}};
}

int run_crossval(const RunConfig& cfg, const CliOptions& opts, const std::string& features_path) {
  const FeatureMatrix features = load_features_checked(cfg, features_path, false);
  const CVReport report = cross_validate(features.values, features.labels, cfg.cv_folds,
                                         cfg.seed, cfg.reg_strength);
  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  save_ablation_csv(run_dir / "crossval.csv", {report});

  nlohmann::json out;
  out["feature_set"] = report.feature_set;
  out["folds"] = nlohmann::json::array();
  for (const auto& fold : report.folds) out["folds"].push_back(fold_metrics_json(fold));
  out["aggregate"] = fold_metrics_json(report.aggregate);
  std::cout << out.dump() << "\n";
  return 0;
}

std::vector<std::vector<std::string>> ablation_combinations(const RunConfig& cfg) {
  if (!cfg.ablation.empty()) return cfg.ablation;
  if (cfg.feature_groups.empty()) throw ConfigError("config defines no feature_groups");
  return {cfg.feature_groups};
}

int run_ablate(const RunConfig& cfg, const CliOptions& opts, const std::string& features_path) {
  const FeatureMatrix features = load_features_checked(cfg, features_path, true);
  const auto reports =
      ablate(features, ablation_combinations(cfg), cfg.cv_folds, cfg.seed, cfg.reg_strength);
  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  const fs::path out = run_dir / "ablation.csv";
  save_ablation_csv(out, reports);
  std::cout << out.string() << "\n";
  return 0;
}

void write_confusion_reports(const RunConfig& cfg, const fs::path& run_dir) {
  const fs::path root = checkpoint_root_or_throw(cfg);
  for (const auto& name : cfg.feature_groups) {
    const TaskRunConfig& task = cfg.task(name);
    if (task.spec.kind == TaskKind::regression) continue;
    const fs::path task_dir = root / name;
    const auto model = load_checkpoint<PipelineScalar>(task_dir / "checkpoint");
    const Vocab vocab = Vocab::load(task_dir / "vocab.txt");
    const TaskData data = split_task_data(cfg, task);
    const MatX<PipelineScalar> scores =
        predict_scores(model, data.test, vocab, effective_max_len(cfg, task),
                       effective_budget(cfg, task));

    std::ofstream out(run_dir / ("confusion_" + name + ".csv"));
    if (!out) throw DataError("cannot write confusion CSV for task '" + name + "'");
    if (task.spec.kind == TaskKind::classification) {
      std::vector<int> truth;
      std::vector<int> predicted;
      for (std::size_t i = 0; i < data.test.size(); ++i) {
        truth.push_back(std::get<int>(data.test.records[i].label));
        Eigen::Index best = 0;
        scores.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
        predicted.push_back(static_cast<int>(best));
      }
      confusion_matrix(truth, predicted, task.spec.num_classes())
          .write_csv(out, task.spec.label_names);
    } else {
      // multilabel: one binary confusion row per label
      out << "label,tn,fp,fn,tp\n";
      for (int c = 0; c < task.spec.num_classes(); ++c) {
        std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
        for (std::size_t i = 0; i < data.test.size(); ++i) {
          const bool truth =
              std::get<MultiLabel>(data.test.records[i].label)[static_cast<std::size_t>(c)] != 0;
          const bool pred = scores(static_cast<Eigen::Index>(i), c) >= 0.5;
          if (truth && pred) ++tp;
          else if (truth) ++fn;
          else if (pred) ++fp;
          else ++tn;
        }
        out << csv_escape(task.spec.label_names[static_cast<std::size_t>(c)]) << ',' << tn << ','
            << fp << ',' << fn << ',' << tp << '\n';
      }
    }
  }
}

int run_report(const RunConfig& cfg, const CliOptions& opts) {
  const FeatureMatrix features = extract_all_features(cfg);
  const fs::path run_dir = create_run_dir(output_root(cfg, opts), cfg.config_hash);
  save_feature_csv(run_dir / "features.csv", features);

  const auto reports =
      ablate(features, ablation_combinations(cfg), cfg.cv_folds, cfg.seed, cfg.reg_strength);
  save_ablation_csv(run_dir / "ablation.csv", reports);

  StackerModel stacker = train_stacker(features.values, features.labels, cfg.reg_strength,
                                       cfg.seed, features.schema.flat_slots());
  stacker.threshold = cfg.threshold;
  save_stacker(run_dir / "stacker.json", stacker);
  save_weight_csv(run_dir / "weights.csv", stacker);

  write_confusion_reports(cfg, run_dir);
  std::cout << run_dir.string() << "\n";
  return 0;
}

int run_predict(const RunConfig& cfg, bool threshold_overridden, const std::string& stacker_path,
                const std::string& input_path, const std::string& inline_text) {
  if (!fs::exists(stacker_path))
    throw ConfigError("stacker file does not exist: " + stacker_path);
  StackerModel stacker = load_stacker(stacker_path);
  if (threshold_overridden) stacker.threshold = cfg.threshold;

  const auto predictors = load_predictors(cfg);
  std::vector<TaskSpec> specs;
  for (const auto& predictor : predictors) specs.push_back(predictor.model.task);
  check_schema(stacker, feature_schema(specs).flat_slots());

  std::vector<std::pair<std::string, std::string>> inputs;  // id, text
  if (!inline_text.empty()) {
    inputs.emplace_back("input-0", inline_text);
  } else {
    if (input_path.empty()) throw ConfigError("predict needs --input or --text");
    if (!fs::exists(input_path)) throw ConfigError("input path does not exist: " + input_path);
    std::ifstream in(input_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(input_path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!obj.contains("id") || !obj.contains("text"))
        throw DataError(input_path + ":" + std::to_string(line_no) +
                        ": expected fields id and text");
      inputs.emplace_back(obj["id"].get<std::string>(), obj["text"].get<std::string>());
    }
    if (inputs.empty()) throw DataError(input_path + ": no inputs");
  }

  for (const auto& [id, text] : inputs) {
    const VecX<double> fv = extract_features(text, predictors, cfg.chunk_size);
    const StackerPrediction pred = predict_disturbing(stacker, fv);
    nlohmann::json line;
    line["id"] = id;
    line["probability"] = pred.probability;
    line["flag"] = pred.flag;
    std::cout << line.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"training, stacking, and flagging pipeline for disturbing-content detection"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opts;
  app.add_option("--config", opts.config_path, "run configuration JSON")->required();
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override the config seed");
  double threshold_flag = 0.5;
  auto* threshold_opt =
      app.add_option("--threshold", threshold_flag, "override the decision threshold");
  std::string out_flag;
  auto* out_opt = app.add_option("--out", out_flag, "output root (beats REDFLAG_OUT)");
  std::string root_flag;
  auto* root_opt =
      app.add_option("--checkpoint-root", root_flag, "directory holding <task>/checkpoint");

  auto* cmd_train = app.add_subcommand("train", "fine-tune task models");
  std::string train_task_name;
  cmd_train->add_option("--task", train_task_name, "train only this task");

  auto* cmd_eval = app.add_subcommand("eval", "evaluate one task");
  std::string eval_task_name;
  std::string eval_split = "test";
  cmd_eval->add_option("--task", eval_task_name, "task name")->required();
  cmd_eval->add_option("--split", eval_split, "train|dev|test (default test)");

  auto* cmd_extract = app.add_subcommand("extract-features", "features for the response set");

  auto* cmd_stack = app.add_subcommand("stack", "train the stacker on a feature CSV");
  std::string stack_features;
  cmd_stack->add_option("--features", stack_features, "feature CSV")->required();

  auto* cmd_crossval = app.add_subcommand("crossval", "k-fold CV on a feature CSV");
  std::string crossval_features;
  cmd_crossval->add_option("--features", crossval_features, "feature CSV")->required();

  auto* cmd_ablate = app.add_subcommand("ablate", "CV per feature-group combination");
  std::string ablate_features;
  cmd_ablate->add_option("--features", ablate_features, "feature CSV")->required();

  auto* cmd_predict = app.add_subcommand("predict", "flag texts with a trained stacker");
  std::string predict_stacker;
  std::string predict_input;
  std::string predict_text;
  cmd_predict->add_option("--stacker", predict_stacker, "stacker JSON")->required();
  cmd_predict->add_option("--input", predict_input, "JSONL with id and text per line");
  cmd_predict->add_option("--text", predict_text, "classify a single text");

  auto* cmd_report = app.add_subcommand("report", "full pipeline report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed_opt->count() > 0) opts.seed = seed_flag;
    if (threshold_opt->count() > 0) opts.threshold = threshold_flag;
    if (out_opt->count() > 0) opts.out = out_flag;
    if (root_opt->count() > 0) opts.checkpoint_root = root_flag;
    const RunConfig cfg = load_config(opts);

    if (cmd_train->parsed()) return run_train(cfg, opts, train_task_name);
    if (cmd_eval->parsed()) return run_eval(cfg, eval_task_name, eval_split);
    if (cmd_extract->parsed()) return run_extract_features(cfg, opts);
    if (cmd_stack->parsed()) return run_stack(cfg, opts, stack_features);
    if (cmd_crossval->parsed()) return run_crossval(cfg, opts, crossval_features);
    if (cmd_ablate->parsed()) return run_ablate(cfg, opts, ablate_features);
    if (cmd_predict->parsed())
      return run_predict(cfg, threshold_opt->count() > 0, predict_stacker, predict_input,
                         predict_text);
    if (cmd_report->parsed()) return run_report(cfg, opts);
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
