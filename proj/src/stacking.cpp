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
#include "redflag/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "redflag/metrics.hpp"

namespace redflag {
namespace {

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  // feature CSVs are written by us: identifiers and plain numbers, no quoting
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double logistic_objective(const MatX<double>& x, const std::vector<int>& y,
                          const VecX<double>& w, double b, double reg) {
  const double n = static_cast<double>(x.rows());
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double z = x.row(i).dot(w) + b;
    // log sigma(z) and log(1 - sigma(z)) via the stable log1p form
    const double log_p = z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
    const double log_q = z >= 0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
    loglik += y[static_cast<std::size_t>(i)] == 1 ? log_p : log_q;
  }
  return loglik / n - 0.5 * reg * w.squaredNorm() / n;
}

}  // namespace

std::size_t FeatureSchema::slot_count() const {
  std::size_t total = 0;
  for (const auto& group : groups) total += group.slots.size();
  return total;
}

std::vector<std::string> FeatureSchema::flat_slots() const {
  std::vector<std::string> out;
  out.reserve(slot_count());
  for (const auto& group : groups)
    out.insert(out.end(), group.slots.begin(), group.slots.end());
  return out;
}

std::vector<std::size_t> FeatureSchema::columns_for(
    const std::vector<std::string>& group_names) const {
  std::vector<std::size_t> columns;
  for (const auto& wanted : group_names) {
    std::size_t offset = 0;
    bool found = false;
    for (const auto& group : groups) {
      if (group.name == wanted) {
        for (std::size_t i = 0; i < group.slots.size(); ++i) columns.push_back(offset + i);
        found = true;
        break;
      }
      offset += group.slots.size();
    }
    if (!found) throw ConfigError("unknown feature group '" + wanted + "'");
  }
  std::sort(columns.begin(), columns.end());
  return columns;
}

FeatureSchema feature_schema(const std::vector<TaskSpec>& tasks) {
  FeatureSchema schema;
  for (const auto& task : tasks) {
    FeatureSchema::Group group;
    group.name = task.name;
    if (task.kind == TaskKind::regression) {
      group.slots.push_back(task.name + ".score");
    } else {
      for (const auto& label : task.label_names) group.slots.push_back(task.name + "." + label);
    }
    schema.groups.push_back(std::move(group));
  }
  return schema;
}

void save_feature_csv(const std::filesystem::path& path, const FeatureMatrix& features) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id";
  for (const auto& slot : features.schema.flat_slots()) out << ',' << csv_escape(slot);
  out << ",disturbing\n";
  for (Eigen::Index r = 0; r < features.values.rows(); ++r) {
    out << csv_escape(features.ids[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < features.values.cols(); ++c)
      out << ',' << format_double(features.values(r, c));
    out << ',' << features.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

FeatureMatrix load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty feature CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "id" || header.back() != "disturbing")
    throw DataError(path.string() + ": expected header id,<slots...>,disturbing");

  FeatureMatrix out;
  FeatureSchema::Group group;  // single flat group; group structure lives in run configs
  group.name = "features";
  group.slots.assign(header.begin() + 1, header.end() - 1);
  out.schema.groups.push_back(group);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": field count mismatch");
    out.ids.push_back(fields.front());
    std::vector<double> row;
    row.reserve(fields.size() - 2);
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
      try {
        row.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                        fields[i] + "'");
      }
    }
    const int label = std::stoi(fields.back());
    if (label != 0 && label != 1)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": disturbing must be 0 or 1");
    out.labels.push_back(label);
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(group.slots.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return out;
}

void save_stacker(const std::filesystem::path& path, const StackerModel& model) {
  nlohmann::json obj;
  obj["slots"] = model.slots;
  std::vector<double> weights(model.weights.data(), model.weights.data() + model.weights.size());
  obj["weights"] = weights;
  obj["bias"] = model.bias;
  obj["threshold"] = model.threshold;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << obj.dump(2) << '\n';
}

StackerModel load_stacker(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json obj;
  try {
    in >> obj;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  StackerModel model;
  model.slots = obj.at("slots").get<std::vector<std::string>>();
  const auto weights = obj.at("weights").get<std::vector<double>>();
  if (weights.size() != model.slots.size())
    throw DataError(path.string() + ": weight count does not match slot count");
  model.weights = Eigen::Map<const VecX<double>>(weights.data(),
                                                 static_cast<Eigen::Index>(weights.size()));
  model.bias = obj.at("bias").get<double>();
  model.threshold = obj.at("threshold").get<double>();
  if (!(model.threshold >= 0.0 && model.threshold <= 1.0))
    throw ConfigError("stacker threshold must lie in [0, 1]");
  return model;
}

StackerModel train_stacker(const MatX<double>& features, const std::vector<int>& labels,
                           double reg_strength, std::uint64_t /*seed*/,
                           const std::vector<std::string>& slots) {
  const auto n = features.rows();
  const auto d = features.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw DataError("feature rows and labels must have equal length");
  if (n < 2) throw DataError("stacker training needs at least 2 examples");
  if (!slots.empty() && static_cast<Eigen::Index>(slots.size()) != d)
    throw ConfigError("slot names do not match feature width");
  if (reg_strength < 0.0) throw ConfigError("reg_strength must be non-negative");

  std::size_t positives = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw DataError("stacker labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size())
    throw DataError("stacker training needs both classes present");

  VecX<double> w = VecX<double>::Zero(d);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  constexpr int kMaxIterations = 10000;
  constexpr double kGradTolerance = 1e-6;

  double objective = logistic_objective(features, labels, w, b, reg_strength);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    VecX<double> grad_w = VecX<double>::Zero(d);
    double grad_b = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = features.row(i).dot(w) + b;
      const double residual =
          static_cast<double>(labels[static_cast<std::size_t>(i)]) - sigmoid(z);
      grad_w += residual * features.row(i).transpose();
      grad_b += residual;
    }
    grad_w = (grad_w - reg_strength * w) * inv_n;
    grad_b *= inv_n;

    const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (grad_norm < kGradTolerance) break;

    // backtracking ascent with the Armijo condition
    double step = 1.0;
    bool moved = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      const VecX<double> w_next = w + step * grad_w;
      const double b_next = b + step * grad_b;
      const double objective_next =
          logistic_objective(features, labels, w_next, b_next, reg_strength);
      if (objective_next >= objective + 1e-4 * step * grad_norm * grad_norm) {
        w = w_next;
        b = b_next;
        objective = objective_next;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // step underflow: at numerical optimum
  }

  StackerModel model;
  model.slots = slots;
  model.weights = std::move(w);
  model.bias = b;
  return model;
}

StackerPrediction predict_disturbing(const StackerModel& model, const VecX<double>& features) {
  if (features.size() != model.weights.size())
    throw ConfigError("feature vector width " + std::to_string(features.size()) +
                      " does not match stacker width " + std::to_string(model.weights.size()));
  StackerPrediction out;
  out.probability = sigmoid(model.weights.dot(features) + model.bias);
  out.flag = out.probability >= model.threshold;
  return out;
}

void check_schema(const StackerModel& model, const std::vector<std::string>& slots) {
  if (slots != model.slots)
    throw ConfigError("feature slots do not match the stacker's training schema");
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (labels.size() < static_cast<std::size_t>(k))
    throw DataError("cross-validation needs at least k examples");

  std::vector<std::size_t> negatives;
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      positives.push_back(i);
    else if (labels[i] == 0)
      negatives.push_back(i);
    else
      throw DataError("fold labels must be 0 or 1");
  }
  if (positives.size() < 2 || negatives.size() < 2)
    throw DataError("stratification needs at least 2 examples of each class");

  SplitMix64 rng(seed);
  shuffle_in_place(negatives, rng);
  shuffle_in_place(positives, rng);

  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t cursor = 0;
  for (const auto& pool : {negatives, positives})
    for (const std::size_t idx : pool)
      folds[cursor++ % static_cast<std::size_t>(k)].push_back(idx);
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

namespace {

FoldMetrics evaluate_fold(const StackerModel& model, const MatX<double>& features,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& fold) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t hits = 0;
  for (const std::size_t idx : fold) {
    const auto pred =
        predict_disturbing(model, features.row(static_cast<Eigen::Index>(idx)).transpose());
    const bool truth = labels[idx] == 1;
    if (pred.flag && truth) ++tp;
    else if (pred.flag && !truth) ++fp;
    else if (!pred.flag && truth) ++fn;
    if (pred.flag == truth) ++hits;
  }
  const PRF prf = precision_recall_f1(tp, fp, fn);
  FoldMetrics out;
  out.accuracy = static_cast<double>(hits) / static_cast<double>(fold.size());
  out.recall = prf.recall;
  out.precision = prf.precision;
  out.f1 = prf.f1;
  return out;
}

CVReport cross_validate_with_folds(const MatX<double>& features, const std::vector<int>& labels,
                                   const std::vector<std::vector<std::size_t>>& folds,
                                   double reg_strength, const std::string& feature_set_name) {
  CVReport report;
  report.feature_set = feature_set_name;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());

    MatX<double> train_x(static_cast<Eigen::Index>(train_idx.size()), features.cols());
    std::vector<int> train_y;
    train_y.reserve(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      train_x.row(static_cast<Eigen::Index>(i)) =
          features.row(static_cast<Eigen::Index>(train_idx[i]));
      train_y.push_back(labels[train_idx[i]]);
    }
    const StackerModel model = train_stacker(train_x, train_y, reg_strength, 0, {});
    report.folds.push_back(evaluate_fold(model, features, labels, folds[f]));
  }

  for (const auto& fold : report.folds) {
    report.aggregate.accuracy += fold.accuracy;
    report.aggregate.recall += fold.recall;
    report.aggregate.precision += fold.precision;
    report.aggregate.f1 += fold.f1;
  }
  const auto k = static_cast<double>(report.folds.size());
  report.aggregate.accuracy /= k;
  report.aggregate.recall /= k;
  report.aggregate.precision /= k;
  report.aggregate.f1 /= k;
  return report;
}

}  // namespace

CVReport cross_validate(const MatX<double>& features, const std::vector<int>& labels, int k,
                        std::uint64_t seed, double reg_strength,
                        const std::string& feature_set_name) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DataError("feature rows and labels must have equal length");
  const auto folds = stratified_folds(labels, k, seed);
  return cross_validate_with_folds(features, labels, folds, reg_strength, feature_set_name);
}

std::vector<CVReport> ablate(const FeatureMatrix& features,
                             const std::vector<std::vector<std::string>>& combinations, int k,
                             std::uint64_t seed, double reg_strength) {
  if (combinations.empty()) throw ConfigError("ablation needs at least one group combination");
  const auto folds = stratified_folds(features.labels, k, seed);

  std::vector<CVReport> reports;
  reports.reserve(combinations.size());
  for (const auto& combo : combinations) {
    const auto columns = features.schema.columns_for(combo);
    MatX<double> sub(features.values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
      sub.col(static_cast<Eigen::Index>(c)) =
          features.values.col(static_cast<Eigen::Index>(columns[c]));

    std::string name;
    for (std::size_t i = 0; i < combo.size(); ++i) {
      if (i > 0) name += "+";
      name += combo[i];
    }
    reports.push_back(
        cross_validate_with_folds(sub, features.labels, folds, reg_strength, name));
  }
  return reports;
}

void save_ablation_csv(const std::filesystem::path& path, const std::vector<CVReport>& reports) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "features,accuracy,recall,precision,f1\n";
  for (const auto& report : reports) {
    out << csv_escape(report.feature_set) << ',' << format_double(report.aggregate.accuracy)
        << ',' << format_double(report.aggregate.recall) << ','
        << format_double(report.aggregate.precision) << ','
        << format_double(report.aggregate.f1) << '\n';
  }
}

std::vector<std::pair<std::string, double>> feature_weight_report(const StackerModel& model) {
  if (model.slots.size() != static_cast<std::size_t>(model.weights.size()))
    throw ConfigError("stacker has no slot names to report");
  std::vector<std::pair<std::string, double>> out;
  out.reserve(model.slots.size());
  for (std::size_t i = 0; i < model.slots.size(); ++i)
    out.emplace_back(model.slots[i], model.weights(static_cast<Eigen::Index>(i)));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

void save_weight_csv(const std::filesystem::path& path, const StackerModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "feature,weight\n";
  for (const auto& [name, weight] : feature_weight_report(model))
    out << csv_escape(name) << ',' << format_double(weight) << '\n';
}

}  // namespace redflag
