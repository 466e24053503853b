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
#include "redflag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace redflag {
namespace {

void require_equal_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

std::string metrics_report_to_json(const MetricsReport& report) {
  nlohmann::json obj;
  for (const auto& [name, value] : report) obj[name] = value;
  return obj.dump();
}

PRF precision_recall_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF out;
  const auto tpd = static_cast<double>(tp);
  out.precision = (tp + fp) > 0 ? tpd / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? tpd / static_cast<double>(tp + fn) : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

MicroMacroF1 f1_micro_macro(const std::vector<ClassCounts>& per_class) {
  MicroMacroF1 out;
  if (per_class.empty()) return out;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double macro_sum = 0.0;
  for (const auto& counts : per_class) {
    tp += counts.tp;
    fp += counts.fp;
    fn += counts.fn;
    macro_sum += precision_recall_f1(counts.tp, counts.fp, counts.fn).f1;
  }
  out.micro = precision_recall_f1(tp, fp, fn).f1;
  out.macro = macro_sum / static_cast<double>(per_class.size());
  return out;
}

ConfusionMatrix::ConfusionMatrix(int num_classes) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
  counts_ = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_classes,
                                                                              num_classes);
}

void ConfusionMatrix::add(int true_class, int predicted_class) {
  if (true_class < 0 || true_class >= num_classes() || predicted_class < 0 ||
      predicted_class >= num_classes())
    throw DataError("class index out of range for confusion matrix");
  ++counts_(true_class, predicted_class);
}

std::int64_t ConfusionMatrix::at(int true_class, int predicted_class) const {
  return counts_(true_class, predicted_class);
}

std::int64_t ConfusionMatrix::total() const { return counts_.sum(); }

std::int64_t ConfusionMatrix::diagonal() const { return counts_.diagonal().sum(); }

ClassCounts ConfusionMatrix::counts_for(int cls) const {
  ClassCounts out;
  out.tp = static_cast<std::size_t>(counts_(cls, cls));
  out.fp = static_cast<std::size_t>(counts_.col(cls).sum() - counts_(cls, cls));
  out.fn = static_cast<std::size_t>(counts_.row(cls).sum() - counts_(cls, cls));
  return out;
}

std::vector<ClassCounts> ConfusionMatrix::per_class_counts() const {
  std::vector<ClassCounts> out;
  out.reserve(static_cast<std::size_t>(num_classes()));
  for (int c = 0; c < num_classes(); ++c) out.push_back(counts_for(c));
  return out;
}

void ConfusionMatrix::write_csv(std::ostream& out,
                                const std::vector<std::string>& label_names) const {
  const int n = num_classes();
  if (static_cast<int>(label_names.size()) != n)
    throw ConfigError("label name count does not match confusion matrix size");
  out << "true\\pred";
  for (const auto& name : label_names) out << ',' << csv_escape(name);
  out << '\n';
  for (int r = 0; r < n; ++r) {
    out << csv_escape(label_names[static_cast<std::size_t>(r)]);
    for (int c = 0; c < n; ++c) out << ',' << counts_(r, c);
    out << '\n';
  }
}

ConfusionMatrix confusion_matrix(const std::vector<int>& true_classes,
                                 const std::vector<int>& predicted_classes, int num_classes) {
  require_equal_length(true_classes.size(), predicted_classes.size());
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < true_classes.size(); ++i)
    cm.add(true_classes[i], predicted_classes[i]);
  return cm;
}

double accuracy(const std::vector<int>& true_classes, const std::vector<int>& predicted_classes) {
  require_equal_length(true_classes.size(), predicted_classes.size());
  if (true_classes.empty()) throw DataError("accuracy of an empty prediction set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < true_classes.size(); ++i)
    if (true_classes[i] == predicted_classes[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(true_classes.size());
}

double jaccard_index(const std::vector<MultiLabel>& true_sets,
                     const std::vector<MultiLabel>& pred_sets) {
  require_equal_length(true_sets.size(), pred_sets.size());
  if (true_sets.empty()) throw DataError("jaccard of an empty set list is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < true_sets.size(); ++i) {
    const auto& t = true_sets[i];
    const auto& p = pred_sets[i];
    require_equal_length(t.size(), p.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const bool truth = t[j] != 0;
      const bool pred = p[j] != 0;
      if (truth && pred) ++tp;
      else if (!truth && pred) ++fp;
      else if (truth && !pred) ++fn;
    }
    const std::size_t denom = tp + fp + fn;
    sum += denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(true_sets.size());
}

double mae(const std::vector<double>& predicted, const std::vector<double>& truth) {
  require_equal_length(predicted.size(), truth.size());
  if (predicted.empty()) throw DataError("MAE of an empty prediction set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - truth[i]);
  return sum / static_cast<double>(predicted.size());
}

double mean_error(const std::vector<double>& predicted, const std::vector<double>& truth) {
  require_equal_length(predicted.size(), truth.size());
  if (predicted.empty()) throw DataError("mean error of an empty prediction set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += predicted[i] - truth[i];
  return sum / static_cast<double>(predicted.size());
}

double mse(const std::vector<double>& predicted, const std::vector<double>& truth) {
  require_equal_length(predicted.size(), truth.size());
  if (predicted.empty()) throw DataError("MSE of an empty prediction set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.size());
}

double disattenuated_pearson(const std::vector<double>& x, const std::vector<double>& y,
                             const ReliabilityConstants& rel) {
  require_equal_length(x.size(), y.size());
  if (x.size() < 2) throw DataError("correlation needs at least 2 samples");
  if (!(rel.r_xx > 0.0 && rel.r_xx <= 1.0 && rel.r_yy > 0.0 && rel.r_yy <= 1.0))
    throw ConfigError("reliability constants must lie in (0, 1]");

  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw NumericError("correlation undefined: input has zero variance");
  return sxy / std::sqrt(sxx * syy) / std::sqrt(rel.r_xx * rel.r_yy);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& binary_labels) {
  require_equal_length(scores.size(), binary_labels.size());
  std::size_t positives = 0;
  for (const int label : binary_labels) {
    if (label != 0 && label != 1) throw DataError("ROC-AUC labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0)
    throw DataError("ROC-AUC needs both classes in the labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks across ties; tied positive/negative pairs then count half
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = static_cast<double>(i + j + 2) / 2.0;  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (binary_labels[order[k]] == 1) positive_rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

MetricsReport classification_report(const std::vector<int>& true_classes,
                                    const std::vector<int>& predicted_classes, int num_classes) {
  const ConfusionMatrix cm = confusion_matrix(true_classes, predicted_classes, num_classes);
  const auto per_class = cm.per_class_counts();
  const auto f1 = f1_micro_macro(per_class);

  double macro_precision = 0.0;
  double macro_recall = 0.0;
  for (const auto& counts : per_class) {
    const PRF prf = precision_recall_f1(counts.tp, counts.fp, counts.fn);
    macro_precision += prf.precision;
    macro_recall += prf.recall;
  }
  macro_precision /= static_cast<double>(per_class.size());
  macro_recall /= static_cast<double>(per_class.size());

  MetricsReport report;
  report["accuracy"] = accuracy(true_classes, predicted_classes);
  report["precision_macro"] = macro_precision;
  report["recall_macro"] = macro_recall;
  report["macro_f1"] = f1.macro;
  report["micro_f1"] = f1.micro;
  return report;
}

MetricsReport multilabel_report(const std::vector<MultiLabel>& truth,
                                const MatX<double>& probabilities, double threshold) {
  const auto n = static_cast<std::size_t>(probabilities.rows());
  const int num_labels = static_cast<int>(probabilities.cols());
  require_equal_length(truth.size(), n);
  if (n == 0) throw DataError("multilabel report of an empty set is undefined");

  std::vector<MultiLabel> predicted(n, MultiLabel(static_cast<std::size_t>(num_labels), 0));
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < num_labels; ++c)
      predicted[i][static_cast<std::size_t>(c)] =
          probabilities(static_cast<Eigen::Index>(i), c) >= threshold ? 1 : 0;

  std::vector<ClassCounts> per_label(static_cast<std::size_t>(num_labels));
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < num_labels; ++c) {
      const bool t = truth[i][static_cast<std::size_t>(c)] != 0;
      const bool p = predicted[i][static_cast<std::size_t>(c)] != 0;
      auto& counts = per_label[static_cast<std::size_t>(c)];
      if (t && p) ++counts.tp;
      else if (!t && p) ++counts.fp;
      else if (t && !p) ++counts.fn;
    }
  }
  const auto f1 = f1_micro_macro(per_label);

  MetricsReport report;
  report["jaccard"] = jaccard_index(truth, predicted);
  report["micro_f1"] = f1.micro;
  report["macro_f1"] = f1.macro;

  // mean per-label AUC over labels where both classes occur
  double auc_sum = 0.0;
  int auc_labels = 0;
  for (int c = 0; c < num_labels; ++c) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(n);
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(probabilities(static_cast<Eigen::Index>(i), c));
      labels.push_back(truth[i][static_cast<std::size_t>(c)] != 0 ? 1 : 0);
    }
    const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (pos == 0 || pos == n) continue;
    auc_sum += roc_auc(scores, labels);
    ++auc_labels;
  }
  if (auc_labels > 0) report["roc_auc_macro"] = auc_sum / auc_labels;
  return report;
}

MetricsReport regression_report(const std::vector<double>& predicted,
                                const std::vector<double>& truth,
                                const ReliabilityConstants& rel) {
  MetricsReport report;
  report["mae"] = mae(predicted, truth);
  report["neg_mae"] = -report["mae"];
  report["mean_error"] = mean_error(predicted, truth);
  report["mse"] = mse(predicted, truth);
  try {
    report["disattenuated_pearson"] = disattenuated_pearson(predicted, truth, rel);
  } catch (const NumericError&) {
    // constant predictions or targets: leave the key out
  } catch (const DataError&) {
  }
  return report;
}

}  // namespace redflag
