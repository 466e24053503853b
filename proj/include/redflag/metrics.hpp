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
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "redflag/common.hpp"
#include "redflag/corpus.hpp"
#include "redflag/linalg.hpp"

namespace redflag {

/// Metric name -> value. Ordered map so serialized reports are stable.
using MetricsReport = std::map<std::string, double>;

std::string metrics_report_to_json(const MetricsReport& report);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision = TP/(TP+FP), Recall = TP/(TP+FN), F1 = harmonic mean.
/// Zero denominators yield 0 by convention.
PRF precision_recall_f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct MicroMacroF1 {
  double micro = 0.0;
  double macro = 0.0;
};

/// Micro: F1 of the pooled TP/FP/FN. Macro: unweighted mean of per-class F1.
MicroMacroF1 f1_micro_macro(const std::vector<ClassCounts>& per_class);

/// C x C counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(int true_class, int predicted_class);
  std::int64_t at(int true_class, int predicted_class) const;
  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t total() const;
  std::int64_t diagonal() const;

  ClassCounts counts_for(int cls) const;
  std::vector<ClassCounts> per_class_counts() const;

  /// CSV with a header row of predicted-class labels; one row per true class.
  void write_csv(std::ostream& out, const std::vector<std::string>& label_names) const;

 private:
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& true_classes,
                                 const std::vector<int>& predicted_classes, int num_classes);

double accuracy(const std::vector<int>& true_classes, const std::vector<int>& predicted_classes);

/// Mean over examples of |true & pred| / |true | pred|, with the empty/empty
/// example contributing 1 by convention. Sets are indicator vectors.
double jaccard_index(const std::vector<MultiLabel>& true_sets,
                     const std::vector<MultiLabel>& pred_sets);

/// Mean absolute error. The absolute value is deliberate: the signed variant
/// is exposed separately as mean_error.
double mae(const std::vector<double>& predicted, const std::vector<double>& truth);

/// Mean of (Y_i - Yhat_i), no absolute value.
double mean_error(const std::vector<double>& predicted, const std::vector<double>& truth);

double mse(const std::vector<double>& predicted, const std::vector<double>& truth);

/// Measurement reliabilities used to disattenuate the Pearson correlation.
struct ReliabilityConstants {
  double r_xx = 0.77;
  double r_yy = 0.70;
};

/// Sample Pearson correlation scaled by 1/sqrt(r_xx * r_yy); range
/// [-1.362, 1.362] at the defaults. Throws NumericError when either input
/// has zero variance.
double disattenuated_pearson(const std::vector<double>& x, const std::vector<double>& y,
                             const ReliabilityConstants& rel = {});

/// Rank-based (Mann-Whitney) AUC with ties counted half. Labels must contain
/// both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& binary_labels);

/// Report builders used by task evaluation. Each fills only the metrics that
/// apply to the task kind.
MetricsReport classification_report(const std::vector<int>& true_classes,
                                    const std::vector<int>& predicted_classes, int num_classes);

MetricsReport multilabel_report(const std::vector<MultiLabel>& truth,
                                const MatX<double>& probabilities, double threshold = 0.5);

MetricsReport regression_report(const std::vector<double>& predicted,
                                const std::vector<double>& truth,
                                const ReliabilityConstants& rel = {});

}  // namespace redflag
