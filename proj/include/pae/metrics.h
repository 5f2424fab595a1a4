// pae/metrics.h

// Copyright 2026  The paeattr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef PAE_METRICS_H_
#define PAE_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pae/dataio.h"

namespace pae {

struct ScorePool {
  std::vector<double> target;
  std::vector<double> nontarget;
};

struct EerResult {
  double eer = 0;
  double threshold = 0;
};

/**
   Computes the equal error rate of a target/non-target score pool.

   Every distinct score is tried as a threshold t. At t, the false-accept
   rate is the fraction of non-target scores >= t and the false-reject rate
   the fraction of target scores < t. The threshold minimising
   |FAR - FRR| is kept (the lowest one on ties) and the EER reported there is
   (FAR + FRR) / 2; no interpolation between operating points is done.

   -inf scores are mapped to (lowest finite score - 1) and +inf to
   (highest finite score + 1) before the sweep. NaN is rejected.
 */
EerResult Eer(const ScorePool &pool);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0)
      : counts_(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
            num_classes, num_classes)) {}

  void Add(int truth, int predicted, std::int64_t count = 1) {
    counts_(truth, predicted) += count;
  }
  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t RowSum(int truth) const { return counts_.row(truth).sum(); }
  /// Rows are true classes, columns predictions.
  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> &counts()
      const {
    return counts_;
  }

 private:
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

enum class EmptyRowPolicy { kError, kSkip };

/// Mean per-class recall. With kSkip, classes without trials are left out
/// of the mean instead of raising EmptyClassRow.
double BalancedAccuracy(const ConfusionMatrix &cm,
                        EmptyRowPolicy policy = EmptyRowPolicy::kError);

enum class ClassPooling { kPooled, kMacro };

/// EER over per-class scores (N x C). Pooled: every (trial, class) score
/// enters one pool, as target when the class is the trial's label. Macro:
/// one EER per class with both kinds of trials, averaged.
double MulticlassEer(const Eigen::MatrixXd &scores, std::span<const int> labels,
                     ClassPooling pooling = ClassPooling::kPooled);

/// Fractional ranks (1 = first), ties receive the mean of the ranks they span.
std::vector<double> AverageRanks(std::span<const double> values,
                                 bool descending);

/// Utterance counts per (label, attribute value), where each utterance goes
/// to the value with the largest probability in the attribute's block.
struct AttributeFlow {
  std::string attribute;
  std::vector<std::string> values;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // labels x values
  /// Pooled value EER over utterances with ground truth; NaN if undefined.
  double eer = 0;
};

struct FlowReport {
  std::vector<std::string> labels;  // row order, first-seen order in input
  std::vector<std::int64_t> label_counts;
  std::vector<AttributeFlow> attributes;
};

/// `rho` holds one probabilistic attribute embedding per row.
FlowReport BuildFlowReport(const FeatureMatrix &rho,
                           std::span<const std::string> labels,
                           const AttributeSchema &schema);

nlohmann::ordered_json FlowReportToJson(const FlowReport &report);

}  // namespace pae

#endif  // PAE_METRICS_H_
