// pae/explain.h

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

// Shapley-value attribution of back-end scores to individual features
// (attribute values), and aggregation of the per-utterance rankings.
//
// Coalitions are interventional: features outside a coalition S take the
// values of a background row, and v(S) averages over the background. No
// attempt is made to keep attribute blocks on the simplex after replacement.

#ifndef PAE_EXPLAIN_H_
#define PAE_EXPLAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pae/backends.h"

namespace pae {

using ScoreFn = std::function<double(const Eigen::VectorXd &)>;

/// Largest feature count accepted by ShapleyExact.
inline constexpr int kMaxExactFeatures = 20;

struct ShapleyResult {
  Eigen::VectorXd phi;
  Eigen::VectorXd se;  // standard errors; zero for the exact estimator
  double base = 0;     // mean of f over the background
  double fx = 0;       // f(x)
  int n_permutations = 0;  // 0 for the exact estimator
};

/// Exact Shapley values by enumerating all 2^T coalitions. `background` has
/// one reference row per row (B x T).
ShapleyResult ShapleyExact(const ScoreFn &f, const Eigen::VectorXd &x,
                           const Eigen::MatrixXd &background);

/// Permutation-sampling estimate. Each permutation draws one background row
/// and walks the features in permutation order, switching them from the
/// background value to x. `base` is the exact background mean of f, so the
/// estimate is efficient only in expectation.
ShapleyResult ShapleySample(const ScoreFn &f, const Eigen::VectorXd &x,
                            const Eigen::MatrixXd &background, int n_permutations,
                            std::uint64_t seed);

/// Seeded subsample of `n` rows (all rows if n >= rows), kept in input order.
Eigen::MatrixXd SelectBackground(const Eigen::MatrixXd &rows, int n,
                                 std::uint64_t seed);

enum class ShapleyMethod { kExact, kSample };

struct ExplainOptions {
  ShapleyMethod method = ShapleyMethod::kSample;
  int n_permutations = 2000;
  int workers = 1;
};

struct ExplainedUtterance {
  std::size_t row = 0;
  std::vector<ShapleyResult> per_class;  // one per back-end class
};

/// Explains every class score of every row of `features` against the
/// back-end's ExplainedScore. Row r, class c samples with seed
/// DeriveSeed(seed, "shapley", r * C + c).
std::vector<ExplainedUtterance> ExplainRows(const Backend &backend,
                                            const Eigen::MatrixXd &features,
                                            const Eigen::MatrixXd &background,
                                            const ExplainOptions &options,
                                            std::uint64_t seed);

enum class RankPooling {
  kPerClass,  // rank every (utterance, class) vector, average within a class, then over classes
  kPooled,    // average |phi| over classes per utterance, rank, then average
};

struct RankingTable {
  std::vector<double> value_rank;      // M mean ranks, 1 = most influential
  std::vector<double> attribute_rank;  // mean of the attribute's value ranks
  std::size_t num_utterances = 0;
  int num_classes = 0;
};

/// `reports[u][c]` is the phi vector of utterance u for class c; absolute
/// values are ranked in descending order with average ranks for ties.
RankingTable RankAggregate(const std::vector<std::vector<Eigen::VectorXd>> &reports,
                           std::span<const int> block_sizes,
                           RankPooling pooling = RankPooling::kPerClass);

}  // namespace pae

#endif  // PAE_EXPLAIN_H_
