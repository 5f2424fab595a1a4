// src/metrics.cc

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

#include "pae/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "pae/attribank.h"
#include "pae/error.h"
#include "pae/util.h"

namespace pae {

namespace {

// Replaces infinities so that ordering is kept without arithmetic on them.
void Sanitize(std::vector<double> *a, std::vector<double> *b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto *v : {a, b}) {
    for (double s : *v) {
      if (std::isnan(s)) Fail(ErrorCode::kInvalidArgument, "NaN score");
      if (std::isfinite(s)) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0;
  for (auto *v : {a, b}) {
    for (double &s : *v) {
      if (s == -std::numeric_limits<double>::infinity()) s = lo - 1;
      if (s == std::numeric_limits<double>::infinity()) s = hi + 1;
    }
  }
}

}  // namespace

EerResult Eer(const ScorePool &pool) {
  if (pool.target.empty() || pool.nontarget.empty()) {
    Fail(ErrorCode::kEmptyPool, "EER needs target and non-target scores");
  }
  std::vector<double> tgt = pool.target;
  std::vector<double> non = pool.nontarget;
  Sanitize(&tgt, &non);
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());
  std::vector<double> thresholds;
  thresholds.reserve(tgt.size() + non.size());
  std::merge(tgt.begin(), tgt.end(), non.begin(), non.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const auto n_tgt = static_cast<std::int64_t>(tgt.size());
  const auto n_non = static_cast<std::int64_t>(non.size());
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  std::int64_t best_fa = 0, best_fr = 0;
  double best_t = thresholds.front();
  std::size_t it = 0, in = 0;
  for (double t : thresholds) {
    while (it < tgt.size() && tgt[it] < t) ++it;
    while (in < non.size() && non[in] < t) ++in;
    const auto fr = static_cast<std::int64_t>(it);          // targets < t
    const auto fa = n_non - static_cast<std::int64_t>(in);  // non-targets >= t
    // |fa/n_non - fr/n_tgt| compared exactly on a common denominator.
    const std::int64_t gap = std::llabs(fa * n_tgt - fr * n_non);
    if (gap < best_gap) {
      best_gap = gap;
      best_fa = fa;
      best_fr = fr;
      best_t = t;
    }
  }
  EerResult r;
  r.eer = (static_cast<double>(best_fa) / static_cast<double>(n_non) +
           static_cast<double>(best_fr) / static_cast<double>(n_tgt)) /
          2;
  r.threshold = best_t;
  return r;
}

double BalancedAccuracy(const ConfusionMatrix &cm, EmptyRowPolicy policy) {
  double sum = 0;
  int used = 0;
  for (int i = 0; i < cm.num_classes(); ++i) {
    const std::int64_t total = cm.RowSum(i);
    if (total == 0) {
      if (policy == EmptyRowPolicy::kSkip) continue;
      Fail(ErrorCode::kEmptyClassRow,
           "class " + std::to_string(i) + " has no trials");
    }
    sum += static_cast<double>(cm.counts()(i, i)) / static_cast<double>(total);
    ++used;
  }
  if (used == 0) Fail(ErrorCode::kEmptyClassRow, "no class has trials");
  return sum / used;
}

double MulticlassEer(const Eigen::MatrixXd &scores, std::span<const int> labels,
                     ClassPooling pooling) {
  if (scores.cols() < 2) {
    Fail(ErrorCode::kInvalidArgument, "multi-class EER needs >= 2 classes");
  }
  if (static_cast<std::size_t>(scores.rows()) != labels.size()) {
    Fail(ErrorCode::kDimensionMismatch, "one label per score row required");
  }
  if (pooling == ClassPooling::kPooled) {
    ScorePool pool;
    for (Eigen::Index n = 0; n < scores.rows(); ++n) {
      for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        (c == labels[n] ? pool.target : pool.nontarget).push_back(scores(n, c));
      }
    }
    return Eer(pool).eer;
  }
  double sum = 0;
  int used = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    ScorePool pool;
    for (Eigen::Index n = 0; n < scores.rows(); ++n) {
      (c == labels[n] ? pool.target : pool.nontarget).push_back(scores(n, c));
    }
    if (pool.target.empty() || pool.nontarget.empty()) continue;
    sum += Eer(pool).eer;
    ++used;
  }
  if (used == 0) Fail(ErrorCode::kEmptyPool, "no class has both trial kinds");
  return sum / used;
}

std::vector<double> AverageRanks(std::span<const double> values,
                                 bool descending) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

FlowReport BuildFlowReport(const FeatureMatrix &rho,
                           std::span<const std::string> labels,
                           const AttributeSchema &schema) {
  if (rho.cols() != schema.total_values()) {
    Fail(ErrorCode::kSchemaMismatch,
         "embedding dim " + std::to_string(rho.cols()) + " != schema M " +
             std::to_string(schema.total_values()));
  }
  if (static_cast<std::size_t>(rho.rows()) != labels.size()) {
    Fail(ErrorCode::kCountMismatch, "one label per embedding row required");
  }
  FlowReport report;
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<std::size_t> row_index(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    auto [it, inserted] = row_of.emplace(labels[n], report.labels.size());
    if (inserted) {
      report.labels.push_back(labels[n]);
      report.label_counts.push_back(0);
    }
    row_index[n] = it->second;
    ++report.label_counts[it->second];
  }
  const auto rows = static_cast<Eigen::Index>(report.labels.size());
  for (int l = 0; l < schema.num_attributes(); ++l) {
    AttributeFlow flow;
    flow.attribute = schema.attribute(l).name;
    flow.values = schema.attribute(l).values;
    const int width = schema.num_values(l);
    flow.counts.setZero(rows, width);
    const auto block = rho.middleCols(schema.offset(l), width);
    std::vector<std::size_t> with_truth;
    std::vector<int> truths;
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const auto pred = ArgMax(block.row(static_cast<Eigen::Index>(n)));
      ++flow.counts(static_cast<Eigen::Index>(row_index[n]), pred);
      if (schema.HasAttack(labels[n])) {
        with_truth.push_back(n);
        truths.push_back(schema.Row(labels[n])[l]);
      }
    }
    flow.eer = std::numeric_limits<double>::quiet_NaN();
    if (!with_truth.empty()) {
      Eigen::MatrixXf probs(static_cast<Eigen::Index>(with_truth.size()), width);
      for (std::size_t k = 0; k < with_truth.size(); ++k) {
        probs.row(static_cast<Eigen::Index>(k)) =
            block.row(static_cast<Eigen::Index>(with_truth[k]));
      }
      flow.eer = AttributeValueEer(probs, truths);
    }
    report.attributes.push_back(std::move(flow));
  }
  return report;
}

nlohmann::ordered_json FlowReportToJson(const FlowReport &report) {
  nlohmann::ordered_json doc;
  doc["labels"] = report.labels;
  doc["label_counts"] = report.label_counts;
  doc["attributes"] = nlohmann::ordered_json::array();
  for (const auto &flow : report.attributes) {
    nlohmann::ordered_json a;
    a["attribute"] = flow.attribute;
    a["values"] = flow.values;
    if (std::isnan(flow.eer)) {
      a["eer"] = nullptr;
    } else {
      a["eer"] = flow.eer;
    }
    a["counts"] = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < flow.counts.rows(); ++r) {
      std::vector<std::int64_t> row(flow.counts.cols());
      for (Eigen::Index c = 0; c < flow.counts.cols(); ++c) row[c] = flow.counts(r, c);
      a["counts"].push_back(row);
    }
    doc["attributes"].push_back(std::move(a));
  }
  return doc;
}

}  // namespace pae
