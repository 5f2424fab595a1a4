// src/explain.cc

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

#include "pae/explain.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "pae/error.h"
#include "pae/metrics.h"
#include "pae/util.h"

namespace pae {

namespace {

void CheckBackground(const Eigen::VectorXd &x, const Eigen::MatrixXd &background) {
  if (background.rows() == 0) Fail(ErrorCode::kEmptyBackground, "empty background");
  if (background.cols() != x.size()) {
    Fail(ErrorCode::kDimensionMismatch,
         "background has " + std::to_string(background.cols()) +
             " features, x has " + std::to_string(x.size()));
  }
}

double BackgroundMean(const ScoreFn &f, const Eigen::MatrixXd &background) {
  double s = 0;
  for (Eigen::Index b = 0; b < background.rows(); ++b) {
    s += f(background.row(b).transpose());
  }
  return s / static_cast<double>(background.rows());
}

}  // namespace

ShapleyResult ShapleyExact(const ScoreFn &f, const Eigen::VectorXd &x,
                           const Eigen::MatrixXd &background) {
  const auto t = static_cast<int>(x.size());
  if (t > kMaxExactFeatures) {
    Fail(ErrorCode::kTooManyFeatures,
         std::to_string(t) + " features exceed the exact limit of " +
             std::to_string(kMaxExactFeatures));
  }
  CheckBackground(x, background);
  const std::uint32_t full = (std::uint32_t{1} << t) - 1;
  std::vector<double> v(std::size_t{full} + 1);
  Eigen::VectorXd z(t);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    double s = 0;
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
      for (int j = 0; j < t; ++j) {
        z(j) = (mask >> j) & 1u ? x(j) : background(b, j);
      }
      s += f(z);
    }
    v[mask] = s / static_cast<double>(background.rows());
  }
  // w(s) = s! (T - s - 1)! / T! = 1 / (T * binom(T - 1, s))
  std::vector<double> weight(std::max(t, 1));
  for (int s = 0; s < t; ++s) {
    double binom = 1;
    for (int k = 1; k <= s; ++k) binom = binom * (t - 1 - s + k) / k;
    weight[s] = 1 / (t * binom);
  }
  ShapleyResult r;
  r.phi = Eigen::VectorXd::Zero(t);
  r.se = Eigen::VectorXd::Zero(t);
  for (int j = 0; j < t; ++j) {
    const std::uint32_t bit = std::uint32_t{1} << j;
    double acc = 0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      acc += weight[std::popcount(mask)] * (v[mask | bit] - v[mask]);
    }
    r.phi(j) = acc;
  }
  r.base = v[0];
  r.fx = v[full];
  return r;
}

ShapleyResult ShapleySample(const ScoreFn &f, const Eigen::VectorXd &x,
                            const Eigen::MatrixXd &background, int n_permutations,
                            std::uint64_t seed) {
  if (n_permutations < 1) {
    Fail(ErrorCode::kInvalidArgument, "n_permutations must be >= 1");
  }
  CheckBackground(x, background);
  const Eigen::Index t = x.size();
  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, background.rows() - 1);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(t));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(t);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(t);
  Eigen::VectorXd z(t);
  for (int p = 0; p < n_permutations; ++p) {
    std::shuffle(perm.begin(), perm.end(), rng);
    z = background.row(pick(rng)).transpose();
    double prev = f(z);
    for (Eigen::Index j : perm) {
      z(j) = x(j);
      const double cur = f(z);
      const double d = cur - prev;
      sum(j) += d;
      sum_sq(j) += d * d;
      prev = cur;
    }
  }
  const double n = n_permutations;
  ShapleyResult r;
  r.phi = sum / n;
  r.se = Eigen::VectorXd::Zero(t);
  if (n_permutations > 1) {
    for (Eigen::Index j = 0; j < t; ++j) {
      const double var = std::max(0.0, (sum_sq(j) - n * r.phi(j) * r.phi(j)) / (n - 1));
      r.se(j) = std::sqrt(var / n);
    }
  }
  r.base = BackgroundMean(f, background);
  r.fx = f(x);
  r.n_permutations = n_permutations;
  return r;
}

Eigen::MatrixXd SelectBackground(const Eigen::MatrixXd &rows, int n,
                                 std::uint64_t seed) {
  if (rows.rows() == 0 || n < 1) Fail(ErrorCode::kEmptyBackground, "empty background");
  if (n >= rows.rows()) return rows;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(n, rows.cols());
  for (int k = 0; k < n; ++k) out.row(k) = rows.row(idx[k]);
  return out;
}

std::vector<ExplainedUtterance> ExplainRows(const Backend &backend,
                                            const Eigen::MatrixXd &features,
                                            const Eigen::MatrixXd &background,
                                            const ExplainOptions &options,
                                            std::uint64_t seed) {
  const int classes = backend.num_classes();
  const auto rows = static_cast<std::size_t>(features.rows());
  std::vector<ExplainedUtterance> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].row = r;
    out[r].per_class.resize(classes);
  }
  ParallelFor(rows * static_cast<std::size_t>(classes), options.workers,
              [&](std::size_t task) {
                const std::size_t r = task / classes;
                const int c = static_cast<int>(task % classes);
                const Eigen::VectorXd x =
                    features.row(static_cast<Eigen::Index>(r)).transpose();
                const ScoreFn f = [&](const Eigen::VectorXd &z) {
                  return backend.ExplainedScore(z, c);
                };
                ShapleyResult res =
                    options.method == ShapleyMethod::kExact
                        ? ShapleyExact(f, x, background)
                        : ShapleySample(f, x, background, options.n_permutations,
                                        DeriveSeed(seed, "shapley", task));
                out[r].per_class[c] = std::move(res);
              });
  return out;
}

RankingTable RankAggregate(const std::vector<std::vector<Eigen::VectorXd>> &reports,
                           std::span<const int> block_sizes, RankPooling pooling) {
  if (reports.empty() || reports.front().empty()) {
    Fail(ErrorCode::kEmptyReportSet, "no Shapley reports to rank");
  }
  const int m = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
  const std::size_t classes = reports.front().size();
  for (const auto &u : reports) {
    if (u.size() != classes) {
      Fail(ErrorCode::kDimensionMismatch, "utterances have different class counts");
    }
    for (const auto &phi : u) {
      if (phi.size() != m) {
        Fail(ErrorCode::kDimensionMismatch,
             "report length " + std::to_string(phi.size()) + " != " +
                 std::to_string(m));
      }
    }
  }
  auto ranks_of = [](const Eigen::VectorXd &v) {
    std::vector<double> mag(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) mag[i] = std::abs(v(i));
    return AverageRanks(mag, /*descending=*/true);
  };
  std::vector<double> mean(m, 0.0);
  if (pooling == RankPooling::kPerClass) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<double> per_class(m, 0.0);
      for (const auto &u : reports) {
        const auto r = ranks_of(u[c]);
        for (int i = 0; i < m; ++i) per_class[i] += r[i];
      }
      for (int i = 0; i < m; ++i) {
        mean[i] += per_class[i] / static_cast<double>(reports.size());
      }
    }
    for (double &v : mean) v /= static_cast<double>(classes);
  } else {
    for (const auto &u : reports) {
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(m);
      for (const auto &phi : u) avg += phi.cwiseAbs();
      const auto r = ranks_of(avg / static_cast<double>(classes));
      for (int i = 0; i < m; ++i) mean[i] += r[i];
    }
    for (double &v : mean) v /= static_cast<double>(reports.size());
  }
  RankingTable table;
  table.value_rank = mean;
  table.num_utterances = reports.size();
  table.num_classes = static_cast<int>(classes);
  int off = 0;
  for (int size : block_sizes) {
    double s = 0;
    for (int i = 0; i < size; ++i) s += mean[off + i];
    table.attribute_rank.push_back(size > 0 ? s / size : 0);
    off += size;
  }
  return table;
}

}  // namespace pae
