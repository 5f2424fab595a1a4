// tests/oracles.h

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

// Reference implementations used by the unit and acceptance tests. They are
// written from the definitions, deliberately naive, and share no code with
// the library beyond its data types.

#ifndef PAE_TESTS_ORACLES_H_
#define PAE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include "pae/backends.h"
#include "pae/nnet.h"

namespace pae::oracle {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::rational<BigInt>;

/// The exact rational value of a finite double.
inline Rational ExactRational(double v) {
  if (v == 0) return Rational(0);
  int exp = 0;
  const double mant = std::frexp(v, &exp);  // v = mant * 2^exp, 0.5 <= |mant| < 1
  const auto m = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exp -= 53;
  BigInt num = m;
  BigInt den = 1;
  if (exp >= 0) {
    num <<= exp;
  } else {
    den <<= -exp;
  }
  return Rational(num, den);
}

/// True when `v` is the double nearest to `r` (ties either way).
inline bool IsNearestDouble(double v, const Rational &r) {
  const Rational err = abs(ExactRational(v) - r);
  const double up = std::nextafter(v, std::numeric_limits<double>::infinity());
  const double down = std::nextafter(v, -std::numeric_limits<double>::infinity());
  return err <= abs(ExactRational(up) - r) && err <= abs(ExactRational(down) - r);
}

/// Relative-frequency estimate theta(c, m) = n(c, m) / n(c) by counting
/// one-hot rows, per attribute block.
inline std::vector<std::vector<Rational>> CountingTheta(const Eigen::MatrixXd &rho,
                                                        std::span<const int> labels,
                                                        int num_classes,
                                                        std::span<const int> blocks) {
  const auto m_total = static_cast<int>(rho.cols());
  std::vector<std::vector<long>> count(num_classes, std::vector<long>(m_total, 0));
  std::vector<long> per_class(num_classes, 0);
  for (Eigen::Index n = 0; n < rho.rows(); ++n) {
    ++per_class[labels[n]];
    for (int m = 0; m < m_total; ++m) {
      if (rho(n, m) == 1.0) ++count[labels[n]][m];
    }
  }
  std::vector<std::vector<Rational>> theta(num_classes, std::vector<Rational>(m_total));
  for (int c = 0; c < num_classes; ++c) {
    int off = 0;
    for (int size : blocks) {
      for (int k = 0; k < size; ++k) {
        theta[c][off + k] = Rational(BigInt(count[c][off + k]), BigInt(per_class[c]));
      }
      off += size;
    }
  }
  return theta;
}

struct EerOracleResult {
  double eer = 0;
  double threshold = 0;
};

/// Tries every distinct score as threshold, counting errors directly.
inline EerOracleResult BruteForceEer(const std::vector<double> &targets,
                                     const std::vector<double> &nontargets) {
  std::set<double> thresholds(targets.begin(), targets.end());
  thresholds.insert(nontargets.begin(), nontargets.end());
  const auto nt = static_cast<std::int64_t>(targets.size());
  const auto nn = static_cast<std::int64_t>(nontargets.size());
  bool first = true;
  std::int64_t best_gap_num = 0;  // |fa * nt - fr * nn|, common denominator nt * nn
  EerOracleResult best;
  for (double t : thresholds) {
    std::int64_t fa = 0, fr = 0;
    for (double s : nontargets) fa += s >= t;
    for (double s : targets) fr += s < t;
    const std::int64_t gap = std::llabs(fa * nt - fr * nn);
    if (first || gap < best_gap_num) {
      first = false;
      best_gap_num = gap;
      best.threshold = t;
      best.eer = (static_cast<double>(fa) / static_cast<double>(nn) +
                  static_cast<double>(fr) / static_cast<double>(nt)) /
                 2;
    }
  }
  return best;
}

/// Central finite differences of the mean cross-entropy with respect to
/// every parameter, laid out like MlpTensors.
inline MlpTensors<double> FiniteDifferenceGradient(const Mlp<double> &model,
                                                   const MatrixX<double> &inputs,
                                                   std::span<const int> targets,
                                                   double step) {
  Mlp<double> probe = model;
  MlpTensors<double> grad = model.ZerosLike();
  auto loss = [&]() { return LossAndGradient<double>(probe, inputs, targets, nullptr); };
  auto &layers = probe.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index i = 0; i < layers[l].weights.size(); ++i) {
      double &w = layers[l].weights.data()[i];
      const double orig = w;
      w = orig + step;
      const double up = loss();
      w = orig - step;
      const double down = loss();
      w = orig;
      grad.weights[l].data()[i] = (up - down) / (2 * step);
    }
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) {
      double &b = layers[l].bias(i);
      const double orig = b;
      b = orig + step;
      const double up = loss();
      b = orig - step;
      const double down = loss();
      b = orig;
      grad.bias[l](i) = (up - down) / (2 * step);
    }
  }
  return grad;
}

inline Eigen::VectorXd Flatten(const MlpTensors<double> &t) {
  std::vector<double> v;
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    v.insert(v.end(), t.weights[l].data(), t.weights[l].data() + t.weights[l].size());
    v.insert(v.end(), t.bias[l].data(), t.bias[l].data() + t.bias[l].size());
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Shapley values by averaging marginal contributions over all T!
/// orderings, with the interventional value function.
inline Eigen::VectorXd PermutationShapley(
    const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x,
    const Eigen::MatrixXd &background) {
  const auto t = static_cast<int>(x.size());
  auto value = [&](const std::vector<bool> &in) {
    double s = 0;
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
      Eigen::VectorXd z = background.row(b).transpose();
      for (int j = 0; j < t; ++j) {
        if (in[j]) z(j) = x(j);
      }
      s += f(z);
    }
    return s / static_cast<double>(background.rows());
  };
  std::vector<int> perm(t);
  std::iota(perm.begin(), perm.end(), 0);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(t);
  long count = 0;
  do {
    std::vector<bool> in(t, false);
    double prev = value(in);
    for (int j : perm) {
      in[j] = true;
      const double cur = value(in);
      phi(j) += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return phi / static_cast<double>(count);
}

/// Index of the nearest mean (Euclidean), lowest index on ties.
inline int NearestMean(const Eigen::MatrixXd &means, const Eigen::VectorXd &x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    const double d = (means.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

/// Largest-remainder apportionment in exact rational arithmetic.
inline std::vector<std::int64_t> RationalLargestRemainder(std::int64_t n,
                                                          const std::vector<std::int64_t> &w) {
  const BigInt total = std::accumulate(w.begin(), w.end(), BigInt(0));
  std::vector<std::int64_t> out(w.size());
  std::vector<Rational> frac(w.size());
  std::int64_t used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Rational quota(BigInt(n) * w[i], total);
    const BigInt fl = quota.numerator() / quota.denominator();
    out[i] = static_cast<std::int64_t>(fl);
    frac[i] = quota - Rational(fl);
    used += out[i];
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::int64_t k = 0; k < n - used; ++k) ++out[order[static_cast<std::size_t>(k)]];
  return out;
}

/// Best training accuracy over every depth-1 split (feature, midpoint),
/// each side predicting its majority class.
inline double BestStumpAccuracy(const Eigen::MatrixXd &x, std::span<const int> y,
                                int num_classes) {
  const Eigen::Index n = x.rows();
  double best = 0;
  auto majority_correct = [&](const std::vector<int> &idx) {
    std::vector<int> c(num_classes, 0);
    for (int i : idx) ++c[y[i]];
    return idx.empty() ? 0 : *std::max_element(c.begin(), c.end());
  };
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  best = static_cast<double>(majority_correct(all)) / static_cast<double>(n);
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::set<double> vals(x.col(f).data(), x.col(f).data() + n);
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t = (v[k] + v[k + 1]) / 2;
      std::vector<int> l, r;
      for (int i = 0; i < n; ++i) (x(i, f) <= t ? l : r).push_back(i);
      best = std::max(best, static_cast<double>(majority_correct(l) + majority_correct(r)) /
                                static_cast<double>(n));
    }
  }
  return best;
}

/// Random one-hot rows for the given block layout.
inline Eigen::MatrixXd RandomOneHot(int n, std::span<const int> blocks, std::mt19937_64 &rng) {
  const int m = std::accumulate(blocks.begin(), blocks.end(), 0);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    int off = 0;
    for (int size : blocks) {
      std::uniform_int_distribution<int> pick(0, size - 1);
      rho(i, off + pick(rng)) = 1;
      off += size;
    }
  }
  return rho;
}

}  // namespace pae::oracle

#endif  // PAE_TESTS_ORACLES_H_
