// src/backends.cc

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

#include "pae/backends.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pae/error.h"
#include "pae/nnet.h"
#include "pae/util.h"

namespace pae {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kLogisticMaxIter = 1000;
constexpr int kHingeMaxIter = 10000;

void CheckLabels(const Eigen::MatrixXd &features, std::span<const int> labels,
                 int num_classes) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    Fail(ErrorCode::kCountMismatch, "one label per feature row required");
  }
  if (num_classes < 1) Fail(ErrorCode::kInvalidArgument, "no classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      Fail(ErrorCode::kUnknownClass, "label " + std::to_string(y) +
                                         " outside [0, " +
                                         std::to_string(num_classes) + ")");
    }
  }
  if (!features.allFinite()) Fail(ErrorCode::kNonFiniteValue, "non-finite feature");
}

// Numerically stable log(1 + exp(-z)).
double LogLoss(double z) { return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

// ---------------------------------------------------------------------------

CategoricalModel NbFit(const Eigen::MatrixXd &rho, std::span<const int> labels,
                       int num_classes, std::span<const int> block_sizes,
                       double alpha) {
  CheckLabels(rho, labels, num_classes);
  if (alpha < 0) Fail(ErrorCode::kInvalidArgument, "alpha must be >= 0");
  const int total = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
  if (total != rho.cols()) {
    Fail(ErrorCode::kSchemaMismatch,
         "feature dim " + std::to_string(rho.cols()) +
             " != sum of attribute sizes " + std::to_string(total));
  }
  Eigen::MatrixXd soft = Eigen::MatrixXd::Zero(num_classes, rho.cols());
  std::vector<int> seen(num_classes, 0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    soft.row(labels[n]) += rho.row(static_cast<Eigen::Index>(n));
    ++seen[labels[n]];
  }
  CategoricalModel model;
  model.block_sizes.assign(block_sizes.begin(), block_sizes.end());
  model.alpha = alpha;
  model.priors = Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes);
  model.theta.resize(num_classes, rho.cols());
  for (int c = 0; c < num_classes; ++c) {
    if (seen[c] == 0) {
      Fail(ErrorCode::kEmptyClass, "class " + std::to_string(c) + " has no rows");
    }
    Eigen::Index off = 0;
    for (int m : block_sizes) {
      const auto s = soft.row(c).segment(off, m);
      const double denom = s.sum() + alpha * m;
      if (!(denom > 0)) {
        Fail(ErrorCode::kEmptyClass,
             "class " + std::to_string(c) + " has zero mass in an attribute");
      }
      model.theta.row(c).segment(off, m) = (s.array() + alpha) / denom;
      off += m;
    }
  }
  return model;
}

Eigen::VectorXd NbScore(const CategoricalModel &model, const Eigen::VectorXd &rho) {
  if (rho.size() != model.theta.cols()) {
    Fail(ErrorCode::kSchemaMismatch, "embedding dim " + std::to_string(rho.size()) +
                                         " != model dim " +
                                         std::to_string(model.theta.cols()));
  }
  Eigen::VectorXd out(model.num_classes());
  for (int c = 0; c < model.num_classes(); ++c) {
    double s = std::log(model.priors(c));
    for (Eigen::Index m = 0; m < rho.size(); ++m) {
      if (rho(m) == 0) continue;
      const double t = model.theta(c, m);
      if (t == 0) {
        s = -kInf;
        break;
      }
      s += rho(m) * std::log(t);
    }
    out(c) = s;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct BinaryFit {
  Eigen::VectorXd w;
  double b = 0;
  OvrDiagnostics diag;
};

double LogisticObjective(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                         const Eigen::VectorXd &w, double b, double reg) {
  const Eigen::VectorXd z = y.cwiseProduct((x * w).array().matrix() +
                                           Eigen::VectorXd::Constant(x.rows(), b));
  double loss = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += LogLoss(z(i));
  return loss / static_cast<double>(x.rows()) + 0.5 * reg * w.squaredNorm();
}

void LogisticGradient(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                      const Eigen::VectorXd &w, double b, double reg,
                      Eigen::VectorXd *gw, double *gb) {
  const Eigen::VectorXd m = (x * w).array() + b;
  Eigen::VectorXd coef(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double z = y(i) * m(i);
    // d/dm log(1 + exp(-y m)) = -y sigmoid(-z)
    const double sig = z >= 0 ? std::exp(-z) / (1 + std::exp(-z)) : 1 / (1 + std::exp(z));
    coef(i) = -y(i) * sig;
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  *gw = x.transpose() * coef * inv_n + reg * w;
  *gb = coef.sum() * inv_n;
}

BinaryFit FitLogistic(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                      const OvrOptions &opt) {
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : kLogisticMaxIter;
  BinaryFit fit;
  fit.w = Eigen::VectorXd::Zero(x.cols());
  double f = LogisticObjective(x, y, fit.w, fit.b, opt.reg);
  Eigen::VectorXd gw;
  double gb = 0;
  double step = 1.0;
  int it = 0;
  for (;; ++it) {
    LogisticGradient(x, y, fit.w, fit.b, opt.reg, &gw, &gb);
    const double g2 = gw.squaredNorm() + gb * gb;
    fit.diag.grad_norm = std::sqrt(g2);
    if (opt.record_loss) fit.diag.loss_history.push_back(f);
    if (fit.diag.grad_norm <= opt.tol) {
      fit.diag.converged = true;
      break;
    }
    if (it == max_iter) break;
    // Armijo backtracking.
    step = std::min(step * 2, 1e6);
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Eigen::VectorXd w_new = fit.w - step * gw;
      const double b_new = fit.b - step * gb;
      const double f_new = LogisticObjective(x, y, w_new, b_new, opt.reg);
      if (f_new <= f - 0.5 * step * g2) {
        fit.w = w_new;
        fit.b = b_new;
        f = f_new;
        accepted = true;
        break;
      }
      step /= 2;
    }
    if (!accepted) break;
  }
  fit.diag.iterations = it;
  fit.diag.final_loss = f;
  return fit;
}

double HingeObjective(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                      const Eigen::VectorXd &w, double b, double reg) {
  const Eigen::ArrayXd z = y.array() * ((x * w).array() + b);
  return (1 - z).max(0.0).mean() + 0.5 * reg * w.squaredNorm();
}

// Projected mini-batch subgradient descent with the bias as an extra,
// constant feature.
BinaryFit FitHinge(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                   const OvrOptions &opt, std::uint64_t seed) {
  const int steps = opt.max_iter > 0 ? opt.max_iter : kHingeMaxIter;
  const int batch = std::max(1, opt.hinge_batch);
  const double lambda = opt.reg;
  if (!(lambda > 0)) Fail(ErrorCode::kInvalidArgument, "hinge needs reg > 0");
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(d + 1);
  int averaged = 0;
  const double radius = 1 / std::sqrt(lambda);
  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
  Eigen::VectorXd step_dir(d + 1);
  for (int t = 1; t <= steps; ++t) {
    const double eta = 1 / (lambda * t);
    step_dir.setZero();
    for (int k = 0; k < batch; ++k) {
      const Eigen::Index i = pick(rng);
      const double margin = y(i) * (x.row(i).dot(w.head(d)) + w(d));
      if (margin < 1) {
        step_dir.head(d) += y(i) * x.row(i).transpose();
        step_dir(d) += y(i);
      }
    }
    w *= 1 - eta * lambda;
    w += (eta / batch) * step_dir;
    const double norm = w.norm();
    if (norm > radius) w *= radius / norm;
    if (2 * t > steps) {
      avg += w;
      ++averaged;
    }
  }
  avg /= std::max(averaged, 1);
  BinaryFit fit;
  fit.w = avg.head(d);
  fit.b = avg(d);
  fit.diag.iterations = steps;
  fit.diag.converged = true;
  fit.diag.final_loss = HingeObjective(x, y, fit.w, fit.b, lambda);
  // Norm of one subgradient at the returned point.
  Eigen::VectorXd gw = lambda * fit.w;
  double gb = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (y(i) * (x.row(i).dot(fit.w) + fit.b) < 1) {
      gw -= y(i) * x.row(i).transpose() / static_cast<double>(x.rows());
      gb -= y(i) / static_cast<double>(x.rows());
    }
  }
  fit.diag.grad_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  if (opt.record_loss) fit.diag.loss_history.push_back(fit.diag.final_loss);
  return fit;
}

}  // namespace

LinearOvRModel OvrFit(const Eigen::MatrixXd &features, std::span<const int> labels,
                      int num_classes, const OvrOptions &options,
                      std::uint64_t seed) {
  CheckLabels(features, labels, num_classes);
  if (features.rows() == 0) Fail(ErrorCode::kEmptyData, "no training rows");
  std::vector<int> seen(num_classes, 0);
  for (int y : labels) ++seen[y];
  if (std::count_if(seen.begin(), seen.end(), [](int s) { return s > 0; }) < 2) {
    Fail(ErrorCode::kSingleClass, "one-vs-rest training needs two classes");
  }
  LinearOvRModel model;
  model.objective = options.objective;
  model.reg = options.reg;
  model.weights.resize(num_classes, features.cols());
  model.bias.resize(num_classes);
  model.diagnostics.resize(num_classes);
  std::vector<BinaryFit> fits(num_classes);
  ParallelFor(static_cast<std::size_t>(num_classes), options.workers,
              [&](std::size_t c) {
                Eigen::VectorXd y(features.rows());
                for (Eigen::Index i = 0; i < y.size(); ++i) {
                  y(i) = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
                }
                fits[c] = options.objective == LinearObjective::kLogistic
                              ? FitLogistic(features, y, options)
                              : FitHinge(features, y, options,
                                         DeriveSeed(seed, "ovr", c));
              });
  for (int c = 0; c < num_classes; ++c) {
    model.weights.row(c) = fits[c].w.transpose();
    model.bias(c) = fits[c].b;
    model.diagnostics[c] = std::move(fits[c].diag);
  }
  return model;
}

Eigen::VectorXd OvrScore(const LinearOvRModel &model, const Eigen::VectorXd &x) {
  if (x.size() != model.weights.cols()) {
    Fail(ErrorCode::kDimensionMismatch, "feature dim " + std::to_string(x.size()) +
                                            " != model dim " +
                                            std::to_string(model.weights.cols()));
  }
  return model.weights * x + model.bias;
}

// ---------------------------------------------------------------------------

int TreeModel::depth() const {
  int d = 0;
  for (const auto &n : nodes) d = std::max(d, n.depth);
  return d;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double score = -kInf;  // sum over children of sum_k c_k^2 / n_child
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd &x, std::span<const int> y, int classes,
              int max_depth, int min_leaf)
      : x_(x), y_(y), classes_(classes), max_depth_(max_depth), min_leaf_(min_leaf) {}

  int Build(std::vector<Eigen::Index> rows, int depth, TreeModel *model) {
    const int id = static_cast<int>(model->nodes.size());
    model->nodes.emplace_back();
    std::vector<double> counts(classes_, 0.0);
    for (auto r : rows) counts[y_[r]] += 1;
    {
      TreeNode &node = model->nodes[id];
      node.depth = depth;
      node.distribution.resize(classes_);
      for (int k = 0; k < classes_; ++k) {
        node.distribution(k) = counts[k] / static_cast<double>(rows.size());
      }
    }
    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || depth >= max_depth_ ||
        rows.size() < 2 * static_cast<std::size_t>(min_leaf_)) {
      return id;
    }
    const SplitChoice best = BestSplit(rows, counts);
    if (best.feature < 0) return id;
    std::vector<Eigen::Index> left, right;
    for (auto r : rows) {
      (x_(r, best.feature) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = Build(std::move(left), depth + 1, model);
    const int r = Build(std::move(right), depth + 1, model);
    TreeNode &node = model->nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

 private:
  SplitChoice BestSplit(const std::vector<Eigen::Index> &rows,
                        const std::vector<double> &total) const {
    SplitChoice best;
    const auto n = rows.size();
    std::vector<Eigen::Index> order(rows);
    std::vector<double> left(classes_);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return x_(a, f) < x_(b, f) || (x_(a, f) == x_(b, f) && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      double sq_left = 0;
      double sq_right = 0;
      for (double c : total) sq_right += c * c;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const int k = y_[order[i]];
        const double right_k = total[k] - left[k];
        sq_left += 2 * left[k] + 1;
        sq_right -= 2 * right_k - 1;
        left[k] += 1;
        const double v = x_(order[i], f);
        const double next = x_(order[i + 1], f);
        if (v == next) continue;
        const auto n_left = i + 1;
        const auto n_right = n - n_left;
        if (n_left < static_cast<std::size_t>(min_leaf_) ||
            n_right < static_cast<std::size_t>(min_leaf_)) {
          continue;
        }
        const double score = sq_left / static_cast<double>(n_left) +
                             sq_right / static_cast<double>(n_right);
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          double t = v + (next - v) / 2;
          if (!(t < next)) t = v;
          best.threshold = t;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd &x_;
  std::span<const int> y_;
  int classes_;
  int max_depth_;
  int min_leaf_;
};

}  // namespace

TreeModel TreeFit(const Eigen::MatrixXd &features, std::span<const int> labels,
                  int num_classes, int max_depth, int min_leaf) {
  CheckLabels(features, labels, num_classes);
  if (features.rows() == 0) Fail(ErrorCode::kEmptyData, "no training rows");
  if (max_depth < 0 || min_leaf < 1) {
    Fail(ErrorCode::kInvalidArgument, "max_depth >= 0 and min_leaf >= 1 required");
  }
  TreeModel model;
  model.num_classes = num_classes;
  model.max_depth = max_depth;
  model.min_leaf = min_leaf;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(features.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  TreeBuilder(features, labels, num_classes, max_depth, min_leaf)
      .Build(std::move(rows), 0, &model);
  return model;
}

TreePrediction TreePredict(const TreeModel &model, const Eigen::VectorXd &x) {
  if (model.nodes.empty()) Fail(ErrorCode::kEmptyData, "empty tree");
  int id = 0;
  while (model.nodes[id].feature >= 0) {
    const TreeNode &node = model.nodes[id];
    if (node.feature >= x.size()) {
      Fail(ErrorCode::kDimensionMismatch, "feature vector too short for tree");
    }
    id = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  TreePrediction p;
  p.distribution = model.nodes[id].distribution;
  p.label = static_cast<int>(ArgMax(p.distribution));
  return p;
}

// ---------------------------------------------------------------------------

std::string_view BackendKindName(BackendKind kind) {
  switch (kind) {
    case BackendKind::kNaiveBayes: return "nb";
    case BackendKind::kDecisionTree: return "dt";
    case BackendKind::kLogistic: return "lr";
    case BackendKind::kSvm: return "svm";
  }
  return "?";
}

BackendKind ParseBackendKind(std::string_view name) {
  for (auto k : {BackendKind::kNaiveBayes, BackendKind::kDecisionTree,
                 BackendKind::kLogistic, BackendKind::kSvm}) {
    if (BackendKindName(k) == name) return k;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown back-end '" + std::string(name) +
                                        "' (expected nb, dt, lr or svm)");
}

int Backend::Predict(const Eigen::VectorXd &x) const {
  return static_cast<int>(ArgMax(Scores(x)));
}

Eigen::MatrixXd Backend::ScoreAll(const Eigen::MatrixXd &features, int workers) const {
  Eigen::MatrixXd out(features.rows(), num_classes());
  ParallelFor(static_cast<std::size_t>(features.rows()), workers, [&](std::size_t n) {
    const Eigen::VectorXd x = features.row(static_cast<Eigen::Index>(n)).transpose();
    out.row(static_cast<Eigen::Index>(n)) = Scores(x).transpose();
  });
  return out;
}

namespace {

using Json = nlohmann::ordered_json;

Json ToJson(const Eigen::MatrixXd &m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Json ToJson(const Eigen::VectorXd &v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd VectorFromJson(const Json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd MatrixFromJson(const Json &j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto row = j.at(r).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      Fail(ErrorCode::kParseError, "ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

class NaiveBayesBackend final : public Backend {
 public:
  explicit NaiveBayesBackend(CategoricalModel m) : m_(std::move(m)) {}
  BackendKind kind() const override { return BackendKind::kNaiveBayes; }
  int num_classes() const override { return m_.num_classes(); }
  Eigen::Index feature_dim() const override { return m_.theta.cols(); }
  Eigen::VectorXd Scores(const Eigen::VectorXd &x) const override {
    return NbScore(m_, x);
  }
  double ExplainedScore(const Eigen::VectorXd &x, int c) const override {
    if (x.size() != m_.theta.cols()) {
      Fail(ErrorCode::kSchemaMismatch, "embedding dim mismatch");
    }
    double s = std::log(m_.priors(c));
    for (Eigen::Index m = 0; m < x.size(); ++m) {
      if (x(m) == 0) continue;
      s += x(m) * std::log(std::max(m_.theta(c, m), kLogFloor));
    }
    return s;
  }
  Json ParamsToJson() const override {
    Json j;
    j["block_sizes"] = m_.block_sizes;
    j["alpha"] = m_.alpha;
    j["priors"] = ToJson(m_.priors);
    j["theta"] = ToJson(m_.theta);
    return j;
  }

 private:
  CategoricalModel m_;
};

class TreeBackend final : public Backend {
 public:
  explicit TreeBackend(TreeModel m) : m_(std::move(m)) {
    for (const auto &n : m_.nodes) {
      if (n.feature >= 0) dim_ = std::max<Eigen::Index>(dim_, n.feature + 1);
    }
  }
  BackendKind kind() const override { return BackendKind::kDecisionTree; }
  int num_classes() const override { return m_.num_classes; }
  Eigen::Index feature_dim() const override { return dim_; }
  Eigen::VectorXd Scores(const Eigen::VectorXd &x) const override {
    return TreePredict(m_, x).distribution;
  }
  Json ParamsToJson() const override {
    Json j;
    j["max_depth"] = m_.max_depth;
    j["min_leaf"] = m_.min_leaf;
    j["nodes"] = Json::array();
    for (const auto &n : m_.nodes) {
      Json node;
      node["feature"] = n.feature;
      node["threshold"] = n.threshold;
      node["left"] = n.left;
      node["right"] = n.right;
      node["depth"] = n.depth;
      node["distribution"] = ToJson(n.distribution);
      j["nodes"].push_back(std::move(node));
    }
    return j;
  }
  void set_feature_dim(Eigen::Index d) { dim_ = std::max(dim_, d); }

 private:
  TreeModel m_;
  Eigen::Index dim_ = 0;
};

class LinearBackend final : public Backend {
 public:
  explicit LinearBackend(LinearOvRModel m) : m_(std::move(m)) {}
  BackendKind kind() const override {
    return m_.objective == LinearObjective::kLogistic ? BackendKind::kLogistic
                                                      : BackendKind::kSvm;
  }
  int num_classes() const override { return m_.num_classes(); }
  Eigen::Index feature_dim() const override { return m_.weights.cols(); }
  Eigen::VectorXd Scores(const Eigen::VectorXd &x) const override {
    return OvrScore(m_, x);
  }
  Json ParamsToJson() const override {
    Json j;
    j["reg"] = m_.reg;
    j["weights"] = ToJson(m_.weights);
    j["bias"] = ToJson(m_.bias);
    j["diagnostics"] = Json::array();
    for (const auto &d : m_.diagnostics) {
      Json dj;
      dj["converged"] = d.converged;
      dj["iterations"] = d.iterations;
      dj["grad_norm"] = d.grad_norm;
      dj["final_loss"] = d.final_loss;
      j["diagnostics"].push_back(std::move(dj));
    }
    return j;
  }

 private:
  LinearOvRModel m_;
};

std::unique_ptr<Backend> ParamsFromJson(BackendKind kind, const Json &j, int classes,
                                        Eigen::Index dim) {
  switch (kind) {
    case BackendKind::kNaiveBayes: {
      CategoricalModel m;
      m.block_sizes = j.at("block_sizes").get<std::vector<int>>();
      m.alpha = j.at("alpha").get<double>();
      m.priors = VectorFromJson(j.at("priors"));
      m.theta = MatrixFromJson(j.at("theta"), dim);
      if (m.theta.rows() != classes || m.priors.size() != classes) {
        Fail(ErrorCode::kParseError, "class count mismatch in NB model");
      }
      return MakeBackend(std::move(m));
    }
    case BackendKind::kDecisionTree: {
      TreeModel m;
      m.num_classes = classes;
      m.max_depth = j.at("max_depth").get<int>();
      m.min_leaf = j.at("min_leaf").get<int>();
      for (const auto &nj : j.at("nodes")) {
        TreeNode n;
        n.feature = nj.at("feature").get<int>();
        n.threshold = nj.at("threshold").get<double>();
        n.left = nj.at("left").get<int>();
        n.right = nj.at("right").get<int>();
        n.depth = nj.at("depth").get<int>();
        n.distribution = VectorFromJson(nj.at("distribution"));
        m.nodes.push_back(std::move(n));
      }
      const int size = static_cast<int>(m.nodes.size());
      for (const auto &n : m.nodes) {
        if (n.distribution.size() != classes ||
            (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 ||
                                n.right >= size))) {
          Fail(ErrorCode::kParseError, "malformed tree node");
        }
      }
      auto backend = std::make_unique<TreeBackend>(std::move(m));
      backend->set_feature_dim(dim);
      return backend;
    }
    case BackendKind::kLogistic:
    case BackendKind::kSvm: {
      LinearOvRModel m;
      m.objective = kind == BackendKind::kLogistic ? LinearObjective::kLogistic
                                                   : LinearObjective::kHinge;
      m.reg = j.at("reg").get<double>();
      m.weights = MatrixFromJson(j.at("weights"), dim);
      m.bias = VectorFromJson(j.at("bias"));
      if (m.weights.rows() != classes || m.bias.size() != classes) {
        Fail(ErrorCode::kParseError, "class count mismatch in linear model");
      }
      for (const auto &dj : j.at("diagnostics")) {
        OvrDiagnostics d;
        d.converged = dj.at("converged").get<bool>();
        d.iterations = dj.at("iterations").get<int>();
        d.grad_norm = dj.at("grad_norm").get<double>();
        d.final_loss = dj.at("final_loss").get<double>();
        m.diagnostics.push_back(std::move(d));
      }
      return MakeBackend(std::move(m));
    }
  }
  Fail(ErrorCode::kParseError, "unknown model type");
}

}  // namespace

std::unique_ptr<Backend> MakeBackend(CategoricalModel model) {
  return std::make_unique<NaiveBayesBackend>(std::move(model));
}

std::unique_ptr<Backend> MakeBackend(TreeModel model) {
  return std::make_unique<TreeBackend>(std::move(model));
}

std::unique_ptr<Backend> MakeBackend(LinearOvRModel model) {
  return std::make_unique<LinearBackend>(std::move(model));
}

std::unique_ptr<Backend> FitBackend(const BackendSpec &spec,
                                    const Eigen::MatrixXd &features,
                                    std::span<const int> labels, int num_classes,
                                    std::uint64_t seed) {
  switch (spec.kind) {
    case BackendKind::kNaiveBayes:
      return MakeBackend(
          NbFit(features, labels, num_classes, spec.block_sizes, spec.alpha));
    case BackendKind::kDecisionTree: {
      auto backend = std::make_unique<TreeBackend>(
          TreeFit(features, labels, num_classes, spec.max_depth, spec.min_leaf));
      backend->set_feature_dim(features.cols());
      return backend;
    }
    case BackendKind::kLogistic:
    case BackendKind::kSvm: {
      OvrOptions opt;
      opt.objective = spec.kind == BackendKind::kLogistic ? LinearObjective::kLogistic
                                                          : LinearObjective::kHinge;
      opt.reg = spec.reg;
      opt.max_iter = spec.max_iter;
      opt.workers = spec.workers;
      return MakeBackend(OvrFit(features, labels, num_classes, opt, seed));
    }
  }
  Fail(ErrorCode::kInvalidArgument, "unknown back-end kind");
}

double DetectionScore(double spoof_score, double bonafide_score) {
  if (spoof_score == bonafide_score) return 0;  // includes equal infinities
  return spoof_score - bonafide_score;
}

// ---------------------------------------------------------------------------

std::string SerializeBackendModel(const BackendModelFile &model) {
  if (!model.backend) Fail(ErrorCode::kInvalidArgument, "no back-end to save");
  Json doc;
  doc["schema_version"] = 1;
  doc["type"] = std::string(BackendKindName(model.backend->kind()));
  doc["task"] = model.task;
  doc["class_names"] = model.class_names;
  doc["feature_kind"] = model.feature_kind;
  doc["feature_dim"] = model.backend->feature_dim();
  Json manifest;
  manifest["feature_schema_hash"] = model.feature_schema_hash;
  manifest["hyperparameters"] =
      model.hyperparameters.is_null() ? Json::object() : model.hyperparameters;
  manifest["seed"] = model.seed;
  doc["manifest"] = std::move(manifest);
  doc["params"] = model.backend->ParamsToJson();
  return doc.dump(1) + "\n";
}

BackendModelFile ParseBackendModel(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
  try {
    if (doc.at("schema_version").get<int>() != 1) {
      Fail(ErrorCode::kParseError, "unsupported model schema_version");
    }
    BackendModelFile out;
    const auto kind = ParseBackendKind(doc.at("type").get<std::string>());
    out.task = doc.at("task").get<std::string>();
    out.class_names = doc.at("class_names").get<std::vector<std::string>>();
    out.feature_kind = doc.at("feature_kind").get<std::string>();
    const auto dim = doc.at("feature_dim").get<Eigen::Index>();
    const auto &manifest = doc.at("manifest");
    out.feature_schema_hash = manifest.at("feature_schema_hash").get<std::string>();
    out.hyperparameters = manifest.at("hyperparameters");
    out.seed = manifest.at("seed").get<std::uint64_t>();
    out.backend = ParamsFromJson(kind, doc.at("params"),
                                 static_cast<int>(out.class_names.size()), dim);
    return out;
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
}

void SaveBackendModel(const BackendModelFile &model,
                      const std::filesystem::path &path) {
  WriteTextFile(path, SerializeBackendModel(model));
}

BackendModelFile LoadBackendModel(const std::filesystem::path &path) {
  return ParseBackendModel(ReadTextFile(path));
}

}  // namespace pae
