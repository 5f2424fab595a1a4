// pae/backends.h

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

// Back-end classifiers over probabilistic attribute embeddings (or any other
// fixed-length features): categorical naive Bayes, a CART decision tree and
// one-vs-rest linear models (logistic regression, linear SVM).
// Features are passed as N x d matrices, labels as class indices in [0, C).

#ifndef PAE_BACKENDS_H_
#define PAE_BACKENDS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace pae {

// ---------------------------------------------------------------------------
// Naive Bayes over categorical attributes.

/// theta(c, m) is the probability of flat value m under class c; within each
/// attribute block the entries of a row sum to one.
struct CategoricalModel {
  std::vector<int> block_sizes;
  Eigen::VectorXd priors;
  Eigen::MatrixXd theta;  // C x M
  double alpha = 0;

  int num_classes() const { return static_cast<int>(theta.rows()); }
};

/// theta = (S + alpha) / (sum_m' S + alpha * M_l) per class and attribute,
/// where S are soft counts (sums of the embedding components over the
/// class's utterances). alpha = 0 is the maximum-likelihood estimate.
/// Priors are uniform.
CategoricalModel NbFit(const Eigen::MatrixXd &rho, std::span<const int> labels,
                       int num_classes, std::span<const int> block_sizes,
                       double alpha = 0);

/// log prior + sum_m rho_m log theta(c, m) for every class. A term with
/// theta = 0 contributes 0 when rho_m == 0 and makes the score -inf otherwise.
Eigen::VectorXd NbScore(const CategoricalModel &model, const Eigen::VectorXd &rho);

// ---------------------------------------------------------------------------
// One-vs-rest linear models.

enum class LinearObjective { kLogistic, kHinge };

struct OvrOptions {
  LinearObjective objective = LinearObjective::kLogistic;
  double reg = 1e-4;
  /// Gradient-descent iterations (logistic) or subgradient steps (hinge).
  int max_iter = 0;  // 0 = objective default
  double tol = 1e-6;
  int hinge_batch = 32;
  bool record_loss = false;
  int workers = 1;
};

struct OvrDiagnostics {
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0;
  double final_loss = 0;
  std::vector<double> loss_history;
};

struct LinearOvRModel {
  LinearObjective objective = LinearObjective::kLogistic;
  double reg = 0;
  Eigen::MatrixXd weights;  // C x d
  Eigen::VectorXd bias;
  std::vector<OvrDiagnostics> diagnostics;

  int num_classes() const { return static_cast<int>(weights.rows()); }
};

/// Trains one binary classifier per class (class c positive, the rest
/// negative). Logistic: mean log-loss + reg/2 |w|^2 by gradient descent with
/// backtracking line search, stopping at gradient norm <= tol. Hinge:
/// mini-batch projected subgradient descent on mean hinge + reg/2 |w|^2,
/// returning the average of the second half of the iterates. Classes train
/// with seeds DeriveSeed(seed, "ovr", c). Non-convergence is reported in the
/// diagnostics, not thrown.
LinearOvRModel OvrFit(const Eigen::MatrixXd &features, std::span<const int> labels,
                      int num_classes, const OvrOptions &options,
                      std::uint64_t seed);

/// w_c . x + b_c per class (the pre-sigmoid margin for logistic models).
Eigen::VectorXd OvrScore(const LinearOvRModel &model, const Eigen::VectorXd &x);

// ---------------------------------------------------------------------------
// CART decision tree.

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int depth = 0;
  Eigen::VectorXd distribution;  // class frequencies of the training rows here
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int num_classes = 0;
  int max_depth = 0;
  int min_leaf = 1;

  int depth() const;
};

/// Greedy Gini splits over midpoints of sorted distinct feature values.
/// Ties between candidate splits go to the lowest feature index, then the
/// lowest threshold. Splitting stops at max_depth, at pure nodes and when no
/// split leaves min_leaf rows on both sides.
TreeModel TreeFit(const Eigen::MatrixXd &features, std::span<const int> labels,
                  int num_classes, int max_depth, int min_leaf = 1);

struct TreePrediction {
  int label = 0;
  Eigen::VectorXd distribution;
};

TreePrediction TreePredict(const TreeModel &model, const Eigen::VectorXd &x);

// ---------------------------------------------------------------------------
// Uniform interface.

enum class BackendKind { kNaiveBayes, kDecisionTree, kLogistic, kSvm };

std::string_view BackendKindName(BackendKind kind);
BackendKind ParseBackendKind(std::string_view name);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;
  virtual int num_classes() const = 0;
  virtual Eigen::Index feature_dim() const = 0;
  /// One score per class; larger means more likely.
  virtual Eigen::VectorXd Scores(const Eigen::VectorXd &x) const = 0;
  /// The quantity attributed by Shapley analysis for class c: the NB
  /// log-score with log theta floored at kLogFloor, the tree's leaf
  /// probability, or the linear margin.
  virtual double ExplainedScore(const Eigen::VectorXd &x, int c) const {
    return Scores(x)(c);
  }
  virtual nlohmann::ordered_json ParamsToJson() const = 0;

  /// Argmax of Scores(); ties go to the lowest class index.
  int Predict(const Eigen::VectorXd &x) const;
  Eigen::MatrixXd ScoreAll(const Eigen::MatrixXd &features, int workers = 1) const;
};

struct BackendSpec {
  BackendKind kind = BackendKind::kNaiveBayes;
  double alpha = 0;              // NB smoothing
  std::vector<int> block_sizes;  // NB attribute layout
  int max_depth = 5;             // tree
  int min_leaf = 1;              // tree
  double reg = 1e-4;             // linear models
  int max_iter = 0;              // linear models, 0 = default
  int workers = 1;
};

std::unique_ptr<Backend> FitBackend(const BackendSpec &spec,
                                    const Eigen::MatrixXd &features,
                                    std::span<const int> labels, int num_classes,
                                    std::uint64_t seed);

std::unique_ptr<Backend> MakeBackend(CategoricalModel model);
std::unique_ptr<Backend> MakeBackend(TreeModel model);
std::unique_ptr<Backend> MakeBackend(LinearOvRModel model);

/// score(spoof) - score(bonafide), with infinities resolved so the result
/// is never NaN.
double DetectionScore(double spoof_score, double bonafide_score);

/// A trained back-end plus everything needed to reproduce and check it.
struct BackendModelFile {
  std::unique_ptr<Backend> backend;
  std::vector<std::string> class_names;
  std::string task;                 // "detection" or "attribution"
  std::string feature_kind;         // "pae" or "raw"
  std::string feature_schema_hash;  // empty for raw features
  nlohmann::ordered_json hyperparameters;
  std::uint64_t seed = 0;
};

std::string SerializeBackendModel(const BackendModelFile &model);
BackendModelFile ParseBackendModel(std::string_view text);
void SaveBackendModel(const BackendModelFile &model,
                      const std::filesystem::path &path);
BackendModelFile LoadBackendModel(const std::filesystem::path &path);

}  // namespace pae

#endif  // PAE_BACKENDS_H_
