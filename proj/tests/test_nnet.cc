// tests/test_nnet.cc

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

#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.h"
#include "pae/nnet.h"
#include "test_util.h"

namespace pae {
namespace {

using test::CodeOf;

Mlp<double> RandomNet(std::mt19937_64 &rng, int *in_dim, int *out_dim) {
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_int_distribution<int> depth(0, 2);
  *in_dim = dim(rng);
  *out_dim = dim(rng);
  std::vector<int> hidden(depth(rng));
  for (int &h : hidden) h = dim(rng);
  Mlp<double> net = Mlp<double>::Build(*in_dim, hidden, *out_dim, rng);
  std::normal_distribution<double> g(0, 0.1);
  for (auto &l : net.mutable_layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = g(rng);
  }
  return net;
}

// Two Gaussian blobs, centres 2 apart on the first axis, in 2-D.
void Blobs(int n, std::mt19937_64 &rng, Eigen::MatrixXf *x, std::vector<int> *y) {
  std::normal_distribution<float> g(0, 0.15f);
  x->resize(2, n);
  y->resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    (*y)[i] = c;
    (*x)(0, i) = (c ? 1.0f : -1.0f) + g(rng);
    (*x)(1, i) = g(rng);
  }
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("zero network gives a uniform softmax") {
  DenseLayer<float> l{Eigen::MatrixXf::Zero(4, 3), Eigen::VectorXf::Zero(4),
                      Activation::kSoftmax};
  const Mlp<float> net({l});
  const Eigen::VectorXf y = net.Forward(Eigen::VectorXf::Ones(3));
  for (int i = 0; i < 4; ++i) CHECK(y(i) == doctest::Approx(0.25).epsilon(1e-7));
}

TEST_CASE("softmax is shift invariant and sums to one") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd z(6);
    for (int i = 0; i < 6; ++i) z(i) = g(rng);
    const double c = g(rng) * 100;
    const Eigen::VectorXd a = Softmax(z);
    const Eigen::VectorXd b = Softmax((z.array() + c).matrix());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(a.sum() - 1) < 1e-6);
    CHECK(a.minCoeff() >= 0);
  }
  Eigen::VectorXd big(2);
  big << 1000, -1000;
  CHECK(Softmax(big).allFinite());
}

TEST_CASE("single linear layer with softmax head") {
  Eigen::MatrixXd w(2, 2);
  w << 1, 2, 3, 4;
  const Mlp<double> net({DenseLayer<double>{w, Eigen::VectorXd::Zero(2), Activation::kSoftmax}});
  const Eigen::VectorXd y = net.Forward(Eigen::VectorXd::Ones(2));
  const double e4 = std::exp(4.0);
  CHECK(y(0) == doctest::Approx(1 / (1 + e4)).epsilon(1e-12));
  CHECK(y(1) == doctest::Approx(e4 / (1 + e4)).epsilon(1e-12));
}

TEST_CASE("forward checks its input") {
  std::mt19937_64 rng(1);
  const auto net = Mlp<float>::Build(3, std::vector<int>{4}, 2, rng);
  CHECK(CodeOf([&] { net.Forward(Eigen::VectorXf::Ones(4)); }) ==
        ErrorCode::kDimensionMismatch);
  Eigen::VectorXf bad = Eigen::VectorXf::Ones(3);
  bad(1) = std::nanf("");
  CHECK(CodeOf([&] { net.Forward(bad); }) == ErrorCode::kNonFiniteValue);
  CHECK(net.num_parameters() == 3 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("cross-entropy") {
  Eigen::VectorXd t(4);
  t << 0, 1, 0, 0;
  CHECK(CrossEntropy<double>(t, t) == 0.0);
  CHECK(CrossEntropy<double>(Eigen::VectorXd::Constant(4, 0.25), t) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  Eigen::VectorXd p(4);
  p << 0.5, 0, 0.5, 0;
  CHECK(CrossEntropy<double>(p, t) == doctest::Approx(-std::log(1e-12)));
  CHECK(CodeOf([&] { CrossEntropy<double>(Eigen::VectorXd::Ones(3), t); }) ==
        ErrorCode::kDimensionMismatch);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    int in = 0, out = 0;
    const auto net = RandomNet(rng, &in, &out);
    const int batch = 5;
    MatrixX<double> x(in, batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<int> y(batch);
    std::uniform_int_distribution<int> cls(0, out - 1);
    for (int &v : y) v = cls(rng);
    MlpTensors<double> grad;
    LossAndGradient(net, x, y, &grad);
    const Eigen::VectorXd a = oracle::Flatten(grad);
    const Eigen::VectorXd n = oracle::Flatten(oracle::FiniteDifferenceGradient(net, x, y, 1e-4));
    const double rel = (a - n).norm() / std::max({a.norm(), n.norm(), 1e-12});
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("Adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(5);
  int in = 0, out = 0;
  const auto net = RandomNet(rng, &in, &out);
  auto moved = net;
  AdamConfig<double> cfg;
  cfg.lr = 0;
  AdamState<double> opt(net, cfg);
  MatrixX<double> x = MatrixX<double>::Random(in, 4);
  std::vector<int> y{0, 1 % out, 0, 1 % out};
  MlpTensors<double> grad;
  for (int s = 0; s < 3; ++s) {
    LossAndGradient(moved, x, y, &grad);
    opt.Apply(grad, &moved);
  }
  CHECK(moved == net);
  CHECK(opt.step() == 3);
}

TEST_CASE("separable blobs are learnt to 100% training accuracy") {
  std::mt19937_64 rng(23);
  Eigen::MatrixXf x;
  std::vector<int> y;
  Blobs(200, rng, &x, &y);
  auto net = Mlp<float>::Build(2, std::vector<int>{8}, 2, rng);
  AdamConfig<float> cfg;
  cfg.lr = 1e-2f;
  AdamState<float> opt(net, cfg);
  TrainOptions options;
  options.epochs = 100;
  options.batch_size = 32;
  const auto result = Train(net, x, y, &opt, options, rng);
  const Eigen::MatrixXf p = result.model.ForwardBatch(x);
  int correct = 0;
  for (int i = 0; i < 200; ++i) {
    Eigen::Index arg = 0;
    p.col(i).maxCoeff(&arg);
    correct += arg == y[i];
  }
  CHECK(correct == 200);
  CHECK(result.snapshots.size() == 100);
  CHECK(result.epoch_loss.size() == 100);
}

TEST_CASE("a single sample is memorised") {
  std::mt19937_64 rng(29);
  Eigen::MatrixXf x(3, 1);
  x << 0.5f, -1.0f, 2.0f;
  const std::vector<int> y{2};
  auto net = Mlp<float>::Build(3, std::vector<int>{8}, 4, rng);
  AdamConfig<float> cfg;
  cfg.lr = 0.05f;
  AdamState<float> opt(net, cfg);
  TrainOptions options;
  options.epochs = 100;
  const auto result = Train(net, x, y, &opt, options, rng);
  CHECK(LossAndGradient<float>(result.model, x, y, nullptr) < 0.01f);
}

TEST_CASE("identical seeds give identical trajectories") {
  auto run = [] {
    std::mt19937_64 rng(31);
    Eigen::MatrixXf x;
    std::vector<int> y;
    Blobs(60, rng, &x, &y);
    auto net = Mlp<float>::Build(2, std::vector<int>{4}, 2, rng);
    AdamState<float> opt(net, AdamConfig<float>{});
    TrainOptions options;
    options.epochs = 5;
    options.batch_size = 7;
    return Train(net, x, y, &opt, options, rng);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) CHECK(a.snapshots[k] == b.snapshots[k]);
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("training input validation") {
  std::mt19937_64 rng(1);
  auto net = Mlp<float>::Build(2, std::vector<int>{}, 2, rng);
  AdamState<float> opt(net, AdamConfig<float>{});
  const Eigen::MatrixXf empty(2, 0);
  CHECK(CodeOf([&] { Train(net, empty, std::vector<int>{}, &opt, TrainOptions{}, rng); }) ==
        ErrorCode::kEmptyDataset);
  TrainOptions zero;
  zero.batch_size = 0;
  const Eigen::MatrixXf one = Eigen::MatrixXf::Ones(2, 1);
  CHECK(CodeOf([&] { Train(net, one, std::vector<int>{0}, &opt, zero, rng); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("checkpoints round-trip exactly") {
  std::mt19937_64 rng(37);
  const auto net = Mlp<float>::Build(5, std::vector<int>{4, 3}, 2, rng);
  const std::string bytes = SerializeMlp(net);
  CHECK(ParseMlp(bytes) == net);
  CHECK(SerializeMlp(ParseMlp(bytes)) == bytes);
  CHECK(bytes.substr(0, 4) == "PAEM");
  CHECK(CodeOf([&] { ParseMlp(bytes.substr(0, bytes.size() - 1)); }).has_value());
}

}  // TEST_SUITE

}  // namespace pae
