// tests/test_explain.cc

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
#include "pae/explain.h"
#include "test_util.h"

namespace pae {
namespace {

using test::CodeOf;

Eigen::MatrixXd Gaussian(int rows, int cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// A small non-additive score with interactions between features.
double Interacting(const Eigen::VectorXd &z) {
  return std::tanh(z(0) * z(1)) + z(2) * z(2) - 0.5 * z(3) + std::max(z(4), z(5)) +
         0.3 * z(6) * z(7) * z(0);
}

}  // namespace

TEST_SUITE("explain") {

TEST_CASE("additive models have closed-form Shapley values") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = 2 + trial % 7;
    const Eigen::VectorXd w = Gaussian(t, 1, rng);
    const Eigen::VectorXd x = Gaussian(t, 1, rng);
    const Eigen::MatrixXd bg = Gaussian(5, t, rng);
    const ScoreFn f = [&](const Eigen::VectorXd &z) { return w.dot(z) + 0.7; };
    const auto r = ShapleyExact(f, x, bg);
    const Eigen::VectorXd closed =
        w.cwiseProduct(x - bg.colwise().mean().transpose());
    CHECK((r.phi - closed).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.se.isZero());
    CHECK(r.n_permutations == 0);
  }
}

TEST_CASE("exact enumeration agrees with averaging over all orderings") {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::VectorXd x = Gaussian(8, 1, rng).col(0).head(6);
    Eigen::MatrixXd bg = Gaussian(3, 8, rng).leftCols(6);
    const ScoreFn f = [](const Eigen::VectorXd &z) {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(8);
      p.head(6) = z;
      return Interacting(p);
    };
    const auto r = ShapleyExact(f, x, bg);
    const Eigen::VectorXd want = oracle::PermutationShapley(f, x, bg);
    CHECK((r.phi - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("efficiency, symmetry and dummy axioms") {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = 4 + trial % 6;
    Eigen::VectorXd w = Gaussian(t, 1, rng);
    w(1) = w(0);
    w(t - 1) = 0;
    Eigen::VectorXd x = Gaussian(t, 1, rng);
    x(1) = x(0);
    Eigen::MatrixXd bg = Gaussian(6, t, rng);
    bg.col(1) = bg.col(0);
    const ScoreFn f = [&](const Eigen::VectorXd &z) {
      return w.dot(z) + std::sin(z(0) + z(1)) * z(2);
    };
    const auto r = ShapleyExact(f, x, bg);
    CHECK(std::abs(r.phi.sum() - (r.fx - r.base)) < 1e-9);
    CHECK(std::abs(r.phi(0) - r.phi(1)) < 1e-12);
    CHECK(std::abs(r.phi(t - 1)) < 1e-12);
    CHECK(r.fx == doctest::Approx(f(x)).epsilon(1e-14));
  }
}

TEST_CASE("sampling converges on the exact values") {
  std::mt19937_64 rng(113);
  const Eigen::VectorXd x = Gaussian(8, 1, rng);
  const Eigen::MatrixXd bg = Gaussian(12, 8, rng);
  const ScoreFn f = Interacting;
  const auto exact = ShapleyExact(f, x, bg);
  const auto s = ShapleySample(f, x, bg, 2000, 5);
  CHECK(s.n_permutations == 2000);
  CHECK(s.base == doctest::Approx(exact.base).epsilon(1e-12));
  for (int j = 0; j < 8; ++j) {
    CAPTURE(j);
    CHECK(std::abs(s.phi(j) - exact.phi(j)) <= 3 * s.se(j));
  }
  CHECK(std::abs(s.phi.sum() - (s.fx - s.base)) <= 3 * s.se.sum());

  // Mean absolute error over several seeds shrinks along n = 50, 500, 5000.
  std::vector<double> err;
  for (int n : {50, 500, 5000}) {
    double e = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      e += (ShapleySample(f, x, bg, n, seed).phi - exact.phi).cwiseAbs().mean();
    }
    err.push_back(e);
  }
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
}

TEST_CASE("sampling is reproducible from its seed") {
  std::mt19937_64 rng(127);
  const Eigen::VectorXd x = Gaussian(8, 1, rng);
  const Eigen::MatrixXd bg = Gaussian(4, 8, rng);
  const auto a = ShapleySample(Interacting, x, bg, 100, 3);
  const auto b = ShapleySample(Interacting, x, bg, 100, 3);
  const auto c = ShapleySample(Interacting, x, bg, 100, 4);
  CHECK(a.phi == b.phi);
  CHECK(a.se == b.se);
  CHECK(a.phi != c.phi);
}

TEST_CASE("explainer input validation") {
  const ScoreFn f = [](const Eigen::VectorXd &z) { return z.sum(); };
  CHECK(CodeOf([&] { ShapleyExact(f, Eigen::VectorXd::Zero(21), Eigen::MatrixXd::Zero(1, 21)); }) ==
        ErrorCode::kTooManyFeatures);
  CHECK(CodeOf([&] { ShapleyExact(f, Eigen::VectorXd::Zero(3), Eigen::MatrixXd(0, 3)); }) ==
        ErrorCode::kEmptyBackground);
  CHECK(CodeOf([&] { ShapleySample(f, Eigen::VectorXd::Zero(3), Eigen::MatrixXd(0, 3), 5, 1); }) ==
        ErrorCode::kEmptyBackground);
  CHECK(CodeOf([&] { ShapleyExact(f, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(2, 4)); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(CodeOf([&] { ShapleySample(f, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(2, 3), 0, 1); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("background selection") {
  Eigen::MatrixXd rows(10, 1);
  for (int i = 0; i < 10; ++i) rows(i, 0) = i;
  const auto a = SelectBackground(rows, 4, 1);
  CHECK(a.rows() == 4);
  for (int k = 1; k < 4; ++k) CHECK(a(k, 0) > a(k - 1, 0));
  CHECK(SelectBackground(rows, 4, 1) == a);
  CHECK(SelectBackground(rows, 50, 1) == rows);
  CHECK(CodeOf([&] { SelectBackground(rows, 0, 1); }) == ErrorCode::kEmptyBackground);
}

TEST_CASE("explaining back-ends row by row") {
  std::mt19937_64 rng(131);
  const std::vector<int> blocks{2, 3};
  const Eigen::MatrixXd rho = oracle::RandomOneHot(30, blocks, rng);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 2;
  BackendSpec spec;
  spec.block_sizes = blocks;
  spec.alpha = 1;
  const auto nb = FitBackend(spec, rho, y, 2, 1);
  ExplainOptions opt;
  opt.method = ShapleyMethod::kExact;
  const auto out = ExplainRows(*nb, rho.topRows(3), rho.bottomRows(10), opt, 1);
  REQUIRE(out.size() == 3);
  for (const auto &u : out) {
    REQUIRE(u.per_class.size() == 2);
    for (int c = 0; c < 2; ++c) {
      const auto &r = u.per_class[c];
      CHECK(std::abs(r.phi.sum() - (r.fx - r.base)) < 1e-9);
      CHECK(r.fx == doctest::Approx(nb->Scores(rho.row(u.row).transpose())(c)));
    }
  }
  opt.method = ShapleyMethod::kSample;
  opt.n_permutations = 50;
  const auto s1 = ExplainRows(*nb, rho.topRows(3), rho.bottomRows(10), opt, 1);
  opt.workers = 3;
  const auto s3 = ExplainRows(*nb, rho.topRows(3), rho.bottomRows(10), opt, 1);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) CHECK(s1[r].per_class[c].phi == s3[r].per_class[c].phi);
  }
}

TEST_CASE("rank aggregation") {
  using Reports = std::vector<std::vector<Eigen::VectorXd>>;
  const std::vector<int> ones{1, 1, 1};
  SUBCASE("single utterance") {
    const Reports r{{Eigen::Vector3d(0.5, -0.2, 0.9)}};
    const auto t = RankAggregate(r, ones);
    CHECK(t.value_rank == std::vector<double>{2, 3, 1});
  }
  SUBCASE("reversed rankings cancel") {
    const Reports r{{Eigen::Vector3d(3, 2, 1)}, {Eigen::Vector3d(1, 2, 3)}};
    const auto t = RankAggregate(r, ones);
    CHECK(t.value_rank == std::vector<double>{2, 2, 2});
  }
  SUBCASE("attribute rank is the mean of its value ranks") {
    Eigen::VectorXd phi(4);
    phi << 4, 1, 3, 2;  // ranks 1, 4, 2, 3
    const Reports r{{phi}};
    const auto t = RankAggregate(r, std::vector<int>{2, 2});
    CHECK(t.attribute_rank == std::vector<double>{2.5, 2.5});
  }
  SUBCASE("per-class and pooled aggregation") {
    const Reports r{{Eigen::Vector3d(3, 2, 1), Eigen::Vector3d(0, 0, 10)}};
    CHECK(RankAggregate(r, ones, RankPooling::kPerClass).value_rank ==
          std::vector<double>{1.75, 2.25, 2});
    CHECK(RankAggregate(r, ones, RankPooling::kPooled).value_rank ==
          std::vector<double>{2, 3, 1});
  }
  SUBCASE("positive rescaling of one utterance changes nothing") {
    std::mt19937_64 rng(137);
    Reports r;
    for (int u = 0; u < 5; ++u) r.push_back({Gaussian(6, 1, rng), Gaussian(6, 1, rng)});
    const auto before = RankAggregate(r, std::vector<int>{2, 4});
    r[2][0] *= 17.0;
    r[2][1] *= 17.0;
    const auto after = RankAggregate(r, std::vector<int>{2, 4});
    CHECK(before.value_rank == after.value_rank);
    CHECK(before.attribute_rank == after.attribute_rank);
  }
  SUBCASE("errors") {
    CHECK(CodeOf([&] { RankAggregate(Reports{}, ones); }) == ErrorCode::kEmptyReportSet);
    CHECK(CodeOf([&] { RankAggregate(Reports{{Eigen::Vector2d(1, 2)}}, ones); }) ==
          ErrorCode::kDimensionMismatch);
  }
}

}  // TEST_SUITE

}  // namespace pae
