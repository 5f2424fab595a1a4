// tests/test_attribank.cc

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

#include <random>

#include <doctest.h>

#include "pae/attribank.h"
#include "pae/dataio.h"
#include "pae/util.h"
#include "test_util.h"

namespace pae {
namespace {

using test::CodeOf;
using test::DataDir;
using test::TempDir;

const std::vector<std::string> kDetAttacks{"A01", "A02", "A03", "A04", "A05", "A06"};

// Concatenated one-hot attribute rows plus Gaussian noise; bonafide rows are
// pure noise around 0.5.
EmbeddingDataset OneHotNoise(const AttributeSchema &schema,
                             const std::vector<std::string> &attacks, int per_class,
                             bool bonafide, float sigma, std::uint64_t seed,
                             const std::string &prefix) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0, sigma);
  std::vector<UtteranceInfo> info;
  std::vector<Eigen::VectorXf> rows;
  std::vector<std::string> labels = attacks;
  if (bonafide) labels.emplace_back(kBonafideLabel);
  for (const auto &label : labels) {
    for (int i = 0; i < per_class; ++i) {
      info.push_back({prefix + label + "_" + std::to_string(i), label, "spk", std::nullopt});
      Eigen::VectorXf v = label == kBonafideLabel
                              ? Eigen::VectorXf::Constant(schema.total_values(), 0.5f)
                              : ConcatenatedOneHot(schema, label);
      for (Eigen::Index m = 0; m < v.size(); ++m) v(m) += g(rng);
      rows.push_back(std::move(v));
    }
  }
  FeatureMatrix f(static_cast<Eigen::Index>(rows.size()), schema.total_values());
  for (std::size_t n = 0; n < rows.size(); ++n) f.row(static_cast<Eigen::Index>(n)) = rows[n];
  return EmbeddingDataset(std::move(info), std::move(f));
}

BankConfig FastConfig() {
  BankConfig c;
  c.hidden = {16};
  c.epochs = 15;
  c.lr = 3e-3f;
  c.batch_size = 32;
  return c;
}

struct Fixture {
  AttributeSchema schema = LoadSchema(DataDir() / "schema_det.json");
  EmbeddingDataset train = OneHotNoise(schema, kDetAttacks, 40, true, 0.01f, 1, "tr_");
  EmbeddingDataset dev = OneHotNoise(schema, kDetAttacks, 20, true, 0.01f, 2, "dv_");
  EmbeddingDataset eval = OneHotNoise(schema, kDetAttacks, 30, true, 0.01f, 3, "ev_");
};

}  // namespace

TEST_SUITE("attribank") {

TEST_CASE("attribute value EER") {
  Eigen::MatrixXf p(3, 2);
  p << 0.9f, 0.1f, 0.6f, 0.4f, 0.2f, 0.8f;
  CHECK(AttributeValueEer(p, std::vector<int>{0, 0, 1}) == 0.0);
  Eigen::MatrixXf hot = Eigen::MatrixXf::Zero(4, 3);
  std::vector<int> truth{0, 2, 1, 2};
  for (int n = 0; n < 4; ++n) hot(n, truth[n]) = 1;
  CHECK(AttributeValueEer(hot, truth) == 0.0);
  CHECK(AttributeValueEer(hot, truth, EerSelection::kMacro) == 0.0);
  CHECK(AttributeValueEer(Eigen::MatrixXf::Constant(4, 3, 1.0f / 3), truth) == 0.5);
  CHECK(CodeOf([&] { AttributeValueEer(hot, std::vector<int>{0}); }) ==
        ErrorCode::kDimensionMismatch);
  Eigen::MatrixXf single = Eigen::MatrixXf::Ones(2, 1);
  CHECK(CodeOf([&] { AttributeValueEer(single, std::vector<int>{0, 0}); }) ==
        ErrorCode::kDegenerateScorePool);
}

TEST_CASE("bank on near one-hot embeddings") {
  Fixture fx;
  std::vector<std::vector<Mlp<float>>> snaps;
  const BankConfig config = FastConfig();
  const auto bank = TrainBank(fx.train, fx.dev, fx.schema, config, 99, &snaps);

  SUBCASE("one extractor per attribute with the schema widths") {
    REQUIRE(bank.extractors.size() == 7);
    const std::vector<int> widths{2, 3, 3, 5, 3, 5, 4};
    for (int l = 0; l < 7; ++l) CHECK(bank.extractors[l].output_dim() == widths[l]);
    CHECK(bank.output_dim() == 25);
  }
  SUBCASE("every selected dev EER is below 0.5%") {
    for (double e : bank.dev_eer) CHECK(e < 0.005);
  }
  SUBCASE("selected epoch is the earliest minimum over all snapshots") {
    for (int l = 0; l < 7; ++l) {
      REQUIRE(snaps[l].size() == static_cast<std::size_t>(config.epochs));
      std::vector<int> truths;
      std::vector<std::size_t> rows;
      for (std::size_t n = 0; n < fx.dev.size(); ++n) {
        if (fx.dev.info(n).is_bonafide()) continue;
        rows.push_back(n);
        truths.push_back(fx.schema.Row(fx.dev.info(n).label)[l]);
      }
      const auto dev = fx.dev.Subset(rows);
      const Eigen::MatrixXf x = dev.features().transpose();
      for (int e = 0; e < config.epochs; ++e) {
        const Eigen::MatrixXf probs = snaps[l][e].ForwardBatch(x).transpose();
        const double eer = AttributeValueEer(probs, truths);
        CHECK(eer == bank.dev_eer_curve[l][e]);
        CHECK(eer >= bank.dev_eer[l]);
        if (e + 1 < bank.selected_epoch[l]) CHECK(eer > bank.dev_eer[l]);
      }
      CHECK(bank.extractors[l] == snaps[l][bank.selected_epoch[l] - 1]);
    }
  }
  SUBCASE("extracted blocks are distributions and recover the true values") {
    const auto rho = ExtractAll(bank, fx.eval);
    REQUIRE(rho.size() == fx.eval.size());
    CHECK(rho.dim() == 25);
    std::size_t correct = 0, total = 0;
    for (std::size_t n = 0; n < rho.size(); ++n) {
      CHECK(rho.info(n) == fx.eval.info(n));
      const Eigen::VectorXf v = rho.row(n).transpose();
      CHECK(v.minCoeff() >= 0.0f);
      for (int l = 0; l < 7; ++l) {
        const auto block = v.segment(fx.schema.offset(l), fx.schema.num_values(l));
        CHECK(std::abs(block.sum() - 1.0f) < 1e-6f);
        if (!fx.eval.info(n).is_bonafide()) {
          Eigen::Index arg = 0;
          block.maxCoeff(&arg);
          correct += arg == fx.schema.Row(fx.eval.info(n).label)[l];
          ++total;
        }
      }
    }
    CHECK(static_cast<double>(correct) >= 0.99 * static_cast<double>(total));
  }
  SUBCASE("bonafide rows are embedded too, in order") {
    const auto rho = ExtractAll(bank, fx.eval);
    CHECK(rho.info(rho.size() - 1).is_bonafide());
  }
  SUBCASE("worker count does not change extraction") {
    const auto a = ExtractAll(bank, fx.eval, 1);
    const auto b = ExtractAll(bank, fx.eval, 3);
    CHECK(a.features() == b.features());
  }
  SUBCASE("extract checks the input dimension") {
    CHECK(CodeOf([&] { Extract(bank, Eigen::VectorXf::Zero(7)); }) ==
          ErrorCode::kDimensionMismatch);
  }
  SUBCASE("save and load reproduce the bank") {
    TempDir dir;
    SaveBank(bank, dir.path());
    const auto back = LoadBank(dir.path());
    CHECK(back.selected_epoch == bank.selected_epoch);
    CHECK(back.dev_eer == bank.dev_eer);
    for (int l = 0; l < 7; ++l) CHECK(back.extractors[l] == bank.extractors[l]);
    TempDir again;
    SaveBank(back, again.path());
    CHECK(ReadTextFile(dir / "manifest.json") == ReadTextFile(again / "manifest.json"));
  }
}

TEST_CASE("identical seeds give identical banks, at any worker count") {
  Fixture fx;
  BankConfig config = FastConfig();
  config.epochs = 4;
  const auto a = TrainBank(fx.train, fx.dev, fx.schema, config, 5);
  config.workers = 4;
  const auto b = TrainBank(fx.train, fx.dev, fx.schema, config, 5);
  CHECK(a.selected_epoch == b.selected_epoch);
  for (int l = 0; l < 7; ++l) CHECK(a.extractors[l] == b.extractors[l]);
  const auto c = TrainBank(fx.train, fx.dev, fx.schema, config, 6);
  CHECK_FALSE(c.extractors[0] == a.extractors[0]);
}

TEST_CASE("bank training errors") {
  Fixture fx;
  const auto bona = OneHotNoise(fx.schema, {}, 10, true, 0.01f, 4, "b_");
  CHECK(CodeOf([&] { TrainBank(bona, fx.dev, fx.schema, FastConfig(), 1); }) ==
        ErrorCode::kNoSpoofedData);
  const auto one = OneHotNoise(fx.schema, {"A01"}, 10, false, 0.01f, 4, "o_");
  CHECK(CodeOf([&] { TrainBank(one, fx.dev, fx.schema, FastConfig(), 1); }) ==
        ErrorCode::kAttributeWithSingleValueInTrain);
  BankConfig zero = FastConfig();
  zero.epochs = 0;
  CHECK(CodeOf([&] { TrainBank(fx.train, fx.dev, fx.schema, zero, 1); }) ==
        ErrorCode::kInvalidArgument);
}

}  // TEST_SUITE

}  // namespace pae
