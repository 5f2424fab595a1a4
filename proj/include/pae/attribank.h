// pae/attribank.h

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

// One softmax MLP per attribute maps a countermeasure embedding to a
// distribution over that attribute's values. Stacking the L distributions
// gives the probabilistic attribute embedding used by the back-ends.

#ifndef PAE_ATTRIBANK_H_
#define PAE_ATTRIBANK_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pae/dataio.h"
#include "pae/nnet.h"

namespace pae {

/// How the per-epoch development EER of an extractor is formed.
enum class EerSelection {
  kPooled,  // all (utterance, value) probabilities in one target/non-target pool
  kMacro,   // one EER per value (true value vs. the rest), averaged
};

std::string_view EerSelectionName(EerSelection s);
EerSelection ParseEerSelection(std::string_view s);

/// Value-detection EER of one attribute. `probs` holds one predicted
/// distribution per row; truths[n] is the true value index of row n. The
/// probability of the true value is a target score, every other value's
/// probability a non-target score.
double AttributeValueEer(const Eigen::MatrixXf &probs,
                         std::span<const int> truths,
                         EerSelection selection = EerSelection::kPooled);

struct BankConfig {
  std::vector<int> hidden{64, 32};
  int epochs = 100;
  float lr = 1e-4f;
  int batch_size = 256;
  EerSelection selection = EerSelection::kPooled;
  bool normalize = false;  // L2-normalise embeddings before the extractors
  int workers = 1;
};

struct ExtractorBank {
  AttributeSchema schema;
  std::vector<Mlp<float>> extractors;      // extractor l has M_l outputs
  std::vector<int> selected_epoch;         // 1-based
  std::vector<double> dev_eer;             // at the selected epoch
  std::vector<std::vector<double>> dev_eer_curve;  // per attribute, per epoch
  EerSelection selection = EerSelection::kPooled;
  bool normalize = false;
  int epochs = 0;
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const { return extractors.front().input_dim(); }
  int output_dim() const { return schema.total_values(); }
};

/// Trains one extractor per attribute on the spoofed utterances of `train`
/// (bonafide rows are dropped) and keeps, per attribute, the epoch whose
/// development EER is lowest (earliest on ties). Attribute l trains with
/// seed DeriveSeed(seed, "attribank", l), so results do not depend on
/// `config.workers`. If `snapshots` is non-null it receives every epoch's
/// parameters, per attribute.
ExtractorBank TrainBank(const EmbeddingDataset &train,
                        const EmbeddingDataset &dev,
                        const AttributeSchema &schema, const BankConfig &config,
                        std::uint64_t seed,
                        std::vector<std::vector<Mlp<float>>> *snapshots = nullptr);

/// Probabilistic attribute embedding of one CM embedding: L simplex blocks
/// in schema attribute order, M values in total.
Eigen::VectorXf Extract(const ExtractorBank &bank, const Eigen::VectorXf &embedding);

/// Extract() over every record, bonafide included. Rows are processed in
/// fixed-size chunks, so the output is identical for any worker count.
EmbeddingDataset ExtractAll(const ExtractorBank &bank,
                            const EmbeddingDataset &dataset, int workers = 1);

/// Bank directory: manifest.json plus one checkpoint per attribute.
void SaveBank(const ExtractorBank &bank, const std::filesystem::path &dir);
ExtractorBank LoadBank(const std::filesystem::path &dir);

}  // namespace pae

#endif  // PAE_ATTRIBANK_H_
