// src/attribank.cc

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

#include "pae/attribank.h"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "pae/error.h"
#include "pae/metrics.h"
#include "pae/util.h"

namespace pae {

namespace {

constexpr Eigen::Index kExtractChunk = 256;

struct LabeledSplit {
  MatrixX<float> inputs;  // D x N
  std::vector<std::vector<int>> truths;  // per attribute, per utterance
};

LabeledSplit SpoofedOnly(const EmbeddingDataset &data,
                         const AttributeSchema &schema, bool normalize,
                         const char *what) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.info(i).is_bonafide()) rows.push_back(i);
  }
  if (rows.empty()) {
    Fail(ErrorCode::kNoSpoofedData,
         std::string("no spoofed utterances in the ") + what + " set");
  }
  EmbeddingDataset spoofed = data.Subset(rows);
  if (normalize) spoofed = LengthNormalized(spoofed);
  LabeledSplit split;
  split.inputs = spoofed.features().transpose();
  split.truths.assign(schema.num_attributes(), {});
  for (const auto &u : spoofed.infos()) {
    const auto row = schema.Row(u.label);
    for (int l = 0; l < schema.num_attributes(); ++l) {
      split.truths[l].push_back(row[l]);
    }
  }
  return split;
}

std::string CheckpointName(int l) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "extractor_%02d.bin", l);
  return buf;
}

}  // namespace

std::string_view EerSelectionName(EerSelection s) {
  return s == EerSelection::kPooled ? "pooled" : "macro";
}

EerSelection ParseEerSelection(std::string_view s) {
  if (s == "pooled") return EerSelection::kPooled;
  if (s == "macro") return EerSelection::kMacro;
  Fail(ErrorCode::kInvalidArgument, "unknown EER selection '" + std::string(s) + "'");
}

double AttributeValueEer(const Eigen::MatrixXf &probs,
                         std::span<const int> truths, EerSelection selection) {
  if (static_cast<std::size_t>(probs.rows()) != truths.size()) {
    Fail(ErrorCode::kDimensionMismatch, "one truth per prediction row required");
  }
  if (selection == EerSelection::kPooled) {
    ScorePool pool;
    for (Eigen::Index n = 0; n < probs.rows(); ++n) {
      for (Eigen::Index m = 0; m < probs.cols(); ++m) {
        (m == truths[n] ? pool.target : pool.nontarget).push_back(probs(n, m));
      }
    }
    if (pool.target.empty() || pool.nontarget.empty()) {
      Fail(ErrorCode::kDegenerateScorePool,
           "value EER needs target and non-target scores");
    }
    return Eer(pool).eer;
  }
  double sum = 0;
  int used = 0;
  for (Eigen::Index m = 0; m < probs.cols(); ++m) {
    ScorePool pool;
    for (Eigen::Index n = 0; n < probs.rows(); ++n) {
      (m == truths[n] ? pool.target : pool.nontarget).push_back(probs(n, m));
    }
    if (pool.target.empty() || pool.nontarget.empty()) continue;
    sum += Eer(pool).eer;
    ++used;
  }
  if (used == 0) {
    Fail(ErrorCode::kDegenerateScorePool, "no value has both score kinds");
  }
  return sum / used;
}

ExtractorBank TrainBank(const EmbeddingDataset &train,
                        const EmbeddingDataset &dev,
                        const AttributeSchema &schema, const BankConfig &config,
                        std::uint64_t seed,
                        std::vector<std::vector<Mlp<float>>> *snapshots) {
  if (config.epochs < 1) {
    Fail(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  }
  if (train.dim() != dev.dim()) {
    Fail(ErrorCode::kDimensionMismatch, "train and dev dimensions differ");
  }
  const LabeledSplit tr = SpoofedOnly(train, schema, config.normalize, "training");
  const LabeledSplit dv = SpoofedOnly(dev, schema, config.normalize, "development");
  const int num_attr = schema.num_attributes();
  for (int l = 0; l < num_attr; ++l) {
    const std::set<int> seen(tr.truths[l].begin(), tr.truths[l].end());
    if (seen.size() < 2) {
      Fail(ErrorCode::kAttributeWithSingleValueInTrain,
           "attribute '" + schema.attribute(l).name +
               "' has a single value in the training data");
    }
  }

  ExtractorBank bank;
  bank.schema = schema;
  bank.selection = config.selection;
  bank.normalize = config.normalize;
  bank.epochs = config.epochs;
  bank.seed = seed;
  bank.extractors.resize(num_attr);
  bank.selected_epoch.resize(num_attr);
  bank.dev_eer.resize(num_attr);
  bank.dev_eer_curve.resize(num_attr);
  if (snapshots) snapshots->assign(num_attr, {});

  ParallelFor(num_attr, config.workers, [&](std::size_t l) {
    Rng rng(DeriveSeed(seed, "attribank", l));
    auto model = Mlp<float>::Build(static_cast<int>(tr.inputs.rows()),
                                   config.hidden,
                                   schema.num_values(static_cast<int>(l)), rng);
    AdamConfig<float> adam;
    adam.lr = config.lr;
    AdamState<float> opt(model, adam);
    TrainOptions options;
    options.epochs = config.epochs;
    options.batch_size = config.batch_size;
    options.keep_snapshots = true;
    auto result = Train(std::move(model), tr.inputs, tr.truths[l], &opt, options, rng);

    double best = 2.0;
    std::size_t best_epoch = 0;
    for (std::size_t e = 0; e < result.snapshots.size(); ++e) {
      const Eigen::MatrixXf probs =
          result.snapshots[e].ForwardBatch(dv.inputs).transpose();
      const double eer = AttributeValueEer(probs, dv.truths[l], config.selection);
      bank.dev_eer_curve[l].push_back(eer);
      if (eer < best) {
        best = eer;
        best_epoch = e;
      }
    }
    bank.extractors[l] = result.snapshots[best_epoch];
    bank.selected_epoch[l] = static_cast<int>(best_epoch) + 1;
    bank.dev_eer[l] = best;
    if (snapshots) (*snapshots)[l] = std::move(result.snapshots);
  });
  return bank;
}

Eigen::VectorXf Extract(const ExtractorBank &bank,
                        const Eigen::VectorXf &embedding) {
  if (embedding.size() != bank.input_dim()) {
    Fail(ErrorCode::kDimensionMismatch,
         "embedding dim " + std::to_string(embedding.size()) +
             " != extractor input dim " + std::to_string(bank.input_dim()));
  }
  Eigen::VectorXf x = embedding;
  if (bank.normalize && x.norm() > 0) x.normalize();
  Eigen::VectorXf rho(bank.output_dim());
  for (int l = 0; l < bank.schema.num_attributes(); ++l) {
    rho.segment(bank.schema.offset(l), bank.schema.num_values(l)) =
        bank.extractors[l].Forward(x);
  }
  return rho;
}

EmbeddingDataset ExtractAll(const ExtractorBank &bank,
                            const EmbeddingDataset &dataset, int workers) {
  if (dataset.dim() != bank.input_dim()) {
    Fail(ErrorCode::kDimensionMismatch,
         "embedding dim " + std::to_string(dataset.dim()) +
             " != extractor input dim " + std::to_string(bank.input_dim()));
  }
  const auto n = static_cast<Eigen::Index>(dataset.size());
  FeatureMatrix out(n, bank.output_dim());
  const std::size_t chunks = static_cast<std::size_t>((n + kExtractChunk - 1) / kExtractChunk);
  ParallelFor(chunks, workers, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * kExtractChunk;
    const Eigen::Index size = std::min(kExtractChunk, n - start);
    MatrixX<float> x = dataset.features().middleRows(start, size).transpose();
    if (bank.normalize) {
      for (Eigen::Index k = 0; k < size; ++k) {
        const float norm = x.col(k).norm();
        if (norm > 0) x.col(k) /= norm;
      }
    }
    for (int l = 0; l < bank.schema.num_attributes(); ++l) {
      try {
        out.block(start, bank.schema.offset(l), size, bank.schema.num_values(l)) =
            bank.extractors[l].ForwardBatch(x).transpose();
      } catch (const Error &e) {
        Fail(e.code(), std::string(e.what()) + " (utterances " +
                           dataset.info(start).utterance_id + ".." +
                           dataset.info(start + size - 1).utterance_id + ")");
      }
    }
  });
  return EmbeddingDataset(dataset.infos(), std::move(out));
}

void SaveBank(const ExtractorBank &bank, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "extractor_bank";
  doc["schema_hash"] = SchemaHash(bank.schema);
  doc["schema"] = nlohmann::ordered_json::parse(SerializeSchema(bank.schema));
  doc["input_dim"] = bank.input_dim();
  doc["selection"] = EerSelectionName(bank.selection);
  doc["normalize"] = bank.normalize;
  doc["epochs"] = bank.epochs;
  doc["seed"] = bank.seed;
  doc["attributes"] = nlohmann::ordered_json::array();
  for (int l = 0; l < bank.schema.num_attributes(); ++l) {
    const std::string file = CheckpointName(l);
    SaveMlp(bank.extractors[l], dir / file);
    nlohmann::ordered_json a;
    a["name"] = bank.schema.attribute(l).name;
    a["checkpoint"] = file;
    a["checkpoint_sha256"] = Sha256File(dir / file);
    a["selected_epoch"] = bank.selected_epoch[l];
    a["dev_eer"] = bank.dev_eer[l];
    a["dev_eer_curve"] = bank.dev_eer_curve[l];
    doc["attributes"].push_back(std::move(a));
  }
  WriteTextFile(dir / "manifest.json", doc.dump(2) + "\n");
}

ExtractorBank LoadBank(const std::filesystem::path &dir) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(ReadTextFile(dir / "manifest.json"));
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("bank manifest: ") + e.what());
  }
  try {
    ExtractorBank bank;
    bank.schema = ParseSchema(doc.at("schema").dump());
    if (SchemaHash(bank.schema) != doc.at("schema_hash").get<std::string>()) {
      Fail(ErrorCode::kSchemaMismatch, "bank manifest schema hash mismatch");
    }
    bank.selection = ParseEerSelection(doc.at("selection").get<std::string>());
    bank.normalize = doc.at("normalize").get<bool>();
    bank.epochs = doc.at("epochs").get<int>();
    bank.seed = doc.at("seed").get<std::uint64_t>();
    const auto &attrs = doc.at("attributes");
    if (static_cast<int>(attrs.size()) != bank.schema.num_attributes()) {
      Fail(ErrorCode::kMissingAttribute, "bank manifest attribute count mismatch");
    }
    for (int l = 0; l < bank.schema.num_attributes(); ++l) {
      const auto &a = attrs[l];
      auto model = LoadMlp(dir / a.at("checkpoint").get<std::string>());
      if (model.output_dim() != bank.schema.num_values(l)) {
        Fail(ErrorCode::kDimensionMismatch,
             "extractor " + std::to_string(l) + " width does not match schema");
      }
      bank.extractors.push_back(std::move(model));
      bank.selected_epoch.push_back(a.at("selected_epoch").get<int>());
      bank.dev_eer.push_back(a.at("dev_eer").get<double>());
      bank.dev_eer_curve.push_back(a.at("dev_eer_curve").get<std::vector<double>>());
    }
    return bank;
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("bank manifest: ") + e.what());
  }
}

}  // namespace pae
