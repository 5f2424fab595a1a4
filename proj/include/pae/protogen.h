// pae/protogen.h

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

// Protocol construction (the attr-17 re-partitioning of ASVspoof 2019 LA),
// attack confusability via Hamming distances between attribute rows, and
// seeded synthetic embedding sets.

#ifndef PAE_PROTOGEN_H_
#define PAE_PROTOGEN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pae/dataio.h"

namespace pae {

/// Apportions n items to integer weights: floor of each exact quota, then
/// the leftover items one by one to the largest fractional parts (lowest
/// index on ties). The result sums to n.
std::vector<std::int64_t> LargestRemainder(std::int64_t n,
                                           std::span<const std::int64_t> weights);

struct PartitionSpec {
  std::string name = "ASVspoof2019-attr-17";
  /// Attacks whose train-origin pool is split train:dev; every other
  /// utterance of these attacks goes to eval.
  std::vector<std::string> known_attacks;
  std::vector<std::int64_t> known_ratio{80, 20};
  /// Attacks split train:dev:eval, with eval tagged by speaker overlap.
  std::vector<std::string> unknown_attacks;
  std::vector<std::int64_t> unknown_ratio{50, 10, 40};
  /// Per-attack train:dev:eval weights replacing `unknown_ratio`.
  std::map<std::string, std::vector<std::int64_t>> ratio_overrides;
  /// Speakers whose utterances may only appear in eval.
  std::vector<std::string> disjoint_speakers;
};

PartitionSpec ParsePartitionSpec(std::string_view text);
PartitionSpec LoadPartitionSpec(const std::filesystem::path &path);

/**
   Builds the attribution protocol.

   Known attacks: the utterances that `original` places in train are split
   train:dev by `known_ratio`; the rest go to eval with tag n/a.
   Unknown attacks: the utterance counts (train, dev, eval) are the largest-
   remainder apportionment of the attack's whole pool. All utterances of
   disjoint speakers go to eval (tag disjoint); the remaining eval slots and
   the train and dev partitions are filled from a seeded shuffle of the
   other (speaker-common) utterances.
   Bonafide utterances are skipped. Entries follow the order of
   `utterances`.
 */
ProtocolSplit BuildAttr17(const std::vector<UtteranceInfo> &utterances,
                          const ProtocolSplit &original, const PartitionSpec &spec,
                          std::uint64_t seed);

struct ProtocolStatsRow {
  std::string label;
  std::int64_t train = 0;
  std::int64_t dev = 0;
  std::int64_t eval_common = 0;
  std::int64_t eval_disjoint = 0;
  std::int64_t eval_other = 0;  // eval entries tagged n/a
  std::int64_t eval() const { return eval_common + eval_disjoint + eval_other; }
};

/// Utterance counts per label (sorted) and partition.
std::vector<ProtocolStatsRow> ProtocolStatistics(
    const ProtocolSplit &protocol, const std::vector<UtteranceInfo> &utterances);
std::string FormatProtocolStatistics(std::span<const ProtocolStatsRow> rows);

/// Hamming distances between the concatenated one-hot rows of every pair
/// of schema attacks, i.e. 2 x the number of differing attributes.
Eigen::MatrixXi HammingMatrix(const AttributeSchema &schema);

struct ConfusabilityReport {
  std::vector<double> per_row;  // NaN where a row is constant
  double mean = 0;              // over the finite rows; NaN if none
};

/// Spearman correlation, per row, between assignment frequencies and
/// negated Hamming distances (rows: unknown attacks, columns: known
/// classes).
ConfusabilityReport ConfusabilityCheck(const Eigen::MatrixXd &assignments,
                                       const Eigen::MatrixXi &distances);

/// Spearman rank correlation with average ranks; NaN if either side is
/// constant.
double SpearmanCorrelation(std::span<const double> a, std::span<const double> b);

struct SynthSpec {
  std::string name = "synthetic";
  std::vector<std::string> attacks;  // empty: every schema attack
  int dim = 160;
  double sigma = 0.05;
  double separation = 1.0;
  std::int64_t train = 500;
  std::int64_t dev = 500;
  std::int64_t eval = 500;
  bool bonafide = true;
  /// One value name per attribute for the bonafide mean; empty puts the
  /// bonafide mean on a unit axis orthogonal to every attack mean.
  std::vector<std::string> bonafide_values;
  int speakers_per_partition = 4;
  std::uint64_t seed = 0;
};

SynthSpec ParseSynthSpec(std::string_view text);
SynthSpec LoadSynthSpec(const std::filesystem::path &path);

struct SynthData {
  EmbeddingDataset dataset;
  ProtocolSplit protocol;
  std::vector<std::string> classes;  // attacks, then bonafide if enabled
  Eigen::MatrixXd means;             // one row per class
};

/// Class means: the attack's concatenated one-hot row times `separation`,
/// zero-padded to `dim`; bonafide sits on the one-hot row of
/// `bonafide_values`, or on the next unit axis if that is empty. When
/// dim <= M the padded vectors are mapped by a seeded Gaussian projection.
Eigen::MatrixXd SynthMeans(const SynthSpec &spec, const AttributeSchema &schema,
                           std::vector<std::string> *classes = nullptr);

/// Isotropic Gaussian clusters around SynthMeans(); fully determined by
/// spec.seed.
SynthData SynthGenerate(const SynthSpec &spec, const AttributeSchema &schema);

}  // namespace pae

#endif  // PAE_PROTOGEN_H_
