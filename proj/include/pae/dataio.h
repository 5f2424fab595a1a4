// pae/dataio.h

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

#ifndef PAE_DATAIO_H_
#define PAE_DATAIO_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace pae {

inline constexpr std::string_view kBonafideLabel = "bonafide";

/// Row-major so that one record is one contiguous run of floats, which is
/// also the on-disk layout.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Gender { kFemale, kMale };

struct UtteranceInfo {
  std::string utterance_id;
  std::string label;  // attack id ("A01".."A19") or "bonafide"
  std::string speaker_id;
  std::optional<Gender> gender;

  bool is_bonafide() const { return label == kBonafideLabel; }
  bool operator==(const UtteranceInfo &) const = default;
};

/// Utterance-indexed fixed-dimension embeddings. Immutable after
/// construction; the constructor enforces unique ids and finite values.
class EmbeddingDataset {
 public:
  EmbeddingDataset() = default;
  EmbeddingDataset(std::vector<UtteranceInfo> info, FeatureMatrix features);

  std::size_t size() const { return info_.size(); }
  Eigen::Index dim() const { return features_.cols(); }
  const UtteranceInfo &info(std::size_t i) const { return info_[i]; }
  const std::vector<UtteranceInfo> &infos() const { return info_; }
  const FeatureMatrix &features() const { return features_; }
  auto row(std::size_t i) const {
    return features_.row(static_cast<Eigen::Index>(i));
  }
  std::optional<std::size_t> Find(std::string_view utterance_id) const;

  /// Rows `indices`, in the given order.
  EmbeddingDataset Subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<UtteranceInfo> info_;
  FeatureMatrix features_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binary container: "PAE1", u32 count, u32 dim, count*dim little-endian
/// f32. The index is tab-separated: id, label, speaker, gender (F/M/-).
/// Index rows only: id, label, speaker, gender (F, M or -), tab-separated.
std::vector<UtteranceInfo> LoadIndex(const std::filesystem::path &index_path);

EmbeddingDataset LoadEmbeddings(const std::filesystem::path &path,
                                const std::filesystem::path &index_path);
void SaveEmbeddings(const EmbeddingDataset &dataset,
                    const std::filesystem::path &path,
                    const std::filesystem::path &index_path);

/// Scales every row to unit L2 norm (zero rows are left as is).
EmbeddingDataset LengthNormalized(const EmbeddingDataset &dataset);

struct Attribute {
  std::string name;
  std::vector<std::string> values;
};

/// Ordered attributes and the attack -> value-index table.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  /// `attack_rows[k]` holds value names for attack `attack_labels[k]`.
  AttributeSchema(std::string name, std::vector<Attribute> attributes,
                  std::vector<std::string> attack_labels,
                  const std::vector<std::vector<std::string>> &attack_rows);

  const std::string &name() const { return name_; }
  int num_attributes() const { return static_cast<int>(attributes_.size()); }
  const Attribute &attribute(int l) const { return attributes_[l]; }
  int num_values(int l) const {
    return static_cast<int>(attributes_[l].values.size());
  }
  /// M = sum of all attribute value counts.
  int total_values() const { return offsets_.back(); }
  /// Position of attribute l's first value in the flat M-vector.
  int offset(int l) const { return offsets_[l]; }
  std::vector<int> BlockSizes() const;

  const std::vector<std::string> &attacks() const { return attack_labels_; }
  bool HasAttack(std::string_view label) const;
  /// Value indices of `label`; throws NoAttributeGroundTruth when absent.
  std::span<const int> Row(std::string_view label) const;
  /// Display name of flat value m, as "attribute:value".
  std::string FlatValueName(int m) const;

 private:
  std::string name_;
  std::vector<Attribute> attributes_;
  std::vector<int> offsets_{0};
  std::vector<std::string> attack_labels_;
  std::vector<std::vector<int>> attack_rows_;
  std::unordered_map<std::string, std::size_t> attack_index_;
};

AttributeSchema ParseSchema(std::string_view text);
std::string SerializeSchema(const AttributeSchema &schema);
AttributeSchema LoadSchema(const std::filesystem::path &path);
void SaveSchema(const AttributeSchema &schema,
                const std::filesystem::path &path);
/// SHA-256 of the canonical serialization.
std::string SchemaHash(const AttributeSchema &schema);

/// One one-hot vector per attribute for an attack label.
std::vector<Eigen::VectorXf> OneHotTargets(const AttributeSchema &schema,
                                           std::string_view label);
/// The L one-hot vectors concatenated into a length-M {0,1} vector.
Eigen::VectorXf ConcatenatedOneHot(const AttributeSchema &schema,
                                   std::string_view label);

enum class Partition { kTrain, kDev, kEval };
enum class SpeakerTag { kCommon, kDisjoint, kNotApplicable };

std::string_view PartitionName(Partition p);
Partition ParsePartition(std::string_view s);
std::string_view SpeakerTagName(SpeakerTag t);

struct ProtocolEntry {
  std::string utterance_id;
  Partition partition;
  SpeakerTag speaker_tag;
};

/// Utterance -> partition assignment. An utterance can be added once only,
/// so partitions are disjoint by construction.
class ProtocolSplit {
 public:
  explicit ProtocolSplit(std::string name = {}) : name_(std::move(name)) {}

  static ProtocolSplit FromLists(std::string name,
                                 const std::vector<std::string> &train,
                                 const std::vector<std::string> &dev,
                                 const std::vector<std::string> &eval);

  /// Throws PartitionConflict if the utterance is already assigned.
  void Add(std::string utterance_id, Partition partition,
           SpeakerTag tag = SpeakerTag::kNotApplicable);

  const std::string &name() const { return name_; }
  const std::vector<ProtocolEntry> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const ProtocolEntry *Lookup(std::string_view utterance_id) const;
  std::vector<std::string> Ids(Partition partition) const;

  /// Throws UnknownUtterance naming the first id missing from `dataset`.
  void Resolve(const EmbeddingDataset &dataset) const;
  /// Rows of `dataset` assigned to `partition`, in dataset order.
  EmbeddingDataset Select(const EmbeddingDataset &dataset,
                          Partition partition) const;

 private:
  std::string name_;
  std::vector<ProtocolEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

ProtocolSplit ParseProtocol(std::string_view text);
std::string SerializeProtocol(const ProtocolSplit &protocol);
ProtocolSplit LoadProtocol(const std::filesystem::path &path);
void SaveProtocol(const ProtocolSplit &protocol,
                  const std::filesystem::path &path);

}  // namespace pae

#endif  // PAE_DATAIO_H_
