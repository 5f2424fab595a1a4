// src/dataio.cc

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

#include "pae/dataio.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pae/error.h"
#include "pae/util.h"

namespace pae {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'P', 'A', 'E', '1'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "the PAE1 reader/writer assumes a little-endian host");

std::uint32_t ReadU32(const char *p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

void AppendU32(std::string *out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out->append(buf, 4);
}

std::vector<std::string> SplitTabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

ordered_json ParseJson(std::string_view text, std::string_view what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError,
         std::string(what) + ": " + e.what());
  }
}

void CheckVersion(const ordered_json &doc, std::string_view what) {
  if (!doc.is_object() || !doc.contains("schema_version") ||
      doc["schema_version"] != kFormatVersion) {
    Fail(ErrorCode::kParseError,
         std::string(what) + ": missing or unsupported schema_version");
  }
}

}  // namespace

EmbeddingDataset::EmbeddingDataset(std::vector<UtteranceInfo> info,
                                   FeatureMatrix features)
    : info_(std::move(info)), features_(std::move(features)) {
  if (static_cast<Eigen::Index>(info_.size()) != features_.rows()) {
    Fail(ErrorCode::kCountMismatch,
         "index has " + std::to_string(info_.size()) + " rows but matrix has " +
             std::to_string(features_.rows()));
  }
  if (!features_.allFinite()) {
    for (Eigen::Index r = 0; r < features_.rows(); ++r) {
      if (!features_.row(r).allFinite()) {
        Fail(ErrorCode::kNonFiniteValue,
             "non-finite component in utterance " + info_[r].utterance_id);
      }
    }
  }
  index_.reserve(info_.size());
  for (std::size_t i = 0; i < info_.size(); ++i) {
    if (!index_.emplace(info_[i].utterance_id, i).second) {
      Fail(ErrorCode::kDuplicateUtteranceId,
           "duplicate utterance id " + info_[i].utterance_id);
    }
  }
}

std::optional<std::size_t> EmbeddingDataset::Find(
    std::string_view utterance_id) const {
  auto it = index_.find(std::string(utterance_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingDataset EmbeddingDataset::Subset(
    std::span<const std::size_t> indices) const {
  std::vector<UtteranceInfo> info;
  info.reserve(indices.size());
  FeatureMatrix features(static_cast<Eigen::Index>(indices.size()), dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    info.push_back(info_[indices[k]]);
    features.row(static_cast<Eigen::Index>(k)) = row(indices[k]);
  }
  return EmbeddingDataset(std::move(info), std::move(features));
}

std::vector<UtteranceInfo> LoadIndex(const std::filesystem::path &index_path) {
  const std::string index_text = ReadTextFile(index_path);
  std::vector<UtteranceInfo> info;
  std::istringstream lines(index_text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto fields = SplitTabs(line);
    if (fields.size() != 4) {
      Fail(ErrorCode::kParseError,
           index_path.string() + ": expected 4 tab-separated fields in '" +
               line + "'");
    }
    UtteranceInfo u{fields[0], fields[1], fields[2], std::nullopt};
    if (fields[3] == "F") {
      u.gender = Gender::kFemale;
    } else if (fields[3] == "M") {
      u.gender = Gender::kMale;
    } else if (fields[3] != "-") {
      Fail(ErrorCode::kParseError, "bad gender field '" + fields[3] + "'");
    }
    info.push_back(std::move(u));
  }
  return info;
}

EmbeddingDataset LoadEmbeddings(const std::filesystem::path &path,
                                const std::filesystem::path &index_path) {
  const std::string blob = ReadTextFile(path);
  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    Fail(ErrorCode::kMagicMismatch, path.string() + " is not a PAE1 file");
  }
  const std::uint32_t count = ReadU32(blob.data() + 4);
  const std::uint32_t dim = ReadU32(blob.data() + 8);
  const std::uint64_t expected =
      12 + std::uint64_t{count} * std::uint64_t{dim} * 4;
  if (blob.size() != expected) {
    Fail(ErrorCode::kDimensionMismatch,
         path.string() + ": payload of " + std::to_string(blob.size() - 12) +
             " bytes does not hold " + std::to_string(count) + " rows of dim " +
             std::to_string(dim));
  }
  FeatureMatrix features(count, dim);
  if (expected > 12) {
    std::memcpy(features.data(), blob.data() + 12, expected - 12);
  }

  std::vector<UtteranceInfo> info = LoadIndex(index_path);
  if (info.size() != count) {
    Fail(ErrorCode::kCountMismatch,
         index_path.string() + " has " + std::to_string(info.size()) +
             " rows, binary header says " + std::to_string(count));
  }
  return EmbeddingDataset(std::move(info), std::move(features));
}

void SaveEmbeddings(const EmbeddingDataset &dataset,
                    const std::filesystem::path &path,
                    const std::filesystem::path &index_path) {
  std::string blob(kMagic, 4);
  AppendU32(&blob, static_cast<std::uint32_t>(dataset.size()));
  AppendU32(&blob, static_cast<std::uint32_t>(dataset.dim()));
  blob.append(reinterpret_cast<const char *>(dataset.features().data()),
              dataset.features().size() * sizeof(float));
  WriteTextFile(path, blob);

  std::string index;
  for (const auto &u : dataset.infos()) {
    index += u.utterance_id + '\t' + u.label + '\t' + u.speaker_id + '\t';
    index += !u.gender ? "-" : (*u.gender == Gender::kFemale ? "F" : "M");
    index += '\n';
  }
  WriteTextFile(index_path, index);
}

EmbeddingDataset LengthNormalized(const EmbeddingDataset &dataset) {
  FeatureMatrix features = dataset.features();
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const float norm = features.row(r).norm();
    if (norm > 0) features.row(r) /= norm;
  }
  return EmbeddingDataset(dataset.infos(), std::move(features));
}

AttributeSchema::AttributeSchema(
    std::string name, std::vector<Attribute> attributes,
    std::vector<std::string> attack_labels,
    const std::vector<std::vector<std::string>> &attack_rows)
    : name_(std::move(name)),
      attributes_(std::move(attributes)),
      attack_labels_(std::move(attack_labels)) {
  if (attributes_.empty()) {
    Fail(ErrorCode::kMissingAttribute, "schema has no attributes");
  }
  for (const auto &a : attributes_) {
    if (a.values.empty()) {
      Fail(ErrorCode::kMissingAttribute, "attribute " + a.name + " has no values");
    }
    std::set<std::string> seen(a.values.begin(), a.values.end());
    if (seen.size() != a.values.size()) {
      Fail(ErrorCode::kParseError,
           "duplicate value name in attribute " + a.name);
    }
    offsets_.push_back(offsets_.back() + static_cast<int>(a.values.size()));
  }
  if (attack_rows.size() != attack_labels_.size()) {
    Fail(ErrorCode::kCountMismatch, "attack table size mismatch");
  }
  for (std::size_t k = 0; k < attack_labels_.size(); ++k) {
    const auto &label = attack_labels_[k];
    const auto &names = attack_rows[k];
    if (names.size() != attributes_.size()) {
      Fail(ErrorCode::kMissingAttribute,
           "attack " + label + " lists " + std::to_string(names.size()) +
               " values for " + std::to_string(attributes_.size()) +
               " attributes");
    }
    std::vector<int> row;
    for (std::size_t l = 0; l < names.size(); ++l) {
      const auto &values = attributes_[l].values;
      auto it = std::find(values.begin(), values.end(), names[l]);
      if (it == values.end()) {
        Fail(ErrorCode::kUnknownValueName,
             "attack " + label + ": '" + names[l] +
                 "' is not a value of attribute " + attributes_[l].name);
      }
      row.push_back(static_cast<int>(it - values.begin()));
    }
    if (!attack_index_.emplace(label, k).second) {
      Fail(ErrorCode::kParseError, "attack " + label + " listed twice");
    }
    attack_rows_.push_back(std::move(row));
  }
}

std::vector<int> AttributeSchema::BlockSizes() const {
  std::vector<int> sizes;
  for (int l = 0; l < num_attributes(); ++l) sizes.push_back(num_values(l));
  return sizes;
}

bool AttributeSchema::HasAttack(std::string_view label) const {
  return attack_index_.count(std::string(label)) > 0;
}

std::span<const int> AttributeSchema::Row(std::string_view label) const {
  auto it = attack_index_.find(std::string(label));
  if (it == attack_index_.end()) {
    Fail(ErrorCode::kNoAttributeGroundTruth,
         "no attribute ground truth for label '" + std::string(label) + "'");
  }
  return attack_rows_[it->second];
}

std::string AttributeSchema::FlatValueName(int m) const {
  for (int l = 0; l < num_attributes(); ++l) {
    if (m < offsets_[l + 1]) {
      return attributes_[l].name + ":" + attributes_[l].values[m - offsets_[l]];
    }
  }
  Fail(ErrorCode::kInvalidArgument, "flat value index out of range");
}

AttributeSchema ParseSchema(std::string_view text) {
  const ordered_json doc = ParseJson(text, "schema");
  CheckVersion(doc, "schema");
  try {
    std::vector<Attribute> attributes;
    for (const auto &a : doc.at("attributes")) {
      attributes.push_back(
          {a.at("name").get<std::string>(),
           a.at("values").get<std::vector<std::string>>()});
    }
    std::vector<std::string> labels;
    std::vector<std::vector<std::string>> rows;
    for (const auto &[label, row] : doc.at("attacks").items()) {
      labels.push_back(label);
      rows.push_back(row.get<std::vector<std::string>>());
    }
    return AttributeSchema(doc.value("name", std::string{}),
                           std::move(attributes), std::move(labels), rows);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("schema: ") + e.what());
  }
}

std::string SerializeSchema(const AttributeSchema &schema) {
  ordered_json doc;
  doc["schema_version"] = kFormatVersion;
  doc["name"] = schema.name();
  doc["attributes"] = ordered_json::array();
  for (int l = 0; l < schema.num_attributes(); ++l) {
    doc["attributes"].push_back({{"name", schema.attribute(l).name},
                                 {"values", schema.attribute(l).values}});
  }
  doc["attacks"] = ordered_json::object();
  for (const auto &label : schema.attacks()) {
    std::vector<std::string> names;
    const auto row = schema.Row(label);
    for (int l = 0; l < schema.num_attributes(); ++l) {
      names.push_back(schema.attribute(l).values[row[l]]);
    }
    doc["attacks"][label] = names;
  }
  return doc.dump(2) + "\n";
}

AttributeSchema LoadSchema(const std::filesystem::path &path) {
  return ParseSchema(ReadTextFile(path));
}

void SaveSchema(const AttributeSchema &schema,
                const std::filesystem::path &path) {
  WriteTextFile(path, SerializeSchema(schema));
}

std::string SchemaHash(const AttributeSchema &schema) {
  return Sha256Hex(SerializeSchema(schema));
}

std::vector<Eigen::VectorXf> OneHotTargets(const AttributeSchema &schema,
                                           std::string_view label) {
  const auto row = schema.Row(label);
  std::vector<Eigen::VectorXf> targets;
  for (int l = 0; l < schema.num_attributes(); ++l) {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(schema.num_values(l));
    v(row[l]) = 1.0f;
    targets.push_back(std::move(v));
  }
  return targets;
}

Eigen::VectorXf ConcatenatedOneHot(const AttributeSchema &schema,
                                   std::string_view label) {
  const auto row = schema.Row(label);
  Eigen::VectorXf v = Eigen::VectorXf::Zero(schema.total_values());
  for (int l = 0; l < schema.num_attributes(); ++l) {
    v(schema.offset(l) + row[l]) = 1.0f;
  }
  return v;
}

std::string_view PartitionName(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kDev: return "dev";
    case Partition::kEval: return "eval";
  }
  return "";
}

Partition ParsePartition(std::string_view s) {
  if (s == "train") return Partition::kTrain;
  if (s == "dev") return Partition::kDev;
  if (s == "eval") return Partition::kEval;
  Fail(ErrorCode::kParseError, "unknown partition '" + std::string(s) + "'");
}

std::string_view SpeakerTagName(SpeakerTag t) {
  switch (t) {
    case SpeakerTag::kCommon: return "common";
    case SpeakerTag::kDisjoint: return "disjoint";
    case SpeakerTag::kNotApplicable: return "n/a";
  }
  return "";
}

namespace {

SpeakerTag ParseSpeakerTag(std::string_view s) {
  if (s == "common") return SpeakerTag::kCommon;
  if (s == "disjoint") return SpeakerTag::kDisjoint;
  if (s == "n/a") return SpeakerTag::kNotApplicable;
  Fail(ErrorCode::kParseError, "unknown speaker tag '" + std::string(s) + "'");
}

}  // namespace

ProtocolSplit ProtocolSplit::FromLists(std::string name,
                                       const std::vector<std::string> &train,
                                       const std::vector<std::string> &dev,
                                       const std::vector<std::string> &eval) {
  ProtocolSplit split(std::move(name));
  for (const auto &id : train) split.Add(id, Partition::kTrain);
  for (const auto &id : dev) split.Add(id, Partition::kDev);
  for (const auto &id : eval) split.Add(id, Partition::kEval);
  return split;
}

void ProtocolSplit::Add(std::string utterance_id, Partition partition,
                        SpeakerTag tag) {
  if (index_.count(utterance_id)) {
    Fail(ErrorCode::kPartitionConflict,
         "utterance " + utterance_id + " assigned twice");
  }
  index_.emplace(utterance_id, entries_.size());
  entries_.push_back({std::move(utterance_id), partition, tag});
}

const ProtocolEntry *ProtocolSplit::Lookup(
    std::string_view utterance_id) const {
  auto it = index_.find(std::string(utterance_id));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<std::string> ProtocolSplit::Ids(Partition partition) const {
  std::vector<std::string> ids;
  for (const auto &e : entries_) {
    if (e.partition == partition) ids.push_back(e.utterance_id);
  }
  return ids;
}

void ProtocolSplit::Resolve(const EmbeddingDataset &dataset) const {
  for (const auto &e : entries_) {
    if (!dataset.Find(e.utterance_id)) {
      Fail(ErrorCode::kUnknownUtterance,
           "protocol " + name_ + " references unknown utterance " +
               e.utterance_id);
    }
  }
}

EmbeddingDataset ProtocolSplit::Select(const EmbeddingDataset &dataset,
                                       Partition partition) const {
  Resolve(dataset);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto *e = Lookup(dataset.info(i).utterance_id);
    if (e && e->partition == partition) rows.push_back(i);
  }
  return dataset.Subset(rows);
}

ProtocolSplit ParseProtocol(std::string_view text) {
  const ordered_json doc = ParseJson(text, "protocol");
  CheckVersion(doc, "protocol");
  try {
    ProtocolSplit split(doc.value("name", std::string{}));
    for (const auto &e : doc.at("entries")) {
      if (!e.is_array() || e.size() != 3) {
        Fail(ErrorCode::kParseError, "protocol entry must be [id, partition, tag]");
      }
      split.Add(e[0].get<std::string>(),
                ParsePartition(e[1].get<std::string>()),
                ParseSpeakerTag(e[2].get<std::string>()));
    }
    return split;
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("protocol: ") + e.what());
  }
}

std::string SerializeProtocol(const ProtocolSplit &protocol) {
  // One entry per line keeps large protocols diffable.
  std::string out = "{\n  \"schema_version\": 1,\n  \"name\": ";
  out += ordered_json(protocol.name()).dump();
  out += ",\n  \"entries\": [";
  bool first = true;
  for (const auto &e : protocol.entries()) {
    out += first ? "\n    " : ",\n    ";
    first = false;
    out += ordered_json::array({e.utterance_id,
                                std::string(PartitionName(e.partition)),
                                std::string(SpeakerTagName(e.speaker_tag))})
               .dump();
  }
  out += first ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

ProtocolSplit LoadProtocol(const std::filesystem::path &path) {
  return ParseProtocol(ReadTextFile(path));
}

void SaveProtocol(const ProtocolSplit &protocol,
                  const std::filesystem::path &path) {
  WriteTextFile(path, SerializeProtocol(protocol));
}

}  // namespace pae
