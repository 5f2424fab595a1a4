// src/protogen.cc

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

#include "pae/protogen.h"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "pae/error.h"
#include "pae/metrics.h"
#include "pae/util.h"

namespace pae {

namespace {

using Json = nlohmann::json;

Json ParseJson(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception &e) {
    Fail(ErrorCode::kParseError, std::string(what) + ": " + e.what());
  }
}

void CheckWeights(std::span<const std::int64_t> w, std::size_t size,
                  std::string_view what) {
  if (w.size() != size) {
    Fail(ErrorCode::kInvalidArgument,
         std::string(what) + " needs " + std::to_string(size) + " weights");
  }
  std::int64_t total = 0;
  for (auto x : w) {
    if (x < 0) Fail(ErrorCode::kInvalidArgument, std::string(what) + ": negative weight");
    total += x;
  }
  if (total == 0) Fail(ErrorCode::kInvalidArgument, std::string(what) + ": zero weights");
}

}  // namespace

std::vector<std::int64_t> LargestRemainder(std::int64_t n,
                                           std::span<const std::int64_t> weights) {
  if (n < 0) Fail(ErrorCode::kInvalidArgument, "negative item count");
  CheckWeights(weights, weights.size(), "apportionment");
  const std::int64_t total = std::accumulate(weights.begin(), weights.end(),
                                             std::int64_t{0});
  std::vector<std::int64_t> out(weights.size());
  std::vector<std::int64_t> rem(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = n * weights[i] / total;
    rem[i] = n * weights[i] % total;
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++out[order[k]];
  return out;
}

PartitionSpec ParsePartitionSpec(std::string_view text) {
  const Json j = ParseJson(text, "partition spec");
  PartitionSpec spec;
  try {
    if (j.at("schema_version").get<int>() != 1) {
      Fail(ErrorCode::kParseError, "unsupported partition spec schema_version");
    }
    spec.name = j.value("name", spec.name);
    spec.known_attacks = j.at("known_attacks").get<std::vector<std::string>>();
    spec.known_ratio = j.value("known_ratio", spec.known_ratio);
    spec.unknown_attacks = j.at("unknown_attacks").get<std::vector<std::string>>();
    spec.unknown_ratio = j.value("unknown_ratio", spec.unknown_ratio);
    if (j.contains("ratio_overrides")) {
      spec.ratio_overrides =
          j.at("ratio_overrides").get<std::map<std::string, std::vector<std::int64_t>>>();
    }
    spec.disjoint_speakers =
        j.value("disjoint_speakers", std::vector<std::string>{});
  } catch (const Json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("partition spec: ") + e.what());
  }
  CheckWeights(spec.known_ratio, 2, "known_ratio");
  CheckWeights(spec.unknown_ratio, 3, "unknown_ratio");
  const std::set<std::string> known(spec.known_attacks.begin(), spec.known_attacks.end());
  for (const auto &a : spec.unknown_attacks) {
    if (known.count(a)) {
      Fail(ErrorCode::kInvalidArgument, "attack " + a + " listed as known and unknown");
    }
  }
  for (const auto &[attack, w] : spec.ratio_overrides) {
    CheckWeights(w, 3, "ratio override for " + attack);
  }
  return spec;
}

PartitionSpec LoadPartitionSpec(const std::filesystem::path &path) {
  return ParsePartitionSpec(ReadTextFile(path));
}

ProtocolSplit BuildAttr17(const std::vector<UtteranceInfo> &utterances,
                          const ProtocolSplit &original, const PartitionSpec &spec,
                          std::uint64_t seed) {
  std::unordered_map<std::string, std::size_t> known_index, unknown_index;
  for (std::size_t i = 0; i < spec.known_attacks.size(); ++i) {
    known_index[spec.known_attacks[i]] = i;
  }
  for (std::size_t i = 0; i < spec.unknown_attacks.size(); ++i) {
    unknown_index[spec.unknown_attacks[i]] = i;
  }
  const std::unordered_set<std::string> disjoint(spec.disjoint_speakers.begin(),
                                                 spec.disjoint_speakers.end());

  std::map<std::string, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto &u = utterances[i];
    if (u.is_bonafide()) continue;
    if (u.speaker_id.empty() || u.speaker_id == "-") {
      Fail(ErrorCode::kMissingSpeaker, "utterance " + u.utterance_id + " has no speaker");
    }
    if (!known_index.count(u.label) && !unknown_index.count(u.label)) {
      Fail(ErrorCode::kUnknownAttack,
           "attack " + u.label + " of " + u.utterance_id + " is not in the partition spec");
    }
    pools[u.label].push_back(i);
  }

  struct Slot {
    Partition partition;
    SpeakerTag tag;
  };
  std::vector<Slot> slot(utterances.size());
  auto by_id = [&](std::size_t a, std::size_t b) {
    return utterances[a].utterance_id < utterances[b].utterance_id;
  };

  for (auto &[label, pool] : pools) {
    std::sort(pool.begin(), pool.end(), by_id);
    if (auto k = known_index.find(label); k != known_index.end()) {
      std::vector<std::size_t> train_origin;
      for (auto i : pool) {
        const ProtocolEntry *e = original.Lookup(utterances[i].utterance_id);
        if (e == nullptr) {
          Fail(ErrorCode::kUnknownUtterance, "utterance " + utterances[i].utterance_id +
                                                 " is not in the original protocol");
        }
        if (e->partition == Partition::kTrain) {
          train_origin.push_back(i);
        } else {
          slot[i] = {Partition::kEval, SpeakerTag::kNotApplicable};
        }
      }
      Rng rng(DeriveSeed(seed, "attr17/known", k->second));
      std::shuffle(train_origin.begin(), train_origin.end(), rng);
      const auto counts = LargestRemainder(
          static_cast<std::int64_t>(train_origin.size()), spec.known_ratio);
      for (std::size_t r = 0; r < train_origin.size(); ++r) {
        const bool train = static_cast<std::int64_t>(r) < counts[0];
        slot[train_origin[r]] = {train ? Partition::kTrain : Partition::kDev,
                                 SpeakerTag::kNotApplicable};
      }
      continue;
    }
    const auto override_it = spec.ratio_overrides.find(label);
    const auto &ratio =
        override_it != spec.ratio_overrides.end() ? override_it->second : spec.unknown_ratio;
    const auto counts = LargestRemainder(static_cast<std::int64_t>(pool.size()), ratio);
    std::vector<std::size_t> common;
    std::int64_t n_disjoint = 0;
    for (auto i : pool) {
      if (disjoint.count(utterances[i].speaker_id)) {
        slot[i] = {Partition::kEval, SpeakerTag::kDisjoint};
        ++n_disjoint;
      } else {
        common.push_back(i);
      }
    }
    if (n_disjoint > counts[2]) {
      Fail(ErrorCode::kInvalidArgument,
           "attack " + label + ": " + std::to_string(n_disjoint) +
               " speaker-disjoint utterances exceed the " +
               std::to_string(counts[2]) + " eval slots");
    }
    Rng rng(DeriveSeed(seed, "attr17/unknown", unknown_index.at(label)));
    std::shuffle(common.begin(), common.end(), rng);
    for (std::size_t r = 0; r < common.size(); ++r) {
      const auto pos = static_cast<std::int64_t>(r);
      const Partition p = pos < counts[0]               ? Partition::kTrain
                          : pos < counts[0] + counts[1] ? Partition::kDev
                                                        : Partition::kEval;
      slot[common[r]] = {p, SpeakerTag::kCommon};
    }
  }

  ProtocolSplit out(spec.name);
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].is_bonafide()) continue;
    out.Add(utterances[i].utterance_id, slot[i].partition, slot[i].tag);
  }
  return out;
}

std::vector<ProtocolStatsRow> ProtocolStatistics(
    const ProtocolSplit &protocol, const std::vector<UtteranceInfo> &utterances) {
  std::unordered_map<std::string, const UtteranceInfo *> info;
  for (const auto &u : utterances) info[u.utterance_id] = &u;
  std::map<std::string, ProtocolStatsRow> rows;
  for (const auto &e : protocol.entries()) {
    const auto it = info.find(e.utterance_id);
    if (it == info.end()) {
      Fail(ErrorCode::kUnknownUtterance, "utterance " + e.utterance_id + " has no metadata");
    }
    auto &row = rows[it->second->label];
    row.label = it->second->label;
    switch (e.partition) {
      case Partition::kTrain: ++row.train; break;
      case Partition::kDev: ++row.dev; break;
      case Partition::kEval:
        if (e.speaker_tag == SpeakerTag::kCommon) {
          ++row.eval_common;
        } else if (e.speaker_tag == SpeakerTag::kDisjoint) {
          ++row.eval_disjoint;
        } else {
          ++row.eval_other;
        }
        break;
    }
  }
  std::vector<ProtocolStatsRow> out;
  for (auto &[label, row] : rows) out.push_back(row);
  return out;
}

std::string FormatProtocolStatistics(std::span<const ProtocolStatsRow> rows) {
  std::ostringstream os;
  os << "label\ttrain\tdev\teval\teval_common\teval_disjoint\n";
  ProtocolStatsRow total;
  total.label = "total";
  for (const auto &r : rows) {
    os << r.label << '\t' << r.train << '\t' << r.dev << '\t' << r.eval() << '\t'
       << r.eval_common << '\t' << r.eval_disjoint << '\n';
    total.train += r.train;
    total.dev += r.dev;
    total.eval_common += r.eval_common;
    total.eval_disjoint += r.eval_disjoint;
    total.eval_other += r.eval_other;
  }
  os << total.label << '\t' << total.train << '\t' << total.dev << '\t'
     << total.eval() << '\t' << total.eval_common << '\t' << total.eval_disjoint
     << '\n';
  return os.str();
}

Eigen::MatrixXi HammingMatrix(const AttributeSchema &schema) {
  const auto &attacks = schema.attacks();
  const auto n = static_cast<Eigen::Index>(attacks.size());
  Eigen::MatrixXi d = Eigen::MatrixXi::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ri = schema.Row(attacks[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto rj = schema.Row(attacks[j]);
      int diff = 0;
      for (std::size_t l = 0; l < ri.size(); ++l) diff += ri[l] != rj[l];
      d(i, j) = d(j, i) = 2 * diff;
    }
  }
  return d;
}

double SpearmanCorrelation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    Fail(ErrorCode::kDimensionMismatch, "Spearman inputs differ in length");
  }
  const auto ra = AverageRanks(a, false);
  const auto rb = AverageRanks(b, false);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

ConfusabilityReport ConfusabilityCheck(const Eigen::MatrixXd &assignments,
                                       const Eigen::MatrixXi &distances) {
  if (assignments.rows() != distances.rows() || assignments.cols() != distances.cols()) {
    Fail(ErrorCode::kDimensionMismatch, "assignment and distance matrices differ in shape");
  }
  ConfusabilityReport report;
  double sum = 0;
  int used = 0;
  for (Eigen::Index r = 0; r < assignments.rows(); ++r) {
    std::vector<double> freq(assignments.cols()), neg(assignments.cols());
    for (Eigen::Index c = 0; c < assignments.cols(); ++c) {
      freq[c] = assignments(r, c);
      neg[c] = -static_cast<double>(distances(r, c));
    }
    const double rho = SpearmanCorrelation(freq, neg);
    report.per_row.push_back(rho);
    if (!std::isnan(rho)) {
      sum += rho;
      ++used;
    }
  }
  report.mean = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  return report;
}

SynthSpec ParseSynthSpec(std::string_view text) {
  const Json j = ParseJson(text, "synth spec");
  SynthSpec spec;
  try {
    if (j.at("schema_version").get<int>() != 1) {
      Fail(ErrorCode::kParseError, "unsupported synth spec schema_version");
    }
    spec.name = j.value("name", spec.name);
    spec.attacks = j.value("attacks", std::vector<std::string>{});
    spec.dim = j.value("dim", spec.dim);
    spec.sigma = j.at("sigma").get<double>();
    spec.separation = j.value("separation", spec.separation);
    const auto &counts = j.at("counts");
    spec.train = counts.at("train").get<std::int64_t>();
    spec.dev = counts.at("dev").get<std::int64_t>();
    spec.eval = counts.at("eval").get<std::int64_t>();
    spec.bonafide = j.value("bonafide", spec.bonafide);
    spec.bonafide_values = j.value("bonafide_values", std::vector<std::string>{});
    spec.speakers_per_partition =
        j.value("speakers_per_partition", spec.speakers_per_partition);
    spec.seed = j.value("seed", spec.seed);
  } catch (const Json::exception &e) {
    Fail(ErrorCode::kParseError, std::string("synth spec: ") + e.what());
  }
  if (!(spec.sigma > 0)) Fail(ErrorCode::kInvalidArgument, "sigma must be > 0");
  if (spec.train < 1 || spec.dev < 1 || spec.eval < 1) {
    Fail(ErrorCode::kInvalidArgument, "counts must be >= 1");
  }
  if (spec.dim < 1 || spec.speakers_per_partition < 1) {
    Fail(ErrorCode::kInvalidArgument, "dim and speakers_per_partition must be >= 1");
  }
  return spec;
}

SynthSpec LoadSynthSpec(const std::filesystem::path &path) {
  return ParseSynthSpec(ReadTextFile(path));
}

Eigen::MatrixXd SynthMeans(const SynthSpec &spec, const AttributeSchema &schema,
                           std::vector<std::string> *classes) {
  std::vector<std::string> names =
      spec.attacks.empty() ? schema.attacks() : spec.attacks;
  for (const auto &a : names) {
    if (!schema.HasAttack(a)) {
      Fail(ErrorCode::kUnknownAttack, "attack " + a + " is not in schema " + schema.name());
    }
  }
  if (spec.bonafide) names.emplace_back(kBonafideLabel);
  const int m = schema.total_values();
  if (!spec.bonafide_values.empty() &&
      static_cast<int>(spec.bonafide_values.size()) != schema.num_attributes()) {
    Fail(ErrorCode::kMissingAttribute, "bonafide_values needs one value per attribute");
  }
  const auto n = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(n, m + 1);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (names[c] == kBonafideLabel && spec.bonafide_values.empty()) {
      padded(c, m) = 1;
    } else if (names[c] == kBonafideLabel) {
      for (int l = 0; l < schema.num_attributes(); ++l) {
        const auto &values = schema.attribute(l).values;
        const auto it = std::find(values.begin(), values.end(), spec.bonafide_values[l]);
        if (it == values.end()) {
          Fail(ErrorCode::kUnknownValueName, "bonafide value '" + spec.bonafide_values[l] +
                                                 "' not in attribute " +
                                                 schema.attribute(l).name);
        }
        padded(c, schema.offset(l) + (it - values.begin())) = 1;
      }
    } else {
      padded.row(c).head(m) = ConcatenatedOneHot(schema, names[c]).cast<double>().transpose();
    }
  }
  padded *= spec.separation;
  Eigen::MatrixXd means;
  if (spec.dim > m) {
    means = Eigen::MatrixXd::Zero(n, spec.dim);
    means.leftCols(m + 1) = padded;
  } else {
    Rng rng(DeriveSeed(spec.seed, "synth/projection"));
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(spec.dim));
    Eigen::MatrixXd proj(m + 1, spec.dim);
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = g(rng);
    means = padded * proj;
  }
  if (classes) *classes = std::move(names);
  return means;
}

SynthData SynthGenerate(const SynthSpec &spec, const AttributeSchema &schema) {
  SynthData out;
  out.means = SynthMeans(spec, schema, &out.classes);
  const auto n_classes = static_cast<Eigen::Index>(out.classes.size());
  const std::int64_t per_partition[3] = {spec.train, spec.dev, spec.eval};
  const Partition partitions[3] = {Partition::kTrain, Partition::kDev, Partition::kEval};
  std::int64_t total = 0;
  for (auto c : per_partition) total += c * n_classes;
  std::vector<UtteranceInfo> info;
  info.reserve(static_cast<std::size_t>(total));
  FeatureMatrix features(total, spec.dim);
  out.protocol = ProtocolSplit(spec.name);
  Eigen::Index row = 0;
  for (int p = 0; p < 3; ++p) {
    const std::string part(PartitionName(partitions[p]));
    std::string upper = part;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    for (Eigen::Index c = 0; c < n_classes; ++c) {
      Rng rng(DeriveSeed(spec.seed, "synth", static_cast<std::uint64_t>(p * n_classes + c)));
      std::normal_distribution<double> noise(0.0, spec.sigma);
      for (std::int64_t k = 0; k < per_partition[p]; ++k, ++row) {
        char id[96];
        std::snprintf(id, sizeof(id), "SYN_%s_%s_%05lld", upper.c_str(),
                      out.classes[c].c_str(), static_cast<long long>(k));
        UtteranceInfo u;
        u.utterance_id = id;
        u.label = out.classes[c];
        u.speaker_id = part + "_spk" + std::to_string(k % spec.speakers_per_partition);
        info.push_back(u);
        for (Eigen::Index d = 0; d < spec.dim; ++d) {
          features(row, d) = static_cast<float>(out.means(c, d) + noise(rng));
        }
        out.protocol.Add(id, partitions[p], SpeakerTag::kCommon);
      }
    }
  }
  out.dataset = EmbeddingDataset(std::move(info), std::move(features));
  return out;
}

}  // namespace pae
