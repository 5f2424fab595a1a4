// tools/paeattr.cc

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

// Command-line front end. Every subcommand writes its outputs into --out
// together with run_manifest.json, from which `paeattr replay` re-executes
// the run and compares output hashes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pae/attribank.h"
#include "pae/backends.h"
#include "pae/dataio.h"
#include "pae/error.h"
#include "pae/explain.h"
#include "pae/metrics.h"
#include "pae/protogen.h"
#include "pae/util.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace pae {
namespace {

constexpr const char *kRunManifest = "run_manifest.json";

// ---------------------------------------------------------------------------
// Run bookkeeping.

std::string HashPath(const fs::path &path) {
  if (!fs::exists(path)) Fail(ErrorCode::kIoError, "no such file: " + path.string());
  if (!fs::is_directory(path)) return Sha256File(path);
  std::vector<std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file() && e.path().filename() != kRunManifest) {
      files.push_back(fs::relative(e.path(), path).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto &f : files) listing += f + ' ' + Sha256File(path / f) + '\n';
  return Sha256Hex(listing);
}

Json OutputHashes(const fs::path &dir) {
  std::vector<std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kRunManifest) {
      files.push_back(fs::relative(e.path(), dir).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  Json out = Json::object();
  for (const auto &f : files) out[f] = Sha256File(dir / f);
  return out;
}

struct Run {
  std::string command;
  std::vector<std::string> argv;
  Json args = Json::object();
  Json inputs = Json::object();
  std::uint64_t seed = 0;
  fs::path out;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void Input(const std::string &path) {
    if (!path.empty()) inputs[path] = HashPath(path);
  }

  void Finish() const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json doc;
    doc["command"] = command;
    doc["version"] = std::string(kToolkitVersion);
    doc["argv"] = argv;
    doc["args"] = args;
    doc["inputs"] = inputs;
    doc["seed"] = seed;
    doc["timings"] = {{"total_seconds", seconds}};
    doc["outputs"] = OutputHashes(out);
    WriteTextFile(out / kRunManifest, doc.dump(2) + "\n");
  }
};

Json CollectArgs(const CLI::App *sub) {
  Json args = Json::object();
  for (const CLI::Option *opt : sub->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help") continue;
    if (opt->count() > 0) {
      const auto &res = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
      args[name] = joined;
    } else {
      args[name] = opt->get_default_str();
    }
  }
  return args;
}

void PrepareOut(const fs::path &out) { fs::create_directories(out); }

// ---------------------------------------------------------------------------
// Shared data plumbing.

fs::path MetaPath(const fs::path &embeddings) {
  fs::path p = embeddings;
  p.replace_extension(".meta.json");
  return p;
}

struct FeatureMeta {
  bool is_pae = false;
  std::string schema_hash;
  std::optional<AttributeSchema> schema;
};

FeatureMeta LoadMeta(const fs::path &embeddings) {
  FeatureMeta meta;
  const fs::path p = MetaPath(embeddings);
  if (!fs::exists(p)) return meta;
  Json doc;
  try {
    doc = Json::parse(ReadTextFile(p));
    meta.is_pae = doc.at("kind").get<std::string>() == "pae";
    meta.schema_hash = doc.at("schema_hash").get<std::string>();
    meta.schema = ParseSchema(doc.at("schema").dump());
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, p.string() + ": " + e.what());
  }
  if (SchemaHash(*meta.schema) != meta.schema_hash) {
    Fail(ErrorCode::kSchemaMismatch, p.string() + ": schema hash does not match schema");
  }
  return meta;
}

Eigen::MatrixXd ToDouble(const EmbeddingDataset &d) { return d.features().cast<double>(); }

enum class Task { kDetection, kAttribution };

Task ParseTask(const std::string &s) {
  if (s == "detection") return Task::kDetection;
  if (s == "attribution") return Task::kAttribution;
  Fail(ErrorCode::kInvalidArgument, "--task must be detection or attribution");
}

std::string TaskName(Task t) { return t == Task::kDetection ? "detection" : "attribution"; }

// Rows used by a task: attribution ignores bonafide utterances.
EmbeddingDataset TaskRows(const EmbeddingDataset &d, Task task) {
  if (task == Task::kDetection) return d;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.info(i).is_bonafide()) keep.push_back(i);
  }
  return d.Subset(keep);
}

EmbeddingDataset LoadPartition(const std::string &embeddings, const std::string &index,
                               const std::string &protocol, Partition p) {
  const EmbeddingDataset data = LoadEmbeddings(embeddings, index);
  const ProtocolSplit split = LoadProtocol(protocol);
  split.Resolve(data);
  return split.Select(data, p);
}

std::vector<std::string> FeatureNames(const FeatureMeta &meta, Eigen::Index dim) {
  std::vector<std::string> names;
  for (Eigen::Index m = 0; m < dim; ++m) {
    names.push_back(meta.schema && meta.schema->total_values() == dim
                        ? meta.schema->FlatValueName(static_cast<int>(m))
                        : "f" + std::to_string(m));
  }
  return names;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct Options {
  std::string spec, schema, out, index, protocol, embeddings, bank, model, manifest,
      metrics, task = "attribution", selection = "pooled", partition = "eval",
      class_pooling = "pooled", shap = "sample", rank_pooling = "per-class";
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed = 0;
  int workers = DefaultWorkers();
  int epochs = 100;
  float lr = 1e-4f;
  int batch = 256;
  bool normalize = false;
  double alpha = 0;
  int max_depth = 5;
  int min_leaf = 1;
  double reg = 1e-4;
  int max_iter = 0;
  int shap_n = 2000;
  int background_n = 100;
  int max_utterances = 20;
  std::optional<int> workers_override;
};

void CmdSynth(const Options &o, Run *run) {
  SynthSpec spec = LoadSynthSpec(o.spec);
  if (o.seed_override) spec.seed = *o.seed_override;
  const AttributeSchema schema = LoadSchema(o.schema);
  run->Input(o.spec);
  run->Input(o.schema);
  run->seed = spec.seed;
  const SynthData data = SynthGenerate(spec, schema);
  SaveEmbeddings(data.dataset, run->out / "embeddings.pae", run->out / "index.tsv");
  SaveProtocol(data.protocol, run->out / "protocol.json");
  std::cout << "synth: " << data.dataset.size() << " utterances, dim "
            << data.dataset.dim() << ", " << data.classes.size() << " classes\n";
}

void CmdPartition(const Options &o, Run *run) {
  run->Input(o.index);
  run->Input(o.protocol);
  run->Input(o.spec);
  run->seed = o.seed;
  const auto utterances = LoadIndex(o.index);
  const ProtocolSplit original = LoadProtocol(o.protocol);
  const PartitionSpec spec = LoadPartitionSpec(o.spec);
  const ProtocolSplit built = BuildAttr17(utterances, original, spec, o.seed);
  SaveProtocol(built, run->out / "protocol.json");
  const auto stats = ProtocolStatistics(built, utterances);
  const std::string table = FormatProtocolStatistics(stats);
  WriteTextFile(run->out / "statistics.tsv", table);
  std::cout << table;
}

void CmdTrainExtractors(const Options &o, Run *run) {
  run->Input(o.embeddings);
  run->Input(o.index);
  run->Input(o.protocol);
  run->Input(o.schema);
  run->seed = o.seed;
  const EmbeddingDataset data = LoadEmbeddings(o.embeddings, o.index);
  const ProtocolSplit split = LoadProtocol(o.protocol);
  split.Resolve(data);
  const AttributeSchema schema = LoadSchema(o.schema);
  BankConfig config;
  config.epochs = o.epochs;
  config.lr = o.lr;
  config.batch_size = o.batch;
  config.selection = ParseEerSelection(o.selection);
  config.normalize = o.normalize;
  config.workers = o.workers;
  const ExtractorBank bank =
      TrainBank(split.Select(data, Partition::kTrain), split.Select(data, Partition::kDev),
                schema, config, o.seed);
  SaveBank(bank, run->out);
  for (int l = 0; l < schema.num_attributes(); ++l) {
    std::printf("%-18s epoch %3d  dev EER %.4f\n", schema.attribute(l).name.c_str(),
                bank.selected_epoch[l], bank.dev_eer[l]);
  }
}

void CmdExtract(const Options &o, Run *run) {
  run->Input(o.bank);
  run->Input(o.embeddings);
  run->Input(o.index);
  const ExtractorBank bank = LoadBank(o.bank);
  run->seed = bank.seed;
  const EmbeddingDataset data = LoadEmbeddings(o.embeddings, o.index);
  const EmbeddingDataset rho = ExtractAll(bank, data, o.workers);
  SaveEmbeddings(rho, run->out / "pae.pae", run->out / "index.tsv");
  Json meta;
  meta["schema_version"] = 1;
  meta["kind"] = "pae";
  meta["schema_hash"] = SchemaHash(bank.schema);
  meta["schema"] = Json::parse(SerializeSchema(bank.schema));
  meta["bank_manifest_sha256"] = Sha256File(fs::path(o.bank) / "manifest.json");
  WriteTextFile(run->out / "pae.meta.json", meta.dump(2) + "\n");
  std::cout << "extract: " << rho.size() << " embeddings of dim " << rho.dim() << "\n";
}

void CmdTrainBackend(const Options &o, Run *run) {
  run->Input(o.embeddings);
  run->Input(o.index);
  run->Input(o.protocol);
  run->seed = o.seed;
  const Task task = ParseTask(o.task);
  const FeatureMeta meta = LoadMeta(o.embeddings);
  const EmbeddingDataset train =
      TaskRows(LoadPartition(o.embeddings, o.index, o.protocol, Partition::kTrain), task);
  BackendSpec spec;
  spec.kind = ParseBackendKind(o.model);
  spec.alpha = o.alpha;
  spec.max_depth = o.max_depth;
  spec.min_leaf = o.min_leaf;
  spec.reg = o.reg;
  spec.max_iter = o.max_iter;
  spec.workers = o.workers;
  if (spec.kind == BackendKind::kNaiveBayes) {
    if (!meta.is_pae) {
      Fail(ErrorCode::kInvalidArgument,
           "--model nb needs attribute embeddings (missing " +
               MetaPath(o.embeddings).string() + ")");
    }
    spec.block_sizes = meta.schema->BlockSizes();
  }
  std::vector<std::string> classes;
  if (task == Task::kDetection) {
    classes = {std::string(kBonafideLabel), "spoof"};
  } else {
    std::set<std::string> seen;
    for (const auto &u : train.infos()) seen.insert(u.label);
    classes.assign(seen.begin(), seen.end());
  }
  std::vector<int> labels;
  for (const auto &u : train.infos()) {
    labels.push_back(task == Task::kDetection
                         ? (u.is_bonafide() ? 0 : 1)
                         : static_cast<int>(std::lower_bound(classes.begin(), classes.end(),
                                                             u.label) -
                                            classes.begin()));
  }
  BackendModelFile file;
  file.backend = FitBackend(spec, ToDouble(train), labels,
                            static_cast<int>(classes.size()), o.seed);
  file.class_names = classes;
  file.task = TaskName(task);
  file.feature_kind = meta.is_pae ? "pae" : "raw";
  file.feature_schema_hash = meta.is_pae ? meta.schema_hash : "";
  file.seed = o.seed;
  Json hp;
  hp["protocol"] = LoadProtocol(o.protocol).name();
  hp["train_rows"] = train.size();
  switch (spec.kind) {
    case BackendKind::kNaiveBayes: hp["alpha"] = o.alpha; break;
    case BackendKind::kDecisionTree:
      hp["max_depth"] = o.max_depth;
      hp["min_leaf"] = o.min_leaf;
      break;
    case BackendKind::kLogistic:
    case BackendKind::kSvm:
      hp["reg"] = o.reg;
      hp["max_iter"] = o.max_iter;
      break;
  }
  file.hyperparameters = hp;
  SaveBackendModel(file, run->out / "model.json");
  std::cout << "train-backend: " << BackendKindName(spec.kind) << " on " << train.size()
            << " rows, " << classes.size() << " classes\n";
}

// Maps eval labels to trained classes. Labels outside the trained set go
// to a class whose attribute row is identical, if the schema has one.
std::map<std::string, int> LabelMap(const std::vector<std::string> &classes,
                                    const EmbeddingDataset &rows,
                                    const std::optional<AttributeSchema> &schema) {
  std::map<std::string, int> map;
  for (std::size_t c = 0; c < classes.size(); ++c) map[classes[c]] = static_cast<int>(c);
  for (const auto &u : rows.infos()) {
    if (map.count(u.label)) continue;
    int twin = -1;
    if (schema && schema->HasAttack(u.label)) {
      const auto row = schema->Row(u.label);
      for (std::size_t c = 0; c < classes.size() && twin < 0; ++c) {
        if (!schema->HasAttack(classes[c])) continue;
        const auto other = schema->Row(classes[c]);
        if (std::equal(row.begin(), row.end(), other.begin(), other.end())) {
          twin = static_cast<int>(c);
        }
      }
    }
    map[u.label] = twin;
  }
  return map;
}

void CmdEval(const Options &o, Run *run) {
  run->Input(o.model);
  run->Input(o.embeddings);
  run->Input(o.index);
  run->Input(o.protocol);
  const BackendModelFile model = LoadBackendModel(o.model);
  run->seed = model.seed;
  const FeatureMeta meta = LoadMeta(o.embeddings);
  if (model.feature_kind == "pae") {
    if (!meta.is_pae) {
      Fail(ErrorCode::kSchemaMismatch, "model expects attribute embeddings, " +
                                           o.embeddings + " has no metadata");
    }
    if (meta.schema_hash != model.feature_schema_hash) {
      Fail(ErrorCode::kSchemaMismatch, "model schema hash " + model.feature_schema_hash +
                                           " != embedding schema hash " + meta.schema_hash);
    }
  }
  const Task task = ParseTask(model.task);
  const Partition part = ParsePartition(o.partition);
  const EmbeddingDataset all = LoadPartition(o.embeddings, o.index, o.protocol, part);
  const EmbeddingDataset rows = TaskRows(all, task);
  if (rows.size() == 0) Fail(ErrorCode::kEmptyData, "no evaluation rows");
  if (rows.dim() != model.backend->feature_dim()) {
    Fail(ErrorCode::kDimensionMismatch, "features have dim " + std::to_string(rows.dim()) +
                                            ", model expects " +
                                            std::to_string(model.backend->feature_dim()));
  }
  const Eigen::MatrixXd x = ToDouble(rows);
  const Eigen::MatrixXd scores = model.backend->ScoreAll(x, o.workers);
  const int classes = model.backend->num_classes();

  std::vector<int> truth(rows.size(), -1);
  std::map<std::string, int> label_map;
  if (task == Task::kDetection) {
    for (std::size_t n = 0; n < rows.size(); ++n) truth[n] = rows.info(n).is_bonafide() ? 0 : 1;
  } else {
    label_map = LabelMap(model.class_names, rows, meta.schema);
    for (std::size_t n = 0; n < rows.size(); ++n) truth[n] = label_map.at(rows.info(n).label);
  }

  ConfusionMatrix cm(classes);
  std::map<std::string, std::vector<std::int64_t>> foreign;  // labels outside the model
  std::vector<Eigen::Index> known_rows;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto i = static_cast<Eigen::Index>(n);
    const int pred = static_cast<int>(ArgMax(scores.row(i)));
    const std::string &label = rows.info(n).label;
    if (task == Task::kAttribution &&
        std::find(model.class_names.begin(), model.class_names.end(), label) ==
            model.class_names.end()) {
      auto &counts = foreign[label];
      counts.resize(classes, 0);
      ++counts[pred];
    }
    if (truth[n] < 0) continue;
    cm.Add(truth[n], pred);
    known_rows.push_back(i);
  }
  if (known_rows.empty()) Fail(ErrorCode::kEmptyData, "no rows with a trained class");

  double eer = 0;
  if (task == Task::kDetection) {
    ScorePool pool;
    for (auto i : known_rows) {
      const double s = DetectionScore(scores(i, 1), scores(i, 0));
      (truth[i] == 1 ? pool.target : pool.nontarget).push_back(s);
    }
    eer = Eer(pool).eer;
  } else {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(known_rows.size()), classes);
    std::vector<int> y;
    for (std::size_t k = 0; k < known_rows.size(); ++k) {
      s.row(static_cast<Eigen::Index>(k)) = scores.row(known_rows[k]);
      y.push_back(truth[known_rows[k]]);
    }
    eer = MulticlassEer(s, y,
                        o.class_pooling == "macro" ? ClassPooling::kMacro : ClassPooling::kPooled);
  }
  const double ba = BalancedAccuracy(cm, EmptyRowPolicy::kSkip);

  Json doc;
  doc["protocol"] = LoadProtocol(o.protocol).name();
  doc["partition"] = o.partition;
  doc["model_sha256"] = Sha256File(o.model);
  doc["backend"] = std::string(BackendKindName(model.backend->kind()));
  doc["task"] = model.task;
  doc["target"] = task == Task::kDetection ? "spoof" : "true class";
  doc["class_pooling"] = task == Task::kDetection ? "n/a" : o.class_pooling;
  doc["score_normalization"] = "none";
  doc["empty_row_policy"] = "skip";
  doc["n_trials"] = known_rows.size();
  doc["eer"] = eer;
  doc["balanced_accuracy"] = ba;
  doc["class_names"] = model.class_names;
  Json confusion = Json::array();
  Json recall = Json::object();
  for (int r = 0; r < classes; ++r) {
    std::vector<std::int64_t> row(classes);
    for (int c = 0; c < classes; ++c) row[c] = cm.counts()(r, c);
    confusion.push_back(row);
    const auto total = cm.RowSum(r);
    if (total > 0) {
      recall[model.class_names[r]] =
          static_cast<double>(cm.counts()(r, r)) / static_cast<double>(total);
    }
  }
  doc["confusion"] = confusion;
  doc["per_class_recall"] = recall;
  Json lm = Json::object();
  for (const auto &[label, c] : label_map) {
    if (c >= 0 && model.class_names[c] != label) lm[label] = model.class_names[c];
  }
  doc["label_map"] = lm;
  Json fj = Json::object();
  for (const auto &[label, counts] : foreign) {
    Json row = Json::object();
    for (int c = 0; c < classes; ++c) row[model.class_names[c]] = counts[c];
    fj[label] = row;
  }
  doc["unknown_assignments"] = fj;
  if (meta.is_pae && meta.schema->total_values() == all.dim()) {
    std::vector<std::string> labels;
    for (const auto &u : all.infos()) labels.push_back(u.label);
    doc["flow"] = FlowReportToJson(BuildFlowReport(all.features(), labels, *meta.schema));
  }
  WriteTextFile(run->out / "metrics.json", doc.dump(2) + "\n");
  std::printf("EER: %.6f\nbalanced accuracy: %.6f\n", eer, ba);
}

void CmdExplain(const Options &o, Run *run) {
  run->Input(o.model);
  run->Input(o.embeddings);
  run->Input(o.index);
  run->Input(o.protocol);
  run->seed = o.seed;
  const BackendModelFile model = LoadBackendModel(o.model);
  const FeatureMeta meta = LoadMeta(o.embeddings);
  if (model.feature_kind == "pae" &&
      (!meta.is_pae || meta.schema_hash != model.feature_schema_hash)) {
    Fail(ErrorCode::kSchemaMismatch, "model and embeddings use different schemas");
  }
  const Task task = ParseTask(model.task);
  const EmbeddingDataset train =
      TaskRows(LoadPartition(o.embeddings, o.index, o.protocol, Partition::kTrain), task);
  EmbeddingDataset eval =
      TaskRows(LoadPartition(o.embeddings, o.index, o.protocol, ParsePartition(o.partition)),
               task);
  if (o.max_utterances > 0 && eval.size() > static_cast<std::size_t>(o.max_utterances)) {
    std::vector<std::size_t> keep(static_cast<std::size_t>(o.max_utterances));
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    eval = eval.Subset(keep);
  }
  if (eval.size() == 0) Fail(ErrorCode::kEmptyReportSet, "nothing to explain");
  const Eigen::MatrixXd background =
      SelectBackground(ToDouble(train), o.background_n, DeriveSeed(o.seed, "background"));
  ExplainOptions opt;
  opt.method = o.shap == "exact" ? ShapleyMethod::kExact : ShapleyMethod::kSample;
  if (o.shap != "exact" && o.shap != "sample") {
    Fail(ErrorCode::kInvalidArgument, "--shap must be exact or sample");
  }
  opt.n_permutations = o.shap_n;
  opt.workers = o.workers;
  const auto explained = ExplainRows(*model.backend, ToDouble(eval), background, opt, o.seed);

  const auto names = FeatureNames(meta, eval.dim());
  Json doc;
  doc["estimator"] = opt.method == ShapleyMethod::kExact ? "exact" : "permutation";
  doc["n_permutations"] = opt.method == ShapleyMethod::kExact ? 0 : o.shap_n;
  doc["background"] = {{"source", "train"},
                       {"rows", background.rows()},
                       {"seed", DeriveSeed(o.seed, "background")}};
  doc["class_names"] = model.class_names;
  doc["feature_names"] = names;
  doc["utterances"] = Json::array();
  std::vector<std::vector<Eigen::VectorXd>> reports;
  for (const auto &u : explained) {
    Json uj;
    uj["utterance_id"] = eval.info(u.row).utterance_id;
    uj["label"] = eval.info(u.row).label;
    uj["classes"] = Json::array();
    std::vector<Eigen::VectorXd> per_class;
    for (std::size_t c = 0; c < u.per_class.size(); ++c) {
      const auto &r = u.per_class[c];
      Json cj;
      cj["class"] = model.class_names[c];
      cj["fx"] = r.fx;
      cj["base"] = r.base;
      cj["phi"] = std::vector<double>(r.phi.data(), r.phi.data() + r.phi.size());
      cj["se"] = std::vector<double>(r.se.data(), r.se.data() + r.se.size());
      uj["classes"].push_back(std::move(cj));
      per_class.push_back(r.phi);
    }
    doc["utterances"].push_back(std::move(uj));
    reports.push_back(std::move(per_class));
  }
  WriteTextFile(run->out / "shapley.json", doc.dump(1) + "\n");

  std::vector<int> blocks;
  std::vector<std::string> attr_names;
  if (meta.schema && meta.schema->total_values() == eval.dim()) {
    blocks = meta.schema->BlockSizes();
    for (int l = 0; l < meta.schema->num_attributes(); ++l) {
      attr_names.push_back(meta.schema->attribute(l).name);
    }
  } else {
    blocks.assign(static_cast<std::size_t>(eval.dim()), 1);
    attr_names = names;
  }
  if (o.rank_pooling != "per-class" && o.rank_pooling != "pooled") {
    Fail(ErrorCode::kInvalidArgument, "--rank-pooling must be per-class or pooled");
  }
  const RankingTable table = RankAggregate(
      reports, blocks,
      o.rank_pooling == "pooled" ? RankPooling::kPooled : RankPooling::kPerClass);
  std::string tsv = "kind\tname\tmean_rank\n";
  auto emit = [&](const char *kind, const std::vector<std::string> &n,
                  const std::vector<double> &r) {
    std::vector<std::size_t> order(r.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
    for (auto i : order) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", r[i]);
      tsv += std::string(kind) + '\t' + n[i] + '\t' + buf + '\n';
    }
  };
  emit("value", names, table.value_rank);
  emit("attribute", attr_names, table.attribute_rank);
  WriteTextFile(run->out / "ranking.tsv", tsv);
  std::cout << tsv;
}

void CmdHamming(const Options &o, Run *run) {
  run->Input(o.schema);
  run->Input(o.metrics);
  const AttributeSchema schema = LoadSchema(o.schema);
  const Eigen::MatrixXi d = HammingMatrix(schema);
  const auto &attacks = schema.attacks();
  std::string tsv;
  for (const auto &a : attacks) tsv += '\t' + a;
  tsv += '\n';
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    tsv += attacks[i];
    for (std::size_t j = 0; j < attacks.size(); ++j) {
      tsv += '\t' + std::to_string(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    tsv += '\n';
  }
  WriteTextFile(run->out / "hamming.tsv", tsv);
  std::cout << tsv;
  if (o.metrics.empty()) return;

  Json metrics;
  try {
    metrics = Json::parse(ReadTextFile(o.metrics));
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, o.metrics + ": " + e.what());
  }
  const auto classes = metrics.at("class_names").get<std::vector<std::string>>();
  const auto &assign = metrics.at("unknown_assignments");
  std::vector<std::string> unknown;
  for (auto it = assign.begin(); it != assign.end(); ++it) unknown.push_back(it.key());
  Eigen::MatrixXd freq(static_cast<Eigen::Index>(unknown.size()),
                       static_cast<Eigen::Index>(classes.size()));
  Eigen::MatrixXi dist(freq.rows(), freq.cols());
  for (std::size_t u = 0; u < unknown.size(); ++u) {
    const auto ru = schema.Row(unknown[u]);
    double total = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double v = assign.at(unknown[u]).at(classes[c]).get<double>();
      freq(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c)) = v;
      total += v;
      const auto rc = schema.Row(classes[c]);
      int diff = 0;
      for (std::size_t l = 0; l < ru.size(); ++l) diff += ru[l] != rc[l];
      dist(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c)) = 2 * diff;
    }
    if (total > 0) freq.row(static_cast<Eigen::Index>(u)) /= total;
  }
  const ConfusabilityReport report = ConfusabilityCheck(freq, dist);
  Json doc;
  doc["statistic"] = "spearman(assignment frequency, -hamming distance)";
  Json per = Json::object();
  for (std::size_t u = 0; u < unknown.size(); ++u) {
    if (std::isnan(report.per_row[u])) {
      per[unknown[u]] = nullptr;
    } else {
      per[unknown[u]] = report.per_row[u];
    }
  }
  doc["per_attack"] = per;
  if (std::isnan(report.mean)) {
    doc["mean"] = nullptr;
  } else {
    doc["mean"] = report.mean;
  }
  WriteTextFile(run->out / "confusability.json", doc.dump(2) + "\n");
}

int Dispatch(const std::vector<std::string> &argv);

void CmdReplay(const Options &o) {
  Json m;
  try {
    m = Json::parse(ReadTextFile(o.manifest));
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kParseError, o.manifest + ": " + e.what());
  }
  auto argv = m.at("argv").get<std::vector<std::string>>();
  const Json &args = m.at("args");
  auto set_flag = [&](const std::string &flag, const std::string &value) {
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == flag) {
        argv[i + 1] = value;
        return;
      }
    }
    argv.push_back(flag);
    argv.push_back(value);
  };
  fs::path out = args.at("--out").get<std::string>();
  if (!o.out.empty()) {
    out = o.out;
    set_flag("--out", o.out);
  }
  if (o.workers_override && args.contains("--workers")) {
    set_flag("--workers", std::to_string(*o.workers_override));
  }
  const int rc = Dispatch(argv);
  if (rc != 0) Fail(ErrorCode::kReplayMismatch, "replayed command failed");
  const Json expected = m.at("outputs");
  const Json actual = OutputHashes(out);
  int mismatches = 0;
  for (auto it = expected.begin(); it != expected.end(); ++it) {
    const bool same = actual.contains(it.key()) && actual.at(it.key()) == it.value();
    std::cout << (same ? "identical " : "DIFFERENT ") << it.key() << "\n";
    mismatches += !same;
  }
  for (auto it = actual.begin(); it != actual.end(); ++it) {
    if (!expected.contains(it.key())) {
      std::cout << "UNEXPECTED " << it.key() << "\n";
      ++mismatches;
    }
  }
  if (mismatches > 0) {
    Fail(ErrorCode::kReplayMismatch,
         std::to_string(mismatches) + " output(s) differ from " + o.manifest);
  }
}

void PrintError(std::string_view category, std::string_view message) {
  Json e;
  e["error"] = category;
  e["message"] = message;
  std::cerr << e.dump() << std::endl;
}

int Dispatch(const std::vector<std::string> &argv) {
  CLI::App app{"paeattr: probabilistic attribute embeddings for spoofing detection "
               "and attack attribution"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));
  Options o;

  auto seed_opt = [&](CLI::App *s) {
    s->add_option("--seed", o.seed, "Run seed")->capture_default_str();
  };
  auto workers_opt = [&](CLI::App *s) {
    s->add_option("--workers", o.workers, "Worker threads (results do not depend on it)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };
  auto data_opts = [&](CLI::App *s) {
    s->add_option("--embeddings", o.embeddings, "PAE1 embedding file")->required()
        ->check(CLI::ExistingFile);
    s->add_option("--index", o.index, "Index TSV for --embeddings")->required()
        ->check(CLI::ExistingFile);
    s->add_option("--protocol", o.protocol, "Protocol JSON")->required()
        ->check(CLI::ExistingFile);
  };

  auto *synth = app.add_subcommand("synth", "Generate a synthetic embedding set");
  synth->add_option("--spec", o.spec, "Synth spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--schema", o.schema, "Attribute schema JSON")->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t &s) { o.seed_override = s; },
      "Seed (overrides the synth spec)");

  auto *partition = app.add_subcommand("partition", "Build the attr-17 protocol");
  partition->add_option("--index", o.index, "Metadata index TSV")->required()
      ->check(CLI::ExistingFile);
  partition->add_option("--protocol", o.protocol, "Original protocol JSON")->required()
      ->check(CLI::ExistingFile);
  partition->add_option("--spec", o.spec, "Partition spec JSON")->required()
      ->check(CLI::ExistingFile);
  partition->add_option("--out", o.out, "Output directory")->required();
  seed_opt(partition);

  auto *train_ex = app.add_subcommand("train-extractors", "Train the attribute extractor bank");
  data_opts(train_ex);
  train_ex->add_option("--schema", o.schema, "Attribute schema JSON")->required()
      ->check(CLI::ExistingFile);
  train_ex->add_option("--out", o.out, "Bank directory")->required();
  train_ex->add_option("--epochs", o.epochs)->capture_default_str();
  train_ex->add_option("--lr", o.lr)->capture_default_str();
  train_ex->add_option("--batch", o.batch)->capture_default_str();
  train_ex->add_option("--selection", o.selection, "Dev EER for epoch selection")
      ->capture_default_str()
      ->check(CLI::IsMember({"pooled", "macro"}));
  train_ex->add_flag("--normalize", o.normalize, "Length-normalise embeddings first");
  seed_opt(train_ex);
  workers_opt(train_ex);

  auto *extract = app.add_subcommand("extract", "Compute attribute embeddings");
  extract->add_option("--bank", o.bank, "Bank directory")->required()
      ->check(CLI::ExistingDirectory);
  extract->add_option("--embeddings", o.embeddings, "PAE1 embedding file")->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--index", o.index, "Index TSV")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", o.out, "Output directory")->required();
  workers_opt(extract);

  auto *train_be = app.add_subcommand("train-backend", "Train a back-end classifier");
  data_opts(train_be);
  train_be->add_option("--out", o.out, "Output directory")->required();
  train_be->add_option("--model", o.model, "Back-end type")->required()
      ->check(CLI::IsMember({"nb", "dt", "lr", "svm"}));
  train_be->add_option("--task", o.task)->capture_default_str()
      ->check(CLI::IsMember({"detection", "attribution"}));
  train_be->add_option("--alpha", o.alpha, "NB smoothing")->capture_default_str();
  train_be->add_option("--max-depth", o.max_depth, "Tree depth")->capture_default_str();
  train_be->add_option("--min-leaf", o.min_leaf, "Tree leaf size")->capture_default_str();
  train_be->add_option("--reg", o.reg, "Linear model L2 weight")->capture_default_str();
  train_be->add_option("--max-iter", o.max_iter, "Linear model iterations (0 = default)")
      ->capture_default_str();
  seed_opt(train_be);
  workers_opt(train_be);

  auto *eval = app.add_subcommand("eval", "Evaluate a back-end");
  data_opts(eval);
  eval->add_option("--model", o.model, "Model JSON from train-backend")->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", o.out, "Output directory")->required();
  eval->add_option("--partition", o.partition)->capture_default_str()
      ->check(CLI::IsMember({"train", "dev", "eval"}));
  eval->add_option("--class-pooling", o.class_pooling, "Attribution EER pooling")
      ->capture_default_str()
      ->check(CLI::IsMember({"pooled", "macro"}));
  workers_opt(eval);

  auto *explain = app.add_subcommand("explain", "Shapley attribution of back-end scores");
  data_opts(explain);
  explain->add_option("--model", o.model, "Model JSON from train-backend")->required()
      ->check(CLI::ExistingFile);
  explain->add_option("--out", o.out, "Output directory")->required();
  explain->add_option("--partition", o.partition)->capture_default_str()
      ->check(CLI::IsMember({"train", "dev", "eval"}));
  explain->add_option("--shap", o.shap)->capture_default_str()
      ->check(CLI::IsMember({"exact", "sample"}));
  explain->add_option("--shap-n", o.shap_n, "Permutations per explanation")
      ->capture_default_str();
  explain->add_option("--background-n", o.background_n, "Background rows")
      ->capture_default_str();
  explain->add_option("--max-utterances", o.max_utterances, "0 = all")
      ->capture_default_str();
  explain->add_option("--rank-pooling", o.rank_pooling)->capture_default_str()
      ->check(CLI::IsMember({"per-class", "pooled"}));
  seed_opt(explain);
  workers_opt(explain);

  auto *hamming = app.add_subcommand("hamming", "Attack Hamming distances");
  hamming->add_option("--schema", o.schema, "Attribute schema JSON")->required()
      ->check(CLI::ExistingFile);
  hamming->add_option("--metrics", o.metrics, "metrics.json for a confusability check")
      ->check(CLI::ExistingFile);
  hamming->add_option("--out", o.out, "Output directory")->required();

  auto *replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs");
  replay->add_option("--manifest", o.manifest, "run_manifest.json")->required()
      ->check(CLI::ExistingFile);
  replay->add_option("--out", o.out, "Output directory (default: the original)");
  replay->add_option_function<int>(
      "--workers", [&](const int &w) { o.workers_override = w; }, "Worker override");

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    PrintError("UsageError", e.what());
    return 2;
  }

  if (replay->parsed()) {
    CmdReplay(o);
    return 0;
  }
  CLI::App *sub = app.get_subcommands().front();
  Run run;
  run.command = sub->get_name();
  run.argv = argv;
  run.args = CollectArgs(sub);
  run.out = o.out;
  PrepareOut(run.out);
  if (sub == synth) CmdSynth(o, &run);
  if (sub == partition) CmdPartition(o, &run);
  if (sub == train_ex) CmdTrainExtractors(o, &run);
  if (sub == extract) CmdExtract(o, &run);
  if (sub == train_be) CmdTrainBackend(o, &run);
  if (sub == eval) CmdEval(o, &run);
  if (sub == explain) CmdExplain(o, &run);
  if (sub == hamming) CmdHamming(o, &run);
  run.Finish();
  return 0;
}

}  // namespace
}  // namespace pae

int main(int argc, char **argv) {
  try {
    return pae::Dispatch(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const pae::Error &e) {
    pae::PrintError(pae::ErrorCodeName(e.code()), e.what());
  } catch (const nlohmann::json::exception &e) {
    pae::PrintError("ParseError", e.what());
  } catch (const std::filesystem::filesystem_error &e) {
    pae::PrintError("IoError", e.what());
  } catch (const std::exception &e) {
    pae::PrintError("InternalError", e.what());
  }
  return 1;
}
