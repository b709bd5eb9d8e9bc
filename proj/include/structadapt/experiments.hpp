// Experiment harness: shared workspace (data, vocabulary, pretrained
// backbone), single runs, and the sweeps built from them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structadapt/backbone.hpp"
#include "structadapt/bpe.hpp"
#include "structadapt/checkpoint.hpp"
#include "structadapt/config.hpp"
#include "structadapt/corpus.hpp"
#include "structadapt/pretrain.hpp"
#include "structadapt/train.hpp"

namespace structadapt::experiments {

using corpus::DatasetRecord;
using model::AdapterConfig;
using model::AdapterVariant;
using model::ModelBundle;
using model::TrainMode;

struct Setup {
  corpus::GenOptions gen;
  std::uint64_t data_seed = 1;
  std::size_t train_size = 2000, dev_size = 200, test_size = 200;
  std::string data_path;

  model::BackboneConfig backbone;
  std::size_t vocab_size = 400;
  train::PretrainConfig pretrain;
  std::size_t pretrain_graphs = 3000;
  std::string checkpoint;

  AdapterConfig adapter;
  train::TrainConfig train;
  std::size_t seeds = 4;

  static Setup from_config(const Config& c) {
    Setup s;
    s.gen.max_nodes = c.count("data.max_nodes");
    s.gen.reentrancy_rate = c.real("data.reentrancy_rate");
    s.data_seed = c.count("data.seed");
    s.train_size = c.count("data.train_size");
    s.dev_size = c.count("data.dev_size");
    s.test_size = c.count("data.test_size");
    s.data_path = c.str("data.path");
    s.backbone.layers = c.count("backbone.layers");
    s.backbone.d = c.count("backbone.d");
    s.backbone.heads = c.count("backbone.heads");
    s.backbone.ff = c.count("backbone.ff");
    s.backbone.max_len = c.count("backbone.max_len");
    s.vocab_size = c.count("backbone.vocab_size");
    s.pretrain.steps = c.count("backbone.pretrain_steps");
    s.pretrain.lr = c.real("backbone.pretrain_lr");
    s.pretrain.batch = c.count("backbone.pretrain_batch");
    s.pretrain.seed = c.count("backbone.pretrain_seed");
    s.pretrain.mask_rate = c.real("backbone.mask_rate");
    s.pretrain_graphs = c.count("backbone.pretrain_graphs");
    s.checkpoint = c.str("backbone.checkpoint");
    s.adapter.variant = model::parse_adapter_variant(c.str("adapter.variant"));
    s.adapter.hidden = c.count("adapter.hidden");
    s.adapter.encoder = c.flag("adapter.encoder");
    s.adapter.decoder = c.flag("adapter.decoder");
    s.adapter.bases = c.count("adapter.bases");
    s.adapter.gcn_degree = model::parse_gcn_degree(c.str("adapter.gcn_degree"));
    s.train.lr = c.real("train.lr");
    s.train.batch = c.count("train.batch");
    s.train.beam = c.count("train.beam");
    s.train.max_steps = c.count("train.max_steps");
    s.train.patience = c.count("train.patience");
    s.train.seed = c.count("train.seed");
    s.train.mode = model::parse_train_mode(c.str("train.mode"));
    s.train.lin_mode = repr::parse_lin_mode(c.str("train.lin_mode"));
    s.train.variant = repr::parse_lin_variant(c.str("train.variant"));
    s.train.rep = repr::parse_rep(c.str("train.rep"));
    s.train.max_decode_len = c.count("train.max_decode_len");
    s.train.early_stopping = c.flag("train.early_stopping");
    s.train.log_every = c.count("train.log_every");
    s.seeds = c.count("train.seeds");
    if (s.seeds == 0) throw ConfigError("train.seeds must be positive");
    return s;
  }

  std::vector<std::uint64_t> seed_list() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < seeds; ++i) out.push_back(train.seed + i);
    return out;
  }
};

/// Draws records until each split holds its requested count.
inline void fill_splits(const Setup& s, std::vector<DatasetRecord>& tr, std::vector<DatasetRecord>& dev,
                        std::vector<DatasetRecord>& test) {
  corpus::RandomChooser ch(s.data_seed);
  auto inv = corpus::Inventory::full();
  std::set<std::string> keys;
  std::size_t stale = 0;
  while (tr.size() < s.train_size || dev.size() < s.dev_size || test.size() < s.test_size) {
    auto g = corpus::sample_graph(inv, s.gen, ch);
    auto key = corpus::canonical_key(g);
    if (!keys.insert(key).second) {
      if (++stale > 100000) throw std::runtime_error("corpus inventory exhausted before splits were filled");
      continue;
    }
    stale = 0;
    DatasetRecord r{penman::serialize_penman(g), corpus::realize(g, inv), corpus::split_for(key)};
    auto& dst = r.split == "train" ? tr : r.split == "dev" ? dev : test;
    std::size_t cap = r.split == "train" ? s.train_size : r.split == "dev" ? s.dev_size : s.test_size;
    if (dst.size() < cap) dst.push_back(std::move(r));
  }
}

struct Workspace {
  bpe::Vocabulary vocab;
  ModelBundle backbone;
  std::vector<DatasetRecord> train, dev, test;
};

inline std::vector<DatasetRecord> load_records(const Setup& s, std::vector<DatasetRecord>* dev,
                                               std::vector<DatasetRecord>* test) {
  std::vector<DatasetRecord> tr, dv, ts;
  if (!s.data_path.empty()) {
    for (auto& r : corpus::load_jsonl(s.data_path)) {
      (r.split == "dev" ? dv : r.split == "test" ? ts : tr).push_back(std::move(r));
    }
  } else {
    fill_splits(s, tr, dv, ts);
  }
  if (dev) *dev = std::move(dv);
  if (test) *test = std::move(ts);
  return tr;
}

/// Vocabulary over pretraining text, training sentences and their canon
/// linearizations.
inline bpe::Vocabulary build_vocab(const Setup& s, const std::vector<std::string>& pretrain_texts,
                                   const std::vector<DatasetRecord>& train) {
  std::vector<std::string> lines = pretrain_texts;
  for (const auto& r : train) {
    lines.push_back(r.text);
    auto lin = repr::linearize(penman::parse_penman(r.amr), repr::LinMode::kCanon, repr::LinVariant::kNodesAndEdges, 0);
    lines.push_back(" " + lin.text());
  }
  return bpe::train_vocab(lines, s.vocab_size);
}

inline nlohmann::json relations_json(const repr::RelationTable& t) {
  auto roles = nlohmann::json::array();
  if (t.typed()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& n = t.name(static_cast<int>(i));
      if (!t.is_reverse(static_cast<int>(i)) && n != "unknown") roles.push_back(n);
    }
  }
  return {{"typed", t.typed()}, {"roles", roles}};
}

inline repr::RelationTable relations_from_json(const nlohmann::json& j) {
  if (!j.at("typed").get<bool>()) return repr::RelationTable::default_reverse();
  return repr::RelationTable::typed(j.at("roles").get<std::set<std::string>>());
}

/// Writes every parameter of `b` with the vocabulary and the shapes needed
/// to rebuild it.
inline void save_model(const std::string& path, const ModelBundle& b, const bpe::Vocabulary& vocab,
                       nlohmann::json extra = nlohmann::json::object()) {
  std::ostringstream vs;
  vocab.save(vs);
  const auto& a = b.adapter;
  extra["vocab"] = vs.str();
  extra["backbone"] = {{"layers", b.backbone.layers}, {"d", b.backbone.d},         {"heads", b.backbone.heads},
                       {"ff", b.backbone.ff},         {"vocab", b.backbone.vocab}, {"max_len", b.backbone.max_len}};
  extra["adapter"] = {{"variant", model::to_string(a.variant)},
                      {"hidden", a.hidden},
                      {"encoder", a.encoder},
                      {"decoder", a.decoder},
                      {"num_relations", a.num_relations},
                      {"bases", a.bases},
                      {"gcn_degree", a.gcn_degree == model::GcnDegree::kInPlusSelf ? "in" : "total"}};
  extra["relations"] = relations_json(b.relations);
  save_checkpoint(path, b.params, extra);
}

struct LoadedModel {
  ModelBundle bundle;
  bpe::Vocabulary vocab;
  nlohmann::json meta;
};

inline LoadedModel load_model(const std::string& path) {
  auto ck = load_checkpoint(path);
  LoadedModel m;
  try {
    std::istringstream vs(ck.meta.at("vocab").get<std::string>());
    m.vocab = bpe::Vocabulary::load(vs);
    const auto& bb = ck.meta.at("backbone");
    auto& c = m.bundle.backbone;
    c.layers = bb.at("layers");
    c.d = bb.at("d");
    c.heads = bb.at("heads");
    c.ff = bb.at("ff");
    c.vocab = bb.at("vocab");
    c.max_len = bb.at("max_len");
    const auto& aj = ck.meta.at("adapter");
    auto& a = m.bundle.adapter;
    a.variant = model::parse_adapter_variant(aj.at("variant"));
    a.hidden = aj.at("hidden");
    a.encoder = aj.at("encoder");
    a.decoder = aj.at("decoder");
    a.num_relations = aj.at("num_relations");
    a.bases = aj.at("bases");
    a.gcn_degree = model::parse_gcn_degree(aj.at("gcn_degree"));
    m.bundle.relations = relations_from_json(ck.meta.at("relations"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": incomplete model metadata: " + e.what());
  }
  m.bundle.params = std::move(ck.params);
  m.meta = std::move(ck.meta);
  return m;
}

/// Settings that determine the pretrained backbone and vocabulary.
inline std::string pretrain_fingerprint(const Setup& s) {
  std::ostringstream os;
  os << s.backbone.layers << ' ' << s.backbone.d << ' ' << s.backbone.heads << ' ' << s.backbone.ff << ' '
     << s.backbone.max_len << ' ' << s.vocab_size << ' ' << s.pretrain.steps << ' ' << s.pretrain.lr << ' '
     << s.pretrain.batch << ' ' << s.pretrain.seed << ' ' << s.pretrain.mask_rate << ' ' << s.pretrain_graphs << ' '
     << s.gen.max_nodes << ' ' << s.gen.reentrancy_rate << ' ' << s.data_seed << ' ' << s.train_size << ' '
     << s.data_path;
  return os.str();
}

/// Loads data, then loads the pretrained backbone from `s.checkpoint` when
/// that file exists, or builds the vocabulary, pretrains, and saves there.
inline Workspace build_workspace(const Setup& s, const train::LogFn& log = {}) {
  Workspace ws;
  ws.train = load_records(s, &ws.dev, &ws.test);
  auto fp = pretrain_fingerprint(s);
  if (!s.checkpoint.empty() && std::filesystem::exists(s.checkpoint)) {
    auto m = load_model(s.checkpoint);
    if (m.meta.value("pretrain", std::string()) != fp) {
      throw std::runtime_error(s.checkpoint + " was pretrained with different settings; remove it or change "
                               "backbone.checkpoint");
    }
    ws.backbone = std::move(m.bundle);
    ws.vocab = std::move(m.vocab);
    return ws;
  }
  auto texts = train::pretraining_texts(s.pretrain_graphs, s.pretrain.seed, s.gen);
  ws.vocab = build_vocab(s, texts, ws.train);
  auto bc = s.backbone;
  bc.vocab = ws.vocab.size();
  ws.backbone = train::pretrain_backbone(texts, ws.vocab, bc, s.pretrain, log);
  if (!s.checkpoint.empty()) save_model(s.checkpoint, ws.backbone, ws.vocab, {{"pretrain", fp}});
  return ws;
}

// ---------------------------------------------------------------------------
// Runs.

/// One trained configuration: the adapter, the parameters it trains, and
/// its learning rate.
struct Arm {
  std::string name;
  AdapterConfig adapter;
  TrainMode mode = TrainMode::kAdaptersOnly;
  double lr = 1e-4;
};

struct RunResult {
  double dev_bleu = 0;
  double test_bleu = 0;
  double test_chrf = 0;
  std::size_t trainable = 0;
  std::size_t total = 0;
  std::size_t steps = 0;
};

inline repr::RelationTable relations_for(repr::LinVariant variant, const std::vector<DatasetRecord>& train) {
  std::vector<penman::AmrGraph> graphs;
  for (const auto& r : train) graphs.push_back(penman::normalize_inverse_roles(penman::parse_penman(r.amr)));
  return repr::relation_table(variant, repr::observed_roles(graphs));
}

inline train::Pipeline pipeline_for(const Workspace& ws, const train::TrainConfig& tc,
                                    const repr::RelationTable& rels, std::uint64_t lin_seed) {
  train::Pipeline p;
  p.vocab = &ws.vocab;
  p.mode = tc.lin_mode;
  p.variant = tc.variant;
  p.rep = tc.rep;
  p.relations = rels;
  p.seed = lin_seed;
  return p;
}

struct Trained {
  ModelBundle bundle;
  train::Pipeline pipeline;
  train::TrainLog log;
};

inline Trained train_arm(const Workspace& ws, const Arm& arm, train::TrainConfig tc,
                         const std::vector<DatasetRecord>& train_recs, std::uint64_t lin_seed,
                         const train::LogFn& log = {}) {
  tc.mode = arm.mode;
  tc.lr = arm.lr;
  auto rels = relations_for(tc.variant, train_recs);
  Trained t{model::attach_adapters(ws.backbone, arm.adapter, tc.seed, rels), pipeline_for(ws, tc, rels, lin_seed), {}};
  auto tr = train::prepare_all(train_recs, t.pipeline);
  auto dv = train::prepare_all(ws.dev, t.pipeline);
  t.log = train::train(t.bundle, tr, dv, tc, &ws.vocab, log);
  if (t.log.dev_bleu.empty() && !dv.empty()) {
    t.log.best_dev_bleu =
        eval::bleu(train::decode_all(t.bundle, ws.vocab, dv, 1, tc.max_decode_len), train::references(dv));
  }
  return t;
}

inline RunResult run_one(const Workspace& ws, const Arm& arm, const train::TrainConfig& tc,
                         const std::vector<DatasetRecord>& train_recs, std::uint64_t lin_seed, bool eval_test,
                         const train::LogFn& log = {}) {
  auto t = train_arm(ws, arm, tc, train_recs, lin_seed, log);
  RunResult r;
  auto pc = model::count_params(t.bundle, arm.mode);
  r.trainable = pc.trainable;
  r.total = pc.total;
  r.steps = t.log.steps;
  r.dev_bleu = t.log.best_dev_bleu;
  if (eval_test && !ws.test.empty()) {
    auto ts = train::prepare_all(ws.test, t.pipeline);
    auto hyps = train::decode_all(t.bundle, ws.vocab, ts, tc.beam, tc.max_decode_len);
    r.test_bleu = eval::bleu(hyps, train::references(ts));
    r.test_chrf = eval::chrf(hyps, train::references(ts));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation and CSV.

struct Summary {
  double mean = 0, sd = 0;
};

/// Mean and sample standard deviation (zero for a single value).
inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write_csv(std::ostream& os) const {
    auto line = [&os](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
  }
  std::string csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }
  nlohmann::json json() const {
    auto j = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json o;
      for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = r[i];
      j.push_back(o);
    }
    return j;
  }
};

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> c = {"runs",         "trainable",   "fraction",   "dev_bleu_mean",
                                             "dev_bleu_sd",  "test_bleu_mean", "test_bleu_sd", "test_chrf_mean",
                                             "test_chrf_sd"};
  return c;
}

inline std::vector<std::string> metric_cells(const std::vector<RunResult>& rs) {
  std::vector<double> dev, tb, tc;
  for (const auto& r : rs) {
    dev.push_back(r.dev_bleu);
    tb.push_back(r.test_bleu);
    tc.push_back(r.test_chrf);
  }
  auto d = summarize(dev), b = summarize(tb), c = summarize(tc);
  std::size_t trainable = rs.empty() ? 0 : rs[0].trainable;
  double frac = rs.empty() || !rs[0].total ? 0.0 : static_cast<double>(trainable) / static_cast<double>(rs[0].total);
  return {std::to_string(rs.size()), std::to_string(trainable), fmt(frac), fmt(d.mean), fmt(d.sd),
          fmt(b.mean),               fmt(b.sd),                  fmt(c.mean), fmt(c.sd)};
}

inline std::vector<std::string> with_metrics(std::vector<std::string> keys, const std::vector<RunResult>& rs) {
  auto m = metric_cells(rs);
  keys.insert(keys.end(), m.begin(), m.end());
  return keys;
}

inline std::vector<std::string> header_with(std::vector<std::string> keys) {
  keys.insert(keys.end(), metric_columns().begin(), metric_columns().end());
  return keys;
}

// ---------------------------------------------------------------------------
// Sweeps.

inline Arm adapter_arm(AdapterVariant v, std::size_t hidden, double lr, bool enc = true, bool dec = true,
                       std::size_t bases = 0) {
  Arm a;
  a.adapter.variant = v;
  a.adapter.hidden = hidden;
  a.adapter.encoder = enc;
  a.adapter.decoder = dec;
  a.adapter.bases = bases;
  a.mode = TrainMode::kAdaptersOnly;
  a.lr = lr;
  a.name = model::to_string(v) + (enc && dec ? "" : enc ? "_enc" : "_dec");
  return a;
}

using ProgressFn = std::function<void(const std::string&)>;

/// Trains every variant at every hidden width over the setup's seeds.
inline Table sweep_hidden(const Workspace& ws, const Setup& s, const std::vector<AdapterVariant>& variants,
                          const std::vector<std::size_t>& dims, const ProgressFn& progress = {}) {
  Table t{header_with({"variant", "hidden"}), {}};
  for (auto v : variants) {
    for (auto m : dims) {
      auto arm = adapter_arm(v, m, s.train.lr, s.adapter.encoder, s.adapter.decoder, s.adapter.bases);
      std::vector<RunResult> rs;
      for (auto seed : s.seed_list()) {
        auto tc = s.train;
        tc.seed = seed;
        rs.push_back(run_one(ws, arm, tc, ws.train, s.data_seed, true));
        if (progress) progress(arm.name + " m=" + std::to_string(m) + " seed=" + std::to_string(seed));
      }
      t.rows.push_back(with_metrics({model::to_string(v), std::to_string(m)}, rs));
    }
  }
  return t;
}

struct LowDataRun {
  std::size_t size, sample;
  std::uint64_t seed;
};

/// Every (size, subsample, training seed) combination, in run order.
inline std::vector<LowDataRun> low_data_schedule(const std::vector<std::size_t>& sizes, std::size_t samples,
                                                 const std::vector<std::uint64_t>& seeds) {
  std::vector<LowDataRun> out;
  for (auto n : sizes)
    for (std::size_t k = 0; k < samples; ++k)
      for (auto seed : seeds) out.push_back({n, k, seed});
  return out;
}

/// Seeded subsample of `n` training records.
inline std::vector<DatasetRecord> subsample(const std::vector<DatasetRecord>& recs, std::size_t n,
                                            std::uint64_t seed) {
  if (n > recs.size()) throw std::invalid_argument("subsample larger than the training set");
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  repr::seeded_shuffle(idx, rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<DatasetRecord> out;
  for (auto i : idx) out.push_back(recs[i]);
  return out;
}

inline Table low_data(const Workspace& ws, const Setup& s, const std::vector<Arm>& arms,
                      const std::vector<std::size_t>& sizes, std::size_t samples, std::size_t seeds,
                      const ProgressFn& progress = {}) {
  std::vector<std::uint64_t> seed_list;
  for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(s.train.seed + i);
  Table t{header_with({"arm", "size"}), {}};
  for (const auto& arm : arms) {
    for (auto n : sizes) {
      std::vector<RunResult> rs;
      for (const auto& run : low_data_schedule({n}, samples, seed_list)) {
        auto recs = subsample(ws.train, run.size, s.data_seed * 1000003 + run.sample);
        auto tc = s.train;
        tc.seed = run.seed;
        rs.push_back(run_one(ws, arm, tc, recs, s.data_seed, true));
        if (progress) {
          progress(arm.name + " size=" + std::to_string(n) + " sample=" + std::to_string(run.sample) +
                   " seed=" + std::to_string(run.seed));
        }
      }
      t.rows.push_back(with_metrics({arm.name, std::to_string(n)}, rs));
    }
  }
  return t;
}

inline Table linearization_robustness(const Workspace& ws, const Setup& s, const std::vector<Arm>& arms,
                                      const std::vector<repr::LinMode>& modes, bool eval_test = true,
                                      const ProgressFn& progress = {}) {
  Table t{header_with({"arm", "lin_mode"}), {}};
  for (const auto& arm : arms) {
    for (auto mode : modes) {
      std::vector<RunResult> rs;
      for (auto seed : s.seed_list()) {
        auto tc = s.train;
        tc.seed = seed;
        tc.lin_mode = mode;
        rs.push_back(run_one(ws, arm, tc, ws.train, s.data_seed, eval_test));
        if (progress) {
          progress(arm.name + " " + repr::to_string(mode) + " seed=" + std::to_string(seed) + " dev_bleu=" +
                   fmt(rs.back().dev_bleu));
        }
      }
      t.rows.push_back(with_metrics({arm.name, repr::to_string(mode)}, rs));
    }
  }
  return t;
}

/// Adapter parameter total of a configuration, summed over layers.
inline std::size_t adapter_total(const AdapterConfig& a, std::size_t layers, std::size_t d, std::size_t relations) {
  std::size_t per = 0;
  if (a.encoder_active()) per += model::adapter_layer_params(a.variant, d, a.hidden, relations, a.bases);
  if (a.decoder_active()) per += model::adapter_layer_params(AdapterVariant::kAdapt, d, a.hidden);
  return per * layers;
}

struct SolvedHidden {
  std::size_t hidden = 0;
  bool exact = false;
};

/// Smallest width whose adapter total is closest to `target`.
inline SolvedHidden solve_hidden(std::size_t target, AdapterConfig a, std::size_t layers, std::size_t d,
                                 std::size_t relations) {
  SolvedHidden best;
  std::size_t best_gap = SIZE_MAX;
  for (std::size_t m = 1; m <= 8 * d; ++m) {
    a.hidden = m;
    std::size_t c = adapter_total(a, layers, d, relations);
    std::size_t gap = c > target ? c - target : target - c;
    if (gap < best_gap) {
      best_gap = gap;
      best = {m, gap == 0};
    }
  }
  return best;
}

/// Placement configurations with equal trainable parameters: each variant
/// on both sides at width m, and on one side at the width that matches.
inline std::vector<Arm> placement_arms(const std::vector<AdapterVariant>& variants, std::size_t m, double lr,
                                       std::size_t layers, std::size_t d, std::size_t relations) {
  std::vector<Arm> arms;
  for (auto v : variants) {
    auto both = adapter_arm(v, m, lr);
    std::size_t target = adapter_total(both.adapter, layers, d, relations);
    auto add_side = [&](bool enc, bool dec) {
      auto a = adapter_arm(v, m, lr, enc, dec);
      auto solved = solve_hidden(target, a.adapter, layers, d, relations);
      if (!solved.exact) {
        throw std::invalid_argument("no width of " + a.name + " matches " + std::to_string(target) +
                                    " parameters; pick another hidden width");
      }
      a.adapter.hidden = solved.hidden;
      arms.push_back(a);
    };
    add_side(true, false);
    if (v == AdapterVariant::kAdapt) add_side(false, true);
    arms.push_back(both);
  }
  return arms;
}

inline Table placement_ablation(const Workspace& ws, const Setup& s, const std::vector<Arm>& arms,
                                const ProgressFn& progress = {}) {
  Table t{header_with({"arm", "hidden", "encoder", "decoder"}), {}};
  for (const auto& arm : arms) {
    std::vector<RunResult> rs;
    for (auto seed : s.seed_list()) {
      auto tc = s.train;
      tc.seed = seed;
      rs.push_back(run_one(ws, arm, tc, ws.train, s.data_seed, true));
      if (progress) progress(arm.name + " seed=" + std::to_string(seed));
    }
    t.rows.push_back(with_metrics({model::to_string(arm.adapter.variant), std::to_string(arm.adapter.hidden),
                                   arm.adapter.encoder ? "1" : "0", arm.adapter.decoder ? "1" : "0"},
                                  rs));
  }
  return t;
}

}  // namespace structadapt::experiments
