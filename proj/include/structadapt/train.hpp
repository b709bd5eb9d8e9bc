// Training loop, decoding, evaluation reports and graph-property breakdowns.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structadapt/backbone.hpp"
#include "structadapt/bpe.hpp"
#include "structadapt/corpus.hpp"
#include "structadapt/metrics.hpp"
#include "structadapt/penman.hpp"
#include "structadapt/repr.hpp"

namespace structadapt::train {

using model::ModelBundle;
using model::TrainMode;

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 4;
  std::size_t beam = 5;
  std::size_t max_steps = 2000;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kAdaptersOnly;
  repr::LinMode lin_mode = repr::LinMode::kCanon;
  repr::LinVariant variant = repr::LinVariant::kNodesAndEdges;
  repr::Rep rep = repr::Rep::kRep1;
  std::size_t max_decode_len = 64;
  bool early_stopping = true;
  std::size_t log_every = 100;

  static double default_lr(TrainMode m) { return m == TrainMode::kAdaptersOnly ? 1e-4 : 3e-5; }

  void validate() const {
    if (!(lr > 0) || batch == 0 || beam == 0 || max_decode_len == 0) {
      throw std::invalid_argument("training config values must be positive");
    }
  }
};

/// Linear decay from `base` at step 0 to zero at `max_steps`.
inline double lr_at(double base, std::size_t step, std::size_t max_steps) {
  if (max_steps == 0) return 0.0;
  double frac = 1.0 - static_cast<double>(step) / static_cast<double>(max_steps);
  return base * std::max(0.0, frac);
}

/// Tracks the best score; stops after `patience` epochs without a strict
/// improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  /// Records one epoch's score and reports whether it is a new best.
  bool observe(double score) {
    ++epoch_;
    if (!best_ || score > *best_) {
      best_ = score;
      best_epoch_ = epoch_;
      return true;
    }
    return false;
  }
  bool should_stop() const { return best_ && epoch_ - best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs() const { return epoch_; }
  double best() const { return best_ ? *best_ : -std::numeric_limits<double>::infinity(); }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0, best_epoch_ = 0;
  std::optional<double> best_;
};

// ---------------------------------------------------------------------------
// Data preparation.

struct Prepared {
  model::Seq2SeqExample ex;
  std::string reference;
  penman::GraphStats stats;
};

struct Pipeline {
  const bpe::Vocabulary* vocab = nullptr;
  repr::LinMode mode = repr::LinMode::kCanon;
  repr::LinVariant variant = repr::LinVariant::kNodesAndEdges;
  repr::Rep rep = repr::Rep::kRep1;
  repr::RelationTable relations = repr::RelationTable::default_reverse();
  std::uint64_t seed = 0;
};

inline std::vector<int> encode_target(const bpe::Vocabulary& vocab, const std::string& text) {
  auto ids = vocab.encode(text);
  ids.push_back(bpe::kEos);
  return ids;
}

/// Linearizes, tokenizes and builds the token graph of one record. Shuffled
/// linearizations are seeded per graph so a graph keeps its order across
/// epochs and subsamples.
inline Prepared prepare(const corpus::DatasetRecord& rec, const Pipeline& p) {
  if (!p.vocab) throw std::invalid_argument("prepare: pipeline has no vocabulary");
  auto g = penman::parse_penman(rec.amr);
  repr::LinearizeOptions lo{p.mode, p.variant, p.seed ^ corpus::fnv1a(rec.amr), std::nullopt};
  auto lin = repr::linearize(g, lo);
  auto tok = repr::tokenize(*p.vocab, lin);
  auto u = repr::to_unlabeled(penman::normalize_inverse_roles(g));
  Prepared out;
  out.ex.source = tok.ids;
  out.ex.graph = repr::build_token_graph(u, lin, tok, p.rep, p.relations);
  out.ex.target = encode_target(*p.vocab, rec.text);
  out.reference = rec.text;
  out.stats = penman::graph_stats(g);
  return out;
}

inline std::vector<Prepared> prepare_all(const std::vector<corpus::DatasetRecord>& recs, const Pipeline& p) {
  std::vector<Prepared> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(prepare(r, p));
  return out;
}

inline std::vector<corpus::DatasetRecord> select_split(const std::vector<corpus::DatasetRecord>& recs,
                                                       const std::string& split) {
  std::vector<corpus::DatasetRecord> out;
  for (const auto& r : recs)
    if (r.split == split) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Decoding.

struct Hypothesis {
  std::vector<int> tokens;  // without the end-of-sequence id
  double logprob = 0;
  bool finished = false;
  /// Log-probability divided by the number of generated ids, counting the
  /// end-of-sequence id when present.
  double score() const {
    double len = static_cast<double>(tokens.size() + (finished ? 1 : 0));
    return logprob / std::max(1.0, len);
  }
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> finals;
};

/// Beam search over an abstract step function. `step(state, prev)` advances
/// `state` by the id `prev` and returns log-probabilities of the next id.
/// At each depth the `beam` best extensions are kept; extensions ending in
/// `eos` leave the beam as final hypotheses. Search stops once `beam`
/// hypotheses are final or at `max_len`, where live beams become final.
template <class State, class StepFn>
BeamResult beam_search(State init, StepFn step, std::size_t beam, std::size_t max_len, int start, int eos) {
  if (beam == 0) throw std::invalid_argument("beam_search: beam must be positive");
  struct Live {
    Hypothesis hyp;
    State state;
    int prev;
  };
  std::vector<Live> live{{Hypothesis{}, std::move(init), start}};
  BeamResult res;
  for (std::size_t depth = 0; depth < max_len && !live.empty() && res.finals.size() < beam; ++depth) {
    struct Cand {
      double lp;
      std::size_t from;
      int tok;
    };
    std::vector<Cand> cands;
    std::vector<State> next_states;
    for (std::size_t i = 0; i < live.size(); ++i) {
      State s = live[i].state;
      std::vector<double> logp = step(s, live[i].prev);
      next_states.push_back(std::move(s));
      for (std::size_t j = 0; j < logp.size(); ++j) {
        cands.push_back({live[i].hyp.logprob + logp[j], i, static_cast<int>(j)});
      }
    }
    std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), [](const Cand& a, const Cand& b) {
      if (a.lp != b.lp) return a.lp > b.lp;
      if (a.from != b.from) return a.from < b.from;
      return a.tok < b.tok;
    });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cands[k];
      Hypothesis h = live[c.from].hyp;
      h.logprob = c.lp;
      if (c.tok == eos) {
        h.finished = true;
        res.finals.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.tok);
        next.push_back({std::move(h), next_states[c.from], c.tok});
      }
    }
    live = std::move(next);
  }
  for (auto& l : live) res.finals.push_back(std::move(l.hyp));
  if (res.finals.empty()) throw std::logic_error("beam_search: no hypotheses");
  res.best = *std::max_element(res.finals.begin(), res.finals.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.score() < b.score();
  });
  return res;
}

inline std::vector<double> log_softmax(std::span<const ad::Scalar> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (auto v : logits) mx = std::max(mx, static_cast<double>(v));
  double z = 0;
  for (auto v : logits) z += std::exp(static_cast<double>(v) - mx);
  double lz = std::log(z) + mx;
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = static_cast<double>(logits[j]) - lz;
  return out;
}

inline std::vector<int> beam_decode(const ModelBundle& b, const model::Seq2SeqExample& ex, std::size_t beam,
                                    std::size_t max_len) {
  ad::NoGradGuard ng;
  auto enc = model::encode(b, ex.source, ex.graph ? &*ex.graph : nullptr);
  max_len = std::min(max_len, b.backbone.max_len);
  auto step = [&b](model::DecoderCache& cache, int prev) {
    auto logits = model::decode_step(b, cache, {prev});
    return log_softmax(logits.data());
  };
  return beam_search(model::start_decoder(b, enc), step, beam, max_len, bpe::kPad, bpe::kEos).best.tokens;
}

inline std::vector<int> decode(const ModelBundle& b, const model::Seq2SeqExample& ex, std::size_t beam,
                               std::size_t max_len) {
  if (beam <= 1) return model::greedy_decode(b, ex.source, ex.graph ? &*ex.graph : nullptr, max_len);
  return beam_decode(b, ex, beam, max_len);
}

inline std::vector<std::string> decode_all(const ModelBundle& b, const bpe::Vocabulary& vocab,
                                           const std::vector<Prepared>& data, std::size_t beam,
                                           std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(data.size());
  for (const auto& p : data) out.push_back(vocab.decode(decode(b, p.ex, beam, max_len)));
  return out;
}

inline std::vector<std::string> references(const std::vector<Prepared>& data) {
  std::vector<std::string> out;
  for (const auto& p : data) out.push_back(p.reference);
  return out;
}

// ---------------------------------------------------------------------------
// Training.

struct TrainLog {
  std::size_t steps = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_dev_bleu = 0;
  std::vector<double> dev_bleu;
  std::vector<double> losses;  // one per step
  double wall_seconds = 0;
};

using LogFn = std::function<void(const std::string&)>;

/// Mini-batch Adam over the parameters selected by cfg.mode. With early
/// stopping and a dev set, dev BLEU of greedy decodes is measured after
/// every epoch and the best epoch's weights are restored at the end.
inline TrainLog train(ModelBundle& b, const std::vector<Prepared>& data, const std::vector<Prepared>& dev,
                      const TrainConfig& cfg, const bpe::Vocabulary* vocab = nullptr, const LogFn& log = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: no training data");
  auto t0 = std::chrono::steady_clock::now();
  auto params = model::apply_trainable(b, cfg.mode);
  ad::Adam opt(params);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch = (data.size() + cfg.batch - 1) / cfg.batch;
  const bool track = cfg.early_stopping && !dev.empty() && vocab;
  EarlyStopper stopper(cfg.patience);
  std::optional<ParameterStore> best;
  TrainLog tl;
  auto end_epoch = [&]() {
    ++tl.epochs;
    if (!track) return false;
    auto hyps = decode_all(b, *vocab, dev, 1, cfg.max_decode_len);
    double score = eval::bleu(hyps, references(dev));
    tl.dev_bleu.push_back(score);
    if (stopper.observe(score)) best = b.params.clone();
    if (log) log("epoch " + std::to_string(tl.epochs) + " dev_bleu " + std::to_string(score));
    return stopper.should_stop();
  };
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    std::size_t pos = step % per_epoch;
    if (pos == 0) repr::seeded_shuffle(order, rng);
    std::vector<const model::Seq2SeqExample*> batch;
    for (std::size_t i = pos * cfg.batch; i < std::min(data.size(), (pos + 1) * cfg.batch); ++i) {
      batch.push_back(&data[order[i]].ex);
    }
    opt.zero_grad();
    auto loss = model::batch_loss(b, batch);
    double lv = loss.item();
    if (!std::isfinite(lv)) {
      throw ad::NonFiniteError("training diverged at step " + std::to_string(step) + ": loss " + std::to_string(lv) +
                               ", lr " + std::to_string(lr_at(cfg.lr, step, cfg.max_steps)));
    }
    ad::backward(loss);
    double lr = lr_at(cfg.lr, step, cfg.max_steps);
    opt.step(static_cast<ad::Scalar>(lr));
    tl.losses.push_back(lv);
    tl.steps = step + 1;
    if (log && cfg.log_every && (step + 1) % cfg.log_every == 0) {
      log("step " + std::to_string(step + 1) + " loss " + std::to_string(lv) + " lr " + std::to_string(lr));
    }
    if (pos + 1 == per_epoch && end_epoch()) break;
  }
  if (tl.steps % per_epoch != 0 && track) end_epoch();
  if (best) {
    b.params.assign_from(*best);
    tl.best_epoch = stopper.best_epoch();
    tl.best_dev_bleu = stopper.best();
  }
  for (auto& [name, t] : b.params.items()) {
    t.zero_grad();
    t.set_requires_grad(false);
  }
  tl.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return tl;
}

// ---------------------------------------------------------------------------
// Reports.

struct Bucket {
  std::string name;
  std::size_t count = 0;
  double bleu = 0;
};

struct BucketSpec {
  std::string name;
  std::size_t lo, hi;  // inclusive
};

inline const std::vector<BucketSpec>& size_buckets() {
  static const std::vector<BucketSpec> b = {{"1-30", 1, 30}, {"31-60", 31, 60}, {">60", 61, SIZE_MAX}};
  return b;
}
inline const std::vector<BucketSpec>& diameter_buckets() {
  static const std::vector<BucketSpec> b = {{"1-10", 1, 10}, {"11-20", 11, 20}, {">20", 21, SIZE_MAX}};
  return b;
}
inline const std::vector<BucketSpec>& reentrancy_buckets() {
  static const std::vector<BucketSpec> b = {{"0", 0, 0}, {"1-3", 1, 3}, {"4-20", 4, 20}};
  return b;
}

/// Corpus BLEU per bucket; buckets without examples are omitted.
inline std::vector<Bucket> bucketize(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                                     const std::vector<std::size_t>& values, const std::vector<BucketSpec>& specs) {
  std::vector<Bucket> out;
  for (const auto& s : specs) {
    std::vector<std::string> h, r;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= s.lo && values[i] <= s.hi) {
        h.push_back(hyps[i]);
        r.push_back(refs[i]);
      }
    }
    if (h.empty()) continue;
    out.push_back({s.name, h.size(), eval::bleu(h, r)});
  }
  return out;
}

struct Breakdown {
  std::vector<Bucket> size, diameter, reentrancies;
};

inline Breakdown breakdown(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                           const std::vector<penman::GraphStats>& stats) {
  if (hyps.size() != refs.size() || hyps.size() != stats.size()) {
    throw std::invalid_argument("breakdown: input lengths differ");
  }
  std::vector<std::size_t> sz, dia, re;
  for (const auto& s : stats) {
    sz.push_back(s.size);
    dia.push_back(s.diameter);
    re.push_back(s.reentrancies);
  }
  return {bucketize(hyps, refs, sz, size_buckets()), bucketize(hyps, refs, dia, diameter_buckets()),
          bucketize(hyps, refs, re, reentrancy_buckets())};
}

/// Per-bucket BLEU of `run` minus `base` for buckets present in both.
inline std::vector<Bucket> delta(const std::vector<Bucket>& run, const std::vector<Bucket>& base) {
  std::vector<Bucket> out;
  for (const auto& r : run) {
    for (const auto& b : base) {
      if (b.name == r.name) out.push_back({r.name, r.count, r.bleu - b.bleu});
    }
  }
  return out;
}

struct MetricsReport {
  double bleu = 0;
  double chrf = 0;
  std::vector<double> example_chrf;
  Breakdown buckets;
  double trainable_fraction = 0;
  std::size_t steps = 0;
  double wall_seconds = 0;
};

inline MetricsReport evaluate(const std::vector<std::string>& hyps, const std::vector<Prepared>& data) {
  auto refs = references(data);
  MetricsReport m;
  m.bleu = eval::bleu(hyps, refs);
  m.chrf = eval::chrf(hyps, refs);
  std::vector<penman::GraphStats> stats;
  for (std::size_t i = 0; i < data.size(); ++i) {
    m.example_chrf.push_back(eval::chrf({hyps[i]}, {refs[i]}));
    stats.push_back(data[i].stats);
  }
  m.buckets = breakdown(hyps, refs, stats);
  return m;
}

inline nlohmann::json to_json(const std::vector<Bucket>& bs) {
  auto j = nlohmann::json::array();
  for (const auto& b : bs) j.push_back({{"bucket", b.name}, {"count", b.count}, {"bleu", b.bleu}});
  return j;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"bleu", m.bleu},
          {"chrf", m.chrf},
          {"example_chrf", m.example_chrf},
          {"by_size", to_json(m.buckets.size)},
          {"by_diameter", to_json(m.buckets.diameter)},
          {"by_reentrancies", to_json(m.buckets.reentrancies)},
          {"trainable_fraction", m.trainable_fraction},
          {"steps", m.steps},
          {"wall_seconds", m.wall_seconds}};
}

}  // namespace structadapt::train
