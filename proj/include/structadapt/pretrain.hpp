// Mask-token denoising pretraining of the backbone.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "structadapt/backbone.hpp"
#include "structadapt/bpe.hpp"
#include "structadapt/corpus.hpp"
#include "structadapt/repr.hpp"
#include "structadapt/train.hpp"

namespace structadapt::train {

struct PretrainConfig {
  std::size_t steps = 3000;
  double lr = 1e-3;
  std::size_t batch = 8;
  double mask_rate = 0.15;
  std::uint64_t seed = 7;
  std::size_t log_every = 200;
};

/// Replaces each non-special id with the mask id with probability `rate`.
inline std::vector<int> mask_tokens(const std::vector<int>& ids, double rate, std::mt19937_64& rng) {
  std::vector<int> out = ids;
  for (auto& t : out) {
    double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    if (t >= bpe::kByteBase && u < rate) t = bpe::kMask;
  }
  return out;
}

inline model::Seq2SeqExample denoising_example(const std::vector<int>& clean, double rate, std::mt19937_64& rng) {
  model::Seq2SeqExample ex;
  ex.source = mask_tokens(clean, rate, rng);
  ex.source.push_back(bpe::kEos);
  ex.target = clean;
  ex.target.push_back(bpe::kEos);
  return ex;
}

/// Text the backbone sees before adaptation: generated sentences plus the
/// canon and random linearizations of their graphs, each linearization
/// written the way the graph tokenizer reads it.
inline std::vector<std::string> pretraining_texts(std::size_t graphs, std::uint64_t seed,
                                                  const corpus::GenOptions& opt) {
  std::vector<std::string> out;
  for (const auto& r : corpus::generate_corpus(graphs, seed, opt)) {
    auto g = penman::parse_penman(r.amr);
    out.push_back(r.text);
    for (auto mode : {repr::LinMode::kCanon, repr::LinMode::kRandom}) {
      auto lin = repr::linearize(g, mode, repr::LinVariant::kNodesAndEdges, seed ^ corpus::fnv1a(r.amr));
      out.push_back(" " + lin.text());
    }
  }
  return out;
}

/// Trains every backbone weight to reconstruct masked text and returns the
/// bundle with all weights frozen. Zero steps return the initialization.
inline ModelBundle pretrain_backbone(const std::vector<std::string>& texts, const bpe::Vocabulary& vocab,
                                     const model::BackboneConfig& cfg, const PretrainConfig& pc,
                                     const LogFn& log = {}) {
  ModelBundle b = model::make_bundle(cfg, model::AdapterConfig{}, pc.seed);
  if (pc.steps == 0 || texts.empty()) return b;
  std::vector<std::vector<int>> clean;
  for (const auto& t : texts) {
    auto ids = vocab.encode(t);
    if (ids.size() + 1 > cfg.max_len) ids.resize(cfg.max_len - 1);
    if (!ids.empty()) clean.push_back(std::move(ids));
  }
  auto params = model::apply_trainable(b, TrainMode::kFinetuneAll);
  ad::Adam opt(params);
  std::mt19937_64 rng(pc.seed);
  std::vector<std::size_t> order(clean.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch = std::max<std::size_t>(1, clean.size() / pc.batch);
  for (std::size_t step = 0; step < pc.steps; ++step) {
    std::size_t pos = step % per_epoch;
    if (pos == 0) repr::seeded_shuffle(order, rng);
    std::vector<model::Seq2SeqExample> exs;
    for (std::size_t i = pos * pc.batch; i < std::min(clean.size(), (pos + 1) * pc.batch); ++i) {
      exs.push_back(denoising_example(clean[order[i]], pc.mask_rate, rng));
    }
    std::vector<const model::Seq2SeqExample*> batch;
    for (auto& e : exs) batch.push_back(&e);
    opt.zero_grad();
    auto loss = model::batch_loss(b, batch);
    if (!std::isfinite(loss.item())) throw ad::NonFiniteError("pretraining diverged at step " + std::to_string(step));
    ad::backward(loss);
    double lr = lr_at(pc.lr, step, pc.steps);
    opt.step(static_cast<ad::Scalar>(lr));
    if (log && pc.log_every && (step + 1) % pc.log_every == 0) {
      log("pretrain step " + std::to_string(step + 1) + " loss " + std::to_string(loss.item()));
    }
  }
  for (auto& [name, t] : b.params.items()) {
    t.zero_grad();
    t.set_requires_grad(false);
  }
  return b;
}

/// Teacher-forced argmax accuracy of reconstructing `texts` from masked
/// copies, over all target ids including the end-of-sequence id.
inline double reconstruction_accuracy(const ModelBundle& b, const bpe::Vocabulary& vocab,
                                      const std::vector<std::string>& texts, double mask_rate, std::uint64_t seed) {
  ad::NoGradGuard ng;
  std::mt19937_64 rng(seed);
  std::size_t right = 0, total = 0;
  for (const auto& t : texts) {
    auto ids = vocab.encode(t);
    if (ids.empty()) continue;
    auto ex = denoising_example(ids, mask_rate, rng);
    auto logits = model::teacher_forced_logits(b, ex);
    const std::size_t v = logits.cols();
    for (std::size_t i = 0; i < ex.target.size(); ++i) {
      auto row = logits.data().subspan(i * v, v);
      auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      right += best == ex.target[i];
      ++total;
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
}

}  // namespace structadapt::train
