// Small pre-norm transformer encoder-decoder with adapter insertion points.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "structadapt/adapters.hpp"
#include "structadapt/bpe.hpp"
#include "structadapt/checkpoint.hpp"
#include "structadapt/repr.hpp"
#include "structadapt/tensor.hpp"

namespace structadapt::model {

struct BackboneConfig {
  std::size_t layers = 2;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff = 128;
  std::size_t vocab = 512;
  std::size_t max_len = 128;

  void validate() const {
    if (layers < 1 || d < 1 || heads < 1 || ff < 1 || vocab < 1 || max_len < 1) {
      throw std::invalid_argument("backbone dimensions must be positive");
    }
    if (d % heads) throw std::invalid_argument("model width must be divisible by the head count");
  }
};

struct ModelBundle {
  BackboneConfig backbone;
  AdapterConfig adapter;
  repr::RelationTable relations = repr::RelationTable::default_reverse();
  ParameterStore params;
};

inline std::string enc_prefix(std::size_t l) { return "backbone.enc." + std::to_string(l) + "."; }
inline std::string dec_prefix(std::size_t l) { return "backbone.dec." + std::to_string(l) + "."; }

/// Registers backbone weights. Matrices are (out × in) and drawn from
/// N(0, 1/in); residual output projections are further scaled by 1/sqrt(2L).
inline void init_backbone(ParameterStore& store, const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.d;
  auto inv_sqrt = [](std::size_t n) { return ad::Scalar(1) / std::sqrt(static_cast<ad::Scalar>(n)); };
  const ad::Scalar out_scale = inv_sqrt(2 * cfg.layers);
  auto mat = [&](const std::string& name, std::size_t rows, std::size_t cols, ad::Scalar extra = 1) {
    ad::fill_normal(store.add(name, rows, cols), inv_sqrt(cols) * extra, rng);
  };
  auto ln = [&](const std::string& name) {
    auto& g = store.add(name + ".gain", 1, d);
    std::fill(g.data().begin(), g.data().end(), ad::Scalar(1));
    store.add(name + ".bias", 1, d);
  };
  auto attn = [&](const std::string& p) {
    mat(p + "q", d, d);
    mat(p + "k", d, d);
    mat(p + "v", d, d);
    mat(p + "o", d, d, out_scale);
  };
  ad::fill_normal(store.add("backbone.embed", cfg.vocab, d), ad::Scalar(1), rng);
  ad::fill_normal(store.add("backbone.enc_pos", cfg.max_len, d), ad::Scalar(0.1), rng);
  ad::fill_normal(store.add("backbone.dec_pos", cfg.max_len, d), ad::Scalar(0.1), rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto p = enc_prefix(l);
    ln(p + "ln1");
    attn(p + "attn.");
    ln(p + "ln2");
    mat(p + "ff.w1", cfg.ff, d);
    mat(p + "ff.w2", d, cfg.ff, out_scale);
  }
  ln("backbone.enc.final_ln");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto p = dec_prefix(l);
    ln(p + "ln1");
    attn(p + "self.");
    ln(p + "ln2");
    attn(p + "cross.");
    ln(p + "ln3");
    mat(p + "ff.w1", cfg.ff, d);
    mat(p + "ff.w2", d, cfg.ff, out_scale);
  }
  ln("backbone.dec.final_ln");
  mat("backbone.lm_head", cfg.vocab, d);
}

/// Fresh bundle with backbone and adapter weights initialized from `seed`.
inline ModelBundle make_bundle(const BackboneConfig& bb, const AdapterConfig& adapter, std::uint64_t seed,
                               repr::RelationTable rels = repr::RelationTable::default_reverse()) {
  ModelBundle b;
  b.backbone = bb;
  b.adapter = adapter;
  b.relations = std::move(rels);
  if (adapter.variant == AdapterVariant::kStructRgcn) b.adapter.num_relations = b.relations.size();
  init_backbone(b.params, bb, seed);
  init_adapters(b.params, bb.layers, bb.d, b.adapter, seed + 1);
  return b;
}

/// Replaces the adapter configuration of a bundle that shares `base`'s
/// backbone weights (copied) with freshly initialized adapters.
inline ModelBundle attach_adapters(const ModelBundle& base, const AdapterConfig& adapter, std::uint64_t seed,
                                   repr::RelationTable rels = repr::RelationTable::default_reverse()) {
  ModelBundle b;
  b.backbone = base.backbone;
  b.adapter = adapter;
  b.relations = std::move(rels);
  if (adapter.variant == AdapterVariant::kStructRgcn) b.adapter.num_relations = b.relations.size();
  for (const auto& [name, t] : base.params.items()) {
    if (name.rfind("backbone.", 0) != 0) continue;
    auto& c = b.params.add(name, t.rows(), t.cols());
    std::copy(t.data().begin(), t.data().end(), c.data().begin());
  }
  init_adapters(b.params, b.backbone.layers, b.backbone.d, b.adapter, seed + 1);
  return b;
}

// ---------------------------------------------------------------------------
// Layers.

namespace detail {

inline ad::Tensor ln(const ParameterStore& s, const std::string& name, const ad::Tensor& x) {
  return ad::layer_norm(x, s.get(name + ".gain"), s.get(name + ".bias"));
}

inline ad::Tensor ffn(const ParameterStore& s, const std::string& p, const ad::Tensor& x) {
  return ad::linear(ad::relu(ad::linear(x, s.get(p + "ff.w1"))), s.get(p + "ff.w2"));
}

/// Multi-head attention of projected queries over projected keys/values.
/// `allowed` is row-major (queries × keys); null allows everything.
inline ad::Tensor attend(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& v, const ad::Tensor& wo,
                         std::size_t heads, const std::vector<std::uint8_t>* allowed) {
  const std::size_t d = q.cols(), dh = d / heads;
  const ad::Scalar scale = ad::Scalar(1) / std::sqrt(static_cast<ad::Scalar>(dh));
  std::vector<ad::Tensor> ctx;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * dh, dh);
    auto kh = ad::slice_cols(k, h * dh, dh);
    auto vh = ad::slice_cols(v, h * dh, dh);
    auto p = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale), allowed);
    ctx.push_back(ad::matmul(p, vh));
  }
  return ad::linear(heads == 1 ? ctx[0] : ad::concat_cols(ctx), wo);
}

}  // namespace detail

/// Encoder result. `hidden[l]` is layer l's output after the FFN residual
/// and before its adapter; `out` is the final normalized sequence.
struct EncoderOutput {
  std::vector<ad::Tensor> hidden;
  ad::Tensor out;
  std::vector<std::uint8_t> key_ok;  // 0 at padding positions
};

/// Key mask: every query may attend to every non-pad position.
inline std::vector<std::uint8_t> pad_key_mask(const std::vector<int>& ids) {
  std::vector<std::uint8_t> ok(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ok[i] = ids[i] != bpe::kPad;
  return ok;
}

inline EncoderOutput encode(const ModelBundle& b, const std::vector<int>& ids,
                            const repr::TokenGraph* tg = nullptr) {
  const auto& cfg = b.backbone;
  const auto& s = b.params;
  const std::size_t n = ids.size();
  if (n == 0) throw std::invalid_argument("encode: empty input");
  if (n > cfg.max_len) throw std::length_error("encode: input of " + std::to_string(n) + " tokens exceeds backbone.max_len " + std::to_string(cfg.max_len));
  EncoderOutput res;
  res.key_ok = pad_key_mask(ids);
  bool any = false;
  for (auto v : res.key_ok) any = any || v;
  if (!any) throw std::invalid_argument("encode: input is all padding");
  std::vector<std::uint8_t> allowed(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) allowed[i * n + j] = res.key_ok[j];

  ad::Tensor x = ad::add(ad::gather_rows(s.get("backbone.embed"), ids), ad::slice_rows(s.get("backbone.enc_pos"), 0, n));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto p = enc_prefix(l);
    auto a = detail::ln(s, p + "ln1", x);
    auto att = detail::attend(ad::linear(a, s.get(p + "attn.q")), ad::linear(a, s.get(p + "attn.k")),
                              ad::linear(a, s.get(p + "attn.v")), s.get(p + "attn.o"), cfg.heads, &allowed);
    x = ad::add(x, att);
    x = ad::add(x, detail::ffn(s, p, detail::ln(s, p + "ln2", x)));
    res.hidden.push_back(x);
    x = apply_encoder_adapter(s, l, b.adapter, x, tg, b.relations);
  }
  res.out = detail::ln(s, "backbone.enc.final_ln", x);
  return res;
}

/// Per-layer key/value cache. Cross-attention projections are computed
/// once per encoder output; self-attention rows grow with each call.
struct DecoderCache {
  std::vector<ad::Tensor> self_k, self_v, cross_k, cross_v;
  std::vector<std::uint8_t> enc_ok;
  std::size_t len = 0;
};

inline DecoderCache start_decoder(const ModelBundle& b, const EncoderOutput& enc) {
  DecoderCache c;
  const auto& s = b.params;
  for (std::size_t l = 0; l < b.backbone.layers; ++l) {
    auto p = dec_prefix(l);
    c.cross_k.push_back(ad::linear(enc.out, s.get(p + "cross.k")));
    c.cross_v.push_back(ad::linear(enc.out, s.get(p + "cross.v")));
  }
  c.self_k.resize(b.backbone.layers);
  c.self_v.resize(b.backbone.layers);
  c.enc_ok = enc.key_ok;
  return c;
}

/// Runs the decoder over `ids` placed at positions cache.len onwards and
/// returns their next-token logits (ids.size() × vocab). Training passes
/// the whole shifted target at once; decoding passes one id per call.
inline ad::Tensor decode_step(const ModelBundle& b, DecoderCache& cache, const std::vector<int>& ids) {
  const auto& cfg = b.backbone;
  const auto& s = b.params;
  const std::size_t t = ids.size(), p0 = cache.len, total = p0 + t;
  if (t == 0) throw std::invalid_argument("decode_step: no input ids");
  if (total > cfg.max_len) throw std::length_error("decode_step: output longer than max_len");
  const std::size_t ne = cache.enc_ok.size();
  std::vector<std::uint8_t> causal(t * total), cross(t * ne);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < total; ++j) causal[i * total + j] = j <= p0 + i;
    for (std::size_t j = 0; j < ne; ++j) cross[i * ne + j] = cache.enc_ok[j];
  }
  ad::Tensor x = ad::add(ad::gather_rows(s.get("backbone.embed"), ids), ad::slice_rows(s.get("backbone.dec_pos"), p0, t));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto p = dec_prefix(l);
    auto a = detail::ln(s, p + "ln1", x);
    auto k = ad::linear(a, s.get(p + "self.k"));
    auto v = ad::linear(a, s.get(p + "self.v"));
    if (p0 > 0) {
      k = ad::concat_rows({cache.self_k[l], k});
      v = ad::concat_rows({cache.self_v[l], v});
    }
    cache.self_k[l] = k;
    cache.self_v[l] = v;
    x = ad::add(x, detail::attend(ad::linear(a, s.get(p + "self.q")), k, v, s.get(p + "self.o"), cfg.heads, &causal));
    auto c = detail::ln(s, p + "ln2", x);
    x = ad::add(x, detail::attend(ad::linear(c, s.get(p + "cross.q")), cache.cross_k[l], cache.cross_v[l],
                                  s.get(p + "cross.o"), cfg.heads, &cross));
    x = ad::add(x, detail::ffn(s, p, detail::ln(s, p + "ln3", x)));
    x = apply_decoder_adapter(s, l, b.adapter, x);
  }
  cache.len = total;
  return ad::linear(detail::ln(s, "backbone.dec.final_ln", x), s.get("backbone.lm_head"));
}

/// One training pair. `target` ends with the end-of-sequence id; the
/// decoder input is the target shifted right behind the pad/start id.
struct Seq2SeqExample {
  std::vector<int> source;
  std::optional<repr::TokenGraph> graph;
  std::vector<int> target;
};

inline std::vector<int> shift_right(const std::vector<int>& target) {
  std::vector<int> in{bpe::kPad};
  in.insert(in.end(), target.begin(), target.end() - (target.empty() ? 0 : 1));
  return in;
}

/// Teacher-forced logits (target.size() × vocab).
inline ad::Tensor teacher_forced_logits(const ModelBundle& b, const Seq2SeqExample& ex) {
  if (ex.target.empty()) throw std::invalid_argument("empty target");
  auto enc = encode(b, ex.source, ex.graph ? &*ex.graph : nullptr);
  auto cache = start_decoder(b, enc);
  return decode_step(b, cache, shift_right(ex.target));
}

/// Mean token negative log-likelihood of the target, pad targets excluded.
inline ad::Tensor loss(const ModelBundle& b, const Seq2SeqExample& ex) {
  return ad::cross_entropy(teacher_forced_logits(b, ex), ex.target, bpe::kPad);
}

/// Summed negative log-likelihood over a batch divided by its non-pad
/// target token count.
inline ad::Tensor batch_loss(const ModelBundle& b, const std::vector<const Seq2SeqExample*>& batch) {
  std::size_t tokens = 0;
  for (auto* ex : batch)
    for (int t : ex->target) tokens += t != bpe::kPad;
  if (!tokens) throw std::invalid_argument("batch has no target tokens");
  ad::Tensor total;
  for (auto* ex : batch) {
    std::size_t n = 0;
    for (int t : ex->target) n += t != bpe::kPad;
    if (!n) continue;
    auto part = ad::scale(loss(b, *ex), static_cast<ad::Scalar>(n) / static_cast<ad::Scalar>(tokens));
    total = total.defined() ? ad::add(total, part) : part;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Trainable sets and parameter accounting.

enum class TrainMode { kFinetuneAll, kFtTop2, kFtBottom2, kAdaptersOnly };

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "finetune_all") return TrainMode::kFinetuneAll;
  if (s == "ft_top2") return TrainMode::kFtTop2;
  if (s == "ft_bottom2") return TrainMode::kFtBottom2;
  if (s == "adapters_only") return TrainMode::kAdaptersOnly;
  throw std::invalid_argument("unknown training mode '" + s + "'");
}
inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kFinetuneAll: return "finetune_all";
    case TrainMode::kFtTop2: return "ft_top2";
    case TrainMode::kFtBottom2: return "ft_bottom2";
    default: return "adapters_only";
  }
}

inline bool is_adapter_param(const std::string& name) { return name.rfind("adapter.", 0) == 0; }

/// Name predicate for trainable parameters. Layer-restricted modes cover
/// the transformer blocks only; embeddings, positions, final norms and the
/// output projection stay frozen outside finetune_all.
inline std::function<bool(const std::string&)> trainable_mask(TrainMode mode, std::size_t layers) {
  switch (mode) {
    case TrainMode::kFinetuneAll: return [](const std::string&) { return true; };
    case TrainMode::kAdaptersOnly: return [](const std::string& n) { return is_adapter_param(n); };
    case TrainMode::kFtTop2:
    case TrainMode::kFtBottom2: {
      std::size_t lo = 0, hi = std::min<std::size_t>(2, layers);
      if (mode == TrainMode::kFtTop2) {
        lo = layers >= 2 ? layers - 2 : 0;
        hi = layers;
      }
      return [lo, hi](const std::string& n) {
        for (const char* side : {"backbone.enc.", "backbone.dec."}) {
          std::string s = side;
          if (n.rfind(s, 0) != 0) continue;
          auto rest = n.substr(s.size());
          if (rest.empty() || !std::isdigit(static_cast<unsigned char>(rest[0]))) return false;
          std::size_t l = std::stoul(rest);
          return l >= lo && l < hi;
        }
        return false;
      };
    }
  }
  throw std::invalid_argument("unknown training mode");
}

/// Sets requires_grad per the mode and returns the trainable tensors.
inline std::vector<ad::Tensor> apply_trainable(ModelBundle& b, TrainMode mode) {
  auto keep = trainable_mask(mode, b.backbone.layers);
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : b.params.items()) {
    bool on = keep(name);
    t.set_requires_grad(on);
    t.zero_grad();
    if (on) out.push_back(t);
  }
  return out;
}

struct ParamCount {
  std::size_t trainable = 0;
  std::size_t total = 0;
  double fraction() const { return total ? static_cast<double>(trainable) / static_cast<double>(total) : 0.0; }
};

inline ParamCount count_params(const ModelBundle& b, TrainMode mode) {
  auto keep = trainable_mask(mode, b.backbone.layers);
  ParamCount c;
  for (const auto& [name, t] : b.params.items()) {
    c.total += t.numel();
    if (keep(name)) c.trainable += t.numel();
  }
  return c;
}

/// Closed-form backbone parameter count.
inline std::size_t backbone_params(const BackboneConfig& c) {
  const std::size_t d = c.d;
  std::size_t enc_layer = 2 * 2 * d + 4 * d * d + 2 * d * c.ff;
  std::size_t dec_layer = 3 * 2 * d + 8 * d * d + 2 * d * c.ff;
  return c.vocab * d * 2 + 2 * c.max_len * d + c.layers * (enc_layer + dec_layer) + 2 * 2 * d;
}

// ---------------------------------------------------------------------------
// Decoding.

inline std::vector<int> greedy_decode(const ModelBundle& b, const std::vector<int>& source,
                                      const repr::TokenGraph* tg, std::size_t max_len) {
  ad::NoGradGuard ng;
  auto enc = encode(b, source, tg);
  auto cache = start_decoder(b, enc);
  std::vector<int> out;
  int prev = bpe::kPad;
  max_len = std::min(max_len, b.backbone.max_len);
  while (out.size() < max_len) {
    auto logits = decode_step(b, cache, {prev});
    auto row = logits.data();
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    if (best == bpe::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace structadapt::model
