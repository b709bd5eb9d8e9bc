// Sequential bottleneck adapters and structure-aware adapters whose
// bottleneck is a graph convolution over the token graph.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "structadapt/checkpoint.hpp"
#include "structadapt/repr.hpp"
#include "structadapt/tensor.hpp"

namespace structadapt::model {

using ad::Scalar;
using ad::Tensor;

enum class AdapterVariant { kNone, kAdapt, kStructGcn, kStructRgcn };

inline AdapterVariant parse_adapter_variant(const std::string& s) {
  if (s == "none") return AdapterVariant::kNone;
  if (s == "adapt") return AdapterVariant::kAdapt;
  if (s == "structadapt_gcn") return AdapterVariant::kStructGcn;
  if (s == "structadapt_rgcn") return AdapterVariant::kStructRgcn;
  throw std::invalid_argument("unknown adapter variant '" + s + "'");
}
inline std::string to_string(AdapterVariant v) {
  switch (v) {
    case AdapterVariant::kNone: return "none";
    case AdapterVariant::kAdapt: return "adapt";
    case AdapterVariant::kStructGcn: return "structadapt_gcn";
    default: return "structadapt_rgcn";
  }
}

/// How the neighbour term d_u of the GCN normalization is measured.
/// kInPlusSelf: |N(u)| = in-degree over default edges + 1.
/// kTotalPlusSelf: in- plus out-degree over default edges + 1 (for both d_v and d_u).
enum class GcnDegree { kInPlusSelf, kTotalPlusSelf };

inline GcnDegree parse_gcn_degree(const std::string& s) {
  if (s == "in") return GcnDegree::kInPlusSelf;
  if (s == "total") return GcnDegree::kTotalPlusSelf;
  throw std::invalid_argument("unknown gcn degree '" + s + "'");
}

/// `variant` selects the encoder adapter; the decoder, when enabled, always
/// uses the sequential adapter.
struct AdapterConfig {
  AdapterVariant variant = AdapterVariant::kNone;
  std::size_t hidden = 16;
  bool encoder = true;
  bool decoder = true;
  std::size_t num_relations = 2;
  std::size_t bases = 0;  // 0 = one free matrix per relation
  GcnDegree gcn_degree = GcnDegree::kInPlusSelf;

  bool encoder_active() const { return variant != AdapterVariant::kNone && encoder; }
  bool decoder_active() const { return variant != AdapterVariant::kNone && decoder; }
  bool structural() const {
    return variant == AdapterVariant::kStructGcn || variant == AdapterVariant::kStructRgcn;
  }
  void validate() const {
    if (hidden < 1) throw std::invalid_argument("adapter hidden width must be at least 1");
    if (variant == AdapterVariant::kStructRgcn && num_relations < 1) {
      throw std::invalid_argument("rgcn adapter needs at least one relation");
    }
  }
};

// ---------------------------------------------------------------------------
// Forward passes. Weight matrices are stored (out × in).

/// z = W_o relu(W_p LN(h)) + h, row by row.
inline Tensor adapt_forward(const Tensor& h, const Tensor& ln_gain, const Tensor& ln_bias,
                            const Tensor& down, const Tensor& up) {
  if (down.cols() != h.cols() || up.rows() != h.cols() || up.cols() != down.rows()) {
    throw ad::ShapeError("adapt_forward: weight shapes do not match hidden width");
  }
  Tensor x = ad::layer_norm(h, ln_gain, ln_bias);
  return ad::add(ad::linear(ad::relu(ad::linear(x, down)), up), h);
}

/// Normalized edge list of the GCN: for every position v, its in-neighbours
/// over non-reverse edges plus v itself, weighted 1/sqrt(d_v d_u).
inline std::vector<ad::WeightedEdge> gcn_edges(const repr::TokenGraph& tg, std::size_t n,
                                               const repr::RelationTable& rels,
                                               GcnDegree degree = GcnDegree::kInPlusSelf) {
  std::vector<std::set<std::size_t>> in(n), out(n);
  for (const auto& e : tg.edges) {
    if (e.src >= n || e.tgt >= n) throw ad::ShapeError("gcn: token graph larger than input");
    if (rels.is_reverse(e.relation) || e.src == e.tgt) continue;
    in[e.tgt].insert(e.src);
    out[e.src].insert(e.tgt);
  }
  std::vector<Scalar> deg(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t d = in[v].size() + 1;
    if (degree == GcnDegree::kTotalPlusSelf) d += out[v].size();
    deg[v] = static_cast<Scalar>(d);
  }
  std::vector<ad::WeightedEdge> edges;
  for (std::size_t v = 0; v < n; ++v) {
    edges.push_back({v, v, Scalar(1) / std::sqrt(deg[v] * deg[v])});
    for (auto u : in[v]) edges.push_back({u, v, Scalar(1) / std::sqrt(deg[v] * deg[u])});
  }
  return edges;
}

/// Per-relation mean aggregation lists: entry r holds (u, v, 1/|N_r(v)|).
inline std::vector<std::vector<ad::WeightedEdge>> rgcn_edges(const repr::TokenGraph& tg, std::size_t n,
                                                             std::size_t num_relations) {
  std::vector<std::map<std::size_t, std::set<std::size_t>>> nbrs(num_relations);
  for (const auto& e : tg.edges) {
    if (e.src >= n || e.tgt >= n) throw ad::ShapeError("rgcn: token graph larger than input");
    if (e.relation < 0 || static_cast<std::size_t>(e.relation) >= num_relations) {
      throw std::out_of_range("rgcn: relation id " + std::to_string(e.relation) + " not in table");
    }
    nbrs[e.relation][e.tgt].insert(e.src);
  }
  std::vector<std::vector<ad::WeightedEdge>> out(num_relations);
  for (std::size_t r = 0; r < num_relations; ++r) {
    for (const auto& [v, us] : nbrs[r]) {
      Scalar w = Scalar(1) / static_cast<Scalar>(us.size());
      for (auto u : us) out[r].push_back({u, v, w});
    }
  }
  return out;
}

/// g_v = sum over u in N(v) of W_g h_u / sqrt(d_v d_u).
inline Tensor gcn_conv(const Tensor& h, const repr::TokenGraph& tg, const Tensor& w_g,
                       const repr::RelationTable& rels = repr::RelationTable::default_reverse(),
                       GcnDegree degree = GcnDegree::kInPlusSelf) {
  auto edges = gcn_edges(tg, h.rows(), rels, degree);
  return ad::linear(ad::neighborhood_aggregate(h, edges, h.rows()), w_g);
}

/// g_v = sum over relations r of W_r · mean of h_u over u in N_r(v).
/// No self term; an empty neighbourhood contributes zero.
inline Tensor rgcn_conv(const Tensor& h, const repr::TokenGraph& tg, const std::vector<Tensor>& w_rel) {
  if (w_rel.empty()) throw std::invalid_argument("rgcn_conv: no relation weights");
  auto per_rel = rgcn_edges(tg, h.rows(), w_rel.size());
  Tensor g = Tensor::zeros(h.rows(), w_rel[0].rows());
  for (std::size_t r = 0; r < w_rel.size(); ++r) {
    if (per_rel[r].empty()) continue;
    g = ad::add(g, ad::linear(ad::neighborhood_aggregate(h, per_rel[r], h.rows()), w_rel[r]));
  }
  return g;
}

/// W_r = sum_b coef[r, b] · basis_b, where `bases` stores basis b flattened
/// (m·d values) in row b.
inline std::vector<Tensor> basis_weights(const Tensor& coef, const Tensor& bases, std::size_t m,
                                         std::size_t d) {
  if (coef.cols() != bases.rows() || bases.cols() != m * d) {
    throw ad::ShapeError("basis_weights: coefficient/basis shapes disagree");
  }
  Tensor all = ad::matmul(coef, bases);
  std::vector<Tensor> out;
  for (std::size_t r = 0; r < coef.rows(); ++r) out.push_back(ad::reshape(ad::slice_rows(all, r, 1), m, d));
  return out;
}

/// Encoder-side adapter weights of one layer, resolved from the store.
struct StructWeights {
  Tensor ln_gain, ln_bias;
  Tensor conv;                // GCN W_g (m × d)
  std::vector<Tensor> rel;    // RGCN W_r (m × d each)
  Tensor up;                  // W_e (d × m)
};

/// z_v = W_e relu(GraphConv(LN(h))_v) + h_v.
inline Tensor structadapt_forward(const Tensor& h, const repr::TokenGraph& tg, const StructWeights& w,
                                  AdapterVariant variant,
                                  const repr::RelationTable& rels = repr::RelationTable::default_reverse(),
                                  GcnDegree degree = GcnDegree::kInPlusSelf) {
  Tensor x = ad::layer_norm(h, w.ln_gain, w.ln_bias);
  Tensor g;
  if (variant == AdapterVariant::kStructGcn) {
    g = gcn_conv(x, tg, w.conv, rels, degree);
  } else if (variant == AdapterVariant::kStructRgcn) {
    g = rgcn_conv(x, tg, w.rel);
  } else {
    throw std::invalid_argument("structadapt_forward: not a structural variant");
  }
  return ad::add(ad::linear(ad::relu(g), w.up), h);
}

// ---------------------------------------------------------------------------
// Parameters.

inline std::string encoder_adapter_prefix(std::size_t layer) {
  return "adapter.enc." + std::to_string(layer) + ".";
}
inline std::string decoder_adapter_prefix(std::size_t layer) {
  return "adapter.dec." + std::to_string(layer) + ".";
}

/// Closed-form parameter count of one adapter at width d.
inline std::size_t adapter_layer_params(AdapterVariant variant, std::size_t d, std::size_t m,
                                        std::size_t relations = 2, std::size_t bases = 0) {
  switch (variant) {
    case AdapterVariant::kNone: return 0;
    case AdapterVariant::kAdapt:
    case AdapterVariant::kStructGcn: return 2 * d * m + 2 * d;
    case AdapterVariant::kStructRgcn:
      if (bases == 0) return relations * m * d + d * m + 2 * d;
      return relations * bases + bases * m * d + d * m + 2 * d;
  }
  return 0;
}

/// Registers adapter weights for `layers` encoder and decoder layers.
/// Up-projections start small so the adapters begin near identity.
inline void init_adapters(ParameterStore& store, std::size_t layers, std::size_t d,
                          const AdapterConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed ^ 0xada9u);
  const std::size_t m = cfg.hidden;
  const Scalar down_std = Scalar(1) / std::sqrt(static_cast<Scalar>(d));
  const Scalar up_std = Scalar(1e-2);
  auto ln = [&](const std::string& p) {
    auto& g = store.add(p + "ln.gain", 1, d);
    std::fill(g.data().begin(), g.data().end(), Scalar(1));
    store.add(p + "ln.bias", 1, d);
  };
  if (cfg.encoder_active()) {
    for (std::size_t l = 0; l < layers; ++l) {
      auto p = encoder_adapter_prefix(l);
      ln(p);
      switch (cfg.variant) {
        case AdapterVariant::kAdapt: ad::fill_normal(store.add(p + "down", m, d), down_std, rng); break;
        case AdapterVariant::kStructGcn: ad::fill_normal(store.add(p + "conv", m, d), down_std, rng); break;
        case AdapterVariant::kStructRgcn:
          if (cfg.bases == 0) {
            for (std::size_t r = 0; r < cfg.num_relations; ++r) {
              ad::fill_normal(store.add(p + "rel." + std::to_string(r), m, d), down_std, rng);
            }
          } else {
            ad::fill_normal(store.add(p + "basis.coef", cfg.num_relations, cfg.bases),
                            Scalar(1) / std::sqrt(static_cast<Scalar>(cfg.bases)), rng);
            ad::fill_normal(store.add(p + "basis.bases", cfg.bases, m * d), down_std, rng);
          }
          break;
        case AdapterVariant::kNone: break;
      }
      ad::fill_normal(store.add(p + "up", d, m), up_std, rng);
    }
  }
  if (cfg.decoder_active()) {
    for (std::size_t l = 0; l < layers; ++l) {
      auto p = decoder_adapter_prefix(l);
      ln(p);
      ad::fill_normal(store.add(p + "down", m, d), down_std, rng);
      ad::fill_normal(store.add(p + "up", d, m), up_std, rng);
    }
  }
}

/// Resolves the encoder structural weights of one layer (basis products
/// are recomputed on every call so gradients reach the coefficients).
inline StructWeights struct_weights(const ParameterStore& store, std::size_t layer, const AdapterConfig& cfg,
                                    std::size_t d) {
  auto p = encoder_adapter_prefix(layer);
  StructWeights w;
  w.ln_gain = store.get(p + "ln.gain");
  w.ln_bias = store.get(p + "ln.bias");
  w.up = store.get(p + "up");
  if (cfg.variant == AdapterVariant::kStructGcn) {
    w.conv = store.get(p + "conv");
  } else if (cfg.bases == 0) {
    for (std::size_t r = 0; r < cfg.num_relations; ++r) w.rel.push_back(store.get(p + "rel." + std::to_string(r)));
  } else {
    w.rel = basis_weights(store.get(p + "basis.coef"), store.get(p + "basis.bases"), cfg.hidden, d);
  }
  return w;
}

/// Applies the configured encoder adapter of `layer` to hidden states h.
inline Tensor apply_encoder_adapter(const ParameterStore& store, std::size_t layer, const AdapterConfig& cfg,
                                    const Tensor& h, const repr::TokenGraph* tg,
                                    const repr::RelationTable& rels) {
  if (!cfg.encoder_active()) return h;
  auto p = encoder_adapter_prefix(layer);
  if (cfg.variant == AdapterVariant::kAdapt) {
    return adapt_forward(h, store.get(p + "ln.gain"), store.get(p + "ln.bias"), store.get(p + "down"),
                         store.get(p + "up"));
  }
  if (!tg) throw std::invalid_argument("structural adapter needs a token graph");
  return structadapt_forward(h, *tg, struct_weights(store, layer, cfg, h.cols()), cfg.variant, rels,
                             cfg.gcn_degree);
}

inline Tensor apply_decoder_adapter(const ParameterStore& store, std::size_t layer, const AdapterConfig& cfg,
                                    const Tensor& h) {
  if (!cfg.decoder_active()) return h;
  auto p = decoder_adapter_prefix(layer);
  return adapt_forward(h, store.get(p + "ln.gain"), store.get(p + "ln.bias"), store.get(p + "down"),
                       store.get(p + "up"));
}

}  // namespace structadapt::model
