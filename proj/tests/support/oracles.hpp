// Brute-force dense references for the graph convolutions and helpers to
// build and permute token graphs.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "structadapt/adapters.hpp"

namespace structadapt::test {

using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Dense to_dense(const ad::Tensor& t) {
  Dense m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

/// D^-1/2 (A + I) D^-1/2 H W^T over default (non-reverse) edges, where
/// A[v][u] = 1 for an edge u -> v and D holds in-degree + 1.
inline Dense dense_gcn(const Dense& h, const repr::TokenGraph& tg, const Dense& w) {
  const auto n = h.rows();
  Dense a = Dense::Identity(n, n);
  for (const auto& e : tg.edges)
    if (e.relation == 0 && e.src != e.tgt) a(e.tgt, e.src) = 1;
  Eigen::VectorXd d = a.rowwise().sum();
  Dense norm(n, n);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index u = 0; u < n; ++u) norm(v, u) = a(v, u) / std::sqrt(d(v) * d(u));
  return norm * h * w.transpose();
}

/// Sum over relations of row-normalized A_r H W_r^T.
inline Dense dense_rgcn(const Dense& h, const repr::TokenGraph& tg, const std::vector<Dense>& w) {
  const auto n = h.rows();
  Dense out = Dense::Zero(n, w[0].rows());
  for (std::size_t r = 0; r < w.size(); ++r) {
    Dense a = Dense::Zero(n, n);
    for (const auto& e : tg.edges)
      if (e.relation == static_cast<int>(r)) a(e.tgt, e.src) = 1;
    for (Eigen::Index v = 0; v < n; ++v) {
      double s = a.row(v).sum();
      if (s > 0) a.row(v) /= s;
    }
    out += a * h * w[r].transpose();
  }
  return out;
}

/// Token graph from directed default edges, each with its reverse twin.
inline repr::TokenGraph graph_from(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& fwd) {
  std::set<repr::TokenEdge> es;
  for (auto [a, b] : fwd) {
    es.insert({a, b, 0});
    es.insert({b, a, 1});
  }
  repr::TokenGraph tg;
  tg.seq_len = n;
  tg.edges.assign(es.begin(), es.end());
  tg.position_origin.assign(n, 0);
  return tg;
}

inline repr::TokenGraph random_token_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> fwd;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && coin(rng)) fwd.emplace_back(a, b);
  return graph_from(n, fwd);
}

/// Every directed simple graph on n positions, encoded by bitmask over the
/// n(n-1) ordered pairs.
inline std::vector<repr::TokenGraph> all_token_graphs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) pairs.emplace_back(a, b);
  std::vector<repr::TokenGraph> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << pairs.size()); ++mask) {
    std::vector<std::pair<std::size_t, std::size_t>> fwd;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (mask >> i & 1) fwd.push_back(pairs[i]);
    out.push_back(graph_from(n, fwd));
  }
  return out;
}

/// Position p moves to perm[p].
inline repr::TokenGraph permute(const repr::TokenGraph& tg, const std::vector<std::size_t>& perm) {
  repr::TokenGraph out;
  out.seq_len = tg.seq_len;
  std::set<repr::TokenEdge> es;
  for (const auto& e : tg.edges) es.insert({perm[e.src], perm[e.tgt], e.relation});
  out.edges.assign(es.begin(), es.end());
  out.position_origin.assign(tg.seq_len, 0);
  return out;
}

inline ad::Tensor permute_rows(const ad::Tensor& h, const std::vector<std::size_t>& perm) {
  auto out = ad::Tensor::zeros(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) out.data()[perm[r] * h.cols() + c] = h(r, c);
  return out;
}

inline double max_abs_diff(const Dense& a, const Dense& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace structadapt::test
