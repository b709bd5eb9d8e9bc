// Graph-to-sequence plumbing: the unlabeled bipartite graph, depth-first
// linearizations, and token-level adjacency for the structural adapters.
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "structadapt/bpe.hpp"
#include "structadapt/penman.hpp"

namespace structadapt::repr {

using penman::AmrGraph;

/// Nodes 0..|V0|-1 are the concept nodes of the source graph in order;
/// node |V0|+k is the role node of edge k.
struct UnlabeledGraph {
  struct Node {
    std::size_t id;
    std::string label;
    bool is_role;
  };
  std::vector<Node> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t num_concepts = 0;
};

inline UnlabeledGraph to_unlabeled(const AmrGraph& g) {
  UnlabeledGraph u;
  u.num_concepts = g.nodes.size();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) u.nodes.push_back({i, g.nodes[i].label, false});
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    std::size_t r = g.nodes.size() + e;
    u.nodes.push_back({r, g.edges[e].role, true});
    u.edges.emplace_back(g.edges[e].source, r);
    u.edges.emplace_back(r, g.edges[e].target);
  }
  return u;
}

enum class LinMode { kCanon, kReconf, kRandom };
enum class LinVariant { kNodesAndEdges, kNodesOnly };

inline LinMode parse_lin_mode(const std::string& s) {
  if (s == "canon") return LinMode::kCanon;
  if (s == "reconf") return LinMode::kReconf;
  if (s == "random") return LinMode::kRandom;
  throw std::invalid_argument("unknown linearization mode '" + s + "'");
}
inline std::string to_string(LinMode m) {
  switch (m) {
    case LinMode::kCanon: return "canon";
    case LinMode::kReconf: return "reconf";
    default: return "random";
  }
}
inline LinVariant parse_lin_variant(const std::string& s) {
  if (s == "nodes_and_edges") return LinVariant::kNodesAndEdges;
  if (s == "nodes_only") return LinVariant::kNodesOnly;
  throw std::invalid_argument("unknown linearization variant '" + s + "'");
}
inline std::string to_string(LinVariant v) {
  return v == LinVariant::kNodesAndEdges ? "nodes_and_edges" : "nodes_only";
}

inline constexpr std::size_t kNoOrigin = SIZE_MAX;

/// Symbol sequence of one traversal. `origin[i]` is the node id in
/// to_unlabeled(g) that symbol i mentions. `penman` renders the same
/// traversal with variables and brackets, so it can be parsed back.
struct Linearization {
  std::vector<std::string> symbols;
  std::vector<std::size_t> origin;
  LinMode mode = LinMode::kCanon;
  LinVariant variant = LinVariant::kNodesAndEdges;
  std::string penman;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i) out += ' ';
      out += symbols[i];
    }
    return out;
  }
};

/// Seeded integer draws that do not depend on the standard library's
/// distribution implementations, so shuffles are reproducible everywhere.
inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return n <= 1 ? 0 : static_cast<std::size_t>(rng() % n);
}
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_index(rng, i)]);
}

namespace detail {

struct Emitter : penman::LayoutVisitor {
  const AmrGraph& g;  // edges as traversed (stored or normalized orientation)
  LinVariant variant;
  Linearization& lin;
  Emitter(const AmrGraph& graph, LinVariant v, Linearization& out) : g(graph), variant(v), lin(out) {}

  void mention(std::size_t n) {
    lin.symbols.push_back(g.nodes[n].label);
    lin.origin.push_back(n);
  }
  void open(std::size_t n) override {
    if (!lin.penman.empty()) lin.penman += ' ';
    lin.penman += "(" + g.nodes[n].var + " / " + g.nodes[n].label;
    mention(n);
  }
  void close(std::size_t) override { lin.penman += ")"; }
  void role(std::size_t e, bool inverted) override {
    std::string r = inverted ? penman::invert_role(g.edges[e].role) : g.edges[e].role;
    lin.penman += " " + r;
    if (variant == LinVariant::kNodesAndEdges) {
      lin.symbols.push_back(r);
      lin.origin.push_back(g.nodes.size() + e);
    }
  }
  void revisit(std::size_t n) override {
    lin.penman += " " + g.nodes[n].var;
    mention(n);
  }
  void constant(std::size_t n) override {
    lin.penman += " " + g.nodes[n].label;
    mention(n);
  }
};

// Depth-first walk over the undirected graph from `start`; at each node the
// untraversed incident edges are visited in a seeded random order, and an
// edge walked against its direction is rendered with an inverse role.
inline void shuffled_layout(const AmrGraph& g, std::size_t start, std::mt19937_64& rng,
                            penman::LayoutVisitor& v) {
  auto inc = penman::incident_edges(g);
  std::vector<bool> visited(g.nodes.size(), false);
  std::vector<bool> emitted(g.edges.size(), false);
  auto visit = [&](auto&& self, std::size_t n) -> void {
    visited[n] = true;
    if (g.nodes[n].constant) {
      v.constant(n);
      return;
    }
    v.open(n);
    auto order = inc[n];
    seeded_shuffle(order, rng);
    for (auto e : order) {
      if (emitted[e]) continue;
      const auto& edge = g.edges[e];
      bool out = edge.source == n;
      std::size_t other = out ? edge.target : edge.source;
      // A constant can only be written as a value, never as a head.
      if (!out && g.nodes[other].constant) continue;
      emitted[e] = true;
      v.role(e, !out);
      if (visited[other]) {
        if (g.nodes[other].constant) {
          v.constant(other);
        } else {
          v.revisit(other);
        }
      } else {
        self(self, other);
      }
    }
    v.close(n);
  };
  visit(visit, start);
}

}  // namespace detail

struct LinearizeOptions {
  LinMode mode = LinMode::kCanon;
  LinVariant variant = LinVariant::kNodesAndEdges;
  std::uint64_t seed = 0;
  /// Overrides the seeded start node of random linearizations.
  std::optional<std::size_t> start;
};

/// Depth-first linearization. canon follows the stored layout; reconf keeps
/// the root and visits edges in seeded order in either direction; random
/// additionally starts from a seeded non-constant node. Reentrant second
/// visits emit the concept.
inline Linearization linearize(const AmrGraph& g, const LinearizeOptions& opt) {
  Linearization lin;
  lin.mode = opt.mode;
  lin.variant = opt.variant;
  if (g.nodes.empty()) return lin;
  if (opt.mode == LinMode::kCanon) {
    detail::Emitter em(g, opt.variant, lin);
    penman::canonical_layout(g, em);
    return lin;
  }
  AmrGraph norm = penman::normalize_inverse_roles(g);
  std::mt19937_64 rng(opt.seed);
  std::size_t start = norm.root;
  if (opt.mode == LinMode::kRandom) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < norm.nodes.size(); ++i) {
      if (!norm.nodes[i].constant) candidates.push_back(i);
    }
    start = opt.start ? *opt.start : candidates[draw_index(rng, candidates.size())];
    if (norm.nodes.at(start).constant) throw std::invalid_argument("linearize: constant start node");
  }
  detail::Emitter em(norm, opt.variant, lin);
  detail::shuffled_layout(norm, start, rng, em);
  return lin;
}

inline Linearization linearize(const AmrGraph& g, LinMode mode, LinVariant variant,
                               std::uint64_t seed) {
  return linearize(g, LinearizeOptions{mode, variant, seed, std::nullopt});
}

/// Relation ids of the token graph. With nodes and edges in the sequence
/// there are two: default (0) and reverse (1). With nodes only, every role
/// seen in training gets a forward and a reverse id, and a single "unknown"
/// id covers roles not in the table.
class RelationTable {
 public:
  static RelationTable default_reverse() {
    RelationTable t;
    t.names_ = {"default", "reverse"};
    t.reverse_ = {false, true};
    t.typed_ = false;
    return t;
  }
  static RelationTable typed(const std::set<std::string>& roles) {
    RelationTable t;
    t.typed_ = true;
    for (const auto& r : roles) {
      t.forward_ids_[r] = static_cast<int>(t.names_.size());
      t.names_.push_back(r);
      t.reverse_.push_back(false);
      t.reverse_ids_[r] = static_cast<int>(t.names_.size());
      t.names_.push_back(r + "-rev");
      t.reverse_.push_back(true);
    }
    t.unknown_ = static_cast<int>(t.names_.size());
    t.names_.push_back("unknown");
    t.reverse_.push_back(false);
    return t;
  }

  std::size_t size() const { return names_.size(); }
  bool typed() const { return typed_; }
  const std::string& name(int id) const { return names_.at(id); }
  bool is_reverse(int id) const { return reverse_.at(id); }
  const std::vector<std::string>& names() const { return names_; }

  int forward(const std::string& role) const {
    if (!typed_) return 0;
    auto it = forward_ids_.find(role);
    return it == forward_ids_.end() ? unknown_ : it->second;
  }
  int reverse(const std::string& role) const {
    if (!typed_) return 1;
    auto it = reverse_ids_.find(role);
    return it == reverse_ids_.end() ? unknown_ : it->second;
  }

 private:
  std::vector<std::string> names_;
  std::vector<bool> reverse_;
  std::map<std::string, int> forward_ids_, reverse_ids_;
  int unknown_ = -1;
  bool typed_ = false;
};

/// Role labels (after inverse-role normalization) observed in a set of graphs.
inline std::set<std::string> observed_roles(const std::vector<AmrGraph>& graphs) {
  std::set<std::string> roles;
  for (const auto& g : graphs) {
    for (const auto& e : penman::normalize_inverse_roles(g).edges) roles.insert(e.role);
  }
  return roles;
}

inline RelationTable relation_table(LinVariant variant, const std::set<std::string>& roles = {}) {
  return variant == LinVariant::kNodesAndEdges ? RelationTable::default_reverse()
                                               : RelationTable::typed(roles);
}

/// Token ids of a linearization plus the position span of every symbol.
/// Each symbol is encoded with a leading space so graph concepts share
/// subwords with running text. An end-of-sequence id closes the input.
struct Tokenization {
  std::vector<int> ids;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // begin, count
};

inline Tokenization tokenize(const bpe::Vocabulary& vocab, const Linearization& lin) {
  Tokenization t;
  for (const auto& s : lin.symbols) {
    auto ids = vocab.encode(" " + s);
    t.spans.emplace_back(t.ids.size(), ids.size());
    t.ids.insert(t.ids.end(), ids.begin(), ids.end());
  }
  t.ids.push_back(bpe::kEos);
  return t;
}

enum class Rep { kRep1, kRep2, kRep3, kComplete };

inline Rep parse_rep(const std::string& s) {
  if (s == "rep1") return Rep::kRep1;
  if (s == "rep2") return Rep::kRep2;
  if (s == "rep3") return Rep::kRep3;
  if (s == "complete") return Rep::kComplete;
  throw std::invalid_argument("unknown graph representation '" + s + "'");
}
inline std::string to_string(Rep r) {
  switch (r) {
    case Rep::kRep1: return "rep1";
    case Rep::kRep2: return "rep2";
    case Rep::kRep3: return "rep3";
    default: return "complete";
  }
}

struct TokenEdge {
  std::size_t src;
  std::size_t tgt;
  int relation;
  auto operator<=>(const TokenEdge&) const = default;
};

inline constexpr std::size_t kSpecialPosition = SIZE_MAX;

struct TokenGraph {
  std::size_t seq_len = 0;
  std::vector<TokenEdge> edges;  // sorted, unique
  std::vector<std::size_t> position_origin;
};

/// Token-level adjacency. Every default edge gets a reverse twin; rep2/rep3
/// chain the tokens of multi-token mentions in reading order; all mentions of
/// one node are connected to each other; special positions stay isolated.
inline TokenGraph build_token_graph(const UnlabeledGraph& u, const Linearization& lin,
                                    const Tokenization& tok, Rep rep,
                                    const RelationTable& rels = RelationTable::default_reverse()) {
  if (tok.spans.size() != lin.symbols.size()) {
    throw std::invalid_argument("build_token_graph: tokenization does not match linearization");
  }
  TokenGraph tg;
  tg.seq_len = tok.ids.size();
  tg.position_origin.assign(tg.seq_len, kSpecialPosition);
  std::vector<std::vector<std::size_t>> mentions(u.nodes.size());
  for (std::size_t s = 0; s < lin.symbols.size(); ++s) {
    auto [begin, count] = tok.spans[s];
    if (count == 0) {
      throw std::invalid_argument("build_token_graph: symbol '" + lin.symbols[s] +
                                  "' has no token positions");
    }
    if (lin.origin[s] == kNoOrigin) continue;
    mentions.at(lin.origin[s]).push_back(s);
    for (std::size_t p = begin; p < begin + count; ++p) tg.position_origin[p] = lin.origin[s];
  }

  std::set<TokenEdge> edges;
  auto add = [&](std::size_t a, std::size_t b, int fwd, int rev) {
    edges.insert({a, b, fwd});
    edges.insert({b, a, rev});
  };
  auto connect = [&](std::size_t sa, std::size_t sb, int fwd, int rev) {
    auto [ab, ac] = tok.spans[sa];
    auto [bb, bc] = tok.spans[sb];
    switch (rep) {
      case Rep::kRep1:
      case Rep::kComplete:
        for (std::size_t i = ab; i < ab + ac; ++i)
          for (std::size_t j = bb; j < bb + bc; ++j) add(i, j, fwd, rev);
        break;
      case Rep::kRep2: add(ab + ac - 1, bb, fwd, rev); break;
      case Rep::kRep3: add(ab, bb, fwd, rev); break;
    }
  };

  if (rep == Rep::kComplete) {
    std::vector<std::size_t> graph_pos;
    for (std::size_t p = 0; p < tg.seq_len; ++p) {
      if (tg.position_origin[p] != kSpecialPosition) graph_pos.push_back(p);
    }
    for (auto a : graph_pos)
      for (auto b : graph_pos)
        if (a != b) add(a, b, 0, 1);
  } else {
    if (!rels.typed()) {
      for (auto [a, b] : u.edges)
        for (auto sa : mentions[a])
          for (auto sb : mentions[b]) connect(sa, sb, 0, 1);
    } else {
      // Role nodes are absent from the sequence: connect head to dependent
      // directly under the role's relation id.
      for (const auto& node : u.nodes) {
        if (!node.is_role) continue;
        std::size_t head = SIZE_MAX, dep = SIZE_MAX;
        for (auto [a, b] : u.edges) {
          if (b == node.id) head = a;
          if (a == node.id) dep = b;
        }
        int fwd = rels.forward(node.label), rev = rels.reverse(node.label);
        for (auto sa : mentions[head])
          for (auto sb : mentions[dep]) connect(sa, sb, fwd, rev);
      }
    }
    // Mentions of one node are one node.
    int same_fwd = rels.typed() ? rels.forward("") : 0;
    int same_rev = rels.typed() ? rels.forward("") : 1;
    for (const auto& ms : mentions)
      for (std::size_t i = 0; i < ms.size(); ++i)
        for (std::size_t j = i + 1; j < ms.size(); ++j) connect(ms[i], ms[j], same_fwd, same_rev);
    if (rep == Rep::kRep2 || rep == Rep::kRep3) {
      int fwd = rels.typed() ? rels.forward("") : 0;
      int rev = rels.typed() ? rels.forward("") : 1;
      for (std::size_t s = 0; s < lin.symbols.size(); ++s) {
        if (lin.origin[s] == kNoOrigin) continue;
        auto [begin, count] = tok.spans[s];
        for (std::size_t p = begin; p + 1 < begin + count; ++p) add(p, p + 1, fwd, rev);
      }
    }
  }
  tg.edges.assign(edges.begin(), edges.end());
  return tg;
}

/// "seq_len N" followed by one "src tgt relation" line per edge.
inline void write_edge_list(std::ostream& os, const TokenGraph& tg) {
  os << "seq_len " << tg.seq_len << "\n";
  for (const auto& e : tg.edges) os << e.src << ' ' << e.tgt << ' ' << e.relation << "\n";
}

inline TokenGraph read_edge_list(std::istream& is) {
  TokenGraph tg;
  std::string kw;
  if (!(is >> kw >> tg.seq_len) || kw != "seq_len") {
    throw std::runtime_error("edge list: expected 'seq_len N' header");
  }
  TokenEdge e;
  while (is >> e.src >> e.tgt >> e.relation) {
    if (e.src >= tg.seq_len || e.tgt >= tg.seq_len) {
      throw std::runtime_error("edge list: position out of range");
    }
    tg.edges.push_back(e);
  }
  tg.position_origin.assign(tg.seq_len, kSpecialPosition);
  return tg;
}

}  // namespace structadapt::repr
