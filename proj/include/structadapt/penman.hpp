// PENMAN reading and writing for AMR graphs, plus the graph measurements used
// by the evaluation breakdowns.
#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace structadapt::penman {

/// Raised for malformed PENMAN input. `offset()` is the byte offset of the
/// offending token in the input text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct Node {
  std::string var;      // empty for constants
  std::string label;  // literal text for constants
  bool constant = false;
};

struct Edge {
  std::size_t source;
  std::string role;  // ":name", possibly ending in "-of"
  std::size_t target;
};

/// Rooted, directed, edge-labeled graph. Nodes keep declaration order and
/// edges keep source-text order.
struct AmrGraph {
  std::size_t root = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::optional<std::size_t> find(std::string_view var) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].constant && nodes[i].var == var) return i;
    }
    return std::nullopt;
  }
  std::size_t add_node(std::string var, std::string label, bool constant = false) {
    nodes.push_back(Node{std::move(var), std::move(label), constant});
    return nodes.size() - 1;
  }
  void add_edge(std::size_t source, std::string role, std::size_t target) {
    edges.push_back(Edge{source, std::move(role), target});
  }
};

inline bool is_inverse_role(std::string_view role) {
  return role.size() > 3 && role.substr(role.size() - 3) == "-of";
}

/// ":poss" <-> ":poss-of".
inline std::string invert_role(std::string_view role) {
  if (is_inverse_role(role)) return std::string(role.substr(0, role.size() - 3));
  return std::string(role) + "-of";
}

namespace detail {

enum class TokKind { kOpen, kClose, kSlash, kRole, kString, kSymbol, kEnd };

struct Tok {
  TokKind kind;
  std::string text;
  std::size_t offset;
};

inline bool is_delim(char c) {
  return c == '(' || c == ')' || c == '/' || c == ' ' || c == '\t' || c == '\n' ||
         c == '\r';
}

inline std::vector<Tok> lex(std::string_view text) {
  std::vector<Tok> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (c == '#' && (i == 0 || text[i - 1] == '\n')) {
      // metadata comment line
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '(') {
      out.push_back({TokKind::kOpen, "(", i++});
    } else if (c == ')') {
      out.push_back({TokKind::kClose, ")", i++});
    } else if (c == '/') {
      out.push_back({TokKind::kSlash, "/", i++});
    } else if (c == '"') {
      std::size_t start = i++;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          i += 2;
        } else if (text[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          ++i;
        }
      }
      if (!closed) throw ParseError("unterminated string", start);
      out.push_back({TokKind::kString, std::string(text.substr(start, i - start)), start});
    } else {
      std::size_t start = i;
      while (i < text.size() && !is_delim(text[i])) ++i;
      std::string word(text.substr(start, i - start));
      TokKind kind = word[0] == ':' ? TokKind::kRole : TokKind::kSymbol;
      out.push_back({kind, std::move(word), start});
    }
  }
  out.push_back({TokKind::kEnd, "", text.size()});
  return out;
}

// Variables look like a lowercase letter followed by digits ("s", "s2", "x17").
inline bool looks_like_variable(std::string_view s) {
  if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)), text_size_(text.size()) {}

  AmrGraph run() {
    if (peek().kind != TokKind::kOpen) throw ParseError("expected '('", peek().offset);
    graph_.root = parse_node();
    if (peek().kind != TokKind::kEnd) {
      if (peek().kind == TokKind::kClose) throw ParseError("unbalanced ')'", peek().offset);
      throw ParseError("trailing input after graph", peek().offset);
    }
    for (const auto& ref : pending_) {
      auto idx = graph_.find(ref.var);
      if (!idx) throw ParseError("reference to undeclared variable '" + ref.var + "'", ref.offset);
      graph_.edges[ref.edge].target = *idx;
    }
    return std::move(graph_);
  }

 private:
  struct PendingRef {
    std::size_t edge;
    std::string var;
    std::size_t offset;
  };

  const Tok& peek() const { return toks_[pos_]; }
  const Tok& next() { return toks_[pos_++]; }

  std::size_t parse_node() {
    const Tok& open = next();  // '('
    const Tok& var = next();
    if (var.kind == TokKind::kEnd) throw ParseError("unbalanced '('", open.offset);
    if (var.kind != TokKind::kSymbol) throw ParseError("expected variable", var.offset);
    if (graph_.find(var.text)) {
      throw ParseError("duplicate variable '" + var.text + "'", var.offset);
    }
    const Tok& slash = next();
    if (slash.kind == TokKind::kEnd) throw ParseError("unbalanced '('", open.offset);
    if (slash.kind != TokKind::kSlash) throw ParseError("expected '/'", slash.offset);
    const Tok& head = next();
    if (head.kind == TokKind::kEnd) throw ParseError("unbalanced '('", open.offset);
    if (head.kind != TokKind::kSymbol && head.kind != TokKind::kString) {
      throw ParseError("expected concept", head.offset);
    }
    std::size_t self = graph_.add_node(var.text, head.text);
    while (true) {
      const Tok& t = peek();
      if (t.kind == TokKind::kClose) {
        next();
        return self;
      }
      if (t.kind == TokKind::kEnd) throw ParseError("unbalanced '('", open.offset);
      if (t.kind != TokKind::kRole) throw ParseError("expected role or ')'", t.offset);
      std::string role = next().text;
      const Tok& v = peek();
      if (v.kind == TokKind::kOpen) {
        std::size_t edge = graph_.edges.size();
        graph_.add_edge(self, role, 0);
        std::size_t child = parse_node();
        graph_.edges[edge].target = child;
      } else if (v.kind == TokKind::kSymbol && looks_like_variable(v.text)) {
        next();
        graph_.add_edge(self, role, 0);
        pending_.push_back({graph_.edges.size() - 1, v.text, v.offset});
      } else if (v.kind == TokKind::kSymbol || v.kind == TokKind::kString) {
        next();
        std::size_t c = graph_.add_node("", v.text, true);
        graph_.add_edge(self, role, c);
      } else if (v.kind == TokKind::kEnd) {
        throw ParseError("unbalanced '('", open.offset);
      } else {
        throw ParseError("expected value after role", v.offset);
      }
    }
  }

  std::vector<Tok> toks_;
  std::size_t text_size_;
  std::size_t pos_ = 0;
  AmrGraph graph_;
  std::vector<PendingRef> pending_;
};

}  // namespace detail

/// Parses one graph. Reentrant references may appear before or after the
/// declaration; attribute values (numbers, strings, "-") become constant nodes.
inline AmrGraph parse_penman(std::string_view text) { return detail::Parser(text).run(); }

/// Undirected adjacency: for every node, the incident edge ids in stored order.
inline std::vector<std::vector<std::size_t>> incident_edges(const AmrGraph& g) {
  std::vector<std::vector<std::size_t>> inc(g.nodes.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    inc[g.edges[e].source].push_back(e);
    if (g.edges[e].target != g.edges[e].source) inc[g.edges[e].target].push_back(e);
  }
  return inc;
}

/// Nodes reachable from the root along stored edge directions.
inline std::vector<bool> forward_reachable(const AmrGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.nodes.size());
  for (const auto& e : g.edges) out[e.source].push_back(e.target);
  std::vector<bool> seen(g.nodes.size(), false);
  if (g.nodes.empty()) return seen;
  std::deque<std::size_t> queue{g.root};
  seen[g.root] = true;
  while (!queue.empty()) {
    auto n = queue.front();
    queue.pop_front();
    for (auto t : out[n]) {
      if (!seen[t]) {
        seen[t] = true;
        queue.push_back(t);
      }
    }
  }
  return seen;
}

/// Depth-first layout shared by serialization and canonical linearization.
/// At each node, stored out-edges are laid out in order; in-edges are laid
/// out inverted only when their source cannot be reached forward from the
/// root. For graphs parsed from PENMAN this reproduces the source layout.
struct LayoutVisitor {
  virtual ~LayoutVisitor() = default;
  virtual void open(std::size_t node) = 0;
  virtual void close(std::size_t node) = 0;
  virtual void role(std::size_t edge, bool inverted) = 0;
  virtual void revisit(std::size_t node) = 0;
  virtual void constant(std::size_t node) = 0;
};

inline void canonical_layout(const AmrGraph& g, LayoutVisitor& v) {
  if (g.nodes.empty()) return;
  auto inc = incident_edges(g);
  auto reach = forward_reachable(g);
  std::vector<bool> visited(g.nodes.size(), false);
  std::vector<bool> emitted(g.edges.size(), false);
  auto visit = [&](auto&& self, std::size_t n) -> void {
    visited[n] = true;
    if (g.nodes[n].constant) {
      v.constant(n);
      return;
    }
    v.open(n);
    for (auto e : inc[n]) {
      if (emitted[e]) continue;
      const Edge& edge = g.edges[e];
      bool out = edge.source == n;
      if (!out && reach[edge.source]) continue;
      emitted[e] = true;
      std::size_t other = out ? edge.target : edge.source;
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
  visit(visit, g.root);
}

/// Single-line PENMAN rendering. Second and later visits emit the variable.
inline std::string serialize_penman(const AmrGraph& g) {
  struct Writer : LayoutVisitor {
    const AmrGraph& g;
    std::string out;
    explicit Writer(const AmrGraph& graph) : g(graph) {}
    void open(std::size_t n) override {
      if (!out.empty()) out += ' ';
      out += "(" + g.nodes[n].var + " / " + g.nodes[n].label;
    }
    void close(std::size_t) override { out += ")"; }
    void role(std::size_t e, bool inverted) override {
      out += ' ';
      out += inverted ? invert_role(g.edges[e].role) : g.edges[e].role;
    }
    void revisit(std::size_t n) override { out += " " + g.nodes[n].var; }
    void constant(std::size_t n) override { out += " " + g.nodes[n].label; }
  } writer(g);
  canonical_layout(g, writer);
  return writer.out;
}

/// Rewrites every "-of" edge as the reversed edge with the suffix stripped
/// (repeatedly, so "-of-of" collapses). Roles in `exempt` are left alone.
/// Edge indices are preserved.
inline AmrGraph normalize_inverse_roles(const AmrGraph& g,
                                        std::span<const std::string> exempt = {}) {
  AmrGraph out = g;
  for (auto& e : out.edges) {
    while (is_inverse_role(e.role) &&
           std::find(exempt.begin(), exempt.end(), e.role) == exempt.end()) {
      e.role = invert_role(e.role);
      std::swap(e.source, e.target);
    }
  }
  return out;
}

struct GraphStats {
  std::size_t size = 0;
  std::size_t diameter = 0;
  std::size_t reentrancies = 0;
};

/// size = |V0| + |E0|; diameter over the undirected bipartite graph where
/// every edge becomes a node; reentrancies = |E0| - |V0| + components, the
/// number of bare re-references any PENMAN serialization of g needs. It
/// ignores edge direction, so inverse roles and node order do not matter.
inline GraphStats graph_stats(const AmrGraph& g) {
  GraphStats s;
  const std::size_t nv = g.nodes.size();
  const std::size_t n1 = nv + g.edges.size();
  s.size = n1;
  std::vector<std::vector<std::size_t>> adj(n1);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    std::size_t r = nv + e;
    adj[g.edges[e].source].push_back(r);
    adj[r].push_back(g.edges[e].source);
    adj[r].push_back(g.edges[e].target);
    adj[g.edges[e].target].push_back(r);
  }
  std::vector<std::size_t> dist(n1);
  std::vector<bool> reached(n1, false);
  std::size_t components = 0;
  for (std::size_t src = 0; src < n1; ++src) {
    if (!reached[src]) ++components;
    std::fill(dist.begin(), dist.end(), SIZE_MAX);
    std::deque<std::size_t> q{src};
    dist[src] = 0;
    while (!q.empty()) {
      auto n = q.front();
      q.pop_front();
      reached[n] = true;
      s.diameter = std::max(s.diameter, dist[n]);
      for (auto m : adj[n]) {
        if (dist[m] == SIZE_MAX) {
          dist[m] = dist[n] + 1;
          q.push_back(m);
        }
      }
    }
  }
  s.reentrancies = g.edges.size() + components - nv;
  return s;
}

/// Isomorphism of concept-labeled, role-labeled directed multigraphs.
/// Variable names are ignored; the root must correspond only when
/// `match_root` is set.
inline bool isomorphic(const AmrGraph& a, const AmrGraph& b, bool match_root = false) {
  const std::size_t n = a.nodes.size();
  if (n != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
  using Label = std::pair<std::string, bool>;
  auto label = [](const Node& x) { return Label{x.label, x.constant}; };

  // Colour refinement to prune candidates.
  auto refine = [&](const AmrGraph& g) {
    std::vector<std::string> colour(n);
    for (std::size_t i = 0; i < n; ++i) {
      colour[i] = (g.nodes[i].constant ? "c:" : "v:") + g.nodes[i].label;
    }
    for (std::size_t round = 0; round < 3; ++round) {
      std::vector<std::vector<std::string>> sig(n);
      for (const auto& e : g.edges) {
        sig[e.source].push_back(">" + e.role + "|" + colour[e.target]);
        sig[e.target].push_back("<" + e.role + "|" + colour[e.source]);
      }
      std::vector<std::string> next(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::sort(sig[i].begin(), sig[i].end());
        std::string s = colour[i] + "{";
        for (const auto& x : sig[i]) s += x + ";";
        next[i] = std::to_string(std::hash<std::string>{}(s + "}"));
      }
      colour = std::move(next);
    }
    return colour;
  };
  auto ca = refine(a);
  auto cb = refine(b);
  {
    auto sa = ca, sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }

  std::multiset<std::tuple<std::size_t, std::string, std::size_t>> b_edges;
  for (const auto& e : b.edges) b_edges.emplace(e.source, e.role, e.target);
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::size_t> b_count;
  for (const auto& e : b.edges) ++b_count[{e.source, e.role, e.target}];
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::size_t> a_count;
  for (const auto& e : a.edges) ++a_count[{e.source, e.role, e.target}];

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> a_adj(n);  // edge, other
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    a_adj[a.edges[e].source].push_back({e, a.edges[e].target});
    a_adj[a.edges[e].target].push_back({e, a.edges[e].source});
  }

  std::vector<std::size_t> map(n, SIZE_MAX);
  std::vector<bool> used(n, false);
  // Order a's nodes by BFS so constraints bite early.
  std::vector<std::size_t> order;
  {
    std::vector<bool> seen(n, false);
    for (std::size_t s = 0; s < n; ++s) {
      if (seen[s]) continue;
      std::deque<std::size_t> q{s};
      seen[s] = true;
      while (!q.empty()) {
        auto x = q.front();
        q.pop_front();
        order.push_back(x);
        for (auto [e, o] : a_adj[x]) {
          if (!seen[o]) {
            seen[o] = true;
            q.push_back(o);
          }
        }
      }
    }
  }
  auto consistent = [&](std::size_t x) {
    for (auto [e, o] : a_adj[x]) {
      if (map[o] == SIZE_MAX) continue;
      const Edge& ea = a.edges[e];
      auto key_a = std::make_tuple(ea.source, ea.role, ea.target);
      auto key_b = std::make_tuple(map[ea.source], ea.role, map[ea.target]);
      auto it = b_count.find(key_b);
      if (it == b_count.end() || it->second != a_count[key_a]) return false;
    }
    return true;
  };
  auto search = [&](auto&& self, std::size_t k) -> bool {
    if (k == order.size()) return true;
    std::size_t x = order[k];
    for (std::size_t y = 0; y < n; ++y) {
      if (used[y] || ca[x] != cb[y] || label(a.nodes[x]) != label(b.nodes[y])) continue;
      if (match_root && ((x == a.root) != (y == b.root))) continue;
      map[x] = y;
      used[y] = true;
      if (consistent(x) && self(self, k + 1)) return true;
      map[x] = SIZE_MAX;
      used[y] = false;
    }
    return false;
  };
  return search(search, 0);
}

}  // namespace structadapt::penman
