// Synthetic AMR corpus: seeded graph generator over a closed inventory, a
// deterministic realization grammar, and JSONL records.
//
// The generator draws every decision through a Chooser, so the same code
// either samples graphs (RandomChooser) or enumerates every graph it can
// produce (enumerate_graphs).
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structadapt/penman.hpp"

namespace structadapt::corpus {

using penman::AmrGraph;

enum class NounClass { kHe, kShe, kAnimal, kThing, kPlace, kTime };

/// Pronoun class: 0 he, 1 she, 2 it.
inline int pronoun_class(NounClass c) {
  switch (c) {
    case NounClass::kHe: return 0;
    case NounClass::kShe: return 1;
    default: return 2;
  }
}

enum class Frame { kIntransitive, kTransitive, kDitransitive, kClausal };

struct Verb {
  std::string concept_name, base, third;
  Frame frame;
};
struct Noun {
  std::string concept_name;
  NounClass cls;
};
struct Manner {
  std::string concept_name, adverb;
};

struct Inventory {
  std::vector<Verb> verbs;
  std::vector<Noun> nouns;
  std::vector<std::string> adjectives;
  std::vector<Manner> manners;
  std::vector<std::string> quants;

  static Inventory full() {
    Inventory v;
    v.verbs = {{"sleep-01", "sleep", "sleeps", Frame::kIntransitive},
               {"run-02", "run", "runs", Frame::kIntransitive},
               {"see-01", "see", "sees", Frame::kTransitive},
               {"chase-01", "chase", "chases", Frame::kTransitive},
               {"like-01", "like", "likes", Frame::kTransitive},
               {"give-01", "give", "gives", Frame::kDitransitive},
               {"show-01", "show", "shows", Frame::kDitransitive},
               {"want-01", "want", "wants", Frame::kClausal},
               {"believe-01", "believe", "believes", Frame::kClausal},
               {"say-01", "say", "says", Frame::kClausal}};
    v.nouns = {{"boy", NounClass::kHe},      {"man", NounClass::kHe},        {"king", NounClass::kHe},
               {"doctor", NounClass::kHe},   {"girl", NounClass::kShe},      {"woman", NounClass::kShe},
               {"queen", NounClass::kShe},   {"nurse", NounClass::kShe},     {"dog", NounClass::kAnimal},
               {"cat", NounClass::kAnimal},  {"bird", NounClass::kAnimal},   {"horse", NounClass::kAnimal},
               {"book", NounClass::kThing},  {"ball", NounClass::kThing},    {"apple", NounClass::kThing},
               {"key", NounClass::kThing},   {"park", NounClass::kPlace},    {"house", NounClass::kPlace},
               {"city", NounClass::kPlace},  {"garden", NounClass::kPlace},  {"morning", NounClass::kTime},
               {"night", NounClass::kTime},  {"winter", NounClass::kTime}};
    v.adjectives = {"big", "small", "red", "old", "happy"};
    v.manners = {{"quick", "quickly"}, {"slow", "slowly"}, {"quiet", "quietly"}};
    v.quants = {"2", "3", "5"};
    return v;
  }

  /// One representative per verb frame, noun class, and modifier kind.
  static Inventory reduced() {
    Inventory v;
    v.verbs = {{"sleep-01", "sleep", "sleeps", Frame::kIntransitive},
               {"see-01", "see", "sees", Frame::kTransitive},
               {"give-01", "give", "gives", Frame::kDitransitive},
               {"say-01", "say", "says", Frame::kClausal}};
    v.nouns = {{"boy", NounClass::kHe},     {"girl", NounClass::kShe},  {"dog", NounClass::kAnimal},
               {"book", NounClass::kThing}, {"park", NounClass::kPlace}, {"night", NounClass::kTime}};
    v.adjectives = {"big", "red"};
    v.manners = {{"quick", "quickly"}};
    v.quants = {"2"};
    return v;
  }

  const Verb* verb(const std::string& c) const {
    for (const auto& x : verbs)
      if (x.concept_name == c) return &x;
    return nullptr;
  }
  const Noun* noun(const std::string& c) const {
    for (const auto& x : nouns)
      if (x.concept_name == c) return &x;
    return nullptr;
  }
  const Manner* manner(const std::string& c) const {
    for (const auto& x : manners)
      if (x.concept_name == c) return &x;
    return nullptr;
  }
};

inline const std::vector<std::string>& role_inventory() {
  static const std::vector<std::string> roles = {":ARG0", ":ARG1",     ":ARG2",       ":mod",
                                                 ":poss", ":location", ":time",       ":manner",
                                                 ":instrument", ":topic", ":quant", ":polarity"};
  return roles;
}

struct GenOptions {
  std::size_t max_nodes = 12;
  double reentrancy_rate = 0.0;
  std::size_t max_clause_depth = 2;
  double p_polarity = 0.15;
  double p_manner = 0.25;
  double p_adjunct = 0.15;  // each of location, time, instrument, topic
  double p_adjective = 0.35;
  double p_second_adjective = 0.2;
  double p_poss = 0.2;
  double p_quant = 0.2;
};

// ---------------------------------------------------------------------------
// Choosers.

class Chooser {
 public:
  virtual ~Chooser() = default;
  virtual std::size_t pick(std::size_t n) = 0;
  virtual bool flip(double p) = 0;
};

class RandomChooser : public Chooser {
 public:
  explicit RandomChooser(std::uint64_t seed) : rng_(seed) {}
  std::size_t pick(std::size_t n) override { return static_cast<std::size_t>(rng_() % n); }
  bool flip(double p) override {
    if (p <= 0) return false;
    return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0) < p;
  }

 private:
  std::mt19937_64 rng_;
};

/// Replays a fixed prefix of decisions, takes 0 beyond it, and records
/// every decision point.
class ReplayChooser : public Chooser {
 public:
  explicit ReplayChooser(std::vector<std::size_t> prefix) : prefix_(std::move(prefix)) {}
  std::size_t pick(std::size_t n) override {
    std::size_t v = trace_.size() < prefix_.size() ? prefix_[trace_.size()] : 0;
    trace_.push_back({v, n});
    return v;
  }
  bool flip(double p) override {
    if (p <= 0) return false;
    if (p >= 1) return true;
    return pick(2) == 1;
  }
  const std::vector<std::pair<std::size_t, std::size_t>>& trace() const { return trace_; }

 private:
  std::vector<std::size_t> prefix_;
  std::vector<std::pair<std::size_t, std::size_t>> trace_;
};

// ---------------------------------------------------------------------------
// Generator.

struct OverBudget {};
struct Dead {};

class GraphBuilder {
 public:
  GraphBuilder(const Inventory& inv, const GenOptions& opt, Chooser& ch) : inv_(inv), opt_(opt), ch_(ch) {}

  AmrGraph build() {
    std::vector<std::size_t> anc;
    std::size_t root = event(0, anc);
    g_.root = root;
    return std::move(g_);
  }

 private:
  std::size_t new_node(const std::string& concept_name, bool constant, int pclass) {
    if (g_.nodes.size() + 1 > opt_.max_nodes) throw OverBudget{};
    std::string var;
    if (!constant) {
      char c = concept_name[0];
      std::size_t k = ++var_counts_[c];
      var = std::string(1, c) + (k > 1 ? std::to_string(k) : "");
    }
    std::size_t id = g_.add_node(var, concept_name, constant);
    pclass_.push_back(pclass);
    return id;
  }

  std::size_t event(std::size_t depth, std::vector<std::size_t>& anc) {
    std::vector<const Verb*> allowed;
    for (const auto& v : inv_.verbs)
      if (v.frame != Frame::kClausal || depth + 1 < opt_.max_clause_depth) allowed.push_back(&v);
    const Verb& v = *allowed[ch_.pick(allowed.size())];
    std::size_t self = new_node(v.concept_name, false, -1);
    anc.push_back(self);
    g_.add_edge(self, ":ARG0", np_slot({NounClass::kHe, NounClass::kShe, NounClass::kAnimal}, anc));
    if (v.frame == Frame::kTransitive || v.frame == Frame::kDitransitive) {
      g_.add_edge(self, ":ARG1", np_slot(all_classes(), anc));
    } else if (v.frame == Frame::kClausal) {
      g_.add_edge(self, ":ARG1", event(depth + 1, anc));
    }
    if (v.frame == Frame::kDitransitive) g_.add_edge(self, ":ARG2", np_slot({NounClass::kHe, NounClass::kShe}, anc));
    if (ch_.flip(opt_.p_polarity)) g_.add_edge(self, ":polarity", new_node("-", true, -1));
    if (ch_.flip(opt_.p_manner)) {
      const auto& m = inv_.manners[ch_.pick(inv_.manners.size())];
      g_.add_edge(self, ":manner", new_node(m.concept_name, false, -1));
    }
    const std::pair<const char*, std::vector<NounClass>> adjuncts[] = {
        {":location", {NounClass::kPlace}},
        {":time", {NounClass::kTime}},
        {":instrument", {NounClass::kThing}},
        {":topic", all_classes()}};
    for (const auto& [role, classes] : adjuncts) {
      if (ch_.flip(opt_.p_adjunct)) g_.add_edge(self, role, np_slot(classes, anc));
    }
    anc.pop_back();
    return self;
  }

  static std::vector<NounClass> all_classes() {
    return {NounClass::kHe, NounClass::kShe, NounClass::kAnimal, NounClass::kThing, NounClass::kPlace,
            NounClass::kTime};
  }

  std::size_t np_slot(const std::vector<NounClass>& classes, std::vector<std::size_t>& anc) {
    if (opt_.reentrancy_rate > 0) {
      std::vector<std::size_t> cands;
      for (std::size_t n = 0; n < g_.nodes.size(); ++n) {
        if (pclass_[n] < 0 || std::find(anc.begin(), anc.end(), n) != anc.end()) continue;
        const Noun* nn = inv_.noun(g_.nodes[n].label);
        if (std::find(classes.begin(), classes.end(), nn->cls) == classes.end()) continue;
        std::size_t same = 0;
        for (std::size_t m = 0; m < g_.nodes.size(); ++m) same += pclass_[m] == pclass_[n];
        if (same == 1) cands.push_back(n);
      }
      if (!cands.empty() && ch_.flip(opt_.reentrancy_rate)) {
        std::size_t n = cands[ch_.pick(cands.size())];
        blocked_.insert(pclass_[n]);
        return n;
      }
    }
    std::vector<const Noun*> allowed;
    for (const auto& n : inv_.nouns) {
      if (std::find(classes.begin(), classes.end(), n.cls) == classes.end()) continue;
      if (blocked_.count(pronoun_class(n.cls))) continue;
      allowed.push_back(&n);
    }
    if (allowed.empty()) throw Dead{};
    const Noun& n = *allowed[ch_.pick(allowed.size())];
    std::size_t self = new_node(n.concept_name, false, pronoun_class(n.cls));
    anc.push_back(self);
    if (ch_.flip(opt_.p_adjective)) {
      std::size_t a = ch_.pick(inv_.adjectives.size());
      g_.add_edge(self, ":mod", new_node(inv_.adjectives[a], false, -1));
      if (inv_.adjectives.size() > 1 && ch_.flip(opt_.p_second_adjective)) {
        std::size_t b = ch_.pick(inv_.adjectives.size() - 1);
        if (b >= a) ++b;
        g_.add_edge(self, ":mod", new_node(inv_.adjectives[b], false, -1));
      }
    }
    if (ch_.flip(opt_.p_poss)) g_.add_edge(self, ":poss", np_slot({NounClass::kHe, NounClass::kShe}, anc));
    if (pronoun_class(n.cls) == 2 && ch_.flip(opt_.p_quant)) {
      g_.add_edge(self, ":quant", new_node(inv_.quants[ch_.pick(inv_.quants.size())], true, -1));
    }
    anc.pop_back();
    return self;
  }

  const Inventory& inv_;
  const GenOptions& opt_;
  Chooser& ch_;
  AmrGraph g_;
  std::vector<int> pclass_;
  std::set<int> blocked_;
  std::map<char, std::size_t> var_counts_;
};

/// Samples one graph; draws that exceed the node budget are redrawn from
/// the same stream.
inline AmrGraph sample_graph(const Inventory& inv, const GenOptions& opt, RandomChooser& ch) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    try {
      return GraphBuilder(inv, opt, ch).build();
    } catch (const OverBudget&) {
    } catch (const Dead&) {
    }
  }
  throw std::runtime_error("generator: node budget too small for the inventory");
}

/// Calls `fn` on every graph the generator can produce under `opt`.
/// Returns the number of graphs visited.
inline std::size_t enumerate_graphs(const Inventory& inv, const GenOptions& opt,
                                    const std::function<void(const AmrGraph&)>& fn) {
  std::vector<std::size_t> prefix;
  std::size_t visited = 0;
  for (;;) {
    ReplayChooser ch(prefix);
    bool ok = true;
    AmrGraph g;
    try {
      g = GraphBuilder(inv, opt, ch).build();
    } catch (const OverBudget&) {
      ok = false;
    } catch (const Dead&) {
      ok = false;
    }
    if (ok) {
      fn(g);
      ++visited;
    }
    const auto& tr = ch.trace();
    std::size_t k = tr.size();
    while (k > 0 && tr[k - 1].first + 1 >= tr[k - 1].second) --k;
    if (k == 0) break;
    prefix.clear();
    for (std::size_t i = 0; i + 1 < k; ++i) prefix.push_back(tr[i].first);
    prefix.push_back(tr[k - 1].first + 1);
  }
  return visited;
}

// ---------------------------------------------------------------------------
// Realization.

namespace detail {

struct Realizer {
  const Inventory& inv;
  const AmrGraph& g;
  std::vector<std::vector<std::pair<std::string, std::size_t>>> out;  // per node: (role, target)
  std::set<std::size_t> seen;
  std::vector<std::string> words;

  Realizer(const Inventory& i, const AmrGraph& graph) : inv(i), g(graph), out(graph.nodes.size()) {
    for (const auto& e : g.edges) out[e.source].push_back({e.role, e.target});
  }

  std::vector<std::size_t> targets(std::size_t n, const std::string& role) const {
    std::vector<std::size_t> t;
    for (const auto& [r, v] : out[n])
      if (r == role) t.push_back(v);
    return t;
  }
  std::optional<std::size_t> target(std::size_t n, const std::string& role) const {
    auto t = targets(n, role);
    if (t.empty()) return std::nullopt;
    return t[0];
  }

  enum class Case { kSubject, kObject, kPossessive };

  void np(std::size_t n, Case c) {
    const Noun* noun = inv.noun(g.nodes[n].label);
    if (!noun) throw std::invalid_argument("realize: '" + g.nodes[n].label + "' is not a noun");
    if (seen.count(n)) {
      static const char* forms[3][3] = {{"he", "him", "his"}, {"she", "her", "her"}, {"it", "it", "its"}};
      words.push_back(forms[pronoun_class(noun->cls)][static_cast<int>(c)]);
      return;
    }
    seen.insert(n);
    if (auto p = target(n, ":poss")) {
      if (seen.count(*p)) {
        np(*p, Case::kPossessive);
      } else {
        np(*p, Case::kObject);
        words.push_back("'s");
      }
    } else {
      words.push_back("the");
    }
    if (auto q = target(n, ":quant")) words.push_back(g.nodes[*q].label);
    std::vector<std::string> adjs;
    for (auto a : targets(n, ":mod")) adjs.push_back(g.nodes[a].label);
    std::sort(adjs.begin(), adjs.end());
    for (auto& a : adjs) words.push_back(a);
    words.push_back(noun->concept_name);
  }

  void clause(std::size_t e) {
    const Verb* v = inv.verb(g.nodes[e].label);
    if (!v) throw std::invalid_argument("realize: '" + g.nodes[e].label + "' is not a verb");
    static const std::pair<const char*, const char*> preps[] = {
        {":location", "in"}, {":time", "during"}, {":instrument", "with"}, {":topic", "about"}};
    for (const auto& [role, prep] : preps) {
      if (auto t = target(e, role)) {
        words.push_back(prep);
        np(*t, Case::kObject);
      }
    }
    if (auto a0 = target(e, ":ARG0")) np(*a0, Case::kSubject);
    if (target(e, ":polarity")) {
      words.push_back("does");
      words.push_back("not");
      words.push_back(v->base);
    } else {
      words.push_back(v->third);
    }
    if (auto m = target(e, ":manner")) {
      const Manner* mm = inv.manner(g.nodes[*m].label);
      if (!mm) throw std::invalid_argument("realize: unknown manner '" + g.nodes[*m].label + "'");
      words.push_back(mm->adverb);
    }
    if (auto a1 = target(e, ":ARG1")) {
      if (v->frame == Frame::kClausal) {
        words.push_back("that");
        clause(*a1);
      } else {
        np(*a1, Case::kObject);
      }
    }
    if (auto a2 = target(e, ":ARG2")) {
      words.push_back("to");
      np(*a2, Case::kObject);
    }
  }
};

}  // namespace detail

/// Deterministic sentence for a generated graph. The first mention of a
/// node in reading order is a full noun phrase; later mentions are
/// pronouns.
inline std::string realize(const AmrGraph& g, const Inventory& inv = Inventory::full()) {
  detail::Realizer r(inv, g);
  r.clause(g.root);
  std::string s;
  for (const auto& w : r.words) s += (s.empty() ? "" : " ") + w;
  return s;
}

// ---------------------------------------------------------------------------
// Records.

struct DatasetRecord {
  std::string amr;
  std::string text;
  std::string split;
  bool operator==(const DatasetRecord&) const = default;
};

/// Order-independent key: sorted node labels and sorted (label, role,
/// label) triples. Isomorphic graphs share a key.
inline std::string canonical_key(const AmrGraph& g) {
  std::vector<std::string> parts;
  for (const auto& n : g.nodes) parts.push_back("n " + n.label);
  for (const auto& e : g.edges) parts.push_back("e " + g.nodes[e.source].label + " " + e.role + " " + g.nodes[e.target].label);
  std::sort(parts.begin(), parts.end());
  std::string k;
  for (auto& p : parts) k += p + "\n";
  return k;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// 80/10/10 train/dev/test by key hash.
inline std::string split_for(const std::string& key) {
  auto b = fnv1a(key) % 10;
  return b < 8 ? "train" : b < 9 ? "dev" : "test";
}

/// n distinct graphs (by canonical key) with their sentences.
inline std::vector<DatasetRecord> generate_corpus(std::size_t n, std::uint64_t seed, const GenOptions& opt,
                                                  const Inventory& inv = Inventory::full()) {
  if (n == 0) throw std::invalid_argument("generate_corpus: n must be positive");
  RandomChooser ch(seed);
  std::set<std::string> keys;
  std::vector<DatasetRecord> out;
  std::size_t stale = 0;
  while (out.size() < n) {
    auto g = sample_graph(inv, opt, ch);
    auto key = canonical_key(g);
    if (!keys.insert(key).second) {
      if (++stale > 100000) throw std::runtime_error("generate_corpus: inventory exhausted");
      continue;
    }
    stale = 0;
    out.push_back({penman::serialize_penman(g), realize(g, inv), split_for(key)});
  }
  return out;
}

/// Convenience overload mirroring the command-line parameters.
inline std::vector<DatasetRecord> generate_corpus(std::size_t n, std::uint64_t seed, std::size_t max_nodes,
                                                  double reentrancy_rate) {
  GenOptions opt;
  opt.max_nodes = max_nodes;
  opt.reentrancy_rate = reentrancy_rate;
  return generate_corpus(n, seed, opt);
}

inline void save_jsonl(std::ostream& os, const std::vector<DatasetRecord>& recs) {
  for (const auto& r : recs) {
    nlohmann::json j = {{"amr", r.amr}, {"text", r.text}, {"split", r.split}};
    os << j.dump() << "\n";
  }
}

inline void save_jsonl(const std::string& path, const std::vector<DatasetRecord>& recs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  save_jsonl(os, recs);
}

inline std::vector<DatasetRecord> load_jsonl(std::istream& is) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      DatasetRecord r{j.at("amr").get<std::string>(), j.at("text").get<std::string>(),
                      j.value("split", std::string("train"))};
      if (r.text.empty()) throw std::invalid_argument("empty text");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<DatasetRecord> load_jsonl(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return load_jsonl(is);
}

}  // namespace structadapt::corpus
