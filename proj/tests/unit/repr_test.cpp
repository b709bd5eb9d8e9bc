#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <tuple>

#include "structadapt/bpe.hpp"
#include "structadapt/repr.hpp"
#include "support/fixtures.hpp"

using namespace structadapt;
using namespace structadapt::repr;
using structadapt::test::random_graphs;

namespace {

const bpe::Vocabulary& small_vocab() {
  static const bpe::Vocabulary v = [] {
    std::vector<std::string> lines;
    for (const auto& r : corpus::generate_corpus(300, 3, 12, 0.4)) {
      lines.push_back(r.text);
      lines.push_back(" " + linearize(penman::parse_penman(r.amr), LinMode::kCanon, LinVariant::kNodesAndEdges, 0).text());
    }
    return bpe::train_vocab(lines, 300);
  }();
  return v;
}

TokenGraph token_graph(const penman::AmrGraph& g, LinMode mode, std::uint64_t seed, Rep rep,
                       const bpe::Vocabulary& vocab = small_vocab()) {
  auto lin = linearize(g, mode, LinVariant::kNodesAndEdges, seed);
  auto tok = tokenize(vocab, lin);
  return build_token_graph(to_unlabeled(penman::normalize_inverse_roles(g)), lin, tok, rep);
}

// Token edges contracted onto the unlabeled-graph node each position mentions.
std::set<std::tuple<std::size_t, std::size_t, int>> contracted(const TokenGraph& tg) {
  std::set<std::tuple<std::size_t, std::size_t, int>> out;
  for (const auto& e : tg.edges) {
    auto a = tg.position_origin[e.src], b = tg.position_origin[e.tgt];
    if (a != b) out.insert({a, b, e.relation});
  }
  return out;
}

}  // namespace

TEST(Unlabeled, Table9Counts) {
  auto u = to_unlabeled(test::table9());
  EXPECT_EQ(u.nodes.size(), 7u);
  EXPECT_EQ(u.edges.size(), 6u);
}

TEST(Unlabeled, SingleNode) {
  auto u = to_unlabeled(penman::parse_penman("(a / alpha)"));
  EXPECT_EQ(u.nodes.size(), 1u);
  EXPECT_TRUE(u.edges.empty());
}

TEST(Unlabeled, OneEdgeBecomesRoleNode) {
  auto u = to_unlabeled(penman::parse_penman("(n / name :op1 (g / germany))"));
  ASSERT_EQ(u.nodes.size(), 3u);
  EXPECT_TRUE(u.nodes[2].is_role);
  EXPECT_EQ(u.nodes[2].label, ":op1");
  EXPECT_EQ(u.edges, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}, {2, 1}}));
}

TEST(Unlabeled, CountsOnRandomGraphs) {
  for (const auto& g : random_graphs(1000, 21)) {
    auto u = to_unlabeled(g);
    ASSERT_EQ(u.nodes.size(), g.nodes.size() + g.edges.size());
    ASSERT_EQ(u.edges.size(), 2 * g.edges.size());
  }
}

TEST(Linearize, Table9Canon) {
  auto lin = linearize(test::table9(), LinMode::kCanon, LinVariant::kNodesAndEdges, 0);
  EXPECT_EQ(lin.text(), "subsidize-01 :ARG1 utility :poss she :mod all");
}

TEST(Linearize, Table9RandomFromShe) {
  auto g = test::table9();
  LinearizeOptions opt{LinMode::kRandom, LinVariant::kNodesAndEdges, 3, *g.find("s2")};
  auto lin = linearize(g, opt);
  EXPECT_EQ(lin.text().rfind("she :poss-of utility", 0), 0u) << lin.text();
}

TEST(Linearize, NodesOnlyDropsRoles) {
  auto lin = linearize(test::table9(), LinMode::kCanon, LinVariant::kNodesOnly, 0);
  EXPECT_EQ(lin.text(), "subsidize-01 utility she all");
}

TEST(Linearize, SingleNode) {
  auto lin = linearize(penman::parse_penman("(a / alpha)"), LinMode::kRandom, LinVariant::kNodesAndEdges, 9);
  EXPECT_EQ(lin.symbols, std::vector<std::string>{"alpha"});
}

TEST(Linearize, ReconfKeepsRoot) {
  for (const auto& g : random_graphs(50, 8)) {
    auto lin = linearize(g, LinMode::kReconf, LinVariant::kNodesAndEdges, 17);
    EXPECT_EQ(lin.symbols.front(), g.nodes[g.root].label);
  }
}

TEST(Linearize, SeededModesAreDeterministic) {
  auto g = test::table5();
  for (auto mode : {LinMode::kReconf, LinMode::kRandom}) {
    EXPECT_EQ(linearize(g, mode, LinVariant::kNodesAndEdges, 7).text(),
              linearize(g, mode, LinVariant::kNodesAndEdges, 7).text());
  }
}

TEST(Linearize, ReparsesToSourceGraph) {
  std::size_t checked = 0;
  for (const auto& g : random_graphs(150, 31)) {
    auto norm = penman::normalize_inverse_roles(g);
    for (auto mode : {LinMode::kCanon, LinMode::kReconf, LinMode::kRandom}) {
      for (std::uint64_t seed : {1, 2}) {
        auto lin = linearize(g, mode, LinVariant::kNodesAndEdges, seed);
        auto back = penman::normalize_inverse_roles(penman::parse_penman(lin.penman));
        ASSERT_TRUE(penman::isomorphic(norm, back)) << lin.penman;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 900u);
}

TEST(Linearize, Table9RandomMatchesAppendixShape) {
  auto g = test::table9();
  LinearizeOptions opt{LinMode::kRandom, LinVariant::kNodesAndEdges, 0, *g.find("s2")};
  auto lin = linearize(g, opt);
  auto parsed = penman::parse_penman(lin.penman);
  EXPECT_EQ(parsed.nodes[parsed.root].label, "she");
  EXPECT_TRUE(penman::isomorphic(penman::normalize_inverse_roles(parsed),
                                 penman::normalize_inverse_roles(test::table9_random())));
}

TEST(Relations, DefaultReverse) {
  auto t = relation_table(LinVariant::kNodesAndEdges);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_FALSE(t.is_reverse(0));
  EXPECT_TRUE(t.is_reverse(1));
}

TEST(Relations, TypedOverTable9) {
  auto t = relation_table(LinVariant::kNodesOnly, observed_roles({test::table9()}));
  EXPECT_EQ(t.size(), 7u);
  EXPECT_EQ(t.name(t.forward(":poss")), ":poss");
  EXPECT_EQ(t.name(t.reverse(":poss")), ":poss-rev");
  EXPECT_EQ(t.name(t.forward(":time")), "unknown");
}

TEST(Relations, EmptyRoleSetIsUnknownOnly) {
  auto t = relation_table(LinVariant::kNodesOnly, {});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.name(0), "unknown");
}

TEST(TokenGraph, ProductRule) {
  auto g = penman::parse_penman("(n / name :op1 (g / germany))");
  auto lin = linearize(g, LinMode::kCanon, LinVariant::kNodesAndEdges, 0);
  ASSERT_EQ(lin.symbols.size(), 3u);
  Tokenization tok;
  tok.spans = {{0, 2}, {2, 1}, {3, 3}};
  tok.ids = {10, 11, 12, 13, 14, 15, bpe::kEos};
  // Role token 2 links to both name tokens and all three germany tokens.
  auto tg = build_token_graph(to_unlabeled(g), lin, tok, Rep::kRep1);
  std::size_t defaults = 0;
  for (const auto& e : tg.edges) defaults += e.relation == 0;
  EXPECT_EQ(defaults, 2u * 1u + 1u * 3u);
}

TEST(TokenGraph, SubwordRepresentations) {
  // name = tokens 0,1; :op1 = tokens 2,3; germany = tokens 4,5; eos = 6.
  auto g = penman::parse_penman("(n / name :op1 (g / germany))");
  auto lin = linearize(g, LinMode::kCanon, LinVariant::kNodesAndEdges, 0);
  Tokenization tok;
  tok.spans = {{0, 2}, {2, 2}, {4, 2}};
  tok.ids = {10, 11, 12, 13, 14, 15, bpe::kEos};
  auto u = to_unlabeled(g);
  auto with_twins = [](std::vector<std::pair<std::size_t, std::size_t>> fwd) {
    std::vector<TokenEdge> out;
    for (auto [a, b] : fwd) {
      out.push_back({a, b, 0});
      out.push_back({b, a, 1});
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(build_token_graph(u, lin, tok, Rep::kRep1).edges,
            with_twins({{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 4}, {2, 5}, {3, 4}, {3, 5}}));
  EXPECT_EQ(build_token_graph(u, lin, tok, Rep::kRep2).edges,
            with_twins({{1, 2}, {3, 4}, {0, 1}, {2, 3}, {4, 5}}));
  EXPECT_EQ(build_token_graph(u, lin, tok, Rep::kRep3).edges,
            with_twins({{0, 2}, {2, 4}, {0, 1}, {2, 3}, {4, 5}}));
  auto complete = build_token_graph(u, lin, tok, Rep::kComplete);
  std::size_t defaults = 0;
  for (const auto& e : complete.edges) defaults += e.relation == 0;
  EXPECT_EQ(defaults, 6u * 5u);
  EXPECT_EQ(complete.position_origin[6], kSpecialPosition);
}

TEST(TokenGraph, Rep1EdgeCountMatchesTokenProducts) {
  for (const auto& g : random_graphs(300, 41, 0.0)) {
    auto lin = linearize(g, LinMode::kCanon, LinVariant::kNodesAndEdges, 0);
    auto tok = tokenize(small_vocab(), lin);
    auto u = to_unlabeled(penman::normalize_inverse_roles(g));
    std::vector<std::size_t> width(u.nodes.size());
    for (std::size_t s = 0; s < lin.symbols.size(); ++s) width[lin.origin[s]] = tok.spans[s].second;
    std::size_t expected = 0;
    for (auto [a, b] : u.edges) expected += width[a] * width[b];
    auto tg = build_token_graph(u, lin, tok, Rep::kRep1);
    std::size_t defaults = 0;
    for (const auto& e : tg.edges) defaults += e.relation == 0;
    ASSERT_EQ(defaults, expected);
  }
}

TEST(TokenGraph, EveryDefaultEdgeHasReverseTwin) {
  for (const auto& g : random_graphs(200, 43)) {
    for (auto rep : {Rep::kRep1, Rep::kRep2, Rep::kRep3, Rep::kComplete}) {
      auto tg = token_graph(g, LinMode::kRandom, 5, rep);
      std::set<TokenEdge> all(tg.edges.begin(), tg.edges.end());
      for (const auto& e : tg.edges) {
        if (e.relation == 0) ASSERT_TRUE(all.count({e.tgt, e.src, 1}));
        if (e.relation == 1) ASSERT_TRUE(all.count({e.tgt, e.src, 0}));
      }
    }
  }
}

TEST(TokenGraph, Rep1StructureIsLinearizationInvariant) {
  for (const auto& g : random_graphs(200, 47)) {
    auto canon = contracted(token_graph(g, LinMode::kCanon, 0, Rep::kRep1));
    EXPECT_EQ(canon, contracted(token_graph(g, LinMode::kReconf, 3, Rep::kRep1)));
    EXPECT_EQ(canon, contracted(token_graph(g, LinMode::kRandom, 3, Rep::kRep1)));
  }
}

TEST(TokenGraph, SpecialPositionsAreIsolated) {
  auto tg = token_graph(test::table5(), LinMode::kCanon, 0, Rep::kRep1);
  std::size_t eos = tg.seq_len - 1;
  for (const auto& e : tg.edges) {
    EXPECT_NE(e.src, eos);
    EXPECT_NE(e.tgt, eos);
  }
}

TEST(TokenGraph, EdgeListRoundTrip) {
  auto tg = token_graph(test::table5(), LinMode::kRandom, 2, Rep::kRep2);
  std::stringstream ss;
  write_edge_list(ss, tg);
  auto back = read_edge_list(ss);
  EXPECT_EQ(back.seq_len, tg.seq_len);
  EXPECT_EQ(back.edges, tg.edges);
}

TEST(TokenGraph, TypedRelationsForNodesOnly) {
  auto g = test::table9();
  auto rels = relation_table(LinVariant::kNodesOnly, observed_roles({g}));
  auto lin = linearize(g, LinMode::kCanon, LinVariant::kNodesOnly, 0);
  auto tok = tokenize(small_vocab(), lin);
  auto tg = build_token_graph(to_unlabeled(g), lin, tok, Rep::kRep3, rels);
  std::set<int> used;
  for (const auto& e : tg.edges) used.insert(e.relation);
  EXPECT_TRUE(used.count(rels.forward(":ARG1")));
  EXPECT_TRUE(used.count(rels.reverse(":mod")));
}

TEST(Linearize, GraphStatsSurviveRelinearization) {
  for (const auto& g : random_graphs(150, 53)) {
    auto s = penman::graph_stats(g);
    for (auto mode : {LinMode::kReconf, LinMode::kRandom}) {
      auto back = penman::parse_penman(linearize(g, mode, LinVariant::kNodesAndEdges, 9).penman);
      auto t = penman::graph_stats(back);
      EXPECT_EQ(t.size, s.size);
      EXPECT_EQ(t.diameter, s.diameter);
      EXPECT_EQ(t.reentrancies, s.reentrancies);
    }
  }
}
