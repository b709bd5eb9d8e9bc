#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "structadapt/corpus.hpp"

using namespace structadapt;
using namespace structadapt::corpus;

TEST(Generator, ZeroRateGivesTrees) {
  for (const auto& r : generate_corpus(200, 4, 12, 0.0)) {
    auto g = penman::parse_penman(r.amr);
    EXPECT_EQ(penman::graph_stats(g).reentrancies, 0u) << r.amr;
  }
}

TEST(Generator, PositiveRateProducesReentrancies) {
  std::size_t with = 0;
  for (const auto& r : generate_corpus(200, 4, 12, 0.4)) {
    with += penman::graph_stats(penman::parse_penman(r.amr)).reentrancies > 0;
  }
  EXPECT_GT(with, 20u);
}

TEST(Generator, RespectsNodeBudget) {
  for (const auto& r : generate_corpus(200, 9, 7, 0.4)) {
    EXPECT_LE(penman::parse_penman(r.amr).nodes.size(), 7u) << r.amr;
  }
}

TEST(Generator, SameSeedSameBytes) {
  std::ostringstream a, b, c;
  save_jsonl(a, generate_corpus(100, 11, 12, 0.4));
  save_jsonl(b, generate_corpus(100, 11, 12, 0.4));
  save_jsonl(c, generate_corpus(100, 12, 12, 0.4));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Generator, RecordsAreDistinctAndSplitByKey) {
  auto recs = generate_corpus(300, 2, 12, 0.4);
  std::set<std::string> keys;
  std::map<std::string, std::set<std::string>> by_split;
  for (const auto& r : recs) {
    auto key = canonical_key(penman::parse_penman(r.amr));
    EXPECT_TRUE(keys.insert(key).second);
    EXPECT_EQ(r.split, split_for(key));
    by_split[r.split].insert(key);
  }
  for (const auto& [a, ka] : by_split)
    for (const auto& [b, kb] : by_split)
      if (a < b)
        for (const auto& k : ka) EXPECT_FALSE(kb.count(k));
  EXPECT_EQ(by_split.size(), 3u);
}

TEST(Jsonl, RoundTrip) {
  auto recs = generate_corpus(50, 3, 12, 0.4);
  std::stringstream ss;
  save_jsonl(ss, recs);
  EXPECT_EQ(load_jsonl(ss), recs);
}

TEST(Jsonl, BadLineReportsLineNumber) {
  std::stringstream ss("{\"amr\":\"(s sleep-01)\",\"text\":\"x\"}\nnot json\n");
  try {
    load_jsonl(ss);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Realization, SentencesAreNonEmptyAndDeterministic) {
  for (const auto& r : generate_corpus(100, 6, 12, 0.4)) {
    auto g = penman::parse_penman(r.amr);
    EXPECT_FALSE(r.text.empty());
    EXPECT_EQ(realize(g), r.text);
  }
}

// Every graph up to the node budget, enumerated: distinct normalized graphs
// must get distinct sentences.
static void check_injective(std::size_t max_nodes, double rate) {
  GenOptions opt;
  opt.max_nodes = max_nodes;
  opt.reentrancy_rate = rate;
  auto inv = Inventory::reduced();
  std::map<std::string, std::string> by_sentence;
  std::size_t collisions = 0;
  auto n = enumerate_graphs(inv, opt, [&](const penman::AmrGraph& g) {
    auto key = canonical_key(penman::normalize_inverse_roles(g));
    auto [it, fresh] = by_sentence.emplace(realize(g, inv), key);
    if (!fresh && it->second != key) {
      if (++collisions <= 5) ADD_FAILURE() << "'" << it->first << "' realizes two graphs";
    }
  });
  EXPECT_GT(n, 0u);
  EXPECT_EQ(collisions, 0u);
}

TEST(Realization, InjectiveUpToFiveNodes) { check_injective(5, 0.4); }
TEST(Realization, InjectiveUpToSixNodes) { check_injective(6, 0.4); }
