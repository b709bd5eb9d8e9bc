#include <gtest/gtest.h>

#include <set>

#include "structadapt/experiments.hpp"

using namespace structadapt;
using namespace structadapt::experiments;

TEST(LowData, ScheduleCoversEveryCombination) {
  auto runs = low_data_schedule({1000}, 5, {1, 2});
  ASSERT_EQ(runs.size(), 10u);
  std::set<std::pair<std::size_t, std::uint64_t>> seen;
  for (const auto& r : runs) {
    EXPECT_EQ(r.size, 1000u);
    seen.insert({r.sample, r.seed});
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(low_data_schedule({100, 200, 300}, 2, {1, 2, 3}).size(), 18u);
}

TEST(LowData, SubsampleIsSeededAndOrdered) {
  auto recs = corpus::generate_corpus(60, 1, 12, 0.4);
  auto a = subsample(recs, 20, 5), b = subsample(recs, 20, 5), c = subsample(recs, 20, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<std::string> amrs;
  for (const auto& r : a) amrs.insert(r.amr);
  EXPECT_EQ(amrs.size(), 20u);
  EXPECT_THROW(subsample(recs, 61, 1), std::invalid_argument);
}

TEST(Summary, MeanAndSampleSd) {
  auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-12);
  EXPECT_EQ(summarize({3}).sd, 0.0);
}

TEST(Placement, ArmsShareTrainableCount) {
  const std::size_t layers = 2, d = 64, rels = 2;
  model::BackboneConfig bb{layers, d, 4, 128, 300, 32};
  auto arms = placement_arms({AdapterVariant::kAdapt, AdapterVariant::kStructGcn}, 8, 1e-4, layers, d, rels);
  ASSERT_EQ(arms.size(), 5u);
  std::set<std::size_t> counts;
  for (const auto& a : arms) {
    auto b = model::make_bundle(bb, a.adapter, 1);
    auto c = model::count_params(b, model::TrainMode::kAdaptersOnly);
    EXPECT_EQ(c.trainable, adapter_total(a.adapter, layers, d, rels)) << a.name;
    counts.insert(c.trainable);
  }
  EXPECT_EQ(counts.size(), 1u);
  EXPECT_EQ(arms[0].name, "adapt_enc");
  EXPECT_EQ(arms[0].adapter.hidden, 17u);
}

TEST(Placement, RgcnWithoutExactWidthThrows) {
  // Relational layers grow faster in m, so a one-sided width may not exist.
  bool threw = false;
  for (std::size_t m = 1; m <= 16 && !threw; ++m) {
    try {
      placement_arms({AdapterVariant::kStructRgcn}, m, 1e-4, 2, 64, 2);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

TEST(Table, CsvAndJsonAgree) {
  Table t{{"arm", "bleu"}, {{"adapt", fmt(1.0 / 3.0)}, {"rgcn", fmt(2)}}};
  EXPECT_EQ(t.csv(), "arm,bleu\nadapt,0.3333\nrgcn,2.0000\n");
  EXPECT_EQ(t.json()[1]["bleu"], "2.0000");
}

namespace {

Setup tiny_setup() {
  Config c;
  for (const char* kv : {"backbone.layers=1", "backbone.d=16", "backbone.heads=2", "backbone.ff=32",
                         "backbone.max_len=64", "backbone.vocab_size=300", "backbone.pretrain_steps=20",
                         "backbone.pretrain_graphs=40", "data.train_size=24", "data.dev_size=6",
                         "data.test_size=6", "data.max_nodes=6", "train.max_steps=12", "train.seeds=1",
                         "train.beam=1", "train.lr=0.001"}) {
    c.apply(kv);
  }
  return Setup::from_config(c);
}

}  // namespace

TEST(Sweep, RerunGivesIdenticalCsv) {
  auto s = tiny_setup();
  auto run = [&] {
    auto ws = build_workspace(s);
    return sweep_hidden(ws, s, {AdapterVariant::kAdapt, AdapterVariant::kStructRgcn}, {4}).csv();
  };
  auto a = run(), b = run();
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
}

TEST(Workspace, CheckpointFingerprintMismatchThrows) {
  auto s = tiny_setup();
  s.checkpoint = ::testing::TempDir() + "/experiments_ws.ckpt";
  std::remove(s.checkpoint.c_str());
  auto first = build_workspace(s);
  auto again = build_workspace(s);
  EXPECT_EQ(first.vocab.size(), again.vocab.size());
  s.pretrain.steps = 21;
  EXPECT_THROW(build_workspace(s), std::runtime_error);
  std::remove(s.checkpoint.c_str());
}
