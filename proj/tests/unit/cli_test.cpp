#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  std::string cmd = std::string("\"") + STRUCTADAPT_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string data(const std::string& name) { return std::string("\"") + STRUCTADAPT_TEST_DATA + "/" + name + "\""; }

}  // namespace

TEST(Cli, StatsOfTable9) {
  auto r = run("stats " + data("table9_canon.penman"));
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("size 7"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("reentrancies 0"), std::string::npos) << r.out;
}

TEST(Cli, ParamsWithoutAdapters) {
  auto r = run("params --set adapter.variant=none");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("\"fraction\": 0.0"), std::string::npos) << r.out;
}

TEST(Cli, RandomLinearizationIsSeeded) {
  auto a = run("linearize --mode random --seed 7 " + data("table5.penman"));
  auto b = run("linearize --mode random --seed 7 " + data("table5.penman"));
  EXPECT_EQ(a.status, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
}

TEST(Cli, CanonLinearization) {
  auto r = run("linearize " + data("table9_canon.penman"));
  EXPECT_EQ(r.out, "subsidize-01 :ARG1 utility :poss she :mod all\n");
}

TEST(Cli, UnknownKeyFails) {
  auto r = run("params --set adapter.bogus=1");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("unknown key 'adapter.bogus'"), std::string::npos) << r.out;
}

TEST(Cli, MalformedGraphFails) {
  auto path = ::testing::TempDir() + "/broken.penman";
  FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("(a / b :ARG0 (c\n", f);
  std::fclose(f);
  auto r = run("parse \"" + path + "\"");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error:"), std::string::npos) << r.out;
}

TEST(Cli, EvaluateIdentity) {
  auto path = ::testing::TempDir() + "/hyp.txt";
  FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("the cat sat on the mat\n", f);
  std::fclose(f);
  auto r = run("evaluate --hyp \"" + path + "\" --ref \"" + path + "\"");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("100"), std::string::npos) << r.out;
}
