// Shared fixtures: PENMAN files under tests/data and generated graphs.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "structadapt/corpus.hpp"
#include "structadapt/penman.hpp"

namespace structadapt::test {

inline std::string read_data(const std::string& name) {
  std::ifstream is(std::string(STRUCTADAPT_TEST_DATA) + "/" + name);
  if (!is) throw std::runtime_error("missing test data " + name);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline std::string data_path(const std::string& name) { return std::string(STRUCTADAPT_TEST_DATA) + "/" + name; }

inline penman::AmrGraph table9() { return penman::parse_penman(read_data("table9_canon.penman")); }
inline penman::AmrGraph table9_random() { return penman::parse_penman(read_data("table9_random.penman")); }
inline penman::AmrGraph table5() { return penman::parse_penman(read_data("table5.penman")); }

/// Parsed graphs of a generated corpus.
inline std::vector<penman::AmrGraph> random_graphs(std::size_t n, std::uint64_t seed, double reentrancy_rate = 0.4,
                                                   std::size_t max_nodes = 12) {
  std::vector<penman::AmrGraph> out;
  for (const auto& r : corpus::generate_corpus(n, seed, max_nodes, reentrancy_rate)) {
    out.push_back(penman::parse_penman(r.amr));
  }
  return out;
}

}  // namespace structadapt::test
