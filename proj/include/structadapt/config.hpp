// Flat key=value configuration with namespaced keys and typed access.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace structadapt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  /// Every accepted key with its default value.
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"backbone.layers", "2"},
        {"backbone.d", "64"},
        {"backbone.heads", "4"},
        {"backbone.ff", "128"},
        {"backbone.max_len", "96"},
        {"backbone.vocab_size", "400"},
        {"backbone.pretrain_steps", "5000"},
        {"backbone.pretrain_lr", "0.001"},
        {"backbone.pretrain_batch", "8"},
        {"backbone.pretrain_graphs", "3000"},
        {"backbone.pretrain_seed", "99"},
        {"backbone.mask_rate", "0.15"},
        {"backbone.checkpoint", ""},
        {"adapter.variant", "structadapt_rgcn"},
        {"adapter.hidden", "16"},
        {"adapter.encoder", "true"},
        {"adapter.decoder", "true"},
        {"adapter.bases", "0"},
        {"adapter.gcn_degree", "in"},
        {"train.lr", "0.0001"},
        {"train.batch", "4"},
        {"train.beam", "5"},
        {"train.max_steps", "2000"},
        {"train.patience", "5"},
        {"train.seed", "1"},
        {"train.seeds", "4"},
        {"train.mode", "adapters_only"},
        {"train.lin_mode", "canon"},
        {"train.variant", "nodes_and_edges"},
        {"train.rep", "rep1"},
        {"train.max_decode_len", "64"},
        {"train.early_stopping", "true"},
        {"train.log_every", "100"},
        {"data.path", ""},
        {"data.seed", "1"},
        {"data.max_nodes", "12"},
        {"data.reentrancy_rate", "0.4"},
        {"data.train_size", "2000"},
        {"data.dev_size", "200"},
        {"data.test_size", "200"},
    };
    return d;
  }

  Config() : values_(defaults()) {}

  static Config parse(std::istream& is, const std::string& source = "config") {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
      }
      try {
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
  }

  /// Applies a "key=value" override.
  void apply(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
  }
  long long integer(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + v + "' is not an integer");
    }
  }
  std::size_t count(const std::string& key) const {
    auto x = integer(key);
    if (x < 0) throw ConfigError(key + " must not be negative");
    return static_cast<std::size_t>(x);
  }
  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + v + "' is not a number");
    }
  }
  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
  }

  /// All keys in sorted order, one "key=value" per line.
  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace structadapt
