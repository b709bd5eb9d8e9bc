// Named parameter storage and the flat binary checkpoint format.
//
// Layout:
//   8 bytes   magic "SACKPT01"
//   8 bytes   header length H, little-endian unsigned
//   H bytes   JSON header: {"scalar": "f64", "meta": {...},
//             "tensors": [{"name", "shape": [r, c], "offset"}]}
//   payload   raw little-endian values; each tensor starts at its byte
//             offset from the beginning of the payload
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "structadapt/tensor.hpp"

namespace structadapt {

class ParameterStore {
 public:
  ad::Tensor& add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, ad::Tensor::zeros(rows, cols));
    return items_.back().second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  ad::Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return items_[it->second].second;
  }
  const ad::Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return items_[it->second].second;
  }
  auto& items() { return items_; }
  const auto& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  /// Independent copy of every value.
  ParameterStore clone() const {
    ParameterStore out;
    for (const auto& [name, t] : items_) {
      auto& c = out.add(name, t.rows(), t.cols());
      std::copy(t.data().begin(), t.data().end(), c.data().begin());
      c.set_requires_grad(t.requires_grad());
    }
    return out;
  }

  /// Copies values from `src` for every name present in both.
  void assign_from(const ParameterStore& src) {
    for (auto& [name, t] : items_) {
      if (!src.contains(name)) continue;
      const auto& s = src.get(name);
      if (s.shape() != t.shape()) throw std::invalid_argument("shape mismatch for " + name);
      std::copy(s.data().begin(), s.data().end(), t.data().begin());
    }
  }

 private:
  std::vector<std::pair<std::string, ad::Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

inline constexpr char kCheckpointMagic[9] = "SACKPT01";

inline void save_checkpoint(const std::string& path, const ParameterStore& params,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  static_assert(sizeof(ad::Scalar) == 8 || sizeof(ad::Scalar) == 4);
  nlohmann::json header;
  header["scalar"] = sizeof(ad::Scalar) == 8 ? "f64" : "f32";
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.items()) {
    header["tensors"].push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"offset", offset}});
    offset += t.numel() * sizeof(ad::Scalar);
  }
  std::string h = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(kCheckpointMagic, 8);
  std::uint64_t len = h.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(len >> (8 * i));
  os.write(reinterpret_cast<const char*>(len_bytes), 8);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : params.items()) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(ad::Scalar)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

struct LoadedCheckpoint {
  ParameterStore params;
  nlohmann::json meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  unsigned char len_bytes[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint: " + path);
  }
  is.read(reinterpret_cast<char*>(len_bytes), 8);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
  std::string h(len, '\0');
  if (!is.read(h.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("truncated checkpoint header");
  auto header = nlohmann::json::parse(h);
  if (header.at("scalar") != (sizeof(ad::Scalar) == 8 ? "f64" : "f32")) {
    throw std::runtime_error("checkpoint scalar type does not match this build");
  }
  std::vector<char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  LoadedCheckpoint out;
  out.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    std::size_t r = entry.at("shape")[0], c = entry.at("shape")[1];
    std::uint64_t off = entry.at("offset");
    std::size_t bytes = r * c * sizeof(ad::Scalar);
    if (off + bytes > payload.size()) throw std::runtime_error("truncated checkpoint payload");
    auto& t = out.params.add(entry.at("name"), r, c);
    std::memcpy(t.data().data(), payload.data() + off, bytes);
  }
  return out;
}

}  // namespace structadapt
