// Corpus BLEU-4 and chrF++.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace structadapt::eval {

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

template <class Seq>
std::map<Seq, std::size_t> ngram_counts(const std::vector<typename Seq::value_type>& toks, std::size_t n) {
  std::map<Seq, std::size_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[Seq(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

template <class Seq>
std::size_t clipped_matches(const std::map<Seq, std::size_t>& hyp, const std::map<Seq, std::size_t>& ref) {
  std::size_t m = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o) {
    for (int i = 0; i < 4; ++i) {
      matches[i] += o.matches[i];
      totals[i] += o.totals[i];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
    return *this;
  }
  double precision(int n) const {
    return totals[n] ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
  }
  double brevity_penalty() const {
    if (hyp_len == 0) return 0.0;
    if (hyp_len >= ref_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  }
  /// 0–100; zero when any order has no matches.
  double score() const {
    double log_sum = 0;
    for (int n = 0; n < 4; ++n) {
      if (matches[n] == 0) return 0.0;
      log_sum += std::log(precision(n));
    }
    return 100.0 * brevity_penalty() * std::exp(log_sum / 4.0);
  }
};

inline BleuStats bleu_stats(const std::string& hyp, const std::string& ref) {
  auto h = split_words(hyp), r = split_words(ref);
  BleuStats s;
  s.hyp_len = h.size();
  s.ref_len = r.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    using G = std::vector<std::string>;
    s.matches[n - 1] = clipped_matches(ngram_counts<G>(h, n), ngram_counts<G>(r, n));
    s.totals[n - 1] = h.size() >= n ? h.size() - n + 1 : 0;
  }
  return s;
}

inline BleuStats corpus_bleu_stats(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  if (hyps.empty()) throw std::invalid_argument("bleu: empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += bleu_stats(hyps[i], refs[i]);
  return total;
}

/// Corpus BLEU-4 over whitespace tokens with brevity penalty and no smoothing.
inline double bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  return corpus_bleu_stats(hyps, refs).score();
}

// chrF++: character 1–6 grams (whitespace removed) and word 1–2 grams.

struct ChrfStats {
  static constexpr std::size_t kCharOrder = 6, kWordOrder = 2;
  std::array<std::size_t, kCharOrder + kWordOrder> hyp{}, ref{}, match{};

  ChrfStats& operator+=(const ChrfStats& o) {
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      hyp[i] += o.hyp[i];
      ref[i] += o.ref[i];
      match[i] += o.match[i];
    }
    return *this;
  }

  /// Averages precision and recall over orders present in both sides, then
  /// takes F-beta of the averages.
  double score(double beta = 2.0) const {
    double p = 0, r = 0;
    std::size_t orders = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (!hyp[i] || !ref[i]) continue;
      p += static_cast<double>(match[i]) / static_cast<double>(hyp[i]);
      r += static_cast<double>(match[i]) / static_cast<double>(ref[i]);
      ++orders;
    }
    if (!orders) return 0.0;
    p /= static_cast<double>(orders);
    r /= static_cast<double>(orders);
    if (p + r == 0) return 0.0;
    double b2 = beta * beta;
    return 100.0 * (1 + b2) * p * r / (b2 * p + r);
  }
};

/// Words with one leading or trailing punctuation mark split off.
inline std::vector<std::string> chrf_words(const std::string& s) {
  std::vector<std::string> out;
  for (auto& w : split_words(s)) {
    auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    if (w.size() > 1 && punct(w.back())) {
      out.push_back(w.substr(0, w.size() - 1));
      out.push_back(w.substr(w.size() - 1));
    } else if (w.size() > 1 && punct(w.front())) {
      out.push_back(w.substr(0, 1));
      out.push_back(w.substr(1));
    } else {
      out.push_back(w);
    }
  }
  return out;
}

inline ChrfStats chrf_stats(const std::string& hyp, const std::string& ref) {
  ChrfStats s;
  auto strip = [](const std::string& x) {
    std::vector<char> out;
    for (char c : x)
      if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
  };
  auto hc = strip(hyp), rc = strip(ref);
  for (std::size_t n = 1; n <= ChrfStats::kCharOrder; ++n) {
    auto h = ngram_counts<std::string>(hc, n), r = ngram_counts<std::string>(rc, n);
    s.hyp[n - 1] = hc.size() >= n ? hc.size() - n + 1 : 0;
    s.ref[n - 1] = rc.size() >= n ? rc.size() - n + 1 : 0;
    s.match[n - 1] = clipped_matches(h, r);
  }
  auto hw = chrf_words(hyp), rw = chrf_words(ref);
  for (std::size_t n = 1; n <= ChrfStats::kWordOrder; ++n) {
    using G = std::vector<std::string>;
    auto h = ngram_counts<G>(hw, n), r = ngram_counts<G>(rw, n);
    std::size_t k = ChrfStats::kCharOrder + n - 1;
    s.hyp[k] = hw.size() >= n ? hw.size() - n + 1 : 0;
    s.ref[k] = rw.size() >= n ? rw.size() - n + 1 : 0;
    s.match[k] = clipped_matches(h, r);
  }
  return s;
}

inline double chrf(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                   double beta = 2.0) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("chrf: hypothesis/reference count mismatch");
  if (hyps.empty()) throw std::invalid_argument("chrf: empty corpus");
  ChrfStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += chrf_stats(hyps[i], refs[i]);
  return total.score(beta);
}

}  // namespace structadapt::eval
