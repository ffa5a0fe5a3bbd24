#pragma once

// Deliberately naive reimplementations used as test oracles. None of these
// call into the library's search, ranking or statistics code.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmdial/corpus.hpp"

namespace oracle {

struct Hit {
  std::string id;
  double sim;
};

// Scores every image, sorts the whole list, then applies floor and k.
inline std::vector<Hit> topk(std::span<const float> q, const mmdial::EmbeddingStore& images, std::size_t k,
                             double floor) {
  double qq = 0.0;
  for (float x : q) qq += static_cast<double>(x) * x;
  std::vector<Hit> all;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto row = images.row(i);
    double dot = 0.0, ii = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      dot += static_cast<double>(q[j]) * row[j];
      ii += static_cast<double>(row[j]) * row[j];
    }
    double c = dot / (std::sqrt(qq) * std::sqrt(ii));
    c = std::min(1.0, std::max(-1.0, c));
    all.push_back({images.id(i), static_cast<double>(static_cast<float>(c))});
  }
  std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
  std::vector<Hit> out;
  for (const auto& h : all) {
    if (out.size() == k) break;
    if (h.sim >= floor) out.push_back(h);
  }
  return out;
}

// Rank = 1 + (# strictly smaller) + (# equal others) / 2, counted pairwise.
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) less += 1;
      if (j != i && v[j] == v[i]) equal += 1;
    }
    r[i] = 1.0 + less + equal / 2.0;
  }
  return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  auto rx = ranks(x);
  auto ry = ranks(y);
  return pearson(rx, ry);
}

struct Metrics {
  double r1, r5, mean_rank, mrr;
};

inline Metrics metrics(const std::vector<std::size_t>& ranks) {
  Metrics m{0, 0, 0, 0};
  for (auto r : ranks) {
    m.r1 += r == 1;
    m.r5 += r <= 5;
    m.mean_rank += r;
    m.mrr += 1.0 / r;
  }
  double n = ranks.size();
  return {m.r1 / n, m.r5 / n, m.mean_rank / n, m.mrr / n};
}

}  // namespace oracle
