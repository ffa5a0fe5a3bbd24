#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmdial/corpus.hpp"

namespace mmdial {

struct Match {
  std::string image_id;
  double similarity = 0.0;

  bool operator==(const Match&) const = default;
};

// Matches are sorted by similarity descending, ties by image_id ascending.
struct TopKResult {
  std::string query_id;
  std::vector<Match> matches;

  bool operator==(const TopKResult&) const = default;
};

struct Query {
  std::string id;
  std::span<const float> vector;
};

// dot(a, b) / (|a| |b|), accumulated in double. Throws on dimension mismatch
// or a zero vector.
double cosine(std::span<const float> a, std::span<const float> b);

// Similarity as emitted by the search: the double cosine clamped to [-1, 1]
// and rounded to float, so ranking, flooring and serialization all see the
// same value.
double search_similarity(double dot, double query_norm, double image_norm);

// Serial reference: linear scan over every image, exact.
TopKResult topk_bruteforce(std::string query_id, std::span<const float> query,
                           const EmbeddingStore& images, std::size_t k, double floor);

struct BatchOptions {
  int workers = 0;  // 0 = OpenMP default
  std::size_t query_block = 32;
  std::size_t image_block = 1024;
};

// Blocked, OpenMP-parallel over query blocks. Result i is bitwise identical to
// topk_bruteforce on query i for any worker count or block size.
std::vector<TopKResult> topk_batch(std::span<const Query> queries, const EmbeddingStore& images,
                                   std::size_t k, double floor, const BatchOptions& options = {});

}  // namespace mmdial
