#include <algorithm>
#include <cmath>

#include "mmdial/error.hpp"
#include "mmdial/simsearch.hpp"
#include "simsearch_kernel.hpp"

namespace mmdial {

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero vector");
  return detail::dot(a.data(), b.data(), a.size()) / (na * nb);
}

double search_similarity(double dot, double query_norm, double image_norm) {
  const double c = std::clamp(dot / (query_norm * image_norm), -1.0, 1.0);
  return static_cast<double>(static_cast<float>(c));
}

TopKResult topk_bruteforce(std::string query_id, std::span<const float> query, const EmbeddingStore& images,
                           std::size_t k, double floor) {
  if (query.size() != images.dimension()) {
    throw ValidationError("query " + query_id + " has dimension " + std::to_string(query.size()) +
                          ", image store has " + std::to_string(images.dimension()));
  }
  if (k == 0) throw ValidationError("k must be positive");
  const double qn = l2_norm(query);
  if (qn == 0.0) throw ValidationError("query " + query_id + " is a zero vector");

  std::vector<Match> all;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double sim =
        search_similarity(detail::dot(query.data(), images.row(i).data(), query.size()), qn, images.norm(i));
    if (sim >= floor) all.push_back({images.id(i), sim});
  }
  const auto better = [](const Match& a, const Match& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.image_id < b.image_id);
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return {std::move(query_id), std::move(all)};
}

}  // namespace mmdial
