#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "mmdial/error.hpp"
#include "mmdial/simsearch.hpp"
#include "simsearch_kernel.hpp"

namespace mmdial {

namespace {

struct Candidate {
  double similarity;
  std::uint32_t row;
};

// Bounded best-first list. `rank` orders rows by image id.
class TopK {
 public:
  TopK(std::size_t k, double floor, const std::vector<std::uint32_t>& rank)
      : k_(k), floor_(floor), rank_(&rank) {
    items_.reserve(k + 1);
  }

  void offer(double sim, std::uint32_t row) {
    if (!(sim >= floor_)) return;
    const Candidate c{sim, row};
    if (items_.size() == k_ && !better(c, items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), c,
                                [this](const Candidate& a, const Candidate& b) { return better(a, b); });
    items_.insert(pos, c);
    if (items_.size() > k_) items_.pop_back();
  }

  const std::vector<Candidate>& items() const { return items_; }

 private:
  bool better(const Candidate& a, const Candidate& b) const {
    return a.similarity > b.similarity || (a.similarity == b.similarity && (*rank_)[a.row] < (*rank_)[b.row]);
  }

  std::size_t k_;
  double floor_;
  const std::vector<std::uint32_t>* rank_;
  std::vector<Candidate> items_;
};

// Four images against one query; each sum is accumulated exactly as
// detail::dot would, so results match the serial path bit for bit.
inline void dot4(const float* q, const float* a, const float* b, const float* c, const float* e, std::size_t d,
                 double out[4]) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double x = q[j];
    s0 += x * static_cast<double>(a[j]);
    s1 += x * static_cast<double>(b[j]);
    s2 += x * static_cast<double>(c[j]);
    s3 += x * static_cast<double>(e[j]);
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
  out[3] = s3;
}

}  // namespace

std::vector<TopKResult> topk_batch(std::span<const Query> queries, const EmbeddingStore& images, std::size_t k,
                                   double floor, const BatchOptions& options) {
  if (k == 0) throw ValidationError("k must be positive");
  const std::size_t d = images.dimension();
  const std::size_t n = images.size();
  std::vector<double> qnorm(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].vector.size() != d) {
      throw ValidationError("query " + queries[q].id + " has dimension " + std::to_string(queries[q].vector.size()) +
                            ", image store has " + std::to_string(d));
    }
    qnorm[q] = l2_norm(queries[q].vector);
    if (qnorm[q] == 0.0) throw ValidationError("query " + queries[q].id + " is a zero vector");
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return images.id(a) < images.id(b); });
  std::vector<std::uint32_t> rank(n);
  for (std::uint32_t r = 0; r < n; ++r) rank[order[r]] = r;

  const std::size_t qb = std::max<std::size_t>(1, options.query_block);
  const std::size_t ib = std::max<std::size_t>(4, options.image_block);
  const std::size_t nblocks = (queries.size() + qb - 1) / qb;
  const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
  const float* base = images.data().data();

  std::vector<TopKResult> results(queries.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const std::size_t q0 = blk * qb;
    const std::size_t q1 = std::min(queries.size(), q0 + qb);
    std::vector<TopK> tops;
    tops.reserve(q1 - q0);
    for (std::size_t q = q0; q < q1; ++q) tops.emplace_back(k, floor, rank);

    for (std::size_t i0 = 0; i0 < n; i0 += ib) {
      const std::size_t i1 = std::min(n, i0 + ib);
      for (std::size_t q = q0; q < q1; ++q) {
        const float* qv = queries[q].vector.data();
        auto& top = tops[q - q0];
        std::size_t i = i0;
        double s[4];
        for (; i + 4 <= i1; i += 4) {
          dot4(qv, base + i * d, base + (i + 1) * d, base + (i + 2) * d, base + (i + 3) * d, d, s);
          for (std::size_t t = 0; t < 4; ++t) {
            top.offer(search_similarity(s[t], qnorm[q], images.norm(i + t)), static_cast<std::uint32_t>(i + t));
          }
        }
        for (; i < i1; ++i) {
          const double dot = detail::dot(qv, base + i * d, d);
          top.offer(search_similarity(dot, qnorm[q], images.norm(i)), static_cast<std::uint32_t>(i));
        }
      }
    }

    for (std::size_t q = q0; q < q1; ++q) {
      auto& out = results[q];
      out.query_id = queries[q].id;
      for (const auto& c : tops[q - q0].items()) out.matches.push_back({images.id(c.row), c.similarity});
    }
  }
  return results;
}

}  // namespace mmdial
