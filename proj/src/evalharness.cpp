#include "mmdial/evalharness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mmdial/error.hpp"
#include "mmdial/preprocess.hpp"
#include "mmdial/rng.hpp"

namespace mmdial {

std::string_view to_string(Task task) { return task == Task::kCurrent ? "current" : "next"; }

std::optional<Task> parse_task(std::string_view name) {
  if (name == "current") return Task::kCurrent;
  if (name == "next") return Task::kNext;
  return std::nullopt;
}

TaskSet make_tasks(std::span<const Instance> instances, std::span<const ImageRecord> images, Task task, Split split,
                   std::uint64_t seed, std::size_t num_candidates) {
  if (num_candidates == 0) throw ValidationError("candidate count must be positive");
  std::unordered_map<std::string_view, const ImageRecord*> image_by_id;
  for (const auto& img : images) image_by_id.emplace(img.image_id, &img);

  TaskSet set;
  set.task = task;
  set.split = split;
  set.seed = seed;
  std::unordered_map<std::string, std::size_t> pool_id;
  std::vector<const Instance*> eligible;
  std::vector<std::size_t> truth;
  for (const auto& inst : instances) {
    if (inst.split != split) continue;
    if (task == Task::kNext && !inst.next) continue;
    const std::string& text = task == Task::kCurrent ? inst.target : *inst.next;
    auto [it, inserted] = pool_id.emplace(text, set.pool.size());
    if (inserted) set.pool.push_back(text);
    eligible.push_back(&inst);
    truth.push_back(it->second);
  }
  if (eligible.empty()) {
    throw ValidationError("no eligible " + std::string(to_string(task)) + " examples in split " +
                          std::string(to_string(split)));
  }
  if (set.pool.size() < num_candidates) {
    throw ValidationError("candidate pool has " + std::to_string(set.pool.size()) + " distinct sentences, need " +
                          std::to_string(num_candidates));
  }

  set.examples.resize(eligible.size());
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    auto it = image_by_id.find(eligible[e]->image_id);
    if (it == image_by_id.end()) throw ValidationError("no caption for image " + eligible[e]->image_id);
  }

  const std::size_t pool_size = set.pool.size();
#pragma omp parallel for schedule(static)
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    const Instance& inst = *eligible[e];
    TaskExample& ex = set.examples[e];
    ex.task = task;
    ex.instance_id = inst.instance_id;
    ex.caption = image_by_id.at(inst.image_id)->caption;
    const std::size_t first = inst.context.size() > kContextWindow ? inst.context.size() - kContextWindow : 0;
    for (std::size_t t = first; t < inst.context.size(); ++t) ex.context.push_back(inst.context[t].text);
    ex.ground_truth = truth[e];

    // Partial Fisher-Yates over pool ids other than the ground truth, with
    // displaced entries kept in a sparse map.
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    const std::size_t others = pool_size - 1;
    std::unordered_map<std::size_t, std::size_t> swapped;
    auto slot = [&](std::size_t i) {
      auto s = swapped.find(i);
      return s == swapped.end() ? i : s->second;
    };
    ex.candidates.reserve(num_candidates);
    ex.candidates.push_back(ex.ground_truth);
    for (std::size_t i = 0; i + 1 < num_candidates; ++i) {
      const std::size_t j = i + rng.below(others - i);
      const std::size_t vi = slot(i);
      const std::size_t vj = slot(j);
      swapped[j] = vi;
      swapped[i] = vj;
      ex.candidates.push_back(vj < ex.ground_truth ? vj : vj + 1);
    }
    rng.shuffle(std::span<std::size_t>(ex.candidates));
  }
  return set;
}

TfIdfIndex::TfIdfIndex(std::span<const std::string> corpus) : documents_(corpus.size()) {
  for (const auto& doc : corpus) {
    std::unordered_set<std::string> seen;
    for (auto& token : tokenize(doc)) {
      if (seen.insert(token).second) ++df_[token];
    }
  }
}

std::size_t TfIdfIndex::document_frequency(std::string_view token) const {
  auto it = df_.find(std::string(token));
  return it == df_.end() ? 0 : it->second;
}

double TfIdfIndex::idf(std::string_view token) const {
  return std::log((static_cast<double>(documents_) + 1.0) /
                  (static_cast<double>(document_frequency(token)) + 1.0)) +
         1.0;
}

TermVector TfIdfIndex::vectorize(std::span<const std::string> tokens) const {
  TermVector tf;
  for (const auto& t : tokens) tf[t] += 1.0;
  for (auto& [token, weight] : tf) weight *= idf(token);
  return tf;
}

double cosine(const TermVector& a, const TermVector& b) {
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (const auto& [t, w] : a) na += w * w;
  for (const auto& [t, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::string> query_tokens(const TaskExample& example) {
  auto tokens = tokenize(example.caption);
  for (const auto& turn : example.context) {
    auto more = tokenize(turn);
    tokens.insert(tokens.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return tokens;
}

std::vector<RankedCandidate> tfidf_rank(const TaskExample& example, std::span<const std::string> pool,
                                        const TfIdfIndex& index) {
  const auto query = index.vectorize(query_tokens(example));
  std::vector<RankedCandidate> ranked;
  ranked.reserve(example.candidates.size());
  for (auto id : example.candidates) {
    if (id >= pool.size()) throw ValidationError("candidate id outside the pool");
    ranked.push_back({id, cosine(query, index.vectorize(tokenize(pool[id])))});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
  });
  return ranked;
}

std::size_t ground_truth_rank(const TaskExample& example, std::span<const RankedCandidate> ranking) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].id == example.ground_truth) return i + 1;
  }
  throw ValidationError("ground truth missing from ranking of " + example.instance_id);
}

EvalMetrics score(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ValidationError("cannot score an empty ranking list");
  EvalMetrics m;
  m.n = ranks.size();
  double hit1 = 0.0, hit5 = 0.0, rank_sum = 0.0, rr_sum = 0.0;
  for (auto r : ranks) {
    if (r == 0) throw ValidationError("ranks are 1-based");
    if (r <= 1) hit1 += 1.0;
    if (r <= 5) hit5 += 1.0;
    rank_sum += static_cast<double>(r);
    rr_sum += 1.0 / static_cast<double>(r);
  }
  const double n = static_cast<double>(ranks.size());
  m.r_at_1 = hit1 / n;
  m.r_at_5 = hit5 / n;
  m.mean_rank = rank_sum / n;
  m.mrr = rr_sum / n;
  return m;
}

EvalReport evaluate(const TaskSet& tasks, int workers) {
  for (const auto& ex : tasks.examples) {
    if (std::count(ex.candidates.begin(), ex.candidates.end(), ex.ground_truth) != 1) {
      throw ValidationError("example " + ex.instance_id + " must list its ground truth exactly once");
    }
    for (auto id : ex.candidates) {
      if (id >= tasks.pool.size()) throw ValidationError("example " + ex.instance_id + " has a candidate outside the pool");
    }
  }
  const TfIdfIndex index(tasks.pool);
  EvalReport report;
  report.task = tasks.task;
  report.split = tasks.split;
  report.seed = tasks.seed;
  report.ranks.resize(tasks.examples.size());
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::size_t e = 0; e < tasks.examples.size(); ++e) {
    const auto ranking = tfidf_rank(tasks.examples[e], tasks.pool, index);
    report.ranks[e] = ground_truth_rank(tasks.examples[e], ranking);
  }
  report.metrics = score(report.ranks);
  return report;
}

io::OrderedJson to_json(const EvalReport& report, std::size_t num_candidates) {
  io::OrderedJson out;
  out["task"] = to_string(report.task);
  out["n"] = report.metrics.n;
  out["r_at_1"] = report.metrics.r_at_1;
  out["r_at_5"] = report.metrics.r_at_5;
  out["mean_rank"] = report.metrics.mean_rank;
  out["mrr"] = report.metrics.mrr;
  out["seed"] = report.seed;
  out["split"] = to_string(report.split);
  out["candidates"] = num_candidates;
  out["distractor_pool"] = "same-task ground-truth sentences of the split";
  return out;
}

}  // namespace mmdial
