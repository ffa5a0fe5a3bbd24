#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmdial/builder.hpp"
#include "mmdial/corpus.hpp"
#include "mmdial/io.hpp"

namespace mmdial {

enum class Task { kCurrent, kNext };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view name);

inline constexpr std::size_t kContextWindow = 3;
inline constexpr std::size_t kDefaultCandidates = 100;

// Candidates are ids into the task set's pool.
struct TaskExample {
  Task task = Task::kCurrent;
  std::string instance_id;
  std::string caption;
  std::vector<std::string> context;  // last <= 3 turns, oldest first
  std::size_t ground_truth = 0;
  std::vector<std::size_t> candidates;
};

// Pool: distinct ground-truth sentences of the split for this task, in first
// occurrence order. It doubles as the idf corpus.
struct TaskSet {
  Task task = Task::kCurrent;
  Split split = Split::kTest;
  std::uint64_t seed = 0;
  std::vector<std::string> pool;
  std::vector<TaskExample> examples;
};

// One example per eligible instance of `split` (for Task::kNext, only those
// with a next sentence). Distractors are drawn without replacement from the
// pool minus the example's own sentence, then the candidate list is shuffled.
// Each example uses its own stream derived from (seed, example index).
TaskSet make_tasks(std::span<const Instance> instances, std::span<const ImageRecord> images, Task task,
                   Split split, std::uint64_t seed, std::size_t num_candidates = kDefaultCandidates);

// Sparse tf-idf vector: token -> weight. Ordered so sums are reproducible.
using TermVector = std::map<std::string, double>;

class TfIdfIndex {
 public:
  explicit TfIdfIndex(std::span<const std::string> corpus);

  std::size_t documents() const { return documents_; }
  std::size_t document_frequency(std::string_view token) const;
  // ln((N + 1) / (df + 1)) + 1
  double idf(std::string_view token) const;
  TermVector vectorize(std::span<const std::string> tokens) const;

 private:
  std::size_t documents_;
  std::unordered_map<std::string, std::size_t> df_;
};

double cosine(const TermVector& a, const TermVector& b);

// Caption tokens followed by the context turns' tokens, in order.
std::vector<std::string> query_tokens(const TaskExample& example);

struct RankedCandidate {
  std::size_t id = 0;
  double score = 0.0;
};

// Candidates by descending cosine to the query, ties by id ascending.
std::vector<RankedCandidate> tfidf_rank(const TaskExample& example, std::span<const std::string> pool,
                                        const TfIdfIndex& index);

// 1-based position of the ground truth in a tfidf_rank result.
std::size_t ground_truth_rank(const TaskExample& example, std::span<const RankedCandidate> ranking);

struct EvalMetrics {
  std::size_t n = 0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double mean_rank = 0.0;
  double mrr = 0.0;
};

// Throws on empty input or a rank of zero.
EvalMetrics score(std::span<const std::size_t> ranks);

struct EvalReport {
  Task task = Task::kCurrent;
  Split split = Split::kTest;
  std::uint64_t seed = 0;
  EvalMetrics metrics;
  std::vector<std::size_t> ranks;
};

// Ranks every example in parallel; aggregation order is example order.
EvalReport evaluate(const TaskSet& tasks, int workers = 0);

io::OrderedJson to_json(const EvalReport& report, std::size_t num_candidates);

}  // namespace mmdial
