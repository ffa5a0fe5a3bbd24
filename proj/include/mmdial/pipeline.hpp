#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmdial/builder.hpp"
#include "mmdial/calibrate.hpp"
#include "mmdial/evalharness.hpp"
#include "mmdial/io.hpp"
#include "mmdial/preprocess.hpp"

// File-level commands behind the `mmdial` CLI. Each validates its inputs
// before writing, writes atomically, and returns a JSON summary.
namespace mmdial::pipeline {

using NamedPath = std::pair<std::string, std::filesystem::path>;

// Parses "name=path".
NamedPath parse_named_path(const std::string& spec);

struct BuildConfig {
  std::vector<NamedPath> dialogues;
  std::vector<NamedPath> images;
  std::vector<NamedPath> embeddings;  // roles: "text", "image"
  std::size_t topk = 5;
  double floor = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> stopwords;
  bool match_splits = true;  // search only images of the dialogue's split
  int workers = 0;
};

inline constexpr const char* kInstancesFile = "instances.jsonl";
inline constexpr const char* kSimilarityFile = "similarity.jsonl";

// preprocess -> simsearch -> builder. Writes <out>/instances.jsonl and
// <out>/similarity.jsonl.
io::OrderedJson run_build(const BuildConfig& config);

struct CalibrateConfig {
  std::filesystem::path instances;
  std::filesystem::path annotations;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

io::OrderedJson run_calibrate(const CalibrateConfig& config);

struct SampleConfig {
  std::filesystem::path instances;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

// Draws the per-combination annotation sample and writes it as an instance file.
io::OrderedJson run_sample(const SampleConfig& config);

struct FilterConfig {
  std::filesystem::path instances;
  std::filesystem::path thresholds;
  std::optional<double> threshold;  // applies to every combination
  std::optional<double> default_threshold;
  std::filesystem::path out;
};

io::OrderedJson run_filter(const FilterConfig& config);

struct StatsConfig {
  std::filesystem::path instances;
  std::vector<NamedPath> dialogues;
  std::optional<std::filesystem::path> out;
};

io::OrderedJson run_stats(const StatsConfig& config);

struct EvalConfig {
  std::filesystem::path instances;
  std::vector<NamedPath> images;
  Task task = Task::kCurrent;
  Split split = Split::kTest;
  std::size_t candidates = kDefaultCandidates;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> dump;
  int workers = 0;
};

io::OrderedJson run_eval(const EvalConfig& config);

}  // namespace mmdial::pipeline
