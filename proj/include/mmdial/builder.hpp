#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmdial/corpus.hpp"
#include "mmdial/io.hpp"
#include "mmdial/preprocess.hpp"
#include "mmdial/simsearch.hpp"

namespace mmdial {

// (dialogue source, image source) pair; thresholds are calibrated per pair.
struct Combination {
  std::string dialogue_source;
  std::string image_source;

  std::string key() const { return dialogue_source + "+" + image_source; }
  static Combination from_key(std::string_view key);

  auto operator<=>(const Combination&) const = default;
};

// One image-mixed dialogue. The context holds every turn before the target,
// so the target's turn index is context.size().
struct Instance {
  std::string instance_id;
  std::string dialogue_id;
  Combination combination;
  Split split = Split::kTrain;
  std::vector<Turn> context;
  std::string target;
  std::string image_id;
  double similarity = 0.0;
  std::optional<std::string> next;

  std::size_t turn_index() const { return context.size(); }

  bool operator==(const Instance&) const = default;
};

std::string instance_id(std::string_view dialogue_id, std::size_t turn_index, std::string_view image_id);

// One instance per (candidate, qualifying match). Results may repeat a
// query_id (one search per image source); instances follow candidate order,
// then result order, then match order.
std::vector<Instance> build_instances(std::span<const Dialogue> dialogues,
                                      std::span<const CandidateSentence> candidates,
                                      std::span<const TopKResult> topk_results,
                                      std::span<const ImageRecord> images);

struct SplitStats {
  std::size_t instances = 0;
  double avg_dialogue_turns = 0.0;
  double avg_sentence_chars = 0.0;
  std::size_t unique_images = 0;
  std::size_t unique_dialogues = 0;
  std::size_t unique_targets = 0;
  double avg_images_per_dialogue = 0.0;
  double avg_targets_per_dialogue = 0.0;

  bool operator==(const SplitStats&) const = default;
};

// Per-split statistics. Dialogue-level averages are taken over the unique
// source dialogues an instance set touches; sentence length is the mean
// UTF-8 code point count over all turns of those dialogues.
struct DatasetStats {
  std::map<Split, SplitStats> splits;

  const SplitStats& at(Split split) const { return splits.at(split); }
};

DatasetStats compute_stats(std::span<const Instance> instances, std::span<const Dialogue> dialogues);

std::size_t utf8_length(std::string_view text);

io::OrderedJson to_json(const Instance& instance);
Instance instance_from_json(const io::Json& record);
io::OrderedJson to_json(const DatasetStats& stats);
io::OrderedJson to_json(const TopKResult& result);

std::string serialize_instances(std::span<const Instance> instances);
std::vector<Instance> load_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path, std::span<const Instance> instances);

}  // namespace mmdial
