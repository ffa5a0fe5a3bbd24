#include "mmdial/builder.hpp"

#include <set>
#include <unordered_map>
#include <unordered_set>

#include "mmdial/error.hpp"

namespace mmdial {

Combination Combination::from_key(std::string_view key) {
  auto plus = key.find('+');
  if (plus == std::string_view::npos || plus == 0 || plus + 1 == key.size()) {
    throw ValidationError("combination key must look like <dialogue source>+<image source>: " + std::string(key));
  }
  return {std::string(key.substr(0, plus)), std::string(key.substr(plus + 1))};
}

std::string instance_id(std::string_view dialogue_id, std::size_t turn_index, std::string_view image_id) {
  std::string id = candidate_key(dialogue_id, turn_index);
  id += '#';
  id += image_id;
  return id;
}

std::vector<Instance> build_instances(std::span<const Dialogue> dialogues,
                                      std::span<const CandidateSentence> candidates,
                                      std::span<const TopKResult> topk_results,
                                      std::span<const ImageRecord> images) {
  std::unordered_map<std::string_view, const Dialogue*> dialogue_by_id;
  for (const auto& d : dialogues) dialogue_by_id.emplace(d.dialogue_id, &d);
  std::unordered_map<std::string_view, const ImageRecord*> image_by_id;
  for (const auto& img : images) {
    if (!image_by_id.emplace(img.image_id, &img).second) {
      throw DuplicateError("image id " + img.image_id + " appears in more than one collection");
    }
  }
  std::unordered_set<std::string> candidate_keys;
  for (const auto& c : candidates) candidate_keys.insert(c.key());
  std::unordered_map<std::string_view, std::vector<std::size_t>> results_by_query;
  for (std::size_t r = 0; r < topk_results.size(); ++r) {
    if (!candidate_keys.contains(topk_results[r].query_id)) {
      throw ValidationError("search result for unknown candidate " + topk_results[r].query_id);
    }
    results_by_query[topk_results[r].query_id].push_back(r);
  }

  std::vector<Instance> out;
  std::unordered_set<std::string> seen_ids;
  for (const auto& cand : candidates) {
    auto dit = dialogue_by_id.find(cand.dialogue_id);
    if (dit == dialogue_by_id.end()) {
      throw ValidationError("candidate " + cand.key() + " references missing dialogue " + cand.dialogue_id);
    }
    const Dialogue& dialogue = *dit->second;
    if (cand.turn_index == 0 || cand.turn_index >= dialogue.turns.size()) {
      throw ValidationError("candidate " + cand.key() + " has an invalid turn index");
    }
    auto rit = results_by_query.find(cand.key());
    if (rit == results_by_query.end()) continue;

    for (std::size_t r : rit->second) {
      for (const auto& match : topk_results[r].matches) {
        auto iit = image_by_id.find(match.image_id);
        if (iit == image_by_id.end()) throw ValidationError("unknown image_id " + match.image_id);
        Instance inst;
        inst.instance_id = instance_id(dialogue.dialogue_id, cand.turn_index, match.image_id);
        if (!seen_ids.insert(inst.instance_id).second) throw DuplicateError("duplicate instance " + inst.instance_id);
        inst.dialogue_id = dialogue.dialogue_id;
        inst.combination = {dialogue.source, iit->second->source};
        inst.split = dialogue.split;
        inst.context.assign(dialogue.turns.begin(),
                            dialogue.turns.begin() + static_cast<std::ptrdiff_t>(cand.turn_index));
        inst.target = dialogue.turns[cand.turn_index].text;
        inst.image_id = match.image_id;
        inst.similarity = match.similarity;
        if (cand.turn_index + 1 < dialogue.turns.size()) inst.next = dialogue.turns[cand.turn_index + 1].text;
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

DatasetStats compute_stats(std::span<const Instance> instances, std::span<const Dialogue> dialogues) {
  std::unordered_map<std::string_view, const Dialogue*> dialogue_by_id;
  for (const auto& d : dialogues) dialogue_by_id.emplace(d.dialogue_id, &d);

  struct Accum {
    std::size_t instances = 0;
    std::set<std::string> dialogues;
    std::set<std::string> images;
    std::set<std::pair<std::string, std::size_t>> targets;
    std::set<std::pair<std::string, std::string>> dialogue_images;
  };
  std::map<Split, Accum> acc;
  for (auto split : kAllSplits) acc[split];
  for (const auto& inst : instances) {
    auto& a = acc[inst.split];
    ++a.instances;
    a.dialogues.insert(inst.dialogue_id);
    a.images.insert(inst.image_id);
    a.targets.emplace(inst.dialogue_id, inst.turn_index());
    a.dialogue_images.emplace(inst.dialogue_id, inst.image_id);
  }

  DatasetStats stats;
  for (auto& [split, a] : acc) {
    SplitStats s;
    s.instances = a.instances;
    s.unique_dialogues = a.dialogues.size();
    s.unique_images = a.images.size();
    s.unique_targets = a.targets.size();
    if (!a.dialogues.empty()) {
      std::size_t turns = 0;
      std::size_t chars = 0;
      for (const auto& id : a.dialogues) {
        auto it = dialogue_by_id.find(id);
        if (it == dialogue_by_id.end()) throw ValidationError("statistics need source dialogue " + id);
        turns += it->second->turns.size();
        for (const auto& t : it->second->turns) chars += utf8_length(t.text);
      }
      const double nd = static_cast<double>(a.dialogues.size());
      s.avg_dialogue_turns = static_cast<double>(turns) / nd;
      s.avg_sentence_chars = turns ? static_cast<double>(chars) / static_cast<double>(turns) : 0.0;
      s.avg_images_per_dialogue = static_cast<double>(a.dialogue_images.size()) / nd;
      s.avg_targets_per_dialogue = static_cast<double>(a.targets.size()) / nd;
    }
    stats.splits[split] = s;
  }
  return stats;
}

io::OrderedJson to_json(const Instance& inst) {
  io::OrderedJson rec;
  rec["instance_id"] = inst.instance_id;
  rec["dialogue_id"] = inst.dialogue_id;
  rec["dialogue_source"] = inst.combination.dialogue_source;
  rec["image_source"] = inst.combination.image_source;
  rec["split"] = to_string(inst.split);
  auto& ctx = rec["context"] = io::OrderedJson::array();
  for (const auto& t : inst.context) ctx.push_back({{"speaker", t.speaker}, {"text", t.text}});
  rec["target"] = inst.target;
  rec["image_id"] = inst.image_id;
  rec["similarity"] = inst.similarity;
  rec["next"] = inst.next ? io::OrderedJson(*inst.next) : io::OrderedJson(nullptr);
  return rec;
}

Instance instance_from_json(const io::Json& rec) {
  Instance inst;
  inst.instance_id = rec.at("instance_id").get<std::string>();
  inst.dialogue_id = rec.at("dialogue_id").get<std::string>();
  inst.combination.dialogue_source = rec.at("dialogue_source").get<std::string>();
  inst.combination.image_source = rec.at("image_source").get<std::string>();
  auto split_name = rec.at("split").get<std::string>();
  auto split = parse_split(split_name);
  if (!split) throw ValidationError("unknown split " + split_name);
  inst.split = *split;
  for (const auto& t : rec.at("context")) inst.context.push_back({t.at("speaker").get<int>(), t.at("text").get<std::string>()});
  if (inst.context.empty()) throw ValidationError("instance " + inst.instance_id + " has an empty context");
  inst.target = rec.at("target").get<std::string>();
  inst.image_id = rec.at("image_id").get<std::string>();
  const auto& sim = rec.at("similarity");
  if (!sim.is_number()) throw ValidationError("instance " + inst.instance_id + ": similarity must be a number");
  inst.similarity = sim.get<double>();
  if (auto it = rec.find("next"); it != rec.end() && !it->is_null()) inst.next = it->get<std::string>();
  return inst;
}

io::OrderedJson to_json(const DatasetStats& stats) {
  io::OrderedJson out;
  for (const auto& [split, s] : stats.splits) {
    out[std::string(to_string(split))] = {
        {"instances", s.instances},
        {"avg_dialogue_turns", s.avg_dialogue_turns},
        {"avg_sentence_chars", s.avg_sentence_chars},
        {"unique_images", s.unique_images},
        {"unique_dialogues", s.unique_dialogues},
        {"unique_targets", s.unique_targets},
        {"avg_images_per_dialogue", s.avg_images_per_dialogue},
        {"avg_targets_per_dialogue", s.avg_targets_per_dialogue},
    };
  }
  return out;
}

io::OrderedJson to_json(const TopKResult& result) {
  io::OrderedJson rec;
  rec["query_id"] = result.query_id;
  auto& matches = rec["matches"] = io::OrderedJson::array();
  for (const auto& m : result.matches) matches.push_back({{"image_id", m.image_id}, {"sim", m.similarity}});
  return rec;
}

std::string serialize_instances(std::span<const Instance> instances) {
  std::string out;
  for (const auto& inst : instances) out += to_json(inst).dump() + "\n";
  return out;
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
  std::vector<Instance> out;
  std::unordered_set<std::string> seen;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    try {
      out.push_back(instance_from_json(rec));
    } catch (const ValidationError& e) {
      throw ParseError(path, line, e.what());
    }
    if (!seen.insert(out.back().instance_id).second) {
      throw ParseError(path, line, "duplicate instance_id " + out.back().instance_id);
    }
  });
  return out;
}

void write_instances(const std::filesystem::path& path, std::span<const Instance> instances) {
  io::write_atomic(path, serialize_instances(instances));
}

}  // namespace mmdial
