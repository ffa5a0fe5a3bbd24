#include "mmdial/pipeline.hpp"

#include <map>

#include "mmdial/error.hpp"
#include "mmdial/simsearch.hpp"

namespace mmdial::pipeline {

namespace {

std::string dump_document(const io::OrderedJson& doc) { return doc.dump(2) + "\n"; }

std::vector<Dialogue> load_all_dialogues(const std::vector<NamedPath>& sources) {
  std::vector<Dialogue> out;
  for (const auto& [source, path] : sources) {
    auto part = load_dialogues(path, source);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

std::vector<ImageRecord> load_all_images(const std::vector<NamedPath>& sources) {
  std::vector<ImageRecord> out;
  for (const auto& [source, path] : sources) {
    auto part = load_images(path, source);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

EmbeddingStore load_role(const std::vector<NamedPath>& embeddings, const std::string& role) {
  std::optional<EmbeddingStore> store;
  for (const auto& [name, path] : embeddings) {
    if (name != role) continue;
    auto part = load_embeddings(path, store ? std::optional<std::size_t>(store->dimension()) : std::nullopt);
    if (!store) {
      store = std::move(part);
    } else {
      store->merge(part);
    }
  }
  if (!store) throw Error("missing --embeddings " + role + "=<path>");
  return std::move(*store);
}

io::OrderedJson per_combination_counts(std::span<const Instance> instances) {
  std::map<std::string, std::size_t> counts;
  for (const auto& inst : instances) ++counts[inst.combination.key()];
  io::OrderedJson out = io::OrderedJson::object();
  for (const auto& [key, n] : counts) out[key] = n;
  return out;
}

io::OrderedJson per_split_counts(std::span<const Instance> instances) {
  std::map<Split, std::size_t> counts;
  for (auto s : kAllSplits) counts[s] = 0;
  for (const auto& inst : instances) ++counts[inst.split];
  io::OrderedJson out;
  for (const auto& [split, n] : counts) out[std::string(to_string(split))] = n;
  return out;
}

}  // namespace

NamedPath parse_named_path(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw Error("expected <name>=<path>, got \"" + spec + "\"");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

io::OrderedJson run_build(const BuildConfig& config) {
  if (config.dialogues.empty()) throw Error("build needs at least one --dialogues <source>=<path>");
  if (config.images.empty()) throw Error("build needs at least one --images <source>=<path>");
  if (config.topk == 0) throw Error("--topk must be at least 1");
  if (config.out_dir.empty()) throw Error("build needs --out <directory>");

  const auto dialogues = load_all_dialogues(config.dialogues);
  if (dialogues.empty()) throw Error("no dialogues loaded");
  const auto images = load_all_images(config.images);
  if (images.empty()) throw Error("no images loaded");
  const StopList stoplist = config.stopwords ? load_stoplist(*config.stopwords) : default_stoplist();
  const auto text_store = load_role(config.embeddings, "text");
  const auto image_store = load_role(config.embeddings, "image");
  if (text_store.dimension() != image_store.dimension()) {
    throw Error("text embeddings have dimension " + std::to_string(text_store.dimension()) +
                " but image embeddings have " + std::to_string(image_store.dimension()));
  }

  ExclusionCounts counts;
  const auto candidates = extract_candidates(dialogues, stoplist, &counts);
  std::unordered_map<std::string_view, Split> dialogue_split;
  for (const auto& d : dialogues) dialogue_split.emplace(d.dialogue_id, d.split);

  std::vector<std::string> keys;
  std::vector<std::size_t> rows;
  keys.reserve(candidates.size());
  for (const auto& c : candidates) {
    keys.push_back(c.key());
    auto row = text_store.find(keys.back());
    if (!row) throw Error("no text embedding for candidate sentence " + keys.back());
    rows.push_back(*row);
  }

  BatchOptions options;
  options.workers = config.workers;
  std::vector<TopKResult> results;
  std::vector<std::string> sources;
  for (const auto& [source, path] : config.images) {
    if (std::find(sources.begin(), sources.end(), source) == sources.end()) sources.push_back(source);
  }
  for (const auto& source : sources) {
    std::vector<std::optional<Split>> groups;
    if (config.match_splits) {
      for (auto s : kAllSplits) groups.emplace_back(s);
    } else {
      groups.emplace_back(std::nullopt);
    }
    for (const auto& split : groups) {
      std::vector<std::string> ids;
      for (const auto& img : images) {
        if (img.source == source && (!split || img.split == *split)) ids.push_back(img.image_id);
      }
      if (ids.empty()) continue;
      const auto store = image_store.subset(ids);
      std::vector<Query> queries;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (split && dialogue_split.at(candidates[i].dialogue_id) != *split) continue;
        queries.push_back({keys[i], text_store.row(rows[i])});
      }
      if (queries.empty()) continue;
      auto part = topk_batch(queries, store, config.topk, config.floor, options);
      results.insert(results.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  }

  const auto instances = build_instances(dialogues, candidates, results, images);

  std::string audit;
  for (const auto& r : results) audit += to_json(r).dump() + "\n";
  std::filesystem::create_directories(config.out_dir);
  write_instances(config.out_dir / kInstancesFile, instances);
  io::write_atomic(config.out_dir / kSimilarityFile, audit);

  io::OrderedJson summary;
  summary["dialogues"] = dialogues.size();
  summary["images"] = images.size();
  summary["turns"] = counts.turns;
  summary["excluded_questions"] = counts.questions;
  summary["excluded_first_turns"] = counts.first_turns;
  summary["excluded_empty"] = counts.empty_after_stopwords;
  summary["candidates"] = candidates.size();
  summary["instances"] = instances.size();
  summary["per_split"] = per_split_counts(instances);
  summary["per_combination"] = per_combination_counts(instances);
  summary["topk"] = config.topk;
  summary["floor"] = config.floor;
  summary["seed"] = config.seed;
  return summary;
}

io::OrderedJson run_calibrate(const CalibrateConfig& config) {
  if (config.out.empty()) throw Error("calibrate needs --out <file>");
  const auto instances = load_instances(config.instances);
  const auto annotations = load_annotations(config.annotations);
  const auto report = calibrate(instances, annotations, config.seed);
  io::write_atomic(config.out, dump_document(to_json(report)));

  io::OrderedJson summary;
  auto& combos = summary["combinations"] = io::OrderedJson::object();
  for (const auto& c : report.combinations) {
    combos[c.combination.key()] = {
        {"chosen", c.chosen ? io::OrderedJson(*c.chosen) : io::OrderedJson(nullptr)},
        {"kept", c.kept},
        {"total", c.total},
    };
  }
  summary["annotations"] = annotations.size();
  summary["seed"] = config.seed;
  return summary;
}

io::OrderedJson run_sample(const SampleConfig& config) {
  if (config.out.empty()) throw Error("sample needs --out <file>");
  const auto instances = load_instances(config.instances);
  const auto samples = sample_all(instances, config.seed);
  std::unordered_map<std::string_view, const Instance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.instance_id, &inst);

  std::vector<Instance> picked;
  io::OrderedJson summary;
  auto& combos = summary["combinations"] = io::OrderedJson::object();
  for (const auto& s : samples) {
    auto segs = io::OrderedJson::array();
    for (const auto& seg : s.segments) {
      segs.push_back({{"lower", seg.lower},
                      {"upper", seg.upper},
                      {"population", seg.population},
                      {"sampled", seg.sampled_ids.size()}});
      for (const auto& id : seg.sampled_ids) picked.push_back(*by_id.at(id));
    }
    combos[s.combination.key()] = std::move(segs);
  }
  write_instances(config.out, picked);
  summary["sampled"] = picked.size();
  summary["seed"] = config.seed;
  return summary;
}

io::OrderedJson run_filter(const FilterConfig& config) {
  if (config.out.empty()) throw Error("filter needs --out <file>");
  const auto instances = load_instances(config.instances);
  ThresholdMap thresholds;
  std::optional<double> fallback = config.default_threshold;
  if (config.threshold) {
    fallback = *config.threshold;
  } else if (!config.thresholds.empty()) {
    thresholds = load_thresholds(config.thresholds);
  } else {
    throw Error("filter needs --thresholds <file> or --threshold <value>");
  }
  const auto kept = filter_instances(instances, thresholds, fallback);
  write_instances(config.out, kept);

  std::map<std::string, std::pair<std::size_t, std::size_t>> per;
  for (const auto& inst : instances) ++per[inst.combination.key()].second;
  for (const auto& inst : kept) ++per[inst.combination.key()].first;
  io::OrderedJson summary;
  auto& combos = summary["combinations"] = io::OrderedJson::object();
  for (const auto& [key, kt] : per) {
    auto it = thresholds.find(key);
    io::OrderedJson threshold = it != thresholds.end() ? io::OrderedJson(it->second)
                                : fallback             ? io::OrderedJson(*fallback)
                                                       : io::OrderedJson(nullptr);
    combos[key] = {{"threshold", threshold}, {"kept", kt.first}, {"total", kt.second}};
  }
  summary["kept"] = kept.size();
  summary["total"] = instances.size();
  summary["per_split"] = per_split_counts(kept);
  return summary;
}

io::OrderedJson run_stats(const StatsConfig& config) {
  const auto instances = load_instances(config.instances);
  const auto dialogues = load_all_dialogues(config.dialogues);
  const auto stats = to_json(compute_stats(instances, dialogues));
  if (config.out) io::write_atomic(*config.out, dump_document(stats));
  return stats;
}

io::OrderedJson run_eval(const EvalConfig& config) {
  const auto instances = load_instances(config.instances);
  const auto images = load_all_images(config.images);
  const auto tasks = make_tasks(instances, images, config.task, config.split, config.seed, config.candidates);
  const auto report = evaluate(tasks, config.workers);
  const auto doc = to_json(report, config.candidates);
  if (config.dump) {
    std::string lines;
    for (std::size_t e = 0; e < tasks.examples.size(); ++e) {
      const auto& ex = tasks.examples[e];
      io::OrderedJson rec;
      rec["instance_id"] = ex.instance_id;
      rec["rank"] = report.ranks[e];
      rec["ground_truth"] = tasks.pool[ex.ground_truth];
      rec["candidates"] = ex.candidates;
      lines += rec.dump() + "\n";
    }
    io::write_atomic(*config.dump, lines);
  }
  if (config.out) io::write_atomic(*config.out, dump_document(doc));
  return doc;
}

}  // namespace mmdial::pipeline
