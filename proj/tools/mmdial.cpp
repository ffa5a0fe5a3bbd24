// mmdial: build, calibrate, filter, describe and evaluate image-mixed
// dialogue datasets, and serve the annotation API.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mmdial/annotation_service.hpp"
#include "mmdial/error.hpp"
#include "mmdial/pipeline.hpp"

namespace {

using mmdial::io::OrderedJson;
using namespace mmdial::pipeline;

std::vector<NamedPath> named(const std::vector<std::string>& specs) {
  std::vector<NamedPath> out;
  for (const auto& s : specs) out.push_back(parse_named_path(s));
  return out;
}

void print_summary(const OrderedJson& summary, bool json) {
  if (json) {
    std::cout << summary.dump(2) << "\n";
    return;
  }
  for (const auto& [key, value] : summary.items()) {
    if (value.is_object()) {
      std::cout << key << ":\n";
      for (const auto& [k, v] : value.items()) std::cout << "  " << k << ": " << v.dump() << "\n";
    } else {
      std::cout << key << ": " << value.dump() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-mixed dialogue dataset pipeline"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "Print machine-readable JSON to stdout");

  std::vector<std::string> dialogues, images, embeddings;
  std::string out, instances, annotations, thresholds, stopwords, dump, task = "current", split = "test", ui,
      image_base;
  std::size_t topk = 5, candidates = mmdial::kDefaultCandidates;
  double floor = 0.0, threshold = 0.0, default_threshold = 0.0;
  std::uint64_t seed = 0;
  int port = 8080, workers = 0;
  bool all_splits = false;

  auto* build = app.add_subcommand("build", "Replace sentences with images and write instances");
  build->add_option("--dialogues", dialogues, "<source>=<path>, repeatable")->required();
  build->add_option("--images", images, "<source>=<path>, repeatable")->required();
  build->add_option("--embeddings", embeddings, "text=<path> and image=<path>, repeatable")->required();
  build->add_option("--topk", topk, "Image candidates kept per sentence")->check(CLI::PositiveNumber);
  build->add_option("--floor", floor, "Minimum similarity for a candidate image");
  build->add_option("--seed", seed, "Run seed")->required();
  build->add_option("--out", out, "Output directory")->required();
  build->add_option("--stopwords", stopwords, "Stop-word file overriding the bundled list");
  build->add_flag("--all-splits", all_splits, "Search images of every split, not just the dialogue's");
  build->add_option("--workers", workers, "Worker threads (0 = all)");

  auto* sample = app.add_subcommand("sample", "Draw the per-combination annotation sample");
  sample->add_option("--instances", instances)->required();
  sample->add_option("--seed", seed)->required();
  sample->add_option("--out", out, "Sample instance file")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Derive per-combination thresholds from annotations");
  calibrate->add_option("--instances", instances)->required();
  calibrate->add_option("--annotations", annotations, "Annotation CSV")->required();
  calibrate->add_option("--seed", seed)->required();
  calibrate->add_option("--out", out, "Threshold report")->required();

  auto* filter = app.add_subcommand("filter", "Keep instances above their combination threshold");
  filter->add_option("--instances", instances)->required();
  auto* thresholds_opt = filter->add_option("--thresholds", thresholds, "Threshold report or {combination: value}");
  auto* threshold_opt = filter->add_option("--threshold", threshold, "One threshold for every combination");
  auto* default_opt = filter->add_option("--default-threshold", default_threshold, "For combinations not listed");
  thresholds_opt->excludes(threshold_opt);
  filter->add_option("--out", out)->required();

  auto* stats = app.add_subcommand("stats", "Per-split dataset statistics");
  stats->add_option("--instances", instances)->required();
  stats->add_option("--dialogues", dialogues, "<source>=<path>, repeatable");
  stats->add_option("--out", out);

  auto* eval = app.add_subcommand("eval", "tf-idf retrieval baseline on the current or next sentence task");
  eval->add_option("--instances", instances)->required();
  eval->add_option("--images", images, "<source>=<path>, repeatable")->required();
  eval->add_option("--task", task)->check(CLI::IsMember({"current", "next"}));
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "valid", "test"}));
  eval->add_option("--candidates", candidates)->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed)->required();
  eval->add_option("--out", out);
  eval->add_option("--dump", dump, "Per-example ranks (JSONL)");
  eval->add_option("--workers", workers);

  auto* serve = app.add_subcommand("serve", "HTTP annotation service");
  serve->add_option("--instances", instances, "Sample instance file")->required();
  serve->add_option("--out", out, "Append-only annotation log (CSV)")->required();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--ui", ui, "Directory of built UI assets");
  serve->add_option("--image-base", image_base, "Prefix turning image ids into image_ref URLs");

  CLI11_PARSE(app, argc, argv);

  try {
    OrderedJson summary;
    if (*build) {
      BuildConfig c;
      c.dialogues = named(dialogues);
      c.images = named(images);
      c.embeddings = named(embeddings);
      c.topk = topk;
      c.floor = floor;
      c.seed = seed;
      c.out_dir = out;
      if (!stopwords.empty()) c.stopwords = stopwords;
      c.match_splits = !all_splits;
      c.workers = workers;
      summary = run_build(c);
    } else if (*sample) {
      summary = run_sample({instances, seed, out});
    } else if (*calibrate) {
      summary = run_calibrate({instances, annotations, seed, out});
    } else if (*filter) {
      FilterConfig c;
      c.instances = instances;
      c.thresholds = thresholds;
      if (threshold_opt->count()) c.threshold = threshold;
      if (default_opt->count()) c.default_threshold = default_threshold;
      c.out = out;
      summary = run_filter(c);
    } else if (*stats) {
      StatsConfig c;
      c.instances = instances;
      c.dialogues = named(dialogues);
      if (!out.empty()) c.out = out;
      summary = run_stats(c);
    } else if (*eval) {
      EvalConfig c;
      c.instances = instances;
      c.images = named(images);
      c.task = *mmdial::parse_task(task);
      c.split = *mmdial::parse_split(split);
      c.candidates = candidates;
      c.seed = seed;
      if (!out.empty()) c.out = out;
      if (!dump.empty()) c.dump = dump;
      c.workers = workers;
      summary = run_eval(c);
    } else if (*serve) {
      mmdial::AnnotationSession session(mmdial::load_instances(instances), out);
      mmdial::ServerOptions options;
      options.port = port;
      options.image_base = image_base;
      if (!ui.empty()) options.ui_dir = ui;
      mmdial::AnnotationServer server(session, options);
      const int bound = server.bind();
      std::cerr << "serving " << session.size() << " instances on http://" << options.host << ":" << bound << "\n";
      server.listen();
      return 0;
    }
    print_summary(summary, json);
  } catch (const std::exception& e) {
    std::cerr << "mmdial: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
