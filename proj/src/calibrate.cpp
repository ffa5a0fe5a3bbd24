#include "mmdial/calibrate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "mmdial/error.hpp"
#include "mmdial/rng.hpp"

namespace mmdial {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// Positions into `sims` ordered by (similarity, id), cut into `count` groups.
std::vector<std::vector<std::size_t>> segment_positions(const std::vector<double>& sims,
                                                        const std::vector<const std::string*>& ids,
                                                        std::size_t count) {
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sims[a] < sims[b] || (sims[a] == sims[b] && *ids[a] < *ids[b]);
  });
  std::vector<std::vector<std::size_t>> segments(count);
  const std::size_t base = sims.size() / count;
  const std::size_t extra = sims.size() % count;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    segments[s].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                       order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return segments;
}

std::optional<double> safe_spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return std::nullopt;
  try {
    return spearman_rho(x, y);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

io::OrderedJson optional_json(const std::optional<double>& v) {
  return v ? io::OrderedJson(*v) : io::OrderedJson(nullptr);
}

io::OrderedJson matrix_json(const std::optional<CorrelationMatrix>& m) {
  if (!m) return nullptr;
  auto rows = io::OrderedJson::array();
  for (const auto& row : *m) {
    auto r = io::OrderedJson::array();
    for (const auto& v : row) r.push_back(optional_json(v));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void validate(const AnnotationRecord& r) {
  auto check = [&](int v, int hi, const char* q) {
    if (v < 1 || v > hi) {
      throw RangeError(std::string(q) + " score " + std::to_string(v) + " outside 1.." + std::to_string(hi) +
                       " for " + r.instance_id + " by " + r.annotator_id);
    }
  };
  if (r.instance_id.empty()) throw ValidationError("annotation without instance_id");
  if (r.annotator_id.empty()) throw ValidationError("annotation without annotator_id for " + r.instance_id);
  check(r.q1, 3, "q1");
  check(r.q2, 3, "q2");
  check(r.q3, 5, "q3");
  if (r.q4) check(*r.q4, 4, "q4");
}

std::string to_csv_row(const AnnotationRecord& r) {
  std::string row = r.instance_id + "," + r.annotator_id + "," + std::to_string(r.q1) + "," + std::to_string(r.q2) +
                    "," + std::to_string(r.q3) + ",";
  if (r.q4) row += std::to_string(*r.q4);
  return row;
}

AnnotationRecord parse_csv_row(std::string_view line, const std::filesystem::path& path, std::size_t line_no) {
  auto fields = split_fields(line);
  if (fields.size() != 6) {
    throw ParseError(path, line_no, "expected 6 fields, got " + std::to_string(fields.size()));
  }
  AnnotationRecord r;
  r.instance_id = std::string(trim(fields[0]));
  r.annotator_id = std::string(trim(fields[1]));
  const char* names[] = {"q1", "q2", "q3"};
  int* slots[] = {&r.q1, &r.q2, &r.q3};
  for (int i = 0; i < 3; ++i) {
    auto v = parse_int(fields[2 + i]);
    if (!v) throw ParseError(path, line_no, std::string(names[i]) + " is not an integer");
    *slots[i] = *v;
  }
  if (!trim(fields[5]).empty()) {
    auto v = parse_int(fields[5]);
    if (!v) throw ParseError(path, line_no, "q4 is not an integer");
    r.q4 = *v;
  }
  try {
    validate(r);
  } catch (const ValidationError& e) {
    throw ParseError(path, line_no, e.what());
  }
  return r;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open annotation file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<AnnotationRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1) view = io::strip_bom(view);
    view = trim(view);
    if (view.empty()) continue;
    if (!header) {
      if (view != kAnnotationHeader) {
        throw ParseError(path, line_no, "expected header \"" + std::string(kAnnotationHeader) + "\"");
      }
      header = true;
      continue;
    }
    auto rec = parse_csv_row(view, path, line_no);
    if (!seen.emplace(rec.instance_id, rec.annotator_id).second) {
      throw ParseError(path, line_no, "duplicate answer for " + rec.instance_id + " by " + rec.annotator_id);
    }
    out.push_back(std::move(rec));
  }
  if (!header) throw ParseError(path, line_no, "missing header");
  return out;
}

std::vector<std::vector<std::size_t>> similarity_segments(std::span<const Instance> instances, std::size_t count) {
  if (count == 0) throw ValidationError("segment count must be positive");
  std::vector<double> sims;
  std::vector<const std::string*> ids;
  for (const auto& inst : instances) {
    sims.push_back(inst.similarity);
    ids.push_back(&inst.instance_id);
  }
  return segment_positions(sims, ids, count);
}

SegmentSample sample_for_annotation(std::span<const Instance> instances, std::uint64_t seed) {
  if (instances.size() < kSegmentCount) {
    throw ValidationError("need at least " + std::to_string(kSegmentCount) + " instances to sample, got " +
                          std::to_string(instances.size()));
  }
  for (const auto& inst : instances) {
    if (inst.combination != instances.front().combination) {
      throw ValidationError("sample_for_annotation: instances span more than one combination");
    }
  }
  SegmentSample sample;
  sample.combination = instances.front().combination;
  sample.seed = seed;
  Rng rng(seed);
  for (auto& positions : similarity_segments(instances)) {
    Segment seg;
    seg.population = positions.size();
    seg.lower = instances[positions.front()].similarity;
    seg.upper = instances[positions.back()].similarity;
    const std::size_t take = std::min(kSamplesPerSegment, positions.size());
    std::vector<std::size_t> pick(positions.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.below(pick.size() - i);
      std::swap(pick[i], pick[j]);
    }
    pick.resize(take);
    std::sort(pick.begin(), pick.end());
    for (auto p : pick) seg.sampled_ids.push_back(instances[positions[p]].instance_id);
    sample.segments.push_back(std::move(seg));
  }
  return sample;
}

std::vector<SegmentSample> sample_all(std::span<const Instance> instances, std::uint64_t seed) {
  std::map<Combination, std::vector<Instance>> groups;
  for (const auto& inst : instances) groups[inst.combination].push_back(inst);
  std::vector<SegmentSample> out;
  for (const auto& [combo, group] : groups) {
    if (group.size() < kSegmentCount) continue;
    out.push_back(sample_for_annotation(group, derive_seed(seed, combo.key())));
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double v : values) {
    if (std::isnan(v)) throw ValidationError("cannot rank NaN");
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("spearman: length mismatch " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw ValidationError("spearman: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> interpolate_threshold(std::span<const CurvePoint> curve, double target) {
  if (curve.size() < 2) throw ValidationError("interpolation needs at least two curve points");
  for (std::size_t i = curve.size() - 1; i-- > 0;) {
    const auto& a = curve[i];
    const auto& b = curve[i + 1];
    if (a.score < target && b.score >= target) {
      return a.similarity + (target - a.score) / (b.score - a.score) * (b.similarity - a.similarity);
    }
  }
  if (curve.front().score >= target) return curve.front().similarity;
  return std::nullopt;
}

std::optional<CorrelationMatrix> correlation_matrix(std::span<const Instance> instances,
                                                    std::span<const AnnotationRecord> annotations) {
  std::unordered_map<std::string_view, double> sim;
  for (const auto& inst : instances) sim.emplace(inst.instance_id, inst.similarity);
  std::array<std::vector<double>, 4> cols;
  for (const auto& a : annotations) {
    auto it = sim.find(a.instance_id);
    if (it == sim.end()) throw ValidationError("annotation references unknown instance " + a.instance_id);
    cols[0].push_back(it->second);
    for (std::size_t q = 0; q < 3; ++q) cols[q + 1].push_back(a.score(q));
  }
  if (cols[0].size() < 2) return std::nullopt;
  CorrelationMatrix m;
  for (std::size_t i = 0; i < 4; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < 4; ++j) m[i][j] = m[j][i] = safe_spearman(cols[i], cols[j]);
  }
  return m;
}

const CombinationThresholds* ThresholdReport::find(const Combination& combination) const {
  for (const auto& c : combinations) {
    if (c.combination == combination) return &c;
  }
  return nullptr;
}

ThresholdReport calibrate(std::span<const Instance> instances, std::span<const AnnotationRecord> annotations,
                          std::uint64_t seed) {
  std::unordered_map<std::string_view, std::size_t> position;
  std::map<Combination, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!position.emplace(instances[i].instance_id, i).second) {
      throw DuplicateError("duplicate instance " + instances[i].instance_id);
    }
    groups[instances[i].combination].push_back(i);
  }
  std::map<Combination, std::vector<const AnnotationRecord*>> records_by_combo;
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& a : annotations) {
    validate(a);
    auto it = position.find(a.instance_id);
    if (it == position.end()) throw ValidationError("annotation references unknown instance " + a.instance_id);
    if (!seen.emplace(a.instance_id, a.annotator_id).second) {
      throw DuplicateError("duplicate answer for " + a.instance_id + " by " + a.annotator_id);
    }
    records_by_combo[instances[it->second].combination].push_back(&a);
  }

  ThresholdReport report;
  report.seed = seed;
  std::vector<CorrelationMatrix> per_combo;
  for (const auto& [combo, members] : groups) {
    CombinationThresholds ct;
    ct.combination = combo;
    ct.total = members.size();
    const auto& records = records_by_combo[combo];
    ct.annotations = records.size();

    std::vector<AnnotationRecord> combo_records;
    std::vector<Instance> combo_instances;
    for (const auto* r : records) combo_records.push_back(*r);
    for (auto m : members) combo_instances.push_back(instances[m]);
    ct.correlation = correlation_matrix(combo_instances, combo_records);
    if (ct.correlation) per_combo.push_back(*ct.correlation);

    if (members.size() >= kSegmentCount && !records.empty()) {
      std::vector<double> sims;
      std::vector<const std::string*> ids;
      for (auto m : members) {
        sims.push_back(instances[m].similarity);
        ids.push_back(&instances[m].instance_id);
      }
      auto segments = segment_positions(sims, ids, kSegmentCount);
      std::unordered_map<std::string_view, std::size_t> segment_of;
      for (std::size_t s = 0; s < segments.size(); ++s) {
        for (auto p : segments[s]) segment_of.emplace(instances[members[p]].instance_id, s);
      }
      std::vector<std::vector<const AnnotationRecord*>> seg_records(kSegmentCount);
      std::set<std::string_view> annotated;
      for (const auto* r : records) {
        seg_records[segment_of.at(r->instance_id)].push_back(r);
        annotated.insert(r->instance_id);
      }
      for (std::size_t s = 0; s < kSegmentCount; ++s) {
        if (seg_records[s].empty()) continue;
        double sim_sum = 0.0;
        std::size_t sim_n = 0;
        for (auto p : segments[s]) {
          const auto& inst = instances[members[p]];
          if (annotated.contains(inst.instance_id)) {
            sim_sum += inst.similarity;
            ++sim_n;
          }
        }
        const double x = sim_sum / static_cast<double>(sim_n);
        for (std::size_t q = 0; q < 3; ++q) {
          double score_sum = 0.0;
          for (const auto* r : seg_records[s]) score_sum += r->score(q);
          ct.curves[q].push_back({x, score_sum / static_cast<double>(seg_records[s].size())});
        }
      }
      for (std::size_t q = 0; q < 3; ++q) {
        if (ct.curves[q].size() >= 2) ct.per_question[q] = interpolate_threshold(ct.curves[q], kScoreTargets[q]);
        if (ct.per_question[q]) ct.chosen = ct.chosen ? std::max(*ct.chosen, *ct.per_question[q]) : *ct.per_question[q];
      }
    }
    if (ct.chosen) {
      for (auto m : members) {
        if (instances[m].similarity > *ct.chosen) ++ct.kept;
      }
    }
    report.combinations.push_back(std::move(ct));
  }

  report.pooled_correlation = correlation_matrix(instances, annotations);
  if (!per_combo.empty()) {
    CorrelationMatrix mean;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& m : per_combo) {
          if (m[i][j]) {
            sum += *m[i][j];
            ++n;
          }
        }
        if (n) mean[i][j] = sum / static_cast<double>(n);
      }
    }
    report.mean_correlation = mean;
  }
  return report;
}

std::vector<Instance> filter_instances(std::span<const Instance> instances, const ThresholdMap& thresholds,
                                       std::optional<double> default_threshold) {
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    double threshold;
    if (auto it = thresholds.find(inst.combination.key()); it != thresholds.end()) {
      threshold = it->second;
    } else if (default_threshold) {
      threshold = *default_threshold;
    } else {
      throw ValidationError("no threshold for combination " + inst.combination.key());
    }
    if (inst.similarity > threshold) out.push_back(inst);
  }
  return out;
}

ThresholdMap chosen_thresholds(const ThresholdReport& report) {
  ThresholdMap out;
  for (const auto& c : report.combinations) {
    if (c.chosen) out[c.combination.key()] = *c.chosen;
  }
  return out;
}

io::OrderedJson to_json(const ThresholdReport& report) {
  io::OrderedJson out;
  auto& combos = out["combinations"] = io::OrderedJson::object();
  for (const auto& c : report.combinations) {
    io::OrderedJson rec;
    rec["q1"] = optional_json(c.per_question[0]);
    rec["q2"] = optional_json(c.per_question[1]);
    rec["q3"] = optional_json(c.per_question[2]);
    rec["chosen"] = optional_json(c.chosen);
    for (std::size_t q = 0; q < 3; ++q) {
      auto curve = io::OrderedJson::array();
      for (const auto& p : c.curves[q]) curve.push_back({p.similarity, p.score});
      rec["curve_q" + std::to_string(q + 1)] = std::move(curve);
    }
    rec["kept"] = c.kept;
    rec["total"] = c.total;
    rec["annotations"] = c.annotations;
    rec["calibrated"] = c.calibrated();
    rec["spearman"] = matrix_json(c.correlation);
    combos[c.combination.key()] = std::move(rec);
  }
  out["spearman"] = {
      {"labels", {"similarity", "q1", "q2", "q3"}},
      {"pooled", matrix_json(report.pooled_correlation)},
      {"per_combination_mean", matrix_json(report.mean_correlation)},
  };
  out["seed"] = report.seed;
  return out;
}

ThresholdMap load_thresholds(const std::filesystem::path& path) {
  io::Json doc;
  try {
    doc = io::Json::parse(io::strip_bom(io::read_file(path)));
  } catch (const io::Json::parse_error& e) {
    throw ParseError(path, 1, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(path, 1, "expected a JSON object");
  ThresholdMap out;
  auto take = [&](const std::string& key, const io::Json& value) {
    if (value.is_null()) return;
    if (!value.is_number()) throw ParseError(path, 1, "threshold for " + key + " is not a number");
    Combination::from_key(key);
    out[key] = value.get<double>();
  };
  if (auto it = doc.find("combinations"); it != doc.end() && it->is_object()) {
    for (const auto& [key, rec] : it->items()) {
      if (!rec.is_object()) throw ParseError(path, 1, "combination " + key + " is not an object");
      take(key, rec.value("chosen", io::Json(nullptr)));
    }
  } else {
    for (const auto& [key, value] : doc.items()) take(key, value);
  }
  return out;
}

}  // namespace mmdial
