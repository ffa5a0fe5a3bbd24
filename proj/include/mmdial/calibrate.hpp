#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmdial/builder.hpp"
#include "mmdial/io.hpp"

namespace mmdial {

inline constexpr std::size_t kSegmentCount = 10;
inline constexpr std::size_t kSamplesPerSegment = 30;

// Scores at or above which an instance is considered usable: the scale
// medians (2 of 3 for Q1 and Q2, 3 of 5 for Q3).
inline constexpr std::array<double, 3> kScoreTargets = {2.0, 2.0, 3.0};

struct AnnotationRecord {
  std::string instance_id;
  std::string annotator_id;
  int q1 = 0;
  int q2 = 0;
  int q3 = 0;
  std::optional<int> q4;

  int score(std::size_t question) const { return question == 0 ? q1 : question == 1 ? q2 : q3; }

  bool operator==(const AnnotationRecord&) const = default;
};

// Throws RangeError unless q1,q2 in 1..3, q3 in 1..5, q4 absent or in 1..4.
void validate(const AnnotationRecord& record);

inline constexpr std::string_view kAnnotationHeader = "instance_id,annotator_id,q1,q2,q3,q4";

std::string to_csv_row(const AnnotationRecord& record);
AnnotationRecord parse_csv_row(std::string_view line, const std::filesystem::path& path, std::size_t line_no);

// Parses and validates a whole annotation CSV. Rejects a repeated
// (instance_id, annotator_id) pair.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

struct Segment {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t population = 0;
  std::vector<std::string> sampled_ids;
};

struct SegmentSample {
  Combination combination;
  std::vector<Segment> segments;
  std::uint64_t seed = 0;
};

// Indices of `instances` ordered by (similarity, instance_id), cut into
// `count` equal-count groups; the first (size % count) groups get one extra.
std::vector<std::vector<std::size_t>> similarity_segments(std::span<const Instance> instances,
                                                          std::size_t count = kSegmentCount);

// Instances must all share one combination. Throws if fewer than 10.
SegmentSample sample_for_annotation(std::span<const Instance> instances, std::uint64_t seed);

// Samples every combination present, in key order. Each combination draws
// from its own stream derived from `seed` and its key.
std::vector<SegmentSample> sample_all(std::span<const Instance> instances, std::uint64_t seed);

// Pearson correlation of average ranks. Throws on length mismatch, fewer than
// two points, or a constant input.
double spearman_rho(std::span<const double> x, std::span<const double> y);

// Average (1-based) ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct CurvePoint {
  double similarity = 0.0;
  double score = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

using Curve = std::vector<CurvePoint>;

// Largest similarity at which the piecewise-linear curve rises through
// `target`. If there is no rising crossing, returns the first point's
// similarity when the curve starts at or above target, otherwise nothing.
// Throws on fewer than two points.
std::optional<double> interpolate_threshold(std::span<const CurvePoint> curve, double target);

// Spearman matrix over (similarity, Q1, Q2, Q3). Entries are absent when the
// correlation is undefined for the data.
using CorrelationMatrix = std::array<std::array<std::optional<double>, 4>, 4>;

struct CombinationThresholds {
  Combination combination;
  std::array<Curve, 3> curves;
  std::array<std::optional<double>, 3> per_question;
  std::optional<double> chosen;
  std::size_t kept = 0;
  std::size_t total = 0;
  std::size_t annotations = 0;
  std::optional<CorrelationMatrix> correlation;

  bool calibrated() const { return chosen.has_value(); }
};

struct ThresholdReport {
  std::vector<CombinationThresholds> combinations;
  std::optional<CorrelationMatrix> pooled_correlation;
  std::optional<CorrelationMatrix> mean_correlation;
  std::uint64_t seed = 0;

  const CombinationThresholds* find(const Combination& combination) const;
};

// Correlation over one row per annotation record: the instance similarity and
// the record's three scores.
std::optional<CorrelationMatrix> correlation_matrix(std::span<const Instance> instances,
                                                    std::span<const AnnotationRecord> annotations);

// Builds per-question curves from annotated instances (x = mean similarity of
// the annotated instances in a segment, y = mean score over their records),
// interpolates each at its score target and keeps the largest. Combinations
// with fewer than 10 instances, or without any threshold, stay uncalibrated
// and report kept = 0.
ThresholdReport calibrate(std::span<const Instance> instances, std::span<const AnnotationRecord> annotations,
                          std::uint64_t seed);

using ThresholdMap = std::map<std::string, double>;

// Keeps instances whose similarity strictly exceeds their combination's
// threshold, in input order. Throws when a combination has no threshold and
// no default is given.
std::vector<Instance> filter_instances(std::span<const Instance> instances, const ThresholdMap& thresholds,
                                       std::optional<double> default_threshold = std::nullopt);

ThresholdMap chosen_thresholds(const ThresholdReport& report);

io::OrderedJson to_json(const ThresholdReport& report);

// Accepts a calibrate report ({"combinations": {key: {"chosen": ...}}}) or a
// flat {key: threshold} map. Null thresholds are skipped.
ThresholdMap load_thresholds(const std::filesystem::path& path);

}  // namespace mmdial
