#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mmdial/calibrate.hpp"
#include "mmdial/error.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace mmdial;
using testing_support::instance;

namespace {

std::vector<Instance> population(std::size_t n, std::uint64_t seed, const std::string& combo = "daily+coco",
                                 double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(instance(combo + "-" + std::to_string(i), static_cast<float>(u(gen)), combo));
  }
  return out;
}

AnnotationRecord record(const std::string& id, const std::string& who, int q1, int q2, int q3,
                        std::optional<int> q4 = std::nullopt) {
  return {id, who, q1, q2, q3, q4};
}

}  // namespace

TEST(Annotations, RangeValidation) {
  EXPECT_NO_THROW(validate(record("a", "x", 1, 3, 5, 4)));
  EXPECT_THROW(validate(record("a", "x", 0, 2, 3)), RangeError);
  EXPECT_THROW(validate(record("a", "x", 2, 4, 3)), RangeError);
  EXPECT_THROW(validate(record("a", "x", 2, 2, 6)), RangeError);
  EXPECT_THROW(validate(record("a", "x", 2, 2, 3, 5)), RangeError);
  EXPECT_THROW(validate(record("a", "x", 2, 2, 3, 0)), RangeError);
}

TEST(Annotations, CsvRoundTrip) {
  testing_support::TempDir dir("ann");
  std::vector<AnnotationRecord> recs{record("d#1#img", "ann1", 1, 2, 3), record("d#2#img", "ann1", 3, 3, 5, 2)};
  std::string text = std::string(kAnnotationHeader) + "\n";
  for (const auto& r : recs) text += to_csv_row(r) + "\n";
  testing_support::write_text(dir / "a.csv", text);
  EXPECT_EQ(load_annotations(dir / "a.csv"), recs);
  EXPECT_EQ(to_csv_row(recs[0]), "d#1#img,ann1,1,2,3,");
}

TEST(Annotations, FileErrors) {
  testing_support::TempDir dir("ann");
  EXPECT_THROW(load_annotations(dir / "missing.csv"), Error);
  testing_support::write_text(dir / "nohdr.csv", "a,b,1,1,1,\n");
  EXPECT_THROW(load_annotations(dir / "nohdr.csv"), ParseError);
  testing_support::write_text(dir / "dup.csv", std::string(kAnnotationHeader) + "\na,b,1,1,1,\na,b,2,2,2,\n");
  EXPECT_THROW(load_annotations(dir / "dup.csv"), Error);
  testing_support::write_text(dir / "range.csv", std::string(kAnnotationHeader) + "\na,b,1,1,9,\n");
  EXPECT_THROW(load_annotations(dir / "range.csv"), Error);
  testing_support::write_text(dir / "short.csv", std::string(kAnnotationHeader) + "\na,b,1,1\n");
  EXPECT_THROW(load_annotations(dir / "short.csv"), ParseError);
}

TEST(Sampling, ThreeHundredGiveTenByThirtyDistinct) {
  auto pop = population(300, 1);
  auto s = sample_for_annotation(pop, 11);
  ASSERT_EQ(s.segments.size(), 10u);
  std::set<std::string> all;
  for (const auto& seg : s.segments) {
    EXPECT_EQ(seg.population, 30u);
    EXPECT_EQ(seg.sampled_ids.size(), 30u);
    all.insert(seg.sampled_ids.begin(), seg.sampled_ids.end());
  }
  EXPECT_EQ(all.size(), 300u);
}

TEST(Sampling, TenInstancesGiveSegmentsOfOne) {
  auto pop = population(10, 2);
  auto s = sample_for_annotation(pop, 3);
  for (const auto& seg : s.segments) {
    EXPECT_EQ(seg.sampled_ids.size(), 1u);
    EXPECT_EQ(seg.lower, seg.upper);
  }
  EXPECT_THROW(sample_for_annotation(population(9, 2), 3), ValidationError);
}

TEST(Sampling, RemainderGoesToLowestSegments) {
  auto pop = population(23, 4);
  auto segs = similarity_segments(pop);
  std::vector<std::size_t> sizes;
  for (const auto& s : segs) sizes.push_back(s.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 2, 2, 2, 2, 2, 2, 2}));
  double prev = -2;
  for (const auto& s : segs) {
    for (auto i : s) {
      EXPECT_GE(pop[i].similarity, prev);
      prev = pop[i].similarity;
    }
  }
}

TEST(Sampling, SeedReproducibleAndBoundsSeedFree) {
  auto pop = population(1000, 5);
  auto a = sample_for_annotation(pop, 7);
  auto b = sample_for_annotation(pop, 7);
  auto c = sample_for_annotation(pop, 8);
  const auto segments = similarity_segments(pop);
  bool any_diff = false;
  for (std::size_t s = 0; s < 10; ++s) {
    EXPECT_EQ(a.segments[s].sampled_ids, b.segments[s].sampled_ids);
    EXPECT_EQ(a.segments[s].lower, c.segments[s].lower);
    EXPECT_EQ(a.segments[s].upper, c.segments[s].upper);
    any_diff |= a.segments[s].sampled_ids != c.segments[s].sampled_ids;
    std::set<std::string> members;
    for (auto i : segments[s]) members.insert(pop[i].instance_id);
    for (const auto& id : a.segments[s].sampled_ids) EXPECT_TRUE(members.contains(id));
  }
  EXPECT_TRUE(any_diff);
}

TEST(Sampling, MixedCombinationsRejectedButSampleAllSplits) {
  auto pop = population(20, 6, "daily+coco");
  auto other = population(30, 7, "persona+flickr");
  pop.insert(pop.end(), other.begin(), other.end());
  EXPECT_THROW(sample_for_annotation(pop, 1), ValidationError);
  auto all = sample_all(pop, 1);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].combination.key(), "daily+coco");
  EXPECT_EQ(all[1].combination.key(), "persona+flickr");
}

TEST(Spearman, Examples) {
  std::vector<double> x{1, 2, 3, 4, 5, 6}, sq, rev(x.rbegin(), x.rend());
  for (double v : x) sq.push_back(v * v);
  EXPECT_DOUBLE_EQ(spearman_rho(x, sq), 1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(x, rev), -1.0);
  std::vector<double> tx{1, 2, 2, 4}, ty{10, 20, 30, 40};
  EXPECT_NEAR(spearman_rho(tx, ty), oracle::spearman(tx, ty), 1e-12);
  EXPECT_NEAR(spearman_rho(tx, ty), 0.9486832980505138, 1e-12);
}

TEST(Spearman, AverageRanks) {
  std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Spearman, Errors) {
  std::vector<double> a{1, 2, 3}, b{1, 2}, c{5, 5, 5}, one{1};
  EXPECT_THROW(spearman_rho(a, b), ValidationError);
  EXPECT_THROW(spearman_rho(a, c), ValidationError);
  EXPECT_THROW(spearman_rho(one, one), ValidationError);
}

TEST(Spearman, PropertiesOnRandomData) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + gen() % 40;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(gen() % 8);
      y[i] = static_cast<double>(gen() % 1000) / 10.0;
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
    double r = spearman_rho(x, y);
    EXPECT_LE(std::fabs(r), 1.0 + 1e-15);
    EXPECT_EQ(r, spearman_rho(y, x) * 1.0) << "symmetry";
    std::vector<double> ex(n);
    for (std::size_t i = 0; i < n; ++i) ex[i] = std::exp(x[i]) * 3.0 - 7.0;
    EXPECT_EQ(spearman_rho(ex, y), r) << "monotone transform";
  }
}

TEST(Interpolate, Examples) {
  Curve rising{{0.2, 1.0}, {0.4, 2.5}, {0.6, 3.0}};
  EXPECT_NEAR(*interpolate_threshold(rising, 2.0), 1.0 / 3.0, 1e-9);
  Curve below{{0.2, 1.0}, {0.4, 1.5}};
  EXPECT_FALSE(interpolate_threshold(below, 2.0));
  Curve wavy{{0.2, 2.5}, {0.4, 1.5}, {0.6, 2.5}};
  EXPECT_NEAR(*interpolate_threshold(wavy, 2.0), 0.5, 1e-9);
  Curve above{{0.3, 2.5}, {0.5, 2.9}};
  EXPECT_DOUBLE_EQ(*interpolate_threshold(above, 2.0), 0.3);
  Curve hits{{0.3, 1.0}, {0.5, 2.0}};
  EXPECT_DOUBLE_EQ(*interpolate_threshold(hits, 2.0), 0.5);
  Curve one{{0.3, 1.0}};
  EXPECT_THROW(interpolate_threshold(one, 2.0), ValidationError);
}

TEST(Interpolate, OnlyRisingCrossingsCount) {
  Curve falling{{0.2, 1.8}, {0.4, 2.5}, {0.6, 1.0}};
  EXPECT_NEAR(*interpolate_threshold(falling, 2.0), 0.2 + 0.2 * (0.2 / 0.7), 1e-12);
  Curve down{{0.2, 3.0}, {0.4, 1.0}};
  EXPECT_DOUBLE_EQ(*interpolate_threshold(down, 2.0), 0.2);
}

TEST(Calibrate, MaximumScoresChooseLowestSegmentMean) {
  auto pop = population(100, 10);
  std::vector<AnnotationRecord> recs;
  for (const auto& inst : pop) recs.push_back(record(inst.instance_id, "a", 3, 3, 5));
  auto report = calibrate(pop, recs, 1);
  ASSERT_EQ(report.combinations.size(), 1u);
  const auto& ct = report.combinations[0];
  double lowest = 0;
  const auto segments = similarity_segments(pop);
  for (auto i : segments[0]) lowest += pop[i].similarity / 10.0;
  ASSERT_TRUE(ct.chosen);
  EXPECT_NEAR(*ct.chosen, lowest, 1e-12);
  EXPECT_EQ(ct.total, 100u);
  std::size_t above = 0;
  for (const auto& inst : pop) above += inst.similarity > lowest;
  EXPECT_EQ(ct.kept, above);
}

TEST(Calibrate, ScoreFiveTimesSimilarityGivesQ3NearPointSix) {
  auto pop = population(1000, 11, "daily+coco", 0.2, 1.0);
  auto sample = sample_for_annotation(pop, 3);
  std::map<std::string, double> sim;
  for (const auto& i : pop) sim[i.instance_id] = i.similarity;
  std::vector<AnnotationRecord> recs;
  for (const auto& seg : sample.segments) {
    for (const auto& id : seg.sampled_ids) {
      int q3 = std::clamp(static_cast<int>(std::lround(5.0 * sim[id])), 1, 5);
      recs.push_back(record(id, "a", 1, 1, q3));
    }
  }
  auto report = calibrate(pop, recs, 3);
  const auto& ct = report.combinations[0];
  EXPECT_FALSE(ct.per_question[0]);
  EXPECT_FALSE(ct.per_question[1]);
  ASSERT_TRUE(ct.per_question[2]);
  EXPECT_EQ(ct.chosen, ct.per_question[2]);
  double width = 0;
  for (const auto& seg : sample.segments) {
    if (seg.lower <= 0.6 && 0.6 <= seg.upper) width = seg.upper - seg.lower;
  }
  ASSERT_GT(width, 0);
  EXPECT_NEAR(*ct.per_question[2], 0.6, width);
}

TEST(Calibrate, ChosenIsMaxOfPerQuestionAndFewInstancesStayUncalibrated) {
  auto pop = population(200, 12, "daily+coco");
  auto few = population(5, 13, "persona+coco");
  std::vector<AnnotationRecord> recs;
  for (const auto& inst : pop) {
    int q1 = inst.similarity > 0.3 ? 3 : 1;
    int q2 = inst.similarity > 0.5 ? 3 : 1;
    int q3 = inst.similarity > 0.7 ? 5 : 1;
    recs.push_back(record(inst.instance_id, "a", q1, q2, q3));
  }
  for (const auto& inst : few) recs.push_back(record(inst.instance_id, "a", 3, 3, 5));
  auto all = pop;
  all.insert(all.end(), few.begin(), few.end());
  auto report = calibrate(all, recs, 5);
  ASSERT_EQ(report.combinations.size(), 2u);
  const auto& ct = report.combinations[0];
  ASSERT_TRUE(ct.chosen);
  for (const auto& pq : ct.per_question) {
    ASSERT_TRUE(pq);
    EXPECT_GE(*ct.chosen, *pq);
  }
  EXPECT_EQ(*ct.chosen, *ct.per_question[2]);
  const auto& unc = report.combinations[1];
  EXPECT_EQ(unc.combination.key(), "persona+coco");
  EXPECT_FALSE(unc.calibrated());
  EXPECT_EQ(unc.kept, 0u);
  auto doc = to_json(report);
  EXPECT_TRUE(doc["combinations"]["persona+coco"]["chosen"].is_null());
  EXPECT_EQ(doc["combinations"]["persona+coco"]["calibrated"], false);
}

TEST(Calibrate, ErrorsOnUnknownInstanceAndBadScore) {
  auto pop = population(20, 14);
  std::vector<AnnotationRecord> unknown{record("ghost", "a", 1, 1, 1)};
  EXPECT_THROW(calibrate(pop, unknown, 1), ValidationError);
  std::vector<AnnotationRecord> bad{record(pop[0].instance_id, "a", 1, 1, 7)};
  EXPECT_THROW(calibrate(pop, bad, 1), RangeError);
}

TEST(Calibrate, SpearmanPooledMatchesOracle) {
  auto pop = population(60, 15);
  std::mt19937_64 gen(3);
  std::vector<AnnotationRecord> recs;
  std::vector<double> sim, q1;
  for (const auto& inst : pop) {
    for (auto who : {"a", "b"}) {
      auto r = record(inst.instance_id, who, 1 + gen() % 3, 1 + gen() % 3, 1 + gen() % 5);
      recs.push_back(r);
      sim.push_back(inst.similarity);
      q1.push_back(r.q1);
    }
  }
  auto report = calibrate(pop, recs, 1);
  ASSERT_TRUE(report.pooled_correlation);
  EXPECT_NEAR(*(*report.pooled_correlation)[0][1], oracle::spearman(sim, q1), 1e-12);
  EXPECT_NEAR(*(*report.mean_correlation)[0][1], oracle::spearman(sim, q1), 1e-12);
}

TEST(Filter, StrictBoundaryAndStableOrder) {
  std::vector<Instance> pop{instance("a", 0.546, "persona+coco"), instance("b", 0.5461, "persona+coco"),
                            instance("c", 0.9, "daily+coco"), instance("d", 0.1, "persona+coco")};
  ThresholdMap th{{"persona+coco", 0.546}, {"daily+coco", 0.555}};
  auto kept = filter_instances(pop, th);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].instance_id, "b");
  EXPECT_EQ(kept[1].instance_id, "c");
  EXPECT_EQ(filter_instances(pop, {}, -1.0).size(), pop.size());
  ThresholdMap partial{{"persona+coco", 0.0}};
  EXPECT_THROW(filter_instances(pop, partial), ValidationError);
  EXPECT_EQ(filter_instances(pop, partial, 0.95).size(), 3u);
}

TEST(Filter, ThousandInstancesWithReferenceThresholdsMatchCountOracle) {
  auto config = testing_support::read_json(std::filesystem::path(MMDIAL_FIXTURES).parent_path() / "config" /
                                           "reference_thresholds.json");
  ThresholdMap th = config.get<ThresholdMap>();
  std::vector<std::string> combos;
  for (const auto& [k, v] : th) combos.push_back(k);
  std::mt19937_64 gen(1000);
  std::vector<Instance> pop;
  std::size_t expected = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& combo = combos[gen() % combos.size()];
    // Every tenth similarity sits exactly on its threshold.
    double s = i % 10 == 0 ? th[combo] : static_cast<double>(gen() % 10000) / 10000.0;
    pop.push_back(instance("i" + std::to_string(i), s, combo));
    if (s > th[combo]) ++expected;
  }
  EXPECT_EQ(filter_instances(pop, th).size(), expected);
}

TEST(Thresholds, ReportAndFlatMapsLoad) {
  testing_support::TempDir dir("th");
  auto pop = population(100, 16);
  std::vector<AnnotationRecord> recs;
  for (const auto& inst : pop) recs.push_back(record(inst.instance_id, "a", 3, 3, 5));
  auto report = calibrate(pop, recs, 1);
  testing_support::write_text(dir / "report.json", to_json(report).dump());
  auto loaded = load_thresholds(dir / "report.json");
  EXPECT_EQ(loaded, chosen_thresholds(report));
  testing_support::write_text(dir / "flat.json", R"({"daily+coco": 0.5, "persona+coco": null})");
  EXPECT_EQ(load_thresholds(dir / "flat.json"), (ThresholdMap{{"daily+coco", 0.5}}));
}
