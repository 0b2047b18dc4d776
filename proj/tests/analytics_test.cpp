#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ctimeta/analytics.hpp"

using namespace ctimeta;
using namespace ctimeta::analytics;

namespace {

constexpr double kTol = 1e-9;

int g_digest_counter = 0;

ReportRecord rec(std::string vendor, std::vector<std::string> actors,
                 std::vector<std::string> geographies, std::vector<std::string> sector_acronyms = {},
                 std::vector<std::string> motivation_acronyms = {}, std::vector<std::string> ttps = {},
                 std::vector<std::string> iocs = {}, int year = 2020) {
  ReportRecord r;
  r.report_digest = "d" + std::to_string(++g_digest_counter);
  r.title = "t" + r.report_digest;
  r.vendor = std::move(vendor);
  r.year = year;
  r.report_type = {{LabelKind::report_type, "TAA", "Other"}};
  r.threat_actors = std::move(actors);
  r.geographies = std::move(geographies);
  for (auto& s : sector_acronyms) r.sectors.push_back({LabelKind::sector, std::move(s), "Other"});
  for (auto& m : motivation_acronyms) r.motivations.push_back({LabelKind::motivation, std::move(m), "Other"});
  r.ttps = std::move(ttps);
  r.iocs = std::move(iocs);
  return r;
}

// Three vendors with known actor and point sets; V3 publishes most.
Corpus intel_corpus() {
  return Corpus({
      rec("V1", {"X"}, {"G1", "G2"}),
      rec("V1", {"Y"}, {"G1"}),
      rec("V2", {"Y"}, {"G1", "G3"}),
      rec("V2", {"Z"}, {"G4"}),
      rec("V3", {"X"}, {"G2"}),
      rec("V3", {"Y"}, {"G1"}),
      rec("V3", {"Z"}, {"G4"}),
  });
}

}  // namespace

TEST_CASE("quantiles interpolate linearly between order statistics") {
  std::vector<double> sorted = {10, 20, 30, 40};
  CHECK(std::abs(quantile_sorted(sorted, 0.5) - 25.0) < kTol);
  CHECK(std::abs(quantile_sorted(sorted, 0.25) - 17.5) < kTol);
  CHECK(std::abs(quantile_sorted(sorted, 0.75) - 32.5) < kTol);
  CHECK(quantile_sorted(sorted, 0.0) == 10.0);
  CHECK(quantile_sorted(sorted, 1.0) == 40.0);
  CHECK(quantile_sorted({7.0}, 0.5) == 7.0);
  CHECK_THROWS_AS(quantile_sorted({}, 0.5), std::invalid_argument);

  Quartiles q = quartiles({30, 10, 40, 20});  // unsorted input is sorted internally
  CHECK(std::abs(q.median - 25.0) < kTol);
  CHECK(std::abs(q.q1 - 17.5) < kTol);
  CHECK(std::abs(q.q3 - 32.5) < kTol);
  CHECK_THROWS_AS(quartiles({}), std::invalid_argument);

  auto [lo, hi] = tukey_fences(q);
  CHECK(std::abs(lo - (17.5 - 1.5 * 15.0)) < kTol);
  CHECK(std::abs(hi - (32.5 + 1.5 * 15.0)) < kTol);
}

TEST_CASE("yearly rollups count reports and distinct entities per year") {
  ReportRecord multi = rec("V2", {}, {"G1", "G2"}, {}, {}, {}, {}, 2020);
  multi.report_type.push_back({LabelKind::report_type, "CA", "Other"});

  Corpus corpus({
      rec("V1", {"X", "Unknown"}, {"G1"}, {"GPA"}, {"FC"}, {}, {"ioc-1"}, 2020),
      multi,
      rec("V1", {"X"}, {}, {"GPA", "MIL"}, {}, {"T1059"}, {}, 2021),
  });

  auto rollups = yearly_rollup(corpus);
  REQUIRE(rollups.size() == 2);

  const YearlyRollup& y2020 = rollups[0];
  CHECK(y2020.year == 2020);
  CHECK(y2020.total_reports == 2);
  CHECK(y2020.distinct_vendors == 2);
  CHECK(y2020.distinct_actors == 1);  // Unknown is not an actor
  CHECK(y2020.distinct_geographies == 2);
  CHECK(y2020.distinct_sectors == 1);
  CHECK(y2020.distinct_motivations == 1);
  CHECK(y2020.reports_with_iocs == 1);
  CHECK(y2020.reports_with_ttps == 0);
  CHECK(y2020.reports_by_type.at("TAA") == 2);
  CHECK(y2020.reports_by_type.at("CA") == 1);

  const YearlyRollup& y2021 = rollups[1];
  CHECK(y2021.year == 2021);
  CHECK(y2021.total_reports == 1);
  CHECK(y2021.distinct_sectors == 2);
  CHECK(y2021.reports_with_ttps == 1);
}

TEST_CASE("pearson correlation fixtures") {
  CHECK(std::abs(pearson_correlation({1, 2, 3}, {1, 3, 2}) - 0.5) < kTol);
  CHECK(pearson_correlation({1, 2, 3, 4}, {3, 5, 7, 9}) == 1.0);
  CHECK(pearson_correlation({1, 2, 3}, {5, 3, 1}) == -1.0);

  CHECK_THROWS_AS(pearson_correlation({1, 2}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(pearson_correlation({1, 2, 3}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(pearson_correlation({2, 2, 2}, {1, 2, 3}), std::domain_error);
}

TEST_CASE("actor bucket tables split the population over threshold ranges") {
  // Geography counts per actor: A1 -> 1, A2 -> 1, A3 -> 3, A4 -> 12.
  std::vector<ReportRecord> records = {
      rec("V", {"A1"}, {"G1"}),
      rec("V", {"A2"}, {"G1"}),
      rec("V", {"A3"}, {"G1", "G2", "G3"}),
  };
  std::vector<std::string> many;
  for (int i = 0; i < 12; ++i) many.push_back("H" + std::to_string(i));
  records.push_back(rec("V", {"A4"}, many));
  Corpus corpus(std::move(records));

  BucketTable table = bucket_table(corpus, EntityKind::actor, CountDimension::geographies, {5, 10});
  CHECK(table.population == 4);
  REQUIRE(table.buckets.size() == 5);

  CHECK(table.buckets[0].label == "0");
  CHECK(table.buckets[0].count == 0);
  CHECK(table.buckets[1].label == "1");
  CHECK(table.buckets[1].count == 2);
  CHECK(std::abs(table.buckets[1].percent - 50.0) < kTol);
  CHECK(table.buckets[2].label == "<5");
  CHECK(table.buckets[2].count == 1);
  CHECK(std::abs(table.buckets[2].percent - 25.0) < kTol);
  CHECK(table.buckets[3].label == "<10");
  CHECK(table.buckets[3].count == 0);
  CHECK(table.buckets[4].label == ">=10");
  CHECK(table.buckets[4].count == 1);
  CHECK(std::abs(table.buckets[4].percent - 25.0) < kTol);

  long long total = 0;
  for (const auto& b : table.buckets) total += b.count;
  CHECK(total == table.population);
}

TEST_CASE("vendor bucket tables treat trackless vendors as zero-count entities") {
  Corpus corpus({
      rec("V1", {"A", "B"}, {}),
      rec("V2", {"Unknown"}, {}),
      rec("V2", {}, {}),
  });

  BucketTable table = bucket_table(corpus, EntityKind::vendor, CountDimension::actors, {10});
  CHECK(table.population == 2);
  CHECK(table.buckets[0].count == 1);  // V2 tracks nothing attributable
  CHECK(table.buckets[2].count == 1);  // V1 sits in "<10"
}

TEST_CASE("bucket tables reject bad inputs") {
  Corpus corpus({rec("V", {"A"}, {"G"})});
  CHECK_THROWS_AS(bucket_table(corpus, EntityKind::actor, CountDimension::actors, {5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bucket_table(corpus, EntityKind::actor, CountDimension::reports, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bucket_table(corpus, EntityKind::actor, CountDimension::reports, {5, 5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bucket_table(corpus, EntityKind::actor, CountDimension::reports, {1, 5}),
                  std::invalid_argument);
}

TEST_CASE("share statistics follow the documented fixture") {
  Corpus corpus({
      rec("V", {}, {"G1"}, {}, {"FC"}),
      rec("V", {}, {"G1"}, {}, {"FC"}),
      rec("V", {}, {"G2"}, {}, {"FC"}),
      rec("V", {}, {"G2"}, {}, {"EIC"}),
      rec("V", {}, {"G3"}, {}, {"EIC"}),
      rec("V", {}, {"G3"}, {}, {"EIC"}),
  });

  ShareStats stats = share_stats(corpus, LabelKind::motivation, "FC", 0);
  REQUIRE(stats.rows.size() == 3);
  CHECK(stats.rows[0].geography == "G1");
  CHECK(std::abs(stats.rows[0].share - 100.0) < kTol);
  CHECK(stats.rows[1].geography == "G2");
  CHECK(std::abs(stats.rows[1].share - 50.0) < kTol);
  CHECK(stats.rows[2].geography == "G3");
  CHECK(std::abs(stats.rows[2].share - 0.0) < kTol);

  CHECK(std::abs(stats.mean - 50.0) < kTol);
  CHECK(std::abs(stats.stddev - std::sqrt(5000.0 / 3.0)) < kTol);  // population form
  CHECK(std::abs(stats.quartiles.q1 - 25.0) < kTol);
  CHECK(std::abs(stats.quartiles.median - 50.0) < kTol);
  CHECK(std::abs(stats.quartiles.q3 - 75.0) < kTol);
  CHECK(stats.outliers.empty());
}

TEST_CASE("share outliers sit beyond the Tukey fences") {
  std::vector<ReportRecord> records;
  for (const char* g : {"G1", "G2", "G3", "G4"}) records.push_back(rec("V", {}, {g}, {}, {"EIC"}));
  records.push_back(rec("V", {}, {"G5"}, {}, {"FC"}));
  Corpus corpus(std::move(records));

  ShareStats stats = share_stats(corpus, LabelKind::motivation, "FC", 0);
  REQUIRE(stats.rows.size() == 5);
  CHECK(stats.rows[0].geography == "G5");
  CHECK(stats.rows[0].outlier);
  CHECK(stats.outliers == std::vector<std::string>{"G5"});
}

TEST_CASE("share statistics enforce the attack floor strictly") {
  Corpus corpus({
      rec("V", {}, {"G1"}, {}, {"FC"}),
      rec("V", {}, {"G1"}, {}, {"FC"}),
      rec("V", {}, {"G2"}, {}, {"FC"}),
  });

  ShareStats stats = share_stats(corpus, LabelKind::motivation, "FC", 1);
  REQUIRE(stats.rows.size() == 1);  // G2 has exactly 1 attack, not strictly more
  CHECK(stats.rows[0].geography == "G1");

  CHECK_THROWS_AS(share_stats(corpus, LabelKind::motivation, "SAB", 0), std::domain_error);
  CHECK_THROWS_AS(share_stats(corpus, LabelKind::report_type, "TAA", 0), std::invalid_argument);
  CHECK_THROWS_AS(share_stats(corpus, LabelKind::motivation, "FC", 10), std::domain_error);
}

TEST_CASE("intelligence points group by vendor and actor") {
  auto intel = collect_intel(intel_corpus(), default_dimensions());
  REQUIRE(intel.size() == 3);

  CHECK(intel.at("V1").actors == std::set<std::string>{"X", "Y"});
  CHECK(intel.at("V2").actors == std::set<std::string>{"Y", "Z"});
  CHECK(intel.at("V3").actors == std::set<std::string>{"X", "Y", "Z"});

  PointSet expected = {{Dimension::geography, "G1"}, {Dimension::geography, "G2"}};
  CHECK(intel.at("V1").by_actor.at("X") == expected);

  // Unknown actors and vendorless records contribute nothing.
  Corpus noise({rec("", {"X"}, {"G"}), rec("V9", {"Unknown"}, {"G"})});
  CHECK(collect_intel(noise, default_dimensions()).empty());
}

TEST_CASE("sector and motivation points use top-level acronyms") {
  Corpus corpus({rec("V", {"X"}, {}, {"GPA"}, {"FC"}, {"T1059"}, {"ioc-1"})});
  auto intel = collect_intel(corpus, extended_dimensions());
  const PointSet& points = intel.at("V").by_actor.at("X");

  CHECK(points.count({Dimension::sector, "GPA"}) == 1);
  CHECK(points.count({Dimension::motivation, "FC"}) == 1);
  CHECK(points.count({Dimension::ttp, "T1059"}) == 1);
  CHECK(points.count({Dimension::ioc, "ioc-1"}) == 1);

  // The default dimension set excludes iocs.
  auto narrow = collect_intel(corpus, default_dimensions());
  CHECK(narrow.at("V").by_actor.at("X").count({Dimension::ioc, "ioc-1"}) == 0);
  CHECK(default_dimensions().size() == 4);
  CHECK(extended_dimensions().size() == 5);
}

TEST_CASE("jaccard agreement on plain sets") {
  std::set<std::string> a = {"a", "b", "c"};
  std::set<std::string> b = {"b", "c", "d"};
  CHECK(std::abs(jaccard(a, b) - 0.5) < kTol);
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(std::set<std::string>{}, std::set<std::string>{}) == 0.0);
  CHECK(jaccard(a, std::set<std::string>{}) == 0.0);
}

TEST_CASE("the actor overlap matrix matches the hand computation") {
  OverlapMatrix matrix = overlap_matrix(intel_corpus(), 10, OverlapMode::actors);

  // V3 publishes most; V1 and V2 tie and fall back to name order.
  CHECK(matrix.vendors == std::vector<std::string>{"V3", "V1", "V2"});
  REQUIRE(matrix.values.size() == 3);

  CHECK(std::abs(matrix.values[0][1] - 2.0 / 3.0) < kTol);  // V3 vs V1
  CHECK(std::abs(matrix.values[0][2] - 2.0 / 3.0) < kTol);  // V3 vs V2
  CHECK(std::abs(matrix.values[1][2] - 1.0 / 3.0) < kTol);  // V1 vs V2

  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(matrix.values[i][i] == 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(matrix.values[i][j] == matrix.values[j][i]);
      CHECK(matrix.values[i][j] >= 0.0);
      CHECK(matrix.values[i][j] <= 1.0);
    }
  }
}

TEST_CASE("the intelligence overlap matrix averages per-actor agreement") {
  OverlapMatrix matrix = overlap_matrix(intel_corpus(), 3, OverlapMode::intelligence_points);

  CHECK(std::abs(matrix.values[0][1] - 0.75) < kTol);  // V3 vs V1 over {X, Y}
  CHECK(std::abs(matrix.values[0][2] - 0.75) < kTol);  // V3 vs V2 over {Y, Z}
  CHECK(std::abs(matrix.values[1][2] - 0.5) < kTol);   // V1 vs V2 over {Y}
}

TEST_CASE("top_k clips to the vendor count and orders by volume") {
  OverlapMatrix matrix = overlap_matrix(intel_corpus(), 2, OverlapMode::actors);
  CHECK(matrix.vendors == std::vector<std::string>{"V3", "V1"});
  CHECK(matrix.values.size() == 2);

  CHECK_THROWS_AS(overlap_matrix(intel_corpus(), 0, OverlapMode::actors), std::invalid_argument);
  CHECK_THROWS_AS(overlap_matrix(Corpus{}, 3, OverlapMode::actors), std::invalid_argument);
}

TEST_CASE("top-n overlap reports both shared-actor readings") {
  auto rows = average_topn_overlap(intel_corpus(), 2, 30);
  REQUIRE(rows.size() == 2);  // clipped at the vendor count

  CHECK(rows[0].n == 2);
  CHECK(rows[0].pairs_with_shared_actors == 1);
  CHECK(std::abs(rows[0].mean_pairwise_jaccard - 0.75) < kTol);
  CHECK(rows[0].shared_actors_union == 2);
  CHECK(rows[0].shared_actors_all == 2);

  CHECK(rows[1].n == 3);
  CHECK(rows[1].pairs_with_shared_actors == 3);
  CHECK(std::abs(rows[1].mean_pairwise_jaccard - 2.0 / 3.0) < kTol);
  CHECK(rows[1].shared_actors_union == 3);
  CHECK(rows[1].shared_actors_all == 1);  // only Y is tracked by all three

  CHECK_THROWS_AS(average_topn_overlap(intel_corpus(), 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(average_topn_overlap(intel_corpus(), 3, 2), std::invalid_argument);
}

TEST_CASE("coverage curves add vendors by volume and end at full coverage") {
  Corpus corpus({
      rec("VA", {"X"}, {}), rec("VA", {"X"}, {}), rec("VA", {"X"}, {}),
      rec("VB", {"X", "Y"}, {}), rec("VB", {"X"}, {}),
      rec("VC", {"Z"}, {}),
  });

  CoverageCurve curve = coverage_curve(corpus, CoverageTarget::actors);
  CHECK(curve.universe == 3);
  REQUIRE(curve.points.size() == 3);

  CHECK(curve.points[0].vendor == "VA");
  CHECK(std::abs(curve.points[0].fraction - 1.0 / 3.0) < kTol);
  CHECK(curve.points[1].vendor == "VB");
  CHECK(std::abs(curve.points[1].fraction - 2.0 / 3.0) < kTol);
  CHECK(curve.points[2].vendor == "VC");
  CHECK(curve.points[2].fraction == 1.0);

  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].covered >= curve.points[i - 1].covered);
  }
}

TEST_CASE("geo-sector coverage pairs geography with sector per record") {
  Corpus corpus({
      rec("VA", {}, {"G1"}, {"GPA", "MIL"}),
      rec("VA", {}, {"G2"}, {"GPA"}),
      rec("VB", {}, {"G1"}, {"GPA"}),
  });

  CoverageCurve curve = coverage_curve(corpus, CoverageTarget::geo_sector_pairs);
  CHECK(curve.universe == 3);  // (G1,GPA), (G1,MIL), (G2,GPA)
  CHECK(curve.points.back().fraction == 1.0);
}

TEST_CASE("greedy coverage picks the best marginal set with documented tie-breaks") {
  using Sets = std::vector<std::pair<std::string, std::set<int>>>;

  Sets sets = {{"A", {1, 2, 3}}, {"B", {3, 4}}, {"C", {4, 5, 6, 7}}, {"D", {1, 2}}};
  auto steps = greedy_max_coverage(sets, 3);
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].name == "C");
  CHECK(steps[0].newly_covered == 4);
  CHECK(steps[1].name == "A");
  CHECK(steps[1].newly_covered == 3);
  CHECK(steps[2].name == "B");  // zero gain everywhere; equal sizes, smaller name
  CHECK(steps[2].newly_covered == 0);
  CHECK(steps[2].covered == 7);

  // Equal gain resolves to the larger total set.
  Sets sized = {{"V", {5, 6, 7, 8}}, {"T", {1, 2}}, {"U", {3, 4, 5}}};
  steps = greedy_max_coverage(sized, 2);
  CHECK(steps[0].name == "V");
  CHECK(steps[1].name == "U");

  // Equal gain and equal size resolve to the smaller name.
  Sets named = {{"Q", {1, 2}}, {"P", {3, 4}}};
  steps = greedy_max_coverage(named, 1);
  CHECK(steps[0].name == "P");

  CHECK_THROWS_AS(greedy_max_coverage(sets, 0), std::invalid_argument);

  // More rounds than sets: every set is used once.
  steps = greedy_max_coverage(named, 10);
  CHECK(steps.size() == 2);
}

TEST_CASE("a dominating set is picked first and achieves the optimum") {
  std::vector<std::pair<std::string, std::set<int>>> sets = {
      {"small", {1, 2}}, {"dominant", {1, 2, 3, 4, 5}}, {"mid", {3, 4}}};
  auto steps = greedy_max_coverage(sets, 1);
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].name == "dominant");
  CHECK(steps[0].covered == 5);
}

TEST_CASE("per-actor greedy source selection covers the actor's point universe") {
  Corpus corpus({
      rec("V1", {"X"}, {"G1", "G2"}, {"GPA"}),
      rec("V2", {"X"}, {"G2", "G3"}),
      rec("V3", {"X"}, {"G1"}),
      rec("V1", {"Y"}, {"G9"}),
  });

  GreedyCoverage coverage = greedy_marginal_coverage(corpus, "X", 5);
  CHECK(coverage.actor == "X");
  CHECK(coverage.universe == 4);  // G1, G2, G3 plus sector GPA
  REQUIRE(coverage.steps.size() == 3);
  CHECK(coverage.steps[0].vendor == "V1");
  CHECK(coverage.steps[0].newly_covered == 3);
  CHECK(coverage.steps[1].vendor == "V2");
  CHECK(coverage.steps[1].newly_covered == 1);
  CHECK(coverage.steps.back().fraction == 1.0);

  CHECK_THROWS_AS(greedy_marginal_coverage(corpus, "Nobody", 5), std::invalid_argument);
}

TEST_CASE("coverage audits compute per-vendor and overall recall") {
  std::vector<AuditInput> rows = {
      {"V1", 100, 50, 25},
      {"V2", 40, 30, 15},
  };

  CoverageAudit audit = coverage_audit(rows);
  REQUIRE(audit.rows.size() == 2);
  CHECK(std::abs(audit.rows[0].percent - 50.0) < kTol);
  CHECK(std::abs(audit.rows[1].percent - 50.0) < kTol);
  CHECK(audit.total_entries == 140);
  CHECK(audit.total_reports == 80);
  CHECK(audit.total_in_corpus == 40);
  CHECK(std::abs(audit.overall_percent - 50.0) < kTol);

  CHECK_THROWS_AS(coverage_audit({}), std::invalid_argument);
  CHECK_THROWS_AS(coverage_audit({{"V", 10, 0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(coverage_audit({{"V", 10, 5, 6}}), std::invalid_argument);
  CHECK_THROWS_AS(coverage_audit({{"V", 4, 5, 3}}), std::invalid_argument);
}
