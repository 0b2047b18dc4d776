#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctimeta/corpus.hpp"

namespace ctimeta::analytics {

// Linear-interpolation quantile on a sorted vector: the value at rank
// (n - 1) * p, interpolated between the neighbouring order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);  // copies and sorts; empty input throws

// Tukey fences at k * IQR beyond the quartiles.
std::pair<double, double> tukey_fences(const Quartiles& q, double k = 1.5);

struct YearlyRollup {
  int year = 0;
  long long total_reports = 0;
  std::map<std::string, long long> reports_by_type;  // level1 acronym -> reports carrying it
  long long distinct_vendors = 0;
  long long distinct_actors = 0;  // "Unknown" marks unattributed work, not an actor
  long long distinct_geographies = 0;
  long long distinct_sectors = 0;      // level1
  long long distinct_motivations = 0;  // level1
  long long reports_with_iocs = 0;
  long long reports_with_ttps = 0;
};

std::vector<YearlyRollup> yearly_rollup(const Corpus& corpus);  // ascending by year

// Throws std::invalid_argument on size mismatch or fewer than three points
// and std::domain_error when either series has zero variance.
double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);

enum class EntityKind { actor, vendor };
enum class CountDimension { reports, actors, motivations, geographies, sectors };

struct Bucket {
  std::string label;
  long long count = 0;
  double percent = 0.0;
};

struct BucketTable {
  EntityKind entity;
  CountDimension dimension;
  long long population = 0;
  std::vector<Bucket> buckets;  // "0", "1", "<t1"..., ">=tk"; counts sum to population
};

// Distribution of per-entity distinct-value counts over threshold buckets.
// Thresholds must be strictly increasing and positive. Actors named
// "Unknown" and empty vendor names are not entities.
BucketTable bucket_table(const Corpus& corpus, EntityKind entity, CountDimension dimension,
                         const std::vector<long long>& thresholds);

struct ShareRow {
  std::string geography;
  long long category_attacks = 0;
  long long total_attacks = 0;
  double share = 0.0;  // percent, 0..100
  bool outlier = false;
};

struct ShareStats {
  LabelKind kind;
  std::string category;  // level1 acronym
  std::vector<ShareRow> rows;  // geographies past the attack floor, share desc then name
  double mean = 0.0;
  double stddev = 0.0;  // population form
  Quartiles quartiles;
  std::vector<std::string> outliers;  // beyond the 1.5 IQR fences
};

// Per-geography share of attacks carrying one top-level category. Only
// geographies with strictly more than min_attacks records participate. A
// category absent from the corpus is an error.
ShareStats share_stats(const Corpus& corpus, LabelKind kind, const std::string& category,
                       long long min_attacks);

enum class Dimension { geography, sector, motivation, ttp, ioc };

std::string_view to_string(Dimension d);

// The four dimensions scored by default; ioc joins only in extended mode.
const std::vector<Dimension>& default_dimensions();
std::vector<Dimension> extended_dimensions();

// One attributable fact a vendor published about an actor.
struct IntelligencePoint {
  Dimension dimension;
  std::string value;
  std::string vendor;
  std::string actor;

  auto operator<=>(const IntelligencePoint&) const = default;
};

using PointSet = std::set<std::pair<Dimension, std::string>>;

struct VendorIntel {
  std::map<std::string, PointSet> by_actor;
  std::set<std::string> actors;
};

// Per-vendor intelligence points grouped by actor. Sector and motivation
// values are level1 acronyms; "Unknown" actors are skipped.
std::map<std::string, VendorIntel> collect_intel(const Corpus& corpus,
                                                 const std::vector<Dimension>& dims);

// Set agreement in [0, 1]; two empty sets count as no overlap (0), which the
// callers report rather than hide.
template <typename Set>
double jaccard(const Set& a, const Set& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

enum class OverlapMode { actors, intelligence_points };

struct OverlapMatrix {
  OverlapMode mode;
  std::vector<std::string> vendors;          // top-k by report volume, ties by name
  std::vector<std::vector<double>> values;   // symmetric, unit diagonal
};

// Pairwise vendor agreement. actors mode compares tracked-actor sets.
// intelligence_points mode averages per-actor point-set agreement over the
// actors both vendors track (0 when they share none).
OverlapMatrix overlap_matrix(const Corpus& corpus, int top_k, OverlapMode mode,
                             const std::vector<Dimension>& dims = default_dimensions());

struct TopNOverlapRow {
  int n = 0;
  double mean_pairwise_jaccard = 0.0;    // over pairs sharing at least one actor
  long long pairs_with_shared_actors = 0;
  long long shared_actors_union = 0;     // union of pairwise intersections
  long long shared_actors_all = 0;       // actors tracked by every one of the n vendors
};

// Average pairwise agreement among the top-n vendors for n in
// [n_min, n_max]. Both shared-actor counts are reported because "shared by
// the top n" admits either reading; columns are labeled accordingly.
std::vector<TopNOverlapRow> average_topn_overlap(const Corpus& corpus, int n_min, int n_max,
                                                 const std::vector<Dimension>& dims = default_dimensions());

enum class CoverageTarget { actors, geo_sector_pairs, intelligence_points };

std::string_view to_string(CoverageTarget t);

struct CoveragePoint {
  int n = 0;
  std::string vendor;
  long long covered = 0;
  double fraction = 0.0;
};

struct CoverageCurve {
  CoverageTarget target;
  long long universe = 0;
  std::vector<CoveragePoint> points;  // nondecreasing; last fraction is 1.0
};

// Cumulative coverage of the global target universe when vendors are added
// in descending report-volume order (ties by name).
CoverageCurve coverage_curve(const Corpus& corpus, CoverageTarget target,
                             const std::vector<Dimension>& dims = default_dimensions());

struct SetCoverStep {
  int n = 0;
  std::string name;
  long long newly_covered = 0;
  long long covered = 0;
};

// Greedy maximum-coverage over named sets. Ties prefer more newly covered
// points, then the larger total set, then the smaller name. Guarantees the
// classic (1 - 1/e) factor against the optimal same-size selection.
std::vector<SetCoverStep> greedy_max_coverage(
    const std::vector<std::pair<std::string, std::set<int>>>& sets, int n_max);

struct GreedyStep {
  int n = 0;
  std::string vendor;
  long long newly_covered = 0;
  long long covered = 0;
  double fraction = 0.0;
};

struct GreedyCoverage {
  std::string actor;
  long long universe = 0;
  std::vector<GreedyStep> steps;  // vendor picked at each n with running coverage
};

// Greedy source selection for one actor: which vendors to read, in order,
// to cover the most of what is published about the actor. Unknown actors
// are an error.
GreedyCoverage greedy_marginal_coverage(const Corpus& corpus, const std::string& actor, int n_max,
                                        const std::vector<Dimension>& dims = default_dimensions());

struct AuditInput {
  std::string vendor;
  long long entries = 0;    // actors the vendor claims to track
  long long reports = 0;    // claimed tracking entries with any public report
  long long in_corpus = 0;  // of those, reports present in the corpus
};

struct AuditRow {
  std::string vendor;
  long long entries = 0;
  long long reports = 0;
  long long in_corpus = 0;
  double percent = 0.0;  // in_corpus / reports * 100
};

struct CoverageAudit {
  std::vector<AuditRow> rows;
  long long total_entries = 0;
  long long total_reports = 0;
  long long total_in_corpus = 0;
  double overall_percent = 0.0;
};

// Per-vendor recall of publicly referenced reports. Requires
// in_corpus <= reports <= entries and nonzero reports per row.
CoverageAudit coverage_audit(const std::vector<AuditInput>& rows);

}  // namespace ctimeta::analytics
