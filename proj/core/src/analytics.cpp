#include "ctimeta/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctimeta::analytics {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0, 1]");
  double rank = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quartiles: empty input");
  std::sort(values.begin(), values.end());
  return Quartiles{quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
                   quantile_sorted(values, 0.75)};
}

std::pair<double, double> tukey_fences(const Quartiles& q, double k) {
  double iqr = q.q3 - q.q1;
  return {q.q1 - k * iqr, q.q3 + k * iqr};
}

namespace {

bool is_named_actor(const std::string& a) { return !a.empty() && a != "Unknown"; }

// Composite set elements use an unprintable separator so values containing
// spaces or punctuation cannot collide.
constexpr char kSep = '\x1f';

std::vector<std::string> vendors_by_volume(const Corpus& corpus) {
  std::map<std::string, long long> volume;
  for (const auto& r : corpus.records()) {
    if (!r.vendor.empty()) ++volume[r.vendor];
  }
  std::vector<std::string> vendors;
  vendors.reserve(volume.size());
  for (const auto& [name, _] : volume) vendors.push_back(name);
  std::sort(vendors.begin(), vendors.end(), [&](const std::string& a, const std::string& b) {
    if (volume[a] != volume[b]) return volume[a] > volume[b];
    return a < b;
  });
  return vendors;
}

}  // namespace

std::vector<YearlyRollup> yearly_rollup(const Corpus& corpus) {
  struct Accum {
    YearlyRollup roll;
    std::set<std::string> vendors, actors, geographies, sectors, motivations;
  };
  std::map<int, Accum> by_year;

  for (const auto& r : corpus.records()) {
    Accum& acc = by_year[r.year];
    acc.roll.year = r.year;
    acc.roll.total_reports += 1;
    std::set<std::string> types;
    for (const auto& t : r.report_type) types.insert(t.level1);
    for (const auto& t : types) acc.roll.reports_by_type[t] += 1;
    if (!r.vendor.empty()) acc.vendors.insert(r.vendor);
    for (const auto& a : r.threat_actors) {
      if (is_named_actor(a)) acc.actors.insert(a);
    }
    for (const auto& g : r.geographies) acc.geographies.insert(g);
    for (const auto& s : r.sectors) acc.sectors.insert(s.level1);
    for (const auto& m : r.motivations) acc.motivations.insert(m.level1);
    if (!r.iocs.empty()) acc.roll.reports_with_iocs += 1;
    if (!r.ttps.empty()) acc.roll.reports_with_ttps += 1;
  }

  std::vector<YearlyRollup> out;
  out.reserve(by_year.size());
  for (auto& [year, acc] : by_year) {
    acc.roll.distinct_vendors = static_cast<long long>(acc.vendors.size());
    acc.roll.distinct_actors = static_cast<long long>(acc.actors.size());
    acc.roll.distinct_geographies = static_cast<long long>(acc.geographies.size());
    acc.roll.distinct_sectors = static_cast<long long>(acc.sectors.size());
    acc.roll.distinct_motivations = static_cast<long long>(acc.motivations.size());
    out.push_back(std::move(acc.roll));
  }
  return out;
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series differ in length");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least three points");
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("pearson: zero-variance series");
  return sxy / std::sqrt(sxx * syy);
}

BucketTable bucket_table(const Corpus& corpus, EntityKind entity, CountDimension dimension,
                         const std::vector<long long>& thresholds) {
  if (entity == EntityKind::actor && dimension == CountDimension::actors) {
    throw std::invalid_argument("bucket_table: actors have no actor dimension");
  }
  if (thresholds.empty()) throw std::invalid_argument("bucket_table: no thresholds");
  long long prev = 1;
  for (long long t : thresholds) {
    if (t <= prev) throw std::invalid_argument("bucket_table: thresholds must be strictly increasing and above 1");
    prev = t;
  }

  // Distinct-value collection per entity. reports counts records instead.
  std::map<std::string, std::set<std::string>> values;
  std::map<std::string, long long> report_counts;
  std::set<std::string> entities;

  for (std::size_t idx = 0; idx < corpus.records().size(); ++idx) {
    const ReportRecord& r = corpus.records()[idx];
    std::vector<std::string> keys;
    if (entity == EntityKind::actor) {
      std::set<std::string> per_record;
      for (const auto& a : r.threat_actors) {
        if (is_named_actor(a)) per_record.insert(a);
      }
      keys.assign(per_record.begin(), per_record.end());
    } else {
      if (!r.vendor.empty()) keys.push_back(r.vendor);
    }
    for (const auto& key : keys) {
      entities.insert(key);
      report_counts[key] += 1;
      auto& vals = values[key];
      switch (dimension) {
        case CountDimension::reports:
          break;
        case CountDimension::actors:
          for (const auto& a : r.threat_actors) {
            if (is_named_actor(a)) vals.insert(a);
          }
          break;
        case CountDimension::motivations:
          for (const auto& m : r.motivations) vals.insert(m.level1);
          break;
        case CountDimension::geographies:
          for (const auto& g : r.geographies) vals.insert(g);
          break;
        case CountDimension::sectors:
          for (const auto& s : r.sectors) vals.insert(s.level1);
          break;
      }
    }
  }
  if (entities.empty()) throw std::invalid_argument("bucket_table: no entities in corpus");

  BucketTable table;
  table.entity = entity;
  table.dimension = dimension;
  table.population = static_cast<long long>(entities.size());

  std::vector<std::pair<std::string, long long>> ranges;  // label, upper bound exclusive
  table.buckets.push_back({"0", 0, 0.0});
  table.buckets.push_back({"1", 0, 0.0});
  for (long long t : thresholds) table.buckets.push_back({"<" + std::to_string(t), 0, 0.0});
  table.buckets.push_back({">=" + std::to_string(thresholds.back()), 0, 0.0});

  auto bucket_index = [&](long long count) -> std::size_t {
    if (count == 0) return 0;
    if (count == 1) return 1;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (count < thresholds[i]) return 2 + i;
    }
    return 2 + thresholds.size();
  };

  for (const auto& key : entities) {
    long long count = dimension == CountDimension::reports
                          ? report_counts[key]
                          : static_cast<long long>(values[key].size());
    table.buckets[bucket_index(count)].count += 1;
  }
  for (auto& b : table.buckets) {
    b.percent = 100.0 * static_cast<double>(b.count) / static_cast<double>(table.population);
  }
  return table;
}

ShareStats share_stats(const Corpus& corpus, LabelKind kind, const std::string& category,
                       long long min_attacks) {
  if (kind == LabelKind::report_type) {
    throw std::invalid_argument("share_stats: category kind must be motivation or sector");
  }

  std::map<std::string, long long> total_by_geo;
  std::map<std::string, long long> category_by_geo;
  long long category_total = 0;

  for (const auto& r : corpus.records()) {
    const auto& labels = kind == LabelKind::motivation ? r.motivations : r.sectors;
    bool carries = std::any_of(labels.begin(), labels.end(),
                               [&](const TaxonomyLabel& l) { return l.level1 == category; });
    if (carries) ++category_total;
    std::set<std::string> geos(r.geographies.begin(), r.geographies.end());
    for (const auto& g : geos) {
      total_by_geo[g] += 1;
      if (carries) category_by_geo[g] += 1;
    }
  }
  if (category_total == 0) {
    throw std::domain_error("share_stats: category " + category + " never occurs in the corpus");
  }

  ShareStats stats;
  stats.kind = kind;
  stats.category = category;
  for (const auto& [geo, total] : total_by_geo) {
    if (total <= min_attacks) continue;  // strictly more than the floor
    ShareRow row;
    row.geography = geo;
    row.total_attacks = total;
    row.category_attacks = category_by_geo.count(geo) ? category_by_geo[geo] : 0;
    row.share = 100.0 * static_cast<double>(row.category_attacks) / static_cast<double>(total);
    stats.rows.push_back(std::move(row));
  }
  if (stats.rows.empty()) {
    throw std::domain_error("share_stats: no geography passes the attack floor");
  }

  std::vector<double> shares;
  shares.reserve(stats.rows.size());
  for (const auto& row : stats.rows) shares.push_back(row.share);

  double sum = 0.0;
  for (double s : shares) sum += s;
  stats.mean = sum / static_cast<double>(shares.size());
  double ss = 0.0;
  for (double s : shares) ss += (s - stats.mean) * (s - stats.mean);
  stats.stddev = std::sqrt(ss / static_cast<double>(shares.size()));
  stats.quartiles = quartiles(shares);

  auto [lo, hi] = tukey_fences(stats.quartiles);
  for (auto& row : stats.rows) {
    row.outlier = row.share < lo || row.share > hi;
  }
  std::sort(stats.rows.begin(), stats.rows.end(), [](const ShareRow& a, const ShareRow& b) {
    if (a.share != b.share) return a.share > b.share;
    return a.geography < b.geography;
  });
  for (const auto& row : stats.rows) {
    if (row.outlier) stats.outliers.push_back(row.geography);
  }
  return stats;
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::geography: return "geography";
    case Dimension::sector: return "sector";
    case Dimension::motivation: return "motivation";
    case Dimension::ttp: return "ttp";
    case Dimension::ioc: return "ioc";
  }
  return "";
}

const std::vector<Dimension>& default_dimensions() {
  static const std::vector<Dimension> kDims = {Dimension::geography, Dimension::sector,
                                               Dimension::motivation, Dimension::ttp};
  return kDims;
}

std::vector<Dimension> extended_dimensions() {
  std::vector<Dimension> dims = default_dimensions();
  dims.push_back(Dimension::ioc);
  return dims;
}

std::map<std::string, VendorIntel> collect_intel(const Corpus& corpus,
                                                 const std::vector<Dimension>& dims) {
  std::set<Dimension> active(dims.begin(), dims.end());
  std::map<std::string, VendorIntel> intel;

  for (const auto& r : corpus.records()) {
    if (r.vendor.empty()) continue;
    std::set<std::string> actors;
    for (const auto& a : r.threat_actors) {
      if (is_named_actor(a)) actors.insert(a);
    }
    if (actors.empty()) continue;

    PointSet points;
    if (active.count(Dimension::geography) > 0) {
      for (const auto& g : r.geographies) points.insert({Dimension::geography, g});
    }
    if (active.count(Dimension::sector) > 0) {
      for (const auto& s : r.sectors) points.insert({Dimension::sector, s.level1});
    }
    if (active.count(Dimension::motivation) > 0) {
      for (const auto& m : r.motivations) points.insert({Dimension::motivation, m.level1});
    }
    if (active.count(Dimension::ttp) > 0) {
      for (const auto& t : r.ttps) points.insert({Dimension::ttp, t});
    }
    if (active.count(Dimension::ioc) > 0) {
      for (const auto& i : r.iocs) points.insert({Dimension::ioc, i});
    }

    VendorIntel& vi = intel[r.vendor];
    for (const auto& actor : actors) {
      vi.actors.insert(actor);
      vi.by_actor[actor].insert(points.begin(), points.end());
    }
  }
  return intel;
}

namespace {

// Average per-actor point agreement over the actors both vendors track.
double intel_pair_overlap(const VendorIntel& a, const VendorIntel& b) {
  std::vector<const std::string*> shared;
  for (const auto& actor : a.actors) {
    if (b.actors.count(actor) > 0) shared.push_back(&actor);
  }
  if (shared.empty()) return 0.0;
  double sum = 0.0;
  for (const auto* actor : shared) {
    sum += jaccard(a.by_actor.at(*actor), b.by_actor.at(*actor));
  }
  return sum / static_cast<double>(shared.size());
}

}  // namespace

OverlapMatrix overlap_matrix(const Corpus& corpus, int top_k, OverlapMode mode,
                             const std::vector<Dimension>& dims) {
  if (top_k <= 0) throw std::invalid_argument("overlap_matrix: top_k must be positive");
  auto ranked = vendors_by_volume(corpus);
  if (ranked.empty()) throw std::invalid_argument("overlap_matrix: corpus has no vendors");
  if (static_cast<std::size_t>(top_k) < ranked.size()) ranked.resize(top_k);

  auto intel = collect_intel(corpus, dims);

  OverlapMatrix matrix;
  matrix.mode = mode;
  matrix.vendors = ranked;
  std::size_t k = ranked.size();
  matrix.values.assign(k, std::vector<double>(k, 0.0));

  static const VendorIntel kEmpty;
  auto intel_of = [&](const std::string& v) -> const VendorIntel& {
    auto it = intel.find(v);
    return it == intel.end() ? kEmpty : it->second;
  };

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double value;
      if (i == j) {
        value = 1.0;  // a vendor agrees with itself by definition
      } else if (mode == OverlapMode::actors) {
        value = jaccard(intel_of(ranked[i]).actors, intel_of(ranked[j]).actors);
      } else {
        value = intel_pair_overlap(intel_of(ranked[i]), intel_of(ranked[j]));
      }
      matrix.values[i][j] = value;
      matrix.values[j][i] = value;
    }
  }
  return matrix;
}

std::vector<TopNOverlapRow> average_topn_overlap(const Corpus& corpus, int n_min, int n_max,
                                                 const std::vector<Dimension>& dims) {
  if (n_min < 2) throw std::invalid_argument("average_topn_overlap: n_min must be at least 2");
  if (n_max < n_min) throw std::invalid_argument("average_topn_overlap: empty n range");

  auto ranked = vendors_by_volume(corpus);
  auto intel = collect_intel(corpus, dims);
  static const VendorIntel kEmpty;
  auto intel_of = [&](const std::string& v) -> const VendorIntel& {
    auto it = intel.find(v);
    return it == intel.end() ? kEmpty : it->second;
  };

  int limit = std::min<int>(n_max, static_cast<int>(ranked.size()));
  std::vector<TopNOverlapRow> rows;
  for (int n = n_min; n <= limit; ++n) {
    TopNOverlapRow row;
    row.n = n;

    double sum = 0.0;
    std::set<std::string> union_shared;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const VendorIntel& a = intel_of(ranked[i]);
        const VendorIntel& b = intel_of(ranked[j]);
        std::vector<std::string> shared;
        for (const auto& actor : a.actors) {
          if (b.actors.count(actor) > 0) shared.push_back(actor);
        }
        if (!shared.empty()) {
          row.pairs_with_shared_actors += 1;
          double pair_sum = 0.0;
          for (const auto& actor : shared) {
            pair_sum += jaccard(a.by_actor.at(actor), b.by_actor.at(actor));
          }
          sum += pair_sum / static_cast<double>(shared.size());
          union_shared.insert(shared.begin(), shared.end());
        }
      }
    }
    row.mean_pairwise_jaccard =
        row.pairs_with_shared_actors > 0 ? sum / static_cast<double>(row.pairs_with_shared_actors) : 0.0;
    row.shared_actors_union = static_cast<long long>(union_shared.size());

    // Strict reading: actors every one of the n vendors tracks.
    std::set<std::string> all = intel_of(ranked[0]).actors;
    for (int i = 1; i < n && !all.empty(); ++i) {
      std::set<std::string> next;
      const auto& actors = intel_of(ranked[i]).actors;
      for (const auto& a : all) {
        if (actors.count(a) > 0) next.insert(a);
      }
      all = std::move(next);
    }
    row.shared_actors_all = static_cast<long long>(all.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string_view to_string(CoverageTarget t) {
  switch (t) {
    case CoverageTarget::actors: return "actors";
    case CoverageTarget::geo_sector_pairs: return "geo_sector_pairs";
    case CoverageTarget::intelligence_points: return "intelligence_points";
  }
  return "";
}

CoverageCurve coverage_curve(const Corpus& corpus, CoverageTarget target,
                             const std::vector<Dimension>& dims) {
  auto ranked = vendors_by_volume(corpus);
  if (ranked.empty()) throw std::invalid_argument("coverage_curve: corpus has no vendors");

  std::map<std::string, std::set<std::string>> sets;
  for (const auto& r : corpus.records()) {
    if (r.vendor.empty()) continue;
    auto& s = sets[r.vendor];
    switch (target) {
      case CoverageTarget::actors:
        for (const auto& a : r.threat_actors) {
          if (is_named_actor(a)) s.insert(a);
        }
        break;
      case CoverageTarget::geo_sector_pairs:
        for (const auto& g : r.geographies) {
          for (const auto& sec : r.sectors) s.insert(g + kSep + sec.level1);
        }
        break;
      case CoverageTarget::intelligence_points:
        break;  // handled below per actor
    }
  }
  if (target == CoverageTarget::intelligence_points) {
    for (const auto& [vendor, vi] : collect_intel(corpus, dims)) {
      auto& s = sets[vendor];
      for (const auto& [actor, points] : vi.by_actor) {
        for (const auto& p : points) {
          s.insert(actor + kSep + std::string(to_string(p.first)) + kSep + p.second);
        }
      }
    }
  }

  std::set<std::string> universe;
  for (const auto& v : ranked) universe.insert(sets[v].begin(), sets[v].end());
  if (universe.empty()) {
    throw std::domain_error("coverage_curve: empty target universe");
  }

  CoverageCurve curve;
  curve.target = target;
  curve.universe = static_cast<long long>(universe.size());
  std::set<std::string> covered;
  int n = 0;
  for (const auto& v : ranked) {
    covered.insert(sets[v].begin(), sets[v].end());
    ++n;
    curve.points.push_back({n, v, static_cast<long long>(covered.size()),
                            static_cast<double>(covered.size()) / static_cast<double>(universe.size())});
  }
  return curve;
}

std::vector<SetCoverStep> greedy_max_coverage(
    const std::vector<std::pair<std::string, std::set<int>>>& sets, int n_max) {
  if (n_max < 1) throw std::invalid_argument("greedy_max_coverage: n_max must be positive");

  std::vector<bool> used(sets.size(), false);
  std::set<int> covered;
  std::vector<SetCoverStep> steps;
  int rounds = std::min<int>(n_max, static_cast<int>(sets.size()));

  for (int n = 1; n <= rounds; ++n) {
    std::size_t best = sets.size();
    std::size_t best_new = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (used[i]) continue;
      std::size_t fresh = 0;
      for (int p : sets[i].second) {
        if (covered.count(p) == 0) ++fresh;
      }
      if (best == sets.size()) {
        best = i;
        best_new = fresh;
        continue;
      }
      // more new points, then the larger set, then the smaller name
      if (fresh > best_new ||
          (fresh == best_new && (sets[i].second.size() > sets[best].second.size() ||
                                 (sets[i].second.size() == sets[best].second.size() &&
                                  sets[i].first < sets[best].first)))) {
        best = i;
        best_new = fresh;
      }
    }
    used[best] = true;
    covered.insert(sets[best].second.begin(), sets[best].second.end());
    steps.push_back({n, sets[best].first, static_cast<long long>(best_new),
                     static_cast<long long>(covered.size())});
  }
  return steps;
}

GreedyCoverage greedy_marginal_coverage(const Corpus& corpus, const std::string& actor, int n_max,
                                        const std::vector<Dimension>& dims) {
  auto intel = collect_intel(corpus, dims);

  // Intern the actor's points so set elements are small ints.
  std::map<std::pair<Dimension, std::string>, int> ids;
  std::vector<std::pair<std::string, std::set<int>>> sets;
  for (const auto& [vendor, vi] : intel) {
    auto it = vi.by_actor.find(actor);
    if (it == vi.by_actor.end()) continue;
    std::set<int> s;
    for (const auto& p : it->second) {
      auto [pos, _] = ids.emplace(p, static_cast<int>(ids.size()));
      s.insert(pos->second);
    }
    sets.push_back({vendor, std::move(s)});
  }
  if (sets.empty()) {
    throw std::invalid_argument("greedy_marginal_coverage: unknown actor " + actor);
  }
  if (ids.empty()) {
    throw std::domain_error("greedy_marginal_coverage: no intelligence points for " + actor);
  }

  GreedyCoverage result;
  result.actor = actor;
  result.universe = static_cast<long long>(ids.size());
  for (const auto& step : greedy_max_coverage(sets, n_max)) {
    result.steps.push_back({step.n, step.name, step.newly_covered, step.covered,
                            static_cast<double>(step.covered) / static_cast<double>(result.universe)});
  }
  return result;
}

CoverageAudit coverage_audit(const std::vector<AuditInput>& rows) {
  if (rows.empty()) throw std::invalid_argument("coverage_audit: no rows");
  CoverageAudit audit;
  for (const auto& in : rows) {
    if (in.reports == 0) {
      throw std::invalid_argument("coverage_audit: vendor " + in.vendor + " has zero reports");
    }
    if (in.in_corpus < 0 || in.in_corpus > in.reports || in.reports > in.entries) {
      throw std::invalid_argument("coverage_audit: vendor " + in.vendor +
                                  " violates in_corpus <= reports <= entries");
    }
    AuditRow row;
    row.vendor = in.vendor;
    row.entries = in.entries;
    row.reports = in.reports;
    row.in_corpus = in.in_corpus;
    row.percent = 100.0 * static_cast<double>(in.in_corpus) / static_cast<double>(in.reports);
    audit.total_entries += in.entries;
    audit.total_reports += in.reports;
    audit.total_in_corpus += in.in_corpus;
    audit.rows.push_back(std::move(row));
  }
  audit.overall_percent =
      100.0 * static_cast<double>(audit.total_in_corpus) / static_cast<double>(audit.total_reports);
  return audit;
}

}  // namespace ctimeta::analytics
