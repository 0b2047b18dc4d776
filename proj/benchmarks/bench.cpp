// Microbenchmarks for the hot paths: content digests, vendor overlap
// matrices, greedy coverage selection and alias-consensus construction.
// Run with --benchmark_min_time=0.05 for a quick smoke pass.

#include <benchmark/benchmark.h>

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctimeta/analytics.hpp"
#include "ctimeta/corpus.hpp"
#include "ctimeta/normalize.hpp"
#include "ctimeta/record.hpp"
#include "ctimeta/util.hpp"

using namespace ctimeta;

namespace {

std::string make_payload(std::size_t bytes) {
  Rng rng(7);
  std::string payload;
  payload.reserve(bytes);
  for (std::size_t i = 0; i < bytes; ++i)
    payload.push_back(static_cast<char>('a' + rng.below(26)));
  return payload;
}

Corpus make_corpus(std::size_t vendors, std::size_t reports_per_vendor) {
  Rng rng(11);
  std::vector<std::string> actors;
  for (int i = 0; i < 64; ++i) actors.push_back("Actor-" + std::to_string(i));

  std::vector<ReportRecord> records;
  int counter = 0;
  for (std::size_t v = 0; v < vendors; ++v) {
    for (std::size_t k = 0; k < reports_per_vendor; ++k) {
      ReportRecord r;
      r.report_digest = "bench-" + std::to_string(counter++);
      r.title = "Benchmark report " + std::to_string(counter);
      r.vendor = "Vendor-" + std::to_string(v);
      r.year = 2018 + static_cast<int>(rng.below(6));
      r.report_type = {{LabelKind::report_type, "TAA", "Other"}};
      std::size_t na = 1 + rng.below(3);
      for (std::size_t i = 0; i < na; ++i) r.threat_actors.push_back(actors[rng.below(actors.size())]);
      r.geographies = {"Geo-" + std::to_string(rng.below(12))};
      r.sectors = {{LabelKind::sector, "GPA", "Other"}};
      records.push_back(std::move(r));
    }
  }
  return Corpus(std::move(records));
}

void BM_Sha256Digest(benchmark::State& state) {
  std::string payload = make_payload(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sha256_hex(payload));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Sha256Digest)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20);

void BM_OverlapMatrix(benchmark::State& state) {
  Corpus corpus = make_corpus(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        analytics::overlap_matrix(corpus, static_cast<int>(state.range(0)),
                                  analytics::OverlapMode::actors));
  }
}
BENCHMARK(BM_OverlapMatrix)->Arg(8)->Arg(16)->Arg(32);

void BM_GreedyCoverage(benchmark::State& state) {
  Rng rng(23);
  std::vector<std::pair<std::string, std::set<int>>> sets;
  for (int v = 0; v < static_cast<int>(state.range(0)); ++v) {
    std::set<int> points;
    for (int p = 0; p < 500; ++p)
      if (rng.below(100) < 20) points.insert(p);
    if (points.empty()) points.insert(v % 500);
    sets.emplace_back("set-" + std::to_string(v), std::move(points));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(analytics::greedy_max_coverage(sets, 10));
  }
}
BENCHMARK(BM_GreedyCoverage)->Arg(16)->Arg(64);

void BM_AliasConsensus(benchmark::State& state) {
  normalization::NamingScheme scheme;  // empty scheme: classification is not the subject here
  std::vector<normalization::AliasCatalog> catalogs;
  Rng rng(31);
  for (int c = 0; c < 5; ++c) {
    normalization::AliasCatalog catalog;
    catalog.name = "catalog-" + std::to_string(c);
    for (int g = 0; g < static_cast<int>(state.range(0)); ++g) {
      // Overlapping group ids across catalogs create real consensus work.
      int base = static_cast<int>(rng.below(static_cast<std::uint64_t>(state.range(0))));
      catalog.groups.push_back({"Group-" + std::to_string(base) + "-a",
                                "Group-" + std::to_string(base) + "-b",
                                "Group-" + std::to_string(base) + "-c"});
    }
    catalogs.push_back(std::move(catalog));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalization::build_alias_consensus(catalogs, 3, scheme));
  }
}
BENCHMARK(BM_AliasConsensus)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
