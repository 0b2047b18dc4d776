#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctimeta/record.hpp"

namespace ctimeta {

// Record collection with lookup indices. Records are immutable once loaded;
// replace_records swaps the whole set and rebuilds every index, so readers
// never see a stale index.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<ReportRecord> records);

  const std::vector<ReportRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  void replace_records(std::vector<ReportRecord> records);

  // Index lookups return record positions; empty when the key is unknown.
  const std::vector<std::size_t>& by_vendor(const std::string& vendor) const;
  const std::vector<std::size_t>& by_actor(const std::string& actor) const;
  const std::vector<std::size_t>& by_year(int year) const;
  const std::vector<std::size_t>& by_report_type(const std::string& level1) const;

  const ReportRecord* find_by_digest(const std::string& digest) const;

  std::vector<std::string> vendors() const;  // sorted distinct
  std::vector<std::string> actors() const;   // sorted distinct
  std::vector<int> years() const;            // sorted distinct

  // Content hash over the serialized record store, cached after first use.
  const std::string& digest() const;

 private:
  void rebuild_indices();

  std::vector<ReportRecord> records_;
  std::map<std::string, std::vector<std::size_t>> vendor_index_;
  std::map<std::string, std::vector<std::size_t>> actor_index_;
  std::map<int, std::vector<std::size_t>> year_index_;
  std::map<std::string, std::vector<std::size_t>> type_index_;
  std::map<std::string, std::size_t> digest_index_;
  mutable std::string digest_;
};

// Newline-delimited JSON, one record per line. The parser skips blank
// lines and '#' comment lines so stores may carry a provenance header.
std::string serialize_record_store(const std::vector<ReportRecord>& records);
std::vector<ReportRecord> parse_record_store(const std::string& text);

void write_record_store(const std::filesystem::path& path, const std::vector<ReportRecord>& records);
std::vector<ReportRecord> read_record_store(const std::filesystem::path& path);

// Top-level report types that carry per-campaign intelligence production.
const std::vector<std::string>& campaign_core_types();

// Subset of records whose report type touches the campaign-core classes.
// Input is untouched; applying the filter twice is a no-op.
Corpus filter_campaign_core(const Corpus& corpus);

Corpus filter_by_report_types(const Corpus& corpus, const std::vector<std::string>& level1_acronyms);

}  // namespace ctimeta
