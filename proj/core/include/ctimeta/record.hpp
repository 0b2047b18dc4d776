#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctimeta/taxonomy.hpp"

namespace ctimeta {

// Feed collections a document can originate from.
enum class SourceCollection {
  mitre_attack,
  aptnotes,
  cybermonitor,
  etda,
  malpedia,
  otx,
  apt_groups_sheet,
  orkl,
  misp_galaxy,
  vx_underground,
};

std::string_view to_string(SourceCollection s);
std::optional<SourceCollection> source_collection_from_string(std::string_view s);

enum class ColumnLayout { single, double_column, multi, mixed };

std::string_view to_string(ColumnLayout l);
std::optional<ColumnLayout> column_layout_from_string(std::string_view s);

// A raw collected document after text extraction, before any labeling.
struct ReportDocument {
  std::string digest;  // lowercase hex content hash of the raw bytes
  SourceCollection source = SourceCollection::mitre_attack;
  std::string path;
  std::string extracted_text;
  std::string title_hint;
  std::string language;
  std::int64_t word_count = 0;
  std::int64_t file_size_bytes = 0;
  ColumnLayout layout = ColumnLayout::single;
  bool has_embedded_images = false;

  bool operator==(const ReportDocument&) const = default;
};

extern const char* const kMonthNames[12];  // "January" .. "December"

// 1-based month index, nullopt for anything outside the twelve names.
std::optional<int> month_index(std::string_view name);

struct YearMonth {
  int year = 0;
  int month = 0;  // 1..12

  auto operator<=>(const YearMonth&) const = default;
};

// "YYYY-MM"
std::optional<YearMonth> parse_year_month(std::string_view s);
std::string format_year_month(YearMonth ym);

struct CampaignDuration {
  YearMonth start;
  YearMonth end;

  bool operator==(const CampaignDuration&) const = default;
};

// One structured row of the corpus; every list field is always present,
// possibly empty. month is a month name or empty when unknown.
struct ReportRecord {
  std::string report_digest;
  std::string title;
  std::string vendor;
  int year = 0;
  std::string month;
  std::vector<TaxonomyLabel> report_type;
  std::vector<TaxonomyLabel> motivations;
  std::vector<std::string> threat_actors;
  std::vector<std::string> victims;
  std::vector<std::string> geographies;
  std::vector<TaxonomyLabel> sectors;
  std::optional<CampaignDuration> campaign_duration;
  std::vector<std::string> iocs;
  std::vector<std::string> ttps;

  bool operator==(const ReportRecord&) const = default;
};

bool is_valid_ttp(std::string_view s);  // T followed by 4 digits, optional .NNN subtechnique

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

// Structural checks against the taxonomy: month name, label membership,
// technique id shape, duration ordering. Violations are returned, not thrown.
ValidationResult validate_record(const ReportRecord& record, const Taxonomy& taxonomy);

void to_json(nlohmann::json& j, const ReportRecord& r);
void from_json(const nlohmann::json& j, ReportRecord& r);
void to_json(nlohmann::json& j, const ReportDocument& d);
void from_json(const nlohmann::json& j, ReportDocument& d);

}  // namespace ctimeta
