#include "ctimeta/record.hpp"

#include <charconv>

namespace ctimeta {

namespace {

struct SourceName {
  SourceCollection value;
  const char* name;
};

constexpr SourceName kSourceNames[] = {
    {SourceCollection::mitre_attack, "mitre_attack"},
    {SourceCollection::aptnotes, "aptnotes"},
    {SourceCollection::cybermonitor, "cybermonitor"},
    {SourceCollection::etda, "etda"},
    {SourceCollection::malpedia, "malpedia"},
    {SourceCollection::otx, "otx"},
    {SourceCollection::apt_groups_sheet, "apt_groups_sheet"},
    {SourceCollection::orkl, "orkl"},
    {SourceCollection::misp_galaxy, "misp_galaxy"},
    {SourceCollection::vx_underground, "vx_underground"},
};

struct LayoutName {
  ColumnLayout value;
  const char* name;
};

constexpr LayoutName kLayoutNames[] = {
    {ColumnLayout::single, "single"},
    {ColumnLayout::double_column, "double"},
    {ColumnLayout::multi, "multi"},
    {ColumnLayout::mixed, "mixed"},
};

}  // namespace

std::string_view to_string(SourceCollection s) {
  for (const auto& e : kSourceNames) {
    if (e.value == s) return e.name;
  }
  return "";
}

std::optional<SourceCollection> source_collection_from_string(std::string_view s) {
  for (const auto& e : kSourceNames) {
    if (s == e.name) return e.value;
  }
  return std::nullopt;
}

std::string_view to_string(ColumnLayout l) {
  for (const auto& e : kLayoutNames) {
    if (e.value == l) return e.name;
  }
  return "";
}

std::optional<ColumnLayout> column_layout_from_string(std::string_view s) {
  for (const auto& e : kLayoutNames) {
    if (s == e.name) return e.value;
  }
  return std::nullopt;
}

const char* const kMonthNames[12] = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December",
};

std::optional<int> month_index(std::string_view name) {
  for (int i = 0; i < 12; ++i) {
    if (name == kMonthNames[i]) return i + 1;
  }
  return std::nullopt;
}

std::optional<YearMonth> parse_year_month(std::string_view s) {
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  int year = 0, month = 0;
  auto r1 = std::from_chars(s.data(), s.data() + 4, year);
  auto r2 = std::from_chars(s.data() + 5, s.data() + 7, month);
  if (r1.ec != std::errc() || r1.ptr != s.data() + 4) return std::nullopt;
  if (r2.ec != std::errc() || r2.ptr != s.data() + 7) return std::nullopt;
  if (month < 1 || month > 12) return std::nullopt;
  return YearMonth{year, month};
}

std::string format_year_month(YearMonth ym) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
  return std::string(buf);
}

bool is_valid_ttp(std::string_view s) {
  auto all_digits = [](std::string_view v) {
    for (char c : v) {
      if (c < '0' || c > '9') return false;
    }
    return !v.empty();
  };
  if (s.size() != 5 && s.size() != 9) return false;
  if (s[0] != 'T' || !all_digits(s.substr(1, 4))) return false;
  if (s.size() == 9) {
    if (s[5] != '.' || !all_digits(s.substr(6, 3))) return false;
  }
  return true;
}

ValidationResult validate_record(const ReportRecord& record, const Taxonomy& taxonomy) {
  ValidationResult result;
  auto add = [&](std::string field, std::string rule) {
    result.violations.push_back({std::move(field), std::move(rule)});
  };

  if (!record.month.empty() && !month_index(record.month)) {
    add("month", "not one of the twelve month names: " + record.month);
  }

  struct LabelField {
    const char* name;
    LabelKind kind;
    const std::vector<TaxonomyLabel>* labels;
  };
  const LabelField label_fields[] = {
      {"report_type", LabelKind::report_type, &record.report_type},
      {"motivations", LabelKind::motivation, &record.motivations},
      {"sectors", LabelKind::sector, &record.sectors},
  };
  for (const auto& lf : label_fields) {
    for (const auto& label : *lf.labels) {
      if (label.kind != lf.kind) {
        add(lf.name, "label kind mismatch");
        continue;
      }
      if (!taxonomy.contains(label)) {
        add(lf.name, "unknown label: " + label.level1 + "/" + label.level2);
      }
    }
  }

  for (const auto& t : record.ttps) {
    if (!is_valid_ttp(t)) add("ttps", "malformed technique id: " + t);
  }

  if (record.campaign_duration) {
    const auto& d = *record.campaign_duration;
    if (d.start.month < 1 || d.start.month > 12 || d.end.month < 1 || d.end.month > 12) {
      add("campaign_duration", "month outside 1..12");
    } else if (d.end < d.start) {
      add("campaign_duration", "end precedes start");
    }
  }

  return result;
}

namespace {

nlohmann::json labels_to_json(const std::vector<TaxonomyLabel>& labels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : labels) {
    arr.push_back({{"level1", l.level1}, {"level2", l.level2}});
  }
  return arr;
}

std::vector<TaxonomyLabel> labels_from_json(const nlohmann::json& arr, LabelKind kind) {
  std::vector<TaxonomyLabel> out;
  for (const auto& item : arr) {
    out.push_back({kind, item.at("level1").get<std::string>(), item.at("level2").get<std::string>()});
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const ReportRecord& r) {
  j = nlohmann::json{
      {"report_digest", r.report_digest},
      {"title", r.title},
      {"vendor", r.vendor},
      {"year", r.year},
      {"month", r.month},
      {"report_type", labels_to_json(r.report_type)},
      {"motivations", labels_to_json(r.motivations)},
      {"threat_actors", r.threat_actors},
      {"victims", r.victims},
      {"geographies", r.geographies},
      {"sectors", labels_to_json(r.sectors)},
      {"iocs", r.iocs},
      {"ttps", r.ttps},
  };
  if (r.campaign_duration) {
    j["campaign_duration"] = {{"start", format_year_month(r.campaign_duration->start)},
                              {"end", format_year_month(r.campaign_duration->end)}};
  } else {
    j["campaign_duration"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ReportRecord& r) {
  r.report_digest = j.at("report_digest").get<std::string>();
  r.title = j.at("title").get<std::string>();
  r.vendor = j.at("vendor").get<std::string>();
  r.year = j.at("year").get<int>();
  r.month = j.at("month").get<std::string>();
  r.report_type = labels_from_json(j.at("report_type"), LabelKind::report_type);
  r.motivations = labels_from_json(j.at("motivations"), LabelKind::motivation);
  r.threat_actors = j.at("threat_actors").get<std::vector<std::string>>();
  r.victims = j.at("victims").get<std::vector<std::string>>();
  r.geographies = j.at("geographies").get<std::vector<std::string>>();
  r.sectors = labels_from_json(j.at("sectors"), LabelKind::sector);
  r.campaign_duration.reset();
  if (j.contains("campaign_duration") && !j.at("campaign_duration").is_null()) {
    const auto& d = j.at("campaign_duration");
    auto start = parse_year_month(d.at("start").get<std::string>());
    auto end = parse_year_month(d.at("end").get<std::string>());
    if (!start || !end) throw std::invalid_argument("record: malformed campaign_duration");
    r.campaign_duration = CampaignDuration{*start, *end};
  }
  r.iocs = j.at("iocs").get<std::vector<std::string>>();
  r.ttps = j.at("ttps").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const ReportDocument& d) {
  j = nlohmann::json{
      {"digest", d.digest},
      {"source_collection", std::string(to_string(d.source))},
      {"path", d.path},
      {"extracted_text", d.extracted_text},
      {"title_hint", d.title_hint},
      {"language", d.language},
      {"word_count", d.word_count},
      {"file_size_bytes", d.file_size_bytes},
      {"column_layout", std::string(to_string(d.layout))},
      {"has_embedded_images", d.has_embedded_images},
  };
}

void from_json(const nlohmann::json& j, ReportDocument& d) {
  d.digest = j.at("digest").get<std::string>();
  auto source = source_collection_from_string(j.at("source_collection").get<std::string>());
  if (!source) throw std::invalid_argument("document: unknown source_collection");
  d.source = *source;
  d.path = j.at("path").get<std::string>();
  d.extracted_text = j.at("extracted_text").get<std::string>();
  d.title_hint = j.at("title_hint").get<std::string>();
  d.language = j.at("language").get<std::string>();
  d.word_count = j.at("word_count").get<std::int64_t>();
  d.file_size_bytes = j.at("file_size_bytes").get<std::int64_t>();
  auto layout = column_layout_from_string(j.at("column_layout").get<std::string>());
  if (!layout) throw std::invalid_argument("document: unknown column_layout");
  d.layout = *layout;
  d.has_embedded_images = j.value("has_embedded_images", false);
}

}  // namespace ctimeta
