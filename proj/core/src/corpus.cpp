#include "ctimeta/corpus.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "ctimeta/util.hpp"

namespace ctimeta {

namespace {
const std::vector<std::size_t> kNoRecords;
}

Corpus::Corpus(std::vector<ReportRecord> records) { replace_records(std::move(records)); }

void Corpus::replace_records(std::vector<ReportRecord> records) {
  records_ = std::move(records);
  digest_.clear();
  rebuild_indices();
}

void Corpus::rebuild_indices() {
  vendor_index_.clear();
  actor_index_.clear();
  year_index_.clear();
  type_index_.clear();
  digest_index_.clear();

  for (std::size_t i = 0; i < records_.size(); ++i) {
    const ReportRecord& r = records_[i];
    if (!digest_index_.emplace(r.report_digest, i).second) {
      throw std::invalid_argument("corpus: duplicate record digest: " + r.report_digest);
    }
    vendor_index_[r.vendor].push_back(i);
    for (const auto& a : r.threat_actors) {
      auto& slots = actor_index_[a];
      if (slots.empty() || slots.back() != i) slots.push_back(i);
    }
    year_index_[r.year].push_back(i);
    std::set<std::string> seen_types;
    for (const auto& t : r.report_type) {
      if (seen_types.insert(t.level1).second) type_index_[t.level1].push_back(i);
    }
  }
}

const std::vector<std::size_t>& Corpus::by_vendor(const std::string& vendor) const {
  auto it = vendor_index_.find(vendor);
  return it == vendor_index_.end() ? kNoRecords : it->second;
}

const std::vector<std::size_t>& Corpus::by_actor(const std::string& actor) const {
  auto it = actor_index_.find(actor);
  return it == actor_index_.end() ? kNoRecords : it->second;
}

const std::vector<std::size_t>& Corpus::by_year(int year) const {
  auto it = year_index_.find(year);
  return it == year_index_.end() ? kNoRecords : it->second;
}

const std::vector<std::size_t>& Corpus::by_report_type(const std::string& level1) const {
  auto it = type_index_.find(level1);
  return it == type_index_.end() ? kNoRecords : it->second;
}

const ReportRecord* Corpus::find_by_digest(const std::string& digest) const {
  auto it = digest_index_.find(digest);
  return it == digest_index_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> Corpus::vendors() const {
  std::vector<std::string> out;
  out.reserve(vendor_index_.size());
  for (const auto& [name, _] : vendor_index_) out.push_back(name);
  return out;
}

std::vector<std::string> Corpus::actors() const {
  std::vector<std::string> out;
  out.reserve(actor_index_.size());
  for (const auto& [name, _] : actor_index_) out.push_back(name);
  return out;
}

std::vector<int> Corpus::years() const {
  std::vector<int> out;
  out.reserve(year_index_.size());
  for (const auto& [year, _] : year_index_) out.push_back(year);
  return out;
}

const std::string& Corpus::digest() const {
  if (digest_.empty()) digest_ = sha256_hex(serialize_record_store(records_));
  return digest_;
}

std::string serialize_record_store(const std::vector<ReportRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = r;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<ReportRecord> parse_record_store(const std::string& text) {
  std::vector<ReportRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (trim(line).empty() || line.front() == '#') continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<ReportRecord>());
    } catch (const std::exception& e) {
      throw std::runtime_error("record store line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_record_store(const std::filesystem::path& path, const std::vector<ReportRecord>& records) {
  write_file_atomic(path, serialize_record_store(records));
}

std::vector<ReportRecord> read_record_store(const std::filesystem::path& path) {
  return parse_record_store(read_file(path));
}

const std::vector<std::string>& campaign_core_types() {
  static const std::vector<std::string> kTypes = {"TAA", "CA", "MVA", "ITI"};
  return kTypes;
}

Corpus filter_by_report_types(const Corpus& corpus, const std::vector<std::string>& level1_acronyms) {
  std::set<std::string> wanted(level1_acronyms.begin(), level1_acronyms.end());
  std::vector<ReportRecord> kept;
  for (const auto& r : corpus.records()) {
    bool hit = std::any_of(r.report_type.begin(), r.report_type.end(),
                           [&](const TaxonomyLabel& l) { return wanted.count(l.level1) > 0; });
    if (hit) kept.push_back(r);
  }
  return Corpus(std::move(kept));
}

Corpus filter_campaign_core(const Corpus& corpus) {
  return filter_by_report_types(corpus, campaign_core_types());
}

}  // namespace ctimeta
