#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctimeta/record.hpp"

namespace ctimeta::ingest {

// Content hash of the raw document bytes, lowercase hex. Empty input is
// rejected: an empty download is a collection failure, not a document.
std::string compute_digest(std::string_view bytes);

struct DropEntry {
  std::string digest;
  std::string detail;  // path or member list, free-form
  std::string reason;

  bool operator==(const DropEntry&) const = default;
};

struct ExactDedupResult {
  std::vector<ReportDocument> survivors;  // first seen wins, input order kept
  std::vector<DropEntry> dropped;
};

// Stage one: byte-identical copies collapse onto the first occurrence.
ExactDedupResult dedupe_exact(const std::vector<ReportDocument>& docs);

// Grouping key for near-duplicate detection. Titles are compared
// case-insensitively with whitespace runs collapsed.
struct TupleKey {
  std::string title;  // normalized form
  int year = 0;
  std::string vendor;

  auto operator<=>(const TupleKey&) const = default;
};

TupleKey make_tuple_key(const ReportRecord& record);

enum class ResolutionAction { keep_all, keep_one, drop_all };

std::string_view to_string(ResolutionAction a);
std::optional<ResolutionAction> resolution_action_from_string(std::string_view s);

struct Resolution {
  ResolutionAction action = ResolutionAction::keep_all;
  std::string kept_digest;  // filled when action is keep_one
  std::string reason;

  bool operator==(const Resolution&) const = default;
};

struct DuplicateGroup {
  TupleKey key;
  std::vector<std::string> members;  // record digests, first-seen order, always >= 2
  Resolution resolution;

  bool operator==(const DuplicateGroup&) const = default;
};

// Stage two: clusters records sharing a (title, year, vendor) tuple.
// Singletons are not duplicates and never appear in the output. The groups
// partition the tuple-duplicated subset of the input.
std::vector<DuplicateGroup> group_tuple_duplicates(const std::vector<ReportRecord>& records);

struct ResolutionRule {
  TupleKey key;
  ResolutionAction action = ResolutionAction::keep_all;
  std::string digest;  // explicit keep_one target, may be empty
  std::string reason;
};

std::vector<ResolutionRule> parse_resolution_policy(const nlohmann::json& doc);

struct ResolveResult {
  std::vector<ReportRecord> records;   // survivors, input order kept
  std::vector<DropEntry> dropped;
  std::vector<DuplicateGroup> groups;  // resolutions filled in
};

// Applies per-group rules; groups without a matching rule keep all members.
// keep_one without an explicit digest keeps the first member that carries
// embedded images (these tend to be the original publication, not a scraped
// mirror), falling back to the first member. A rule digest that is not a
// member of its group is an error. survivors + dropped == input.
ResolveResult resolve_duplicates(const std::vector<ReportRecord>& records,
                                 std::vector<DuplicateGroup> groups,
                                 const std::vector<ResolutionRule>& rules,
                                 const std::map<std::string, bool>& has_embedded_images);

struct IngestManifest {
  std::vector<ReportDocument> documents;
  std::vector<DropEntry> dropped_exact;
  std::vector<DuplicateGroup> tuple_groups;
  std::vector<DropEntry> dropped_tuple;
};

void to_json(nlohmann::json& j, const IngestManifest& m);
void from_json(const nlohmann::json& j, IngestManifest& m);

void write_manifest(const std::filesystem::path& path, const IngestManifest& m);
IngestManifest read_manifest(const std::filesystem::path& path);

// Walks a directory tree and builds documents for every regular file, in
// sorted relative-path order. source_map maps a relative path prefix to a
// source collection name; the longest matching prefix wins. attributes may
// carry per-path fields that cannot be derived from the bytes (embedded
// images, language, column layout).
std::vector<ReportDocument> collect_documents(const std::filesystem::path& root,
                                              const std::map<std::string, std::string>& source_map,
                                              const nlohmann::json& attributes);

}  // namespace ctimeta::ingest
