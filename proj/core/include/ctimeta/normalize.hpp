#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ctimeta::normalization {

struct AuditNote {
  std::string op;
  std::string input;
  std::string output;
  std::string note;

  bool operator==(const AuditNote&) const = default;
};

// Collects applied mappings and pass-throughs so a reviewer can see every
// rewrite the normalizer performed.
class AuditLog {
 public:
  void add(std::string op, std::string input, std::string output, std::string note);
  const std::vector<AuditNote>& notes() const { return notes_; }
  std::string to_ndjson() const;

 private:
  std::vector<AuditNote> notes_;
};

// Explicit raw -> canonical rewrites for one entity kind. Targets must be
// fixed points: a value that appears as a key must map to itself, which
// rules out chains and cycles.
struct CanonicalMap {
  std::string kind;
  std::map<std::string, std::string> entries;
  std::map<std::string, std::string> provenance;  // optional per-entry note
};

CanonicalMap load_canonical_map(const nlohmann::json& doc);
CanonicalMap load_canonical_map_file(const std::filesystem::path& path);

// Pass-through mapping: unmapped values come back unchanged and are noted
// in the audit log, so map gaps are visible instead of silent.
std::string normalize_geography(const std::string& raw, const CanonicalMap& map, AuditLog* audit = nullptr);
std::string normalize_vendor(const std::string& raw, const CanonicalMap& map, AuditLog* audit = nullptr);

// Splits a compound actor mention into individual name candidates.
// Delimiters: parenthetical aka-phrases, the tokens "aka" / "a.k.a.",
// slashes and commas. Candidate order follows the input text.
std::vector<std::string> split_actor_names(const std::string& raw);

// Naming-style catalog used to rank candidate names. sequential_patterns are
// anchored regexes for tracking-number schemes (for example UNC2452 or
// APT 29); suffix_families are the final-word families used by large-vendor
// naming schemes (Bear, Panda, Blizzard, Typhoon, ...) compared
// case-insensitively.
class NamingScheme {
 public:
  NamingScheme() = default;
  NamingScheme(std::vector<std::string> sequential_patterns, std::vector<std::string> suffix_families);

  // 0 = sequential tracking id, 1 = vendor naming scheme, 2 = anything else.
  int classify(const std::string& name) const;

  const std::vector<std::string>& sequential_patterns() const { return pattern_sources_; }
  const std::vector<std::string>& suffix_families() const { return suffix_sources_; }

 private:
  std::vector<std::string> pattern_sources_;
  std::vector<std::regex> patterns_;
  std::vector<std::string> suffix_sources_;
  std::set<std::string> suffixes_;  // lowercased
};

NamingScheme load_naming_scheme(const nlohmann::json& doc);
NamingScheme load_naming_scheme_file(const std::filesystem::path& path);

// Picks the most stable name: sequential tracking ids beat vendor-scheme
// names beat everything else; within a class the earliest candidate wins.
// Candidates must be non-empty.
std::string select_canonical_name(const std::vector<std::string>& candidates, const NamingScheme& scheme);

// Removes packaging around a group name: a leading "The", trailing
// group/gang/ransomware/operators tokens, underscore separators and
// whitespace runs. Never strips a name down to nothing; casing of the kept
// tokens is preserved.
std::string strip_group_variants(const std::string& name);

// One public alias catalog: named groups of names claimed to be the same
// actor. Groups must be disjoint within a catalog.
struct AliasCatalog {
  std::string name;
  std::vector<std::vector<std::string>> groups;
};

AliasCatalog load_alias_catalog(const nlohmann::json& doc);
AliasCatalog load_alias_catalog_file(const std::filesystem::path& path);

struct AliasComponent {
  std::string canonical;
  std::vector<std::string> members;  // first-appearance order across catalogs
};

// Alias pairs that at least `support_threshold` catalogs agree on, merged
// into connected components with one canonical label each.
struct AliasConsensus {
  int support_threshold = 0;
  std::vector<AliasComponent> components;
  std::map<std::string, std::string> canonical_by_key;  // lookup key -> canonical name

  std::optional<std::string> lookup(const std::string& name) const;
};

// Votes are counted per unordered name pair: every catalog group contributes
// all pairs of its members, and a pair survives when at least k catalogs
// contain it. Catalog names are reduced by strip_group_variants before
// pairing, and keys are case- and whitespace-insensitive, so cosmetic
// variants vote together. k must lie in [1, #catalogs]. Raising k can only
// shrink the retained pair set.
AliasConsensus build_alias_consensus(const std::vector<AliasCatalog>& catalogs, int k,
                                     const NamingScheme& scheme);

// Full actor cleanup: split the mention, strip group packaging from each
// candidate, pick the most stable candidate, then replace it by its
// consensus canonical name when one exists. The reserved name "Unknown"
// maps to itself, and names absent from the consensus pass through. The
// result is a fixed point of this function.
std::string canonicalize_actor(const std::string& raw, const AliasConsensus& consensus,
                               const NamingScheme& scheme, AuditLog* audit = nullptr);

// Lookup key used for consensus membership: lowercased, whitespace collapsed.
std::string name_key(const std::string& name);

}  // namespace ctimeta::normalization
