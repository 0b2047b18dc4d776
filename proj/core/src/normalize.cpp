#include "ctimeta/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <stdexcept>

#include "ctimeta/util.hpp"

namespace ctimeta::normalization {

void AuditLog::add(std::string op, std::string input, std::string output, std::string note) {
  notes_.push_back({std::move(op), std::move(input), std::move(output), std::move(note)});
}

std::string AuditLog::to_ndjson() const {
  std::string out;
  for (const auto& n : notes_) {
    nlohmann::json j = {{"op", n.op}, {"input", n.input}, {"output", n.output}, {"note", n.note}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

CanonicalMap load_canonical_map(const nlohmann::json& doc) {
  CanonicalMap map;
  map.kind = doc.value("kind", "");
  for (const auto& [raw, canon] : doc.at("entries").items()) {
    if (raw.empty()) throw std::invalid_argument("canonical map: empty key");
    map.entries[raw] = canon.get<std::string>();
  }
  if (doc.contains("provenance")) {
    for (const auto& [raw, note] : doc.at("provenance").items()) {
      map.provenance[raw] = note.get<std::string>();
    }
  }
  // Targets must be fixed points; anything else is a chain or a cycle.
  for (const auto& [raw, canon] : map.entries) {
    auto it = map.entries.find(canon);
    if (it != map.entries.end() && it->second != canon) {
      throw std::invalid_argument("canonical map: target '" + canon + "' is itself remapped to '" +
                                  it->second + "'");
    }
  }
  return map;
}

CanonicalMap load_canonical_map_file(const std::filesystem::path& path) {
  return load_canonical_map(nlohmann::json::parse(read_file(path)));
}

namespace {

std::string map_passthrough(const char* op, const std::string& raw, const CanonicalMap& map,
                            AuditLog* audit) {
  std::string key = trim(raw);
  if (key.empty()) return key;
  auto it = map.entries.find(key);
  if (it == map.entries.end()) {
    if (audit != nullptr) audit->add(op, raw, key, "unmapped");
    return key;
  }
  if (audit != nullptr && it->second != raw) audit->add(op, raw, it->second, "mapped");
  return it->second;
}

}  // namespace

std::string normalize_geography(const std::string& raw, const CanonicalMap& map, AuditLog* audit) {
  return map_passthrough("normalize_geography", raw, map, audit);
}

std::string normalize_vendor(const std::string& raw, const CanonicalMap& map, AuditLog* audit) {
  return map_passthrough("normalize_vendor", raw, map, audit);
}

namespace {

bool is_aka_token(std::string_view token) {
  std::string t = to_lower(trim(token));
  while (!t.empty() && (t.back() == '.' || t.back() == ':')) t.pop_back();
  return t == "aka" || t == "a.k.a";  // trailing dot already stripped
}

// Replaces standalone aka markers with comma separators so one split pass
// handles every delimiter form.
std::string flatten_aka_markers(std::string_view text) {
  // Commas and slashes bound tokens too: "a.k.a.," and "aka/Name" must be
  // recognized, or the marker survives into a split candidate.
  auto is_boundary = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '/';
  };
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_boundary(text[i])) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_boundary(text[j])) ++j;
    std::string_view token = text.substr(i, j - i);
    if (is_aka_token(token)) {
      out.push_back(',');
    } else {
      out.append(token);
    }
    i = j;
  }
  return out;
}

}  // namespace

std::vector<std::string> split_actor_names(const std::string& raw) {
  // Pass 1: unwrap parenthetical aka-phrases into comma-joined segments.
  std::string flat;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '(') {
      flat.push_back(raw[i]);
      ++i;
      continue;
    }
    std::size_t close = raw.find(')', i + 1);
    if (close == std::string::npos) {
      flat.push_back(raw[i]);
      ++i;
      continue;
    }
    std::string inner = raw.substr(i + 1, close - i - 1);
    std::string inner_trimmed = trim(inner);
    bool aka_phrase = false;
    for (const char* marker : {"aka ", "a.k.a. ", "a.k.a ", "aka:", "aka."}) {
      std::string lowered = to_lower(inner_trimmed);
      if (lowered.rfind(marker, 0) == 0) {
        aka_phrase = true;
        inner_trimmed = trim(inner_trimmed.substr(std::string_view(marker).size()));
        break;
      }
    }
    if (aka_phrase) {
      flat.push_back(',');
      flat.append(inner_trimmed);
      flat.push_back(',');
    } else {
      // Plain parenthetical stays part of the surrounding name.
      flat.push_back('(');
      flat.append(inner);
      flat.push_back(')');
    }
    i = close + 1;
  }

  // Pass 2: standalone aka tokens become separators.
  flat = flatten_aka_markers(flat);

  // Pass 3: split on commas and slashes.
  std::vector<std::string> out;
  std::string current;
  for (char c : flat) {
    if (c == ',' || c == '/') {
      std::string name = trim(current);
      if (!name.empty()) out.push_back(std::move(name));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  std::string name = trim(current);
  if (!name.empty()) out.push_back(std::move(name));
  return out;
}

NamingScheme::NamingScheme(std::vector<std::string> sequential_patterns,
                           std::vector<std::string> suffix_families)
    : pattern_sources_(std::move(sequential_patterns)), suffix_sources_(std::move(suffix_families)) {
  for (const auto& p : pattern_sources_) {
    try {
      patterns_.emplace_back(p, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw std::invalid_argument("naming scheme: bad pattern '" + p + "': " + e.what());
    }
  }
  for (const auto& s : suffix_sources_) suffixes_.insert(to_lower(s));
}

int NamingScheme::classify(const std::string& name) const {
  for (const auto& re : patterns_) {
    if (std::regex_match(name, re)) return 0;
  }
  auto pos = name.find_last_of(" \t");
  std::string last = to_lower(pos == std::string::npos ? name : name.substr(pos + 1));
  if (!last.empty() && suffixes_.count(last) > 0) return 1;
  return 2;
}

NamingScheme load_naming_scheme(const nlohmann::json& doc) {
  return NamingScheme(doc.at("sequential_patterns").get<std::vector<std::string>>(),
                      doc.at("suffix_families").get<std::vector<std::string>>());
}

NamingScheme load_naming_scheme_file(const std::filesystem::path& path) {
  return load_naming_scheme(nlohmann::json::parse(read_file(path)));
}

std::string select_canonical_name(const std::vector<std::string>& candidates,
                                  const NamingScheme& scheme) {
  if (candidates.empty()) throw std::invalid_argument("select_canonical_name: no candidates");
  const std::string* best = nullptr;
  int best_class = 3;
  for (const auto& c : candidates) {
    int cls = scheme.classify(c);
    if (cls < best_class) {  // strict: first occurrence wins inside a class
      best_class = cls;
      best = &c;
    }
  }
  return *best;
}

std::string strip_group_variants(const std::string& name) {
  std::string cleaned;
  cleaned.reserve(name.size());
  for (char c : name) cleaned.push_back(c == '_' ? ' ' : c);
  cleaned = collapse_whitespace(cleaned);

  std::vector<std::string> tokens = split(cleaned, ' ');
  if (tokens.size() == 1 && tokens[0].empty()) tokens.clear();

  static const std::set<std::string> kPackaging = {"group", "gang", "ransomware", "operators"};
  std::size_t begin = 0, end = tokens.size();
  while (end - begin > 1 && to_lower(tokens[begin]) == "the") ++begin;
  while (end - begin > 1 && kPackaging.count(to_lower(tokens[end - 1])) > 0) --end;

  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out.empty() ? cleaned : out;
}

AliasCatalog load_alias_catalog(const nlohmann::json& doc) {
  AliasCatalog catalog;
  catalog.name = doc.at("name").get<std::string>();
  for (const auto& group : doc.at("groups")) {
    catalog.groups.push_back(group.get<std::vector<std::string>>());
  }
  // Disjointness within one catalog, on reduced keys.
  std::set<std::string> seen;
  for (const auto& group : catalog.groups) {
    for (const auto& member : group) {
      std::string key = name_key(strip_group_variants(member));
      if (key.empty()) throw std::invalid_argument("alias catalog " + catalog.name + ": empty name");
      if (!seen.insert(key).second) {
        throw std::invalid_argument("alias catalog " + catalog.name + ": name '" + member +
                                    "' appears in more than one group");
      }
    }
  }
  return catalog;
}

AliasCatalog load_alias_catalog_file(const std::filesystem::path& path) {
  return load_alias_catalog(nlohmann::json::parse(read_file(path)));
}

std::string name_key(const std::string& name) { return to_lower(collapse_whitespace(name)); }

std::optional<std::string> AliasConsensus::lookup(const std::string& name) const {
  auto it = canonical_by_key.find(name_key(name));
  if (it == canonical_by_key.end()) return std::nullopt;
  return it->second;
}

AliasConsensus build_alias_consensus(const std::vector<AliasCatalog>& catalogs, int k,
                                     const NamingScheme& scheme) {
  if (k < 1 || static_cast<std::size_t>(k) > catalogs.size()) {
    throw std::invalid_argument("build_alias_consensus: support threshold " + std::to_string(k) +
                                " outside [1, " + std::to_string(catalogs.size()) + "]");
  }

  // Node registry in first-appearance order; display form is the reduced
  // spelling seen first.
  std::vector<std::string> display;
  std::map<std::string, int> node_of;
  auto intern = [&](const std::string& raw) {
    std::string reduced = strip_group_variants(raw);
    std::string key = name_key(reduced);
    auto it = node_of.find(key);
    if (it != node_of.end()) return it->second;
    int id = static_cast<int>(display.size());
    node_of.emplace(key, id);
    display.push_back(reduced);
    return id;
  };

  // One vote per catalog per unordered pair (within-group closure).
  std::map<std::pair<int, int>, std::set<std::size_t>> votes;
  for (std::size_t c = 0; c < catalogs.size(); ++c) {
    for (const auto& group : catalogs[c].groups) {
      std::vector<int> ids;
      ids.reserve(group.size());
      for (const auto& member : group) ids.push_back(intern(member));
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          int a = std::min(ids[i], ids[j]), b = std::max(ids[i], ids[j]);
          if (a != b) votes[{a, b}].insert(c);
        }
      }
    }
  }

  // Union-find over pairs meeting the threshold.
  std::vector<int> parent(display.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [pair, sources] : votes) {
    if (static_cast<int>(sources.size()) >= k) {
      int ra = find(pair.first), rb = find(pair.second);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }

  std::map<int, std::vector<int>> members_by_root;
  for (std::size_t i = 0; i < display.size(); ++i) {
    members_by_root[find(static_cast<int>(i))].push_back(static_cast<int>(i));
  }

  AliasConsensus consensus;
  consensus.support_threshold = k;
  for (auto& [root, ids] : members_by_root) {
    if (ids.size() < 2) continue;  // singletons carry no alias information
    std::sort(ids.begin(), ids.end());  // first-appearance order
    AliasComponent comp;
    for (int id : ids) comp.members.push_back(display[id]);
    comp.canonical = select_canonical_name(comp.members, scheme);
    for (const auto& m : comp.members) consensus.canonical_by_key[name_key(m)] = comp.canonical;
    consensus.components.push_back(std::move(comp));
  }
  return consensus;
}

std::string canonicalize_actor(const std::string& raw, const AliasConsensus& consensus,
                               const NamingScheme& scheme, AuditLog* audit) {
  std::string trimmed = trim(raw);
  if (trimmed.empty()) return trimmed;
  if (trimmed == "Unknown") return trimmed;  // reserved marker for unattributed activity

  std::vector<std::string> candidates = split_actor_names(trimmed);
  std::vector<std::string> stripped;
  stripped.reserve(candidates.size());
  for (const auto& c : candidates) {
    std::string s = strip_group_variants(c);
    if (!s.empty()) stripped.push_back(std::move(s));
  }
  if (stripped.empty()) return collapse_whitespace(trimmed);

  std::string chosen = select_canonical_name(stripped, scheme);
  std::string result = chosen;
  if (auto canonical = consensus.lookup(chosen)) result = *canonical;

  if (audit != nullptr && result != trimmed) {
    audit->add("canonicalize_actor", raw, result,
               consensus.lookup(chosen) ? "consensus alias" : "name cleanup");
  }
  return result;
}

}  // namespace ctimeta::normalization
