#include "ctimeta/ingest.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "ctimeta/util.hpp"

namespace ctimeta::ingest {

std::string compute_digest(std::string_view bytes) {
  if (bytes.empty()) throw std::invalid_argument("compute_digest: empty input");
  return sha256_hex(bytes);
}

ExactDedupResult dedupe_exact(const std::vector<ReportDocument>& docs) {
  ExactDedupResult result;
  std::set<std::string> seen;
  for (const auto& doc : docs) {
    if (seen.insert(doc.digest).second) {
      result.survivors.push_back(doc);
    } else {
      result.dropped.push_back({doc.digest, doc.path, "byte-identical copy"});
    }
  }
  return result;
}

TupleKey make_tuple_key(const ReportRecord& record) {
  return {to_lower(collapse_whitespace(record.title)), record.year, trim(record.vendor)};
}

std::string_view to_string(ResolutionAction a) {
  switch (a) {
    case ResolutionAction::keep_all: return "keep_all";
    case ResolutionAction::keep_one: return "keep_one";
    case ResolutionAction::drop_all: return "drop_all";
  }
  return "";
}

std::optional<ResolutionAction> resolution_action_from_string(std::string_view s) {
  if (s == "keep_all") return ResolutionAction::keep_all;
  if (s == "keep_one") return ResolutionAction::keep_one;
  if (s == "drop_all") return ResolutionAction::drop_all;
  return std::nullopt;
}

std::vector<DuplicateGroup> group_tuple_duplicates(const std::vector<ReportRecord>& records) {
  std::map<TupleKey, std::vector<std::string>> buckets;
  for (const auto& r : records) {
    buckets[make_tuple_key(r)].push_back(r.report_digest);
  }
  std::vector<DuplicateGroup> groups;
  for (auto& [key, members] : buckets) {
    if (members.size() < 2) continue;
    DuplicateGroup g;
    g.key = key;
    g.members = std::move(members);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<ResolutionRule> parse_resolution_policy(const nlohmann::json& doc) {
  std::vector<ResolutionRule> rules;
  for (const auto& item : doc.at("rules")) {
    ResolutionRule rule;
    const auto& key = item.at("key");
    rule.key.title = to_lower(collapse_whitespace(key.at("title").get<std::string>()));
    rule.key.year = key.at("year").get<int>();
    rule.key.vendor = trim(key.at("vendor").get<std::string>());
    auto action = resolution_action_from_string(item.at("action").get<std::string>());
    if (!action) throw std::invalid_argument("resolution policy: unknown action");
    rule.action = *action;
    rule.digest = item.value("digest", "");
    rule.reason = item.value("reason", "");
    rules.push_back(std::move(rule));
  }
  return rules;
}

ResolveResult resolve_duplicates(const std::vector<ReportRecord>& records,
                                 std::vector<DuplicateGroup> groups,
                                 const std::vector<ResolutionRule>& rules,
                                 const std::map<std::string, bool>& has_embedded_images) {
  std::map<TupleKey, const ResolutionRule*> rule_index;
  for (const auto& rule : rules) rule_index[rule.key] = &rule;

  ResolveResult result;
  std::map<std::string, std::pair<const DuplicateGroup*, std::string>> drops;  // digest -> (group, reason)

  for (auto& group : groups) {
    const ResolutionRule* rule = nullptr;
    if (auto it = rule_index.find(group.key); it != rule_index.end()) rule = it->second;

    Resolution res;
    res.action = rule ? rule->action : ResolutionAction::keep_all;
    res.reason = rule ? rule->reason : "";

    switch (res.action) {
      case ResolutionAction::keep_all:
        break;
      case ResolutionAction::keep_one: {
        std::string kept;
        if (rule != nullptr && !rule->digest.empty()) {
          bool member = std::find(group.members.begin(), group.members.end(), rule->digest) !=
                        group.members.end();
          if (!member) {
            throw std::invalid_argument("resolve_duplicates: rule digest " + rule->digest +
                                        " is not a member of its group");
          }
          kept = rule->digest;
        } else {
          // Prefer the copy that still carries its images.
          for (const auto& digest : group.members) {
            auto it = has_embedded_images.find(digest);
            if (it != has_embedded_images.end() && it->second) {
              kept = digest;
              break;
            }
          }
          if (kept.empty()) kept = group.members.front();
        }
        res.kept_digest = kept;
        for (const auto& digest : group.members) {
          if (digest != kept) {
            drops[digest] = {&group, res.reason.empty() ? "near-duplicate of kept copy" : res.reason};
          }
        }
        break;
      }
      case ResolutionAction::drop_all:
        for (const auto& digest : group.members) {
          drops[digest] = {&group, res.reason.empty() ? "duplicate cluster dropped" : res.reason};
        }
        break;
    }
    group.resolution = std::move(res);
  }

  for (const auto& r : records) {
    auto it = drops.find(r.report_digest);
    if (it == drops.end()) {
      result.records.push_back(r);
    } else {
      result.dropped.push_back({r.report_digest, it->second.first->key.title, it->second.second});
    }
  }
  result.groups = std::move(groups);
  return result;
}

namespace {

nlohmann::json key_to_json(const TupleKey& k) {
  return {{"title", k.title}, {"year", k.year}, {"vendor", k.vendor}};
}

TupleKey key_from_json(const nlohmann::json& j) {
  return {j.at("title").get<std::string>(), j.at("year").get<int>(), j.at("vendor").get<std::string>()};
}

nlohmann::json drops_to_json(const std::vector<DropEntry>& drops) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : drops) {
    arr.push_back({{"digest", d.digest}, {"detail", d.detail}, {"reason", d.reason}});
  }
  return arr;
}

std::vector<DropEntry> drops_from_json(const nlohmann::json& arr) {
  std::vector<DropEntry> out;
  for (const auto& item : arr) {
    out.push_back({item.at("digest").get<std::string>(), item.value("detail", ""),
                   item.value("reason", "")});
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const IngestManifest& m) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : m.tuple_groups) {
    groups.push_back({{"key", key_to_json(g.key)},
                      {"members", g.members},
                      {"resolution",
                       {{"action", std::string(to_string(g.resolution.action))},
                        {"kept_digest", g.resolution.kept_digest},
                        {"reason", g.resolution.reason}}}});
  }
  j = nlohmann::json{
      {"documents", m.documents},
      {"dropped_exact", drops_to_json(m.dropped_exact)},
      {"tuple_groups", std::move(groups)},
      {"dropped_tuple", drops_to_json(m.dropped_tuple)},
  };
}

void from_json(const nlohmann::json& j, IngestManifest& m) {
  m.documents = j.at("documents").get<std::vector<ReportDocument>>();
  m.dropped_exact = drops_from_json(j.at("dropped_exact"));
  m.tuple_groups.clear();
  for (const auto& item : j.at("tuple_groups")) {
    DuplicateGroup g;
    g.key = key_from_json(item.at("key"));
    g.members = item.at("members").get<std::vector<std::string>>();
    const auto& res = item.at("resolution");
    auto action = resolution_action_from_string(res.at("action").get<std::string>());
    if (!action) throw std::invalid_argument("manifest: unknown resolution action");
    g.resolution.action = *action;
    g.resolution.kept_digest = res.value("kept_digest", "");
    g.resolution.reason = res.value("reason", "");
    m.tuple_groups.push_back(std::move(g));
  }
  m.dropped_tuple = drops_from_json(j.at("dropped_tuple"));
}

void write_manifest(const std::filesystem::path& path, const IngestManifest& m) {
  nlohmann::json j = m;
  write_file_atomic(path, j.dump(2) + "\n");
}

IngestManifest read_manifest(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_file(path)).get<IngestManifest>();
}

std::vector<ReportDocument> collect_documents(const std::filesystem::path& root,
                                              const std::map<std::string, std::string>& source_map,
                                              const nlohmann::json& attributes) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw std::runtime_error("collect_documents: not a directory: " + root.string());
  }

  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    paths.push_back(fs::relative(entry.path(), root).generic_string());
  }
  std::sort(paths.begin(), paths.end());

  auto source_for = [&](const std::string& rel) -> SourceCollection {
    const std::string* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [prefix, name] : source_map) {
      if (rel.rfind(prefix, 0) == 0 && prefix.size() >= best_len) {
        best = &name;
        best_len = prefix.size();
      }
    }
    if (best == nullptr) throw std::runtime_error("collect_documents: no source mapping for " + rel);
    auto source = source_collection_from_string(*best);
    if (!source) throw std::runtime_error("collect_documents: unknown source collection " + *best);
    return *source;
  };

  std::vector<ReportDocument> docs;
  for (const auto& rel : paths) {
    std::string bytes = read_file(root / rel);
    if (bytes.empty()) continue;  // empty files carry no report
    ReportDocument doc;
    doc.digest = compute_digest(bytes);
    doc.source = source_for(rel);
    doc.path = rel;
    doc.extracted_text = bytes;
    doc.file_size_bytes = static_cast<std::int64_t>(bytes.size());

    std::int64_t words = 0;
    bool in_token = false;
    for (char c : bytes) {
      bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
      if (!ws && !in_token) ++words;
      in_token = !ws;
    }
    doc.word_count = words;

    std::size_t eol = bytes.find('\n');
    doc.title_hint = trim(std::string_view(bytes).substr(0, eol == std::string::npos ? bytes.size() : eol));
    doc.language = "en";

    if (attributes.is_object() && attributes.contains(rel)) {
      const auto& attr = attributes.at(rel);
      doc.has_embedded_images = attr.value("has_embedded_images", false);
      doc.language = attr.value("language", doc.language);
      if (attr.contains("column_layout")) {
        auto layout = column_layout_from_string(attr.at("column_layout").get<std::string>());
        if (!layout) throw std::runtime_error("collect_documents: unknown column_layout for " + rel);
        doc.layout = *layout;
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace ctimeta::ingest
