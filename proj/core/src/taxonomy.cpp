#include "ctimeta/taxonomy.hpp"

#include <set>

#include "ctimeta/util.hpp"

namespace ctimeta {

std::optional<LabelKind> label_kind_from_string(std::string_view s) {
  if (s == "report_type") return LabelKind::report_type;
  if (s == "motivation") return LabelKind::motivation;
  if (s == "sector") return LabelKind::sector;
  return std::nullopt;
}

const std::vector<TaxonomyCategory>& Taxonomy::categories(LabelKind kind) const {
  return kinds_[static_cast<int>(kind)];
}

const TaxonomyCategory* Taxonomy::find_level1(LabelKind kind, std::string_view acronym) const {
  for (const auto& cat : categories(kind)) {
    if (cat.acronym == acronym) return &cat;
  }
  return nullptr;
}

const TaxonomyCategory* Taxonomy::find_level2(LabelKind kind, std::string_view level2) const {
  for (const auto& cat : categories(kind)) {
    for (const auto& l2 : cat.level2) {
      if (l2 == level2) return &cat;
    }
  }
  return nullptr;
}

bool Taxonomy::contains(const TaxonomyLabel& label) const {
  const TaxonomyCategory* cat = find_level1(label.kind, label.level1);
  if (cat == nullptr) return false;
  if (label.level2 == "Other") return true;
  for (const auto& l2 : cat->level2) {
    if (l2 == label.level2) return true;
  }
  return false;
}

std::vector<TaxonomyLabel> Taxonomy::all_labels(LabelKind kind) const {
  std::vector<TaxonomyLabel> out;
  for (const auto& cat : categories(kind)) {
    bool has_other = false;
    for (const auto& l2 : cat.level2) {
      out.push_back({kind, cat.acronym, l2});
      has_other = has_other || l2 == "Other";
    }
    if (!has_other) out.push_back({kind, cat.acronym, "Other"});
  }
  return out;
}

Taxonomy load_taxonomy(const nlohmann::json& doc) {
  if (!doc.is_object()) throw TaxonomyError("taxonomy: document must be an object");
  Taxonomy tax;

  for (LabelKind kind : {LabelKind::report_type, LabelKind::motivation, LabelKind::sector}) {
    std::string key(to_string(kind));
    if (!doc.contains(key)) throw TaxonomyError("taxonomy: missing kind: " + key);
    const auto& arr = doc.at(key);
    if (!arr.is_array()) throw TaxonomyError("taxonomy: kind must be an array: " + key);

    std::set<std::string> seen_acronyms;
    std::set<std::string> seen_level2;
    bool has_other_entry = false;
    auto& cats = tax.kinds_[static_cast<int>(kind)];

    for (const auto& item : arr) {
      TaxonomyCategory cat;
      cat.acronym = item.at("acronym").get<std::string>();
      cat.name = item.at("name").get<std::string>();
      if (cat.acronym.empty()) throw TaxonomyError("taxonomy: empty acronym in " + key);
      if (!seen_acronyms.insert(cat.acronym).second) {
        throw TaxonomyError("taxonomy: duplicate category " + cat.acronym + " in " + key);
      }
      for (const auto& l2 : item.at("level2")) {
        std::string name = l2.get<std::string>();
        if (name.empty()) throw TaxonomyError("taxonomy: empty level2 under " + cat.acronym);
        // A second level has exactly one parent within its kind.
        if (!seen_level2.insert(name).second) {
          throw TaxonomyError("taxonomy: level2 '" + name + "' declared under more than one category in " + key);
        }
        if (name == "Other") has_other_entry = true;
        cat.level2.push_back(std::move(name));
      }
      cats.push_back(std::move(cat));
    }
    if (!has_other_entry) {
      throw TaxonomyError("taxonomy: kind " + key + " lacks an Other entry");
    }
  }
  return tax;
}

Taxonomy load_taxonomy_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw TaxonomyError("taxonomy: " + path.string() + ": " + e.what());
  }
  return load_taxonomy(doc);
}

}  // namespace ctimeta
