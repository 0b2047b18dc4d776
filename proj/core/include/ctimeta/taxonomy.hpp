#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ctimeta {

enum class LabelKind { report_type, motivation, sector };

constexpr std::string_view to_string(LabelKind k) {
  switch (k) {
    case LabelKind::report_type: return "report_type";
    case LabelKind::motivation: return "motivation";
    case LabelKind::sector: return "sector";
  }
  return "";
}

std::optional<LabelKind> label_kind_from_string(std::string_view s);

// A two-level classification assignment. level1 holds the acronym of the
// top-level category; level2 the verbatim second-level name.
struct TaxonomyLabel {
  LabelKind kind;
  std::string level1;
  std::string level2;

  auto operator<=>(const TaxonomyLabel&) const = default;
};

struct TaxonomyCategory {
  std::string acronym;
  std::string name;
  std::vector<std::string> level2;  // declared entries, file order preserved
};

class TaxonomyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Three fixed label kinds, each a set of top-level categories with their
// second-level entries. Every kind must declare an Other category; a literal
// "Other" second level is additionally accepted under any existing category,
// since analysts may mark an unclassifiable second level below a concrete
// top level.
class Taxonomy {
 public:
  const std::vector<TaxonomyCategory>& categories(LabelKind kind) const;

  const TaxonomyCategory* find_level1(LabelKind kind, std::string_view acronym) const;

  // Parent category of a declared second-level name, nullptr if undeclared.
  const TaxonomyCategory* find_level2(LabelKind kind, std::string_view level2) const;

  bool contains(const TaxonomyLabel& label) const;

  // All valid (level1, level2) pairs of a kind, file order, including the
  // implicit "Other" second level under each concrete category.
  std::vector<TaxonomyLabel> all_labels(LabelKind kind) const;

  friend Taxonomy load_taxonomy(const nlohmann::json& doc);

 private:
  std::vector<TaxonomyCategory> kinds_[3];
};

// Parses a taxonomy document whose top-level keys are the label kinds.
// Throws TaxonomyError on duplicate acronyms, duplicate or multi-parent
// second levels, or a kind without an Other entry.
Taxonomy load_taxonomy(const nlohmann::json& doc);

Taxonomy load_taxonomy_file(const std::filesystem::path& path);

}  // namespace ctimeta
