#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ctimeta/normalize.hpp"

using namespace ctimeta;
using namespace ctimeta::normalization;
using nlohmann::json;

namespace {

std::filesystem::path shared_data() { return std::filesystem::path(CTIMETA_SHARED_DATA_DIR); }

NamingScheme shipped_scheme() {
  static NamingScheme scheme = load_naming_scheme_file(shared_data() / "actor_naming_schemes.json");
  return scheme;
}

std::vector<AliasCatalog> shipped_catalogs() {
  std::vector<AliasCatalog> catalogs;
  for (const char* name : {"microsoft_crowdstrike", "unit42", "secureworks", "mitre_groups", "malpedia"}) {
    catalogs.push_back(
        load_alias_catalog_file(shared_data() / "alias_sources" / (std::string(name) + ".json")));
  }
  return catalogs;
}

AliasConsensus shipped_consensus() {
  static AliasConsensus consensus = build_alias_consensus(shipped_catalogs(), 3, shipped_scheme());
  return consensus;
}

AliasCatalog catalog(std::string name, std::vector<std::vector<std::string>> groups) {
  AliasCatalog c;
  c.name = std::move(name);
  c.groups = std::move(groups);
  return c;
}

}  // namespace

TEST_CASE("canonical maps reject chains and accept fixed points") {
  json good = {{"kind", "vendor"},
               {"entries", {{"Arbor Networks", "Netscout"}, {"Netscout", "Netscout"}}}};
  CanonicalMap map = load_canonical_map(good);
  CHECK(map.entries.size() == 2);

  json chained = {{"kind", "vendor"}, {"entries", {{"A", "B"}, {"B", "C"}}}};
  CHECK_THROWS_AS(load_canonical_map(chained), std::invalid_argument);
}

TEST_CASE("geography and vendor normalization map or pass through with audit notes") {
  CanonicalMap geo = load_canonical_map_file(shared_data() / "geography_map.json");
  AuditLog audit;

  CHECK(normalize_geography("USA", geo, &audit) == "United States");
  CHECK(normalize_geography(" UK ", geo, &audit) == "United Kingdom");
  CHECK(normalize_geography("France", geo, &audit) == "France");
  CHECK(normalize_geography("United States", geo, &audit) == "United States");

  REQUIRE(audit.notes().size() == 4);
  CHECK(audit.notes()[0].note == "mapped");
  CHECK(audit.notes()[1].note == "mapped");
  CHECK(audit.notes()[2].note == "unmapped");
  CHECK(audit.notes()[3].note == "unmapped");

  CanonicalMap vendors = load_canonical_map_file(shared_data() / "vendor_map.json");
  CHECK(normalize_vendor("Arbor Networks asert", vendors) == "Netscout");
  CHECK(normalize_vendor("Netscout asert", vendors) == "Netscout");
  CHECK(normalize_vendor("Malwarebytes labs", vendors) == "Malwarebytes");
  CHECK(normalize_vendor("Malwarebytes threat intelligence team", vendors) == "Malwarebytes");
  CHECK(normalize_vendor("CrowdStrike", vendors) == "CrowdStrike");
}

TEST_CASE("compound actor mentions split into candidate names") {
  CHECK(split_actor_names("Energetic Bear (aka Crouching Yeti)") ==
        std::vector<std::string>{"Energetic Bear", "Crouching Yeti"});
  CHECK(split_actor_names("APT28 aka Fancy Bear") ==
        std::vector<std::string>{"APT28", "Fancy Bear"});
  CHECK(split_actor_names("Sofacy / Pawn Storm, Sednit") ==
        std::vector<std::string>{"Sofacy", "Pawn Storm", "Sednit"});
  CHECK(split_actor_names("TA505 (a.k.a. Hive0065)") ==
        std::vector<std::string>{"TA505", "Hive0065"});
  // A plain parenthetical is part of the name, not an alias list.
  CHECK(split_actor_names("Lazarus (North Korea)") ==
        std::vector<std::string>{"Lazarus (North Korea)"});
  CHECK(split_actor_names("  APT 29  ") == std::vector<std::string>{"APT 29"});
}

TEST_CASE("the shipped naming scheme ranks tracking ids before vendor schemes") {
  NamingScheme scheme = shipped_scheme();

  for (const char* id : {"UNC2452", "TA505", "APT 29", "APT29", "APT-C-36", "FIN7", "TG4127", "Storm-0558"}) {
    CHECK_MESSAGE(scheme.classify(id) == 0, id);
  }
  for (const char* name : {"Cozy Bear", "Midnight Blizzard", "Wizard Spider", "Charming Kitten"}) {
    CHECK_MESSAGE(scheme.classify(name) == 1, name);
  }
  for (const char* name : {"Hive0065", "Sofacy", "Pawn Storm", "Sandworm", "Crouching Yeti", "Lazarus"}) {
    CHECK_MESSAGE(scheme.classify(name) == 2, name);
  }
}

TEST_CASE("canonical name selection prefers stable ids and breaks ties by first occurrence") {
  NamingScheme scheme = shipped_scheme();

  CHECK(select_canonical_name({"Cozy Bear", "UNC2452"}, scheme) == "UNC2452");
  CHECK(select_canonical_name({"Energetic Bear", "Crouching Yeti"}, scheme) == "Energetic Bear");
  CHECK(select_canonical_name({"Sofacy", "Pawn Storm"}, scheme) == "Sofacy");
  CHECK(select_canonical_name({"Pawn Storm", "Sofacy"}, scheme) == "Pawn Storm");
  CHECK(select_canonical_name({"Fancy Bear", "APT 28", "Sofacy"}, scheme) == "APT 28");
  CHECK_THROWS_AS(select_canonical_name({}, scheme), std::invalid_argument);
}

TEST_CASE("group packaging is stripped without erasing the name") {
  CHECK(strip_group_variants("Clop ransomware gang") == "Clop");
  CHECK(strip_group_variants("Clop gang") == "Clop");
  CHECK(strip_group_variants("Clop ransomware group") == "Clop");
  CHECK(strip_group_variants("Cl0p_gang") == "Cl0p");
  CHECK(strip_group_variants("The Lazarus Group") == "Lazarus");
  CHECK(strip_group_variants("Conti operators") == "Conti");
  CHECK(strip_group_variants("  spaced   name  ") == "spaced name");
  // Single packaging words survive: there is nothing else to keep.
  CHECK(strip_group_variants("Group") == "Group");
  CHECK(strip_group_variants("The Group") == "Group");
  CHECK(strip_group_variants("Gang gang") == "Gang");
}

TEST_CASE("stripping is idempotent") {
  for (const char* name : {"Clop ransomware gang", "The Lazarus Group", "APT 29", "Gang gang",
                           "Wizard Spider", "x_y_z group"}) {
    std::string once = strip_group_variants(name);
    CHECK(strip_group_variants(once) == once);
  }
}

TEST_CASE("alias catalogs must keep their groups disjoint") {
  json doc = {{"name", "test"},
              {"groups", json::array({json::array({"A", "B"}), json::array({"b", "C"})})}};
  CHECK_THROWS_AS(load_alias_catalog(doc), std::invalid_argument);

  json ok = {{"name", "test"},
             {"groups", json::array({json::array({"A", "B"}), json::array({"C", "D"})})}};
  CHECK(load_alias_catalog(ok).groups.size() == 2);
}

TEST_CASE("consensus keeps pairs with enough catalog support") {
  NamingScheme scheme = shipped_scheme();
  std::vector<AliasCatalog> catalogs = {
      catalog("c1", {{"A Name", "B Name"}, {"X", "Y"}}),
      catalog("c2", {{"A Name", "B Name"}}),
      catalog("c3", {{"A Name", "B Name"}, {"X", "Y"}}),
      catalog("c4", {}),
      catalog("c5", {{"X", "Z"}}),
  };

  AliasConsensus consensus = build_alias_consensus(catalogs, 3, scheme);
  REQUIRE(consensus.components.size() == 1);
  CHECK(consensus.components[0].members == std::vector<std::string>{"A Name", "B Name"});
  CHECK(consensus.components[0].canonical == "A Name");
  CHECK(consensus.lookup("b name") == "A Name");
  CHECK_FALSE(consensus.lookup("X").has_value());  // two votes only
  CHECK_FALSE(consensus.lookup("Y").has_value());

  // Lowering the threshold can only add pairs.
  AliasConsensus loose = build_alias_consensus(catalogs, 2, scheme);
  CHECK(loose.lookup("Y") == "X");
  CHECK(loose.components.size() == 2);

  CHECK_THROWS_AS(build_alias_consensus(catalogs, 0, scheme), std::invalid_argument);
  CHECK_THROWS_AS(build_alias_consensus(catalogs, 6, scheme), std::invalid_argument);
}

TEST_CASE("catalog votes are counted once per catalog, not per group") {
  NamingScheme scheme = shipped_scheme();
  // The same pair twice in one catalog is still one vote.
  std::vector<AliasCatalog> catalogs = {
      catalog("c1", {{"A", "B"}}),
      catalog("c2", {{"A", "B"}}),
      catalog("c3", {}),
  };
  AliasConsensus consensus = build_alias_consensus(catalogs, 3, scheme);
  CHECK(consensus.components.empty());
}

TEST_CASE("cosmetic variants vote together") {
  NamingScheme scheme = shipped_scheme();
  std::vector<AliasCatalog> catalogs = {
      catalog("c1", {{"Clop", "Cl0p"}}),
      catalog("c2", {{"Clop ransomware gang", "Cl0p"}}),
      catalog("c3", {{"CLOP", "Cl0p gang"}}),
  };
  AliasConsensus consensus = build_alias_consensus(catalogs, 3, scheme);
  REQUIRE(consensus.components.size() == 1);
  CHECK(consensus.components[0].canonical == "Clop");
}

TEST_CASE("the shipped catalogs agree on the documented alias sets") {
  AliasConsensus consensus = shipped_consensus();

  CHECK(consensus.lookup("Cozy Bear") == "APT 29");
  CHECK(consensus.lookup("Midnight Blizzard") == "APT 29");
  CHECK(consensus.lookup("Nobelium") == "APT 29");
  CHECK(consensus.lookup("UNC2452") == "APT 29");

  for (const char* alias : {"Blue Athena", "Fancy Bear", "Fighting Ursa", "Forest Blizzard",
                            "Group 74", "Iron Twilight", "Pawn Storm", "Sednit", "Snake Mackerel",
                            "Sofacy", "Strontium", "TG4127", "Tsar"}) {
    CHECK_MESSAGE(consensus.lookup(alias) == "APT 28", alias);
  }

  CHECK(consensus.lookup("Hive0065") == "TA505");
  CHECK(consensus.lookup("Graceful Spider") == "TA505");
  CHECK(consensus.lookup("Cl0p") == "Clop");
  CHECK(consensus.lookup("Crouching Yeti") == "Energetic Bear");
  CHECK(consensus.lookup("Dragonfly") == "Energetic Bear");

  // Two catalogs are not enough support.
  CHECK_FALSE(consensus.lookup("Hidden Cobra").has_value());
  CHECK_FALSE(consensus.lookup("Lazarus").has_value());
  // One catalog is certainly not.
  CHECK_FALSE(consensus.lookup("Berserk Bear").has_value());
}

TEST_CASE("actor canonicalization composes split, strip, selection and consensus") {
  AliasConsensus consensus = shipped_consensus();
  NamingScheme scheme = shipped_scheme();
  AuditLog audit;

  CHECK(canonicalize_actor("Energetic Bear (aka Crouching Yeti)", consensus, scheme, &audit) ==
        "Energetic Bear");
  CHECK(canonicalize_actor("Clop ransomware gang", consensus, scheme) == "Clop");
  CHECK(canonicalize_actor("Cl0p", consensus, scheme) == "Clop");
  CHECK(canonicalize_actor("Cozy Bear / Nobelium", consensus, scheme) == "APT 29");
  CHECK(canonicalize_actor("Sofacy aka Pawn Storm", consensus, scheme) == "APT 28");
  CHECK(canonicalize_actor("Hive0065", consensus, scheme) == "TA505");
  CHECK(canonicalize_actor("Unknown", consensus, scheme) == "Unknown");
  CHECK(canonicalize_actor("Mustang Panda", consensus, scheme) == "Mustang Panda");
  CHECK(canonicalize_actor("", consensus, scheme).empty());

  CHECK_FALSE(audit.notes().empty());
}

TEST_CASE("actor canonicalization is a fixed point on its own outputs") {
  AliasConsensus consensus = shipped_consensus();
  NamingScheme scheme = shipped_scheme();

  for (const char* raw :
       {"Energetic Bear (aka Crouching Yeti)", "Clop ransomware gang", "Cozy Bear / Nobelium",
        "Sofacy aka Pawn Storm", "Hive0065", "Unknown", "Mustang Panda", "The Lazarus Group",
        "TA505 (a.k.a. Hive0065)", "Wizard Spider"}) {
    std::string once = canonicalize_actor(raw, consensus, scheme);
    CHECK_MESSAGE(canonicalize_actor(once, consensus, scheme) == once, raw);
  }
}

TEST_CASE("lookup keys ignore case and whitespace") {
  CHECK(name_key("  Cozy   Bear ") == "cozy bear");
  CHECK(name_key("COZY BEAR") == name_key("cozy bear"));
}

TEST_CASE("audit logs serialize one note per line") {
  AuditLog audit;
  audit.add("normalize_vendor", "Arbor Networks", "Netscout", "mapped");
  audit.add("canonicalize_actor", "Cl0p", "Clop", "consensus alias");

  std::string ndjson = audit.to_ndjson();
  CHECK(std::count(ndjson.begin(), ndjson.end(), '\n') == 2);
  auto first = json::parse(ndjson.substr(0, ndjson.find('\n')));
  CHECK(first.at("op") == "normalize_vendor");
  CHECK(first.at("output") == "Netscout");
}
