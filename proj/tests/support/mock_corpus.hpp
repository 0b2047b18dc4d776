#pragma once

// On-disk document corpus with canned extractor responses, shared by the
// pipeline tests and the acceptance harness. Every document gets a sidecar
// next to it, so the mock backend replays a known record per digest; the
// raw field values are chosen to exercise vendor, geography and actor
// normalization once the full pipeline runs over them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctimeta/extraction.hpp"
#include "ctimeta/record.hpp"
#include "ctimeta/util.hpp"
#include "ctimeta/validation.hpp"

namespace testsupport {

struct MockDocument {
  std::string relative_path;  // under <root>/docs
  std::string text;
  ctimeta::ReportRecord raw;  // pre-normalization record the sidecar yields
};

struct MockCorpus {
  std::filesystem::path root;
  std::vector<MockDocument> documents;
  nlohmann::json config_doc;  // complete pipeline config; work_dir left to the caller
};

inline ctimeta::ReportRecord mock_record(
    std::string vendor, int year, std::string month, const char* type_l1, const char* type_l2,
    const char* motivation_l1, const char* motivation_l2, const char* sector_l1,
    const char* sector_l2, std::vector<std::string> actors, std::vector<std::string> geographies,
    std::vector<std::string> ttps = {}, std::vector<std::string> iocs = {}) {
  ctimeta::ReportRecord r;
  r.vendor = std::move(vendor);
  r.year = year;
  r.month = std::move(month);
  r.report_type = {{ctimeta::LabelKind::report_type, type_l1, type_l2}};
  r.motivations = {{ctimeta::LabelKind::motivation, motivation_l1, motivation_l2}};
  r.sectors = {{ctimeta::LabelKind::sector, sector_l1, sector_l2}};
  r.threat_actors = std::move(actors);
  r.geographies = std::move(geographies);
  r.ttps = std::move(ttps);
  r.iocs = std::move(iocs);
  return r;
}

inline std::vector<MockDocument> mock_documents() {
  std::vector<MockDocument> docs;
  auto add = [&](std::string path, std::string title, ctimeta::ReportRecord raw) {
    MockDocument doc;
    doc.relative_path = std::move(path);
    doc.text = title + "\nBody text for " + doc.relative_path + " with enough words to count.";
    raw.title = std::move(title);
    docs.push_back({doc.relative_path, doc.text, std::move(raw)});
  };

  add("orkl/turla-espionage.txt", "Turla Espionage in Europe",
      mock_record("Kaspersky Lab", 2020, "January", "TAA", "Threat Actor Activity Analysis",
                  "EIC", "Espionage", "GPA", "Government Agencies", {"Turla"}, {"Germany"},
                  {"T1059"}, {"c2.turla.example"}));
  add("orkl/midnight-campaign.txt", "Midnight Campaign Against Embassies",
      mock_record("Microsoft Threat Intelligence", 2020, "July", "CA", "Campaign Analysis Report",
                  "EIC", "Espionage", "GPA", "Government Agencies", {"Cozy Bear"}, {"USA"}));
  add("orkl/pawn-storm-election.txt", "Election Phishing Waves",
      mock_record("ESET Research", 2021, "March", "TAA", "Threat Actor Profile", "PII",
                  "Political", "GPA", "Diplomacy", {"Sofacy aka Pawn Storm"}, {"France"}));
  add("orkl/fin7-carbanak.txt", "Carbanak Toolkit Update",
      mock_record("Mandiant", 2021, "May", "MVA", "Malware Analysis Report", "FC",
                  "Financial Gain", "FBI", "Finance", {"FIN7"}, {"USA"}, {"T1566.001"},
                  {"185.0.2.1", "loader.fin7.example"}));
  add("orkl/clop-moveit.txt", "Mass Exploitation and Extortion",
      mock_record("Unit42", 2021, "September", "CA", "Campaign Analysis Report", "FC",
                  "Blackmail", "HLS", "Health", {"Clop ransomware gang"}, {"United Kingdom"},
                  {"T1486"}));
  add("malpedia/lazarus-exchanges.txt", "Exchange Heists Continue",
      mock_record("Kaspersky", 2022, "February", "TAA", "Threat Actor Activity Analysis", "FC",
                  "Financial Gain", "CFC", "Cryptocurrency", {"Lazarus Group", "Hidden Cobra"},
                  {"South Korea"}));
  add("malpedia/sandworm-grid.txt", "Grid Disruption Postmortem",
      mock_record("ESET", 2022, "April", "CA", "Campaign Analysis Report", "SAB", "Sabotage",
                  "EUNR", "Energy", {"Sandworm"}, {"Ukraine"}, {"T1486"}));
  add("malpedia/ta505-returns.txt", "Large Scale Malspam Returns",
      mock_record("Proofpoint", 2022, "October", "TAA", "Threat Actor Activity Analysis", "FC",
                  "Financial Fraud", "FBI", "Online Banking", {"Hive0065"}, {"Global"}));
  add("malpedia/trickbot-infrastructure.txt", "Banking Trojan Infrastructure Map",
      mock_record("Check Point Research", 2023, "June", "MVA", "Malware Family Profile", "FC",
                  "Financial Gain", "ITTC", "IT services", {"ITG23"}, {"Global"}, {},
                  {"bot.tracker.example"}));
  add("malpedia/berserk-audit.txt", "Utility Sector Intrusion Review",
      mock_record("Secureworks CTU", 2023, "August", "IHF", "Incident Report", "EIC", "Espionage",
                  "EUNR", "Utilities", {"Crouching Yeti"}, {"US"}));

  // d2 carries a campaign window so the duration field round trips end to end.
  docs[1].raw.campaign_duration = ctimeta::CampaignDuration{{2020, 3}, {2020, 9}};
  return docs;
}

// Writes the document tree, sidecars, source map and the validation side
// files, then returns the ready-to-run configuration.
inline MockCorpus build_mock_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  using nlohmann::json;

  MockCorpus corpus;
  corpus.root = root;
  fs::remove_all(root);
  // Sidecars live in a parallel tree: ingest walks every regular file under
  // the documents root, so canned responses must not sit next to the texts.
  for (const char* subdir : {"docs", "sidecars"}) {
    fs::create_directories(root / subdir / "orkl");
    fs::create_directories(root / subdir / "malpedia");
  }

  corpus.documents = mock_documents();
  for (auto& doc : corpus.documents) {
    doc.raw.report_digest = ctimeta::sha256_hex(doc.text);
    ctimeta::write_file_atomic(root / "docs" / doc.relative_path, doc.text);
    fs::path sidecar = root / "sidecars" / doc.relative_path;
    sidecar.replace_extension();
    sidecar += ".response.json";
    ctimeta::write_file_atomic(sidecar, ctimeta::extraction::render_response(doc.raw).dump());
  }

  ctimeta::write_file_atomic(root / "source_map.json",
                             json{{"orkl/", "orkl"}, {"malpedia/", "malpedia"}}.dump());

  // Rater agreement fixture with zero chance-corrected agreement.
  ctimeta::write_file_atomic(root / "ratings.csv",
                             "item,a,b\n1,A,A\n2,A,B\n3,B,A\n4,B,B\n");

  // One perfectly stable cell and one 50/50 cell: mean entropy 0.5 bits.
  const std::string& d1 = corpus.documents[0].raw.report_digest;
  ctimeta::write_file_atomic(root / "stability_runs.csv",
                             "digest,field,run,precision_num,precision_den\n" +
                                 d1 + ",motivations,1,1,1\n" + d1 + ",motivations,2,1,1\n" +
                                 d1 + ",sectors,1,1,2\n" + d1 + ",sectors,2,1,1\n");

  // Two hand-checkable rows: 25/50 and 15/30 referenced reports in corpus.
  ctimeta::write_file_atomic(
      root / "audit_counts.json",
      json::array({json{{"vendor", "TrackerOne"}, {"entries", 100}, {"reports", 50}, {"in_corpus", 25}},
                   json{{"vendor", "TrackerTwo"}, {"entries", 40}, {"reports", 30}, {"in_corpus", 15}}})
          .dump());

  // Field scores over two judged reports: actors pool to P=3/4, R=3/4.
  std::vector<ctimeta::validation::Judgment> judgments;
  judgments.push_back(ctimeta::validation::make_judgment(
      corpus.documents[0].raw.report_digest, "threat_actors", {"Turla", "Fancy Bear", "Sofacy"},
      {"Turla", "Fancy Bear"}, 0, "r1"));
  judgments.push_back(ctimeta::validation::make_judgment(
      corpus.documents[1].raw.report_digest, "threat_actors", {"APT 29"}, {"APT 29"}, 1, "r1"));
  ctimeta::write_file_atomic(root / "judgments.csv",
                             ctimeta::validation::judgments_to_csv(judgments));

  auto shared = [](const char* name) {
    return (fs::path(CTIMETA_SHARED_DATA_DIR) / name).string();
  };
  json alias_catalogs = json::array();
  for (const char* name : {"alias_sources/microsoft_crowdstrike.json", "alias_sources/unit42.json",
                           "alias_sources/secureworks.json", "alias_sources/mitre_groups.json",
                           "alias_sources/malpedia.json"})
    alias_catalogs.push_back(shared(name));

  corpus.config_doc = json{
      {"seed", 42},
      {"paths",
       {{"documents_root", (root / "docs").string()},
        {"source_map", (root / "source_map.json").string()},
        {"taxonomy", shared("taxonomy.json")},
        {"templates_dir", shared("templates")},
        {"geography_map", shared("geography_map.json")},
        {"vendor_map", shared("vendor_map.json")},
        {"naming_scheme", shared("actor_naming_schemes.json")},
        {"alias_catalogs", alias_catalogs},
        {"judgments", (root / "judgments.csv").string()},
        {"ratings", (root / "ratings.csv").string()},
        {"stability_runs", (root / "stability_runs.csv").string()},
        {"audit_counts", (root / "audit_counts.json").string()}}},
      {"extraction",
       {{"backend", {{"kind", "mock"}, {"root", (root / "sidecars").string()}}},
        {"backoff_ms", 0}}},
      {"normalization", {{"consensus_k", 3}}},
      {"validation", {{"sample_total", 10}, {"sample_floor", 1}}},
      {"analytics",
       {{"shares", json::array({json{{"kind", "motivation"}, {"category", "FC"}}})},
        {"share_min_attacks", 0},
        {"greedy_actors", json::array({"APT 29"})},
        {"overlap_top_k", 10}}},
      {"export", {{"sankey_min_motivation", 1}, {"sankey_min_sector", 1}}},
  };
  return corpus;
}

}  // namespace testsupport
