#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctimeta/corpus.hpp"

namespace ctimeta::validation {

// Exact rational, reduced, with positive denominator. Per-run precision
// values are binned by exact equality, which floating point cannot promise.
struct Fraction {
  long long num = 0;
  long long den = 1;

  bool operator==(const Fraction&) const = default;
  auto operator<=>(const Fraction&) const = default;
};

Fraction make_fraction(long long num, long long den);  // reduces; den must be > 0

double fraction_value(const Fraction& f);

// One manual annotation verdict: what the extractor produced for a field of
// a report, which answers the rater accepted, and how many expected answers
// the extractor failed to produce.
struct Judgment {
  std::string report_digest;
  std::string field;
  std::vector<std::string> produced;
  std::set<std::string> correct_set;
  int correct_count = 0;  // produced entries accepted by the rater
  int missed_count = 0;
  std::string rater_id;
};

Judgment make_judgment(std::string report_digest, std::string field,
                       std::vector<std::string> produced, std::set<std::string> correct_set,
                       int missed_count, std::string rater_id);

int count_correct(const std::vector<std::string>& produced, const std::set<std::string>& correct_set);

struct FieldScore {
  std::string field;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long produced_total = 0;
  long long correct_total = 0;
  long long expected_total = 0;  // correct + missed
  // Set when a zero denominator forced the convention value: a score is 1.0
  // when nothing was expected and nothing was produced, else 0.0.
  bool precision_by_convention = false;
  bool recall_by_convention = false;
};

// Micro-averaged scores for one field: numerators and denominators are
// summed across judgments before dividing, so reports with many answers
// weigh more. f1 is 0 when precision + recall is 0.
FieldScore score_field(const std::vector<Judgment>& judgments, const std::string& field);

// Macro variant: the unweighted mean of per-judgment precision and recall,
// each computed with the same zero-denominator convention. f1 is derived
// from the averaged precision and recall.
FieldScore score_field_macro(const std::vector<Judgment>& judgments, const std::string& field);

// Chance-corrected agreement between two raters over the same items.
// Throws std::invalid_argument on size mismatch or empty input and
// std::domain_error when expected agreement is exactly 1 (kappa undefined).
double cohens_kappa(const std::vector<std::string>& rater_a, const std::vector<std::string>& rater_b);

struct StabilityRun {
  std::string report_digest;
  std::string field;
  int run_index = 0;
  Fraction precision;
};

// Shannon entropy (base 2) of the distribution of per-run precision values
// for one (report, field) cell. Needs at least two runs. Zero exactly when
// every run agrees.
double stability_entropy(const std::vector<Fraction>& run_precisions);

// Mean cell entropy across all (report, field) cells present in the runs.
double corpus_stability_entropy(const std::vector<StabilityRun>& runs);

struct StratifiedSample {
  std::map<std::string, std::vector<std::string>> by_type;  // level1 acronym -> digests
  std::map<std::string, int> allocation;

  std::vector<std::string> digests() const;
};

// Draws `total` records stratified by primary report type (the first label
// on the record). Quotas are proportional to stratum frequency, integerized
// by largest remainder, then lifted to `floor_per_type` with the overflow
// taken from the largest strata. Records inside a stratum are chosen by a
// seeded shuffle; the same seed always yields the same sample. Throws when
// the quotas cannot be met.
StratifiedSample stratified_sample(const Corpus& corpus, int total, int floor_per_type,
                                   std::uint64_t seed);

// field x report-type score matrix plus an "All" column, in both micro and
// macro aggregation. Report types come from type_by_digest (primary type of
// each judged report); judgments for unknown digests land in "Other".
struct ScoreMatrix {
  std::vector<std::string> fields;  // first-appearance order
  std::vector<std::string> types;   // sorted, then "All"
  std::map<std::string, std::map<std::string, FieldScore>> micro;  // [field][type]
  std::map<std::string, std::map<std::string, FieldScore>> macro;
};

ScoreMatrix score_report(const std::vector<Judgment>& judgments,
                         const std::map<std::string, std::string>& type_by_digest);

// CSV round trip for judgment sets. Columns: digest, field, produced_json,
// correct_json, missed, rater.
std::string judgments_to_csv(const std::vector<Judgment>& judgments);
std::vector<Judgment> judgments_from_csv(const std::string& text);
std::vector<Judgment> load_judgments_file(const std::filesystem::path& path);

// Stability runs CSV: digest, field, run, precision_num, precision_den.
std::vector<StabilityRun> stability_runs_from_csv(const std::string& text);
std::vector<StabilityRun> load_stability_runs_file(const std::filesystem::path& path);

// Score matrix CSV: one row per field, three columns (precision, recall,
// f1) per report type. aggregation selects micro or macro.
std::string score_matrix_to_csv(const ScoreMatrix& matrix, const std::string& aggregation,
                                const std::string& header_line);

}  // namespace ctimeta::validation
