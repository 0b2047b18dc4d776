#include "ctimeta/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctimeta/csv.hpp"
#include "ctimeta/util.hpp"

namespace ctimeta::validation {

Fraction make_fraction(long long num, long long den) {
  if (den <= 0) throw std::invalid_argument("fraction: denominator must be positive");
  if (num < 0) throw std::invalid_argument("fraction: negative numerator");
  long long g = std::gcd(num, den);
  if (g == 0) g = 1;
  return Fraction{num / g, den / g};
}

double fraction_value(const Fraction& f) {
  return static_cast<double>(f.num) / static_cast<double>(f.den);
}

int count_correct(const std::vector<std::string>& produced, const std::set<std::string>& correct_set) {
  int n = 0;
  for (const auto& p : produced) {
    if (correct_set.count(p) > 0) ++n;
  }
  return n;
}

Judgment make_judgment(std::string report_digest, std::string field,
                       std::vector<std::string> produced, std::set<std::string> correct_set,
                       int missed_count, std::string rater_id) {
  if (missed_count < 0) throw std::invalid_argument("judgment: negative missed count");
  Judgment j;
  j.report_digest = std::move(report_digest);
  j.field = std::move(field);
  j.produced = std::move(produced);
  j.correct_set = std::move(correct_set);
  j.correct_count = count_correct(j.produced, j.correct_set);
  j.missed_count = missed_count;
  j.rater_id = std::move(rater_id);
  return j;
}

namespace {

// Zero-denominator convention: perfect when nothing was expected and
// nothing was produced, zero otherwise. The flag records that the value
// came from the convention rather than a ratio.
double safe_ratio(long long num, long long den, long long other_den, bool* by_convention) {
  if (den > 0) {
    if (by_convention != nullptr) *by_convention = false;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  if (by_convention != nullptr) *by_convention = true;
  return other_den == 0 ? 1.0 : 0.0;
}

double f1_of(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

FieldScore score_field(const std::vector<Judgment>& judgments, const std::string& field) {
  FieldScore score;
  score.field = field;
  for (const auto& j : judgments) {
    if (j.field != field) continue;
    if (j.correct_count > static_cast<int>(j.produced.size())) {
      throw std::invalid_argument("judgment: correct count exceeds produced count");
    }
    score.produced_total += static_cast<long long>(j.produced.size());
    score.correct_total += j.correct_count;
    score.expected_total += j.correct_count + j.missed_count;
  }
  score.precision = safe_ratio(score.correct_total, score.produced_total, score.expected_total,
                               &score.precision_by_convention);
  score.recall = safe_ratio(score.correct_total, score.expected_total, score.produced_total,
                            &score.recall_by_convention);
  score.f1 = f1_of(score.precision, score.recall);
  return score;
}

FieldScore score_field_macro(const std::vector<Judgment>& judgments, const std::string& field) {
  FieldScore score;
  score.field = field;
  double p_sum = 0.0, r_sum = 0.0;
  long long n = 0;
  for (const auto& j : judgments) {
    if (j.field != field) continue;
    if (j.correct_count > static_cast<int>(j.produced.size())) {
      throw std::invalid_argument("judgment: correct count exceeds produced count");
    }
    long long produced = static_cast<long long>(j.produced.size());
    long long expected = j.correct_count + j.missed_count;
    p_sum += safe_ratio(j.correct_count, produced, expected, nullptr);
    r_sum += safe_ratio(j.correct_count, expected, produced, nullptr);
    score.produced_total += produced;
    score.correct_total += j.correct_count;
    score.expected_total += expected;
    ++n;
  }
  if (n == 0) {
    score.precision = 1.0;
    score.recall = 1.0;
    score.precision_by_convention = true;
    score.recall_by_convention = true;
  } else {
    score.precision = p_sum / static_cast<double>(n);
    score.recall = r_sum / static_cast<double>(n);
  }
  score.f1 = f1_of(score.precision, score.recall);
  return score;
}

double cohens_kappa(const std::vector<std::string>& rater_a, const std::vector<std::string>& rater_b) {
  if (rater_a.size() != rater_b.size()) {
    throw std::invalid_argument("cohens_kappa: label sequences differ in length");
  }
  if (rater_a.empty()) throw std::invalid_argument("cohens_kappa: no items");

  long long n = static_cast<long long>(rater_a.size());
  long long agree = 0;
  std::map<std::string, long long> count_a, count_b;
  for (std::size_t i = 0; i < rater_a.size(); ++i) {
    if (rater_a[i] == rater_b[i]) ++agree;
    ++count_a[rater_a[i]];
    ++count_b[rater_b[i]];
  }

  // Expected agreement as an exact integer comparison: p_e == 1 iff
  // sum(na_i * nb_i) == n^2, which only happens for identical point-mass
  // marginals; kappa is undefined there.
  long long chance_num = 0;
  for (const auto& [label, na] : count_a) {
    auto it = count_b.find(label);
    if (it != count_b.end()) chance_num += na * it->second;
  }
  if (chance_num == n * n) {
    throw std::domain_error("cohens_kappa: expected agreement is 1, kappa undefined");
  }

  double p_o = static_cast<double>(agree) / static_cast<double>(n);
  double p_e = static_cast<double>(chance_num) / (static_cast<double>(n) * static_cast<double>(n));
  return (p_o - p_e) / (1.0 - p_e);
}

double stability_entropy(const std::vector<Fraction>& run_precisions) {
  if (run_precisions.size() < 2) {
    throw std::invalid_argument("stability_entropy: at least two runs required");
  }
  std::map<Fraction, long long> counts;
  for (const auto& f : run_precisions) ++counts[f];
  double n = static_cast<double>(run_precisions.size());
  double h = 0.0;
  for (const auto& [value, count] : counts) {
    double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  // A single bin means all runs agreed; clamp the -0.0 that log2 produces.
  return h == 0.0 ? 0.0 : h;
}

double corpus_stability_entropy(const std::vector<StabilityRun>& runs) {
  std::map<std::pair<std::string, std::string>, std::vector<Fraction>> cells;
  for (const auto& r : runs) {
    cells[{r.report_digest, r.field}].push_back(r.precision);
  }
  if (cells.empty()) throw std::invalid_argument("corpus_stability_entropy: no runs");
  double sum = 0.0;
  for (const auto& [key, precisions] : cells) {
    sum += stability_entropy(precisions);
  }
  return sum / static_cast<double>(cells.size());
}

std::vector<std::string> StratifiedSample::digests() const {
  std::vector<std::string> out;
  for (const auto& [type, list] : by_type) {
    out.insert(out.end(), list.begin(), list.end());
  }
  return out;
}

StratifiedSample stratified_sample(const Corpus& corpus, int total, int floor_per_type,
                                   std::uint64_t seed) {
  if (total <= 0) throw std::invalid_argument("stratified_sample: total must be positive");
  if (floor_per_type < 0) throw std::invalid_argument("stratified_sample: negative floor");

  // Stratum of a record: the first report-type label.
  std::map<std::string, std::vector<std::string>> population;
  for (const auto& r : corpus.records()) {
    if (r.report_type.empty()) continue;  // untyped records cannot be stratified
    population[r.report_type.front().level1].push_back(r.report_digest);
  }
  if (population.empty()) throw std::invalid_argument("stratified_sample: no typed records");

  long long type_count = static_cast<long long>(population.size());
  long long population_total = 0;
  for (const auto& [type, digests] : population) {
    if (static_cast<int>(digests.size()) < floor_per_type) {
      throw std::invalid_argument("stratified_sample: type " + type + " has " +
                                  std::to_string(digests.size()) + " records, floor is " +
                                  std::to_string(floor_per_type));
    }
    population_total += static_cast<long long>(digests.size());
  }
  if (total < floor_per_type * type_count) {
    throw std::invalid_argument("stratified_sample: total " + std::to_string(total) +
                                " cannot satisfy floor " + std::to_string(floor_per_type) + " for " +
                                std::to_string(type_count) + " types");
  }
  if (total > population_total) {
    throw std::invalid_argument("stratified_sample: total exceeds population");
  }

  // Proportional quotas, largest-remainder rounding. Ties go to the larger
  // stratum, then to name order, so the result is unambiguous.
  struct Quota {
    std::string type;
    long long count;
    long long base;
    double remainder;
  };
  std::vector<Quota> quotas;
  long long assigned = 0;
  for (const auto& [type, digests] : population) {
    double ideal = static_cast<double>(total) * static_cast<double>(digests.size()) /
                   static_cast<double>(population_total);
    long long base = static_cast<long long>(ideal);
    quotas.push_back({type, static_cast<long long>(digests.size()), base, ideal - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
    if (quotas[a].count != quotas[b].count) return quotas[a].count > quotas[b].count;
    return quotas[a].type < quotas[b].type;
  });
  for (std::size_t i = 0; assigned < total; ++i) {
    quotas[order[i % order.size()]].base += 1;
    ++assigned;
  }

  // Lift small strata to the floor; take the surplus from the currently
  // largest allocation that can still give one up.
  for (auto& q : quotas) {
    if (q.base < floor_per_type) {
      assigned += floor_per_type - q.base;
      q.base = floor_per_type;
    }
  }
  while (assigned > total) {
    Quota* donor = nullptr;
    for (auto& q : quotas) {
      if (q.base <= floor_per_type) continue;
      if (donor == nullptr || q.base > donor->base ||
          (q.base == donor->base && q.type < donor->type)) {
        donor = &q;
      }
    }
    if (donor == nullptr) {
      throw std::invalid_argument("stratified_sample: quotas cannot be balanced");
    }
    donor->base -= 1;
    --assigned;
  }

  StratifiedSample sample;
  Rng rng(seed);
  for (auto& q : quotas) {
    auto& digests = population[q.type];
    rng.shuffle(digests);
    std::vector<std::string> chosen(digests.begin(), digests.begin() + q.base);
    std::sort(chosen.begin(), chosen.end());
    sample.allocation[q.type] = static_cast<int>(q.base);
    sample.by_type[q.type] = std::move(chosen);
  }
  return sample;
}

ScoreMatrix score_report(const std::vector<Judgment>& judgments,
                         const std::map<std::string, std::string>& type_by_digest) {
  ScoreMatrix matrix;

  auto type_of = [&](const Judgment& j) -> std::string {
    auto it = type_by_digest.find(j.report_digest);
    return it == type_by_digest.end() ? std::string("Other") : it->second;
  };

  std::set<std::string> seen_fields;
  std::set<std::string> types;
  for (const auto& j : judgments) {
    if (seen_fields.insert(j.field).second) matrix.fields.push_back(j.field);
    types.insert(type_of(j));
  }
  matrix.types.assign(types.begin(), types.end());
  matrix.types.push_back("All");

  std::map<std::string, std::vector<Judgment>> by_type;
  for (const auto& j : judgments) by_type[type_of(j)].push_back(j);

  for (const auto& field : matrix.fields) {
    for (const auto& type : matrix.types) {
      const std::vector<Judgment>* slice = nullptr;
      if (type == "All") {
        slice = &judgments;
      } else {
        slice = &by_type[type];
      }
      matrix.micro[field][type] = score_field(*slice, field);
      matrix.macro[field][type] = score_field_macro(*slice, field);
    }
  }
  return matrix;
}

std::string judgments_to_csv(const std::vector<Judgment>& judgments) {
  std::string out = "digest,field,produced_json,correct_json,missed,rater\n";
  for (const auto& j : judgments) {
    nlohmann::json produced = j.produced;
    nlohmann::json correct = std::vector<std::string>(j.correct_set.begin(), j.correct_set.end());
    out += csv::join_row({j.report_digest, j.field, produced.dump(), correct.dump(),
                          std::to_string(j.missed_count), j.rater_id});
    out.push_back('\n');
  }
  return out;
}

std::vector<Judgment> judgments_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.empty()) return {};
  std::size_t start = 0;
  if (!rows[0].empty() && rows[0][0] == "digest") start = 1;  // header row
  std::vector<Judgment> out;
  for (std::size_t i = start; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 6) {
      throw std::runtime_error("judgments csv: row " + std::to_string(i + 1) + " has " +
                               std::to_string(row.size()) + " columns, expected 6");
    }
    auto produced = nlohmann::json::parse(row[2]).get<std::vector<std::string>>();
    auto correct_list = nlohmann::json::parse(row[3]).get<std::vector<std::string>>();
    out.push_back(make_judgment(row[0], row[1], std::move(produced),
                                std::set<std::string>(correct_list.begin(), correct_list.end()),
                                std::stoi(row[4]), row[5]));
  }
  return out;
}

std::vector<Judgment> load_judgments_file(const std::filesystem::path& path) {
  return judgments_from_csv(read_file(path));
}

std::vector<StabilityRun> stability_runs_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.empty()) return {};
  std::size_t start = 0;
  if (!rows[0].empty() && rows[0][0] == "digest") start = 1;
  std::vector<StabilityRun> out;
  for (std::size_t i = start; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 5) {
      throw std::runtime_error("stability csv: row " + std::to_string(i + 1) + " has " +
                               std::to_string(row.size()) + " columns, expected 5");
    }
    StabilityRun run;
    run.report_digest = row[0];
    run.field = row[1];
    run.run_index = std::stoi(row[2]);
    run.precision = make_fraction(std::stoll(row[3]), std::stoll(row[4]));
    out.push_back(std::move(run));
  }
  return out;
}

std::vector<StabilityRun> load_stability_runs_file(const std::filesystem::path& path) {
  return stability_runs_from_csv(read_file(path));
}

std::string score_matrix_to_csv(const ScoreMatrix& matrix, const std::string& aggregation,
                                const std::string& header_line) {
  const auto* cells = &matrix.micro;
  if (aggregation == "macro") {
    cells = &matrix.macro;
  } else if (aggregation != "micro") {
    throw std::invalid_argument("score matrix: unknown aggregation " + aggregation);
  }

  std::string out;
  if (!header_line.empty()) {
    out += header_line;
    if (out.back() != '\n') out.push_back('\n');
  }
  std::vector<std::string> header = {"field"};
  for (const auto& type : matrix.types) {
    header.push_back(type + "_precision");
    header.push_back(type + "_recall");
    header.push_back(type + "_f1");
  }
  out += csv::join_row(header);
  out.push_back('\n');

  for (const auto& field : matrix.fields) {
    std::vector<std::string> row = {field};
    for (const auto& type : matrix.types) {
      const FieldScore& s = cells->at(field).at(type);
      row.push_back(csv::format_double(s.precision));
      row.push_back(csv::format_double(s.recall));
      row.push_back(csv::format_double(s.f1));
    }
    out += csv::join_row(row);
    out.push_back('\n');
  }
  return out;
}

}  // namespace ctimeta::validation
