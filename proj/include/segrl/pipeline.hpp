#pragma once

#include <segrl/dataset.hpp>
#include <segrl/reward.hpp>
#include <segrl/types.hpp>

#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace segrl {

enum class DropReason {
  Malformed,
  MultiSubquestion,
  LongReference,
  InconsistentReference,
  TooEasy,
};

std::string to_string(DropReason reason);

struct FilterDecision {
  bool keep = true;
  std::optional<DropReason> reason;
  std::string note;
  bool flagged = false;  // kept, but a solver failed on it
};

struct StageCounts {
  std::string stage;
  long input = 0;
  long removed = 0;
  long retained = 0;
};

struct RemovalRecord {
  std::string id;
  DropReason reason = DropReason::Malformed;
  std::string note;
  long line_no = 0;  // for malformed lines
};

struct PipelineReport {
  long input_lines = 0;
  long malformed_lines = 0;
  std::vector<StageCounts> stages;
  std::vector<RemovalRecord> removals;
  std::vector<std::string> flagged_ids;
  long retained = 0;

  Json to_json() const;
  std::string to_text() const;
};

// k-pass inference provider. Returns the answer text for one attempt, or
// nullopt to signal solver failure (the record is then kept and flagged).
struct Solver {
  std::string id;
  std::function<std::optional<std::string>(const DatasetRecord&, int attempt)> answer;
};

// Answers correctly with probability (1 - noise) and deterministically
// otherwise emits a wrong answer; requires modchain questions.
Solver make_oracle_solver(double noise, std::uint64_t seed);

// Reads scripted behaviour from record meta: "solver_correct" (number of
// correct attempts before turning wrong), "solver_fail" (always fail), and
// for ensembles "ensemble_answers" (fixed answer per ensemble index).
Solver make_scripted_solver(int ensemble_index = -1);

struct PipelineConfig {
  bool drop_multi_subquestion = true;
  std::vector<std::string> extra_multipart_patterns;

  bool normalize_reference = true;

  bool drop_long_reference = true;
  int max_reference_len = 64;

  bool drop_inconsistent = false;
  std::vector<Solver> ensemble;

  bool drop_easy = false;
  Solver easy_solver;
  int easy_attempts = 8;

  // declared question-format transform; identity by default
  std::function<DatasetRecord(DatasetRecord)> format_transform;

  EquivalenceChecker checker = EquivalenceChecker::rule_based();

  void validate() const;
};

FilterDecision filter_multi_subquestion(const DatasetRecord& record,
                                        const std::vector<std::regex>& extra_patterns = {});
FilterDecision filter_easy(const DatasetRecord& record, const Solver& solver, int attempts,
                           const EquivalenceChecker& checker);
FilterDecision filter_long_reference(const DatasetRecord& record, int max_len);
FilterDecision filter_inconsistent_reference(const DatasetRecord& record,
                                             const std::vector<Solver>& ensemble,
                                             const EquivalenceChecker& checker);

// Trim boxed/markup wrappers and collapse whitespace; the short-answer
// normalizer applied before the length filter.
std::string normalize_reference_answer(const std::string& text);

struct PipelineResult {
  std::vector<DatasetRecord> records;
  PipelineReport report;
};

PipelineResult run_pipeline(const JsonlReadResult& input, const PipelineConfig& cfg);

}  // namespace segrl
