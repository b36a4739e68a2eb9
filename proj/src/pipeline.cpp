#include <segrl/pipeline.hpp>
#include <segrl/rng.hpp>
#include <segrl/tasks.hpp>

#include <algorithm>
#include <sstream>

namespace segrl {

std::string to_string(DropReason reason) {
  switch (reason) {
    case DropReason::Malformed: return "malformed";
    case DropReason::MultiSubquestion: return "multi_subquestion";
    case DropReason::LongReference: return "long_reference";
    case DropReason::InconsistentReference: return "inconsistent_reference";
    case DropReason::TooEasy: return "too_easy";
  }
  throw std::logic_error("unreachable drop reason");
}

Json PipelineReport::to_json() const {
  Json j;
  j["input_lines"] = input_lines;
  j["malformed_lines"] = malformed_lines;
  j["retained"] = retained;
  j["stages"] = Json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"stage", s.stage},
                           {"input", s.input},
                           {"removed", s.removed},
                           {"retained", s.retained}});
  j["removals"] = Json::array();
  for (const auto& r : removals) {
    Json e = {{"id", r.id}, {"reason", to_string(r.reason)}};
    if (!r.note.empty()) e["note"] = r.note;
    if (r.line_no > 0) e["line"] = r.line_no;
    j["removals"].push_back(e);
  }
  j["flagged"] = flagged_ids;
  return j;
}

std::string PipelineReport::to_text() const {
  std::ostringstream out;
  out << "data cleaning report\n";
  out << "  input lines:     " << input_lines << "\n";
  out << "  malformed lines: " << malformed_lines << "\n";
  for (const auto& s : stages)
    out << "  stage " << s.stage << ": input " << s.input << ", removed " << s.removed
        << ", retained " << s.retained << "\n";
  out << "  retained total:  " << retained << "\n";
  if (!flagged_ids.empty()) {
    out << "  flagged (solver failure, kept): ";
    for (std::size_t i = 0; i < flagged_ids.size(); ++i)
      out << (i ? ", " : "") << flagged_ids[i];
    out << "\n";
  }
  return out.str();
}

namespace {

const std::vector<std::regex>& builtin_multipart_patterns() {
  // enumerator shapes: "(a) ... (b)", "1) ... 2)", "i. ... ii."
  static const std::vector<std::regex> patterns = {
      std::regex(R"(\([a-z]\).*\([a-z]\))", std::regex::icase),
      std::regex(R"((^|[^\d])1\).*([^\d])2\))"),
      std::regex(R"(\b(i|1)\..*\b(ii|2)\.)", std::regex::icase),
  };
  return patterns;
}

}  // namespace

FilterDecision filter_multi_subquestion(const DatasetRecord& record,
                                        const std::vector<std::regex>& extra_patterns) {
  const std::string& q = record.question;
  const long question_marks = std::count(q.begin(), q.end(), '?');
  bool multi = question_marks >= 2;
  if (!multi) {
    for (const auto& re : builtin_multipart_patterns())
      if (std::regex_search(q, re)) {
        multi = true;
        break;
      }
  }
  if (!multi) {
    for (const auto& re : extra_patterns)
      if (std::regex_search(q, re)) {
        multi = true;
        break;
      }
  }
  if (multi) return {false, DropReason::MultiSubquestion, "multi-part question heuristics", false};
  return {};
}

FilterDecision filter_easy(const DatasetRecord& record, const Solver& solver, int attempts,
                           const EquivalenceChecker& checker) {
  if (attempts <= 0) throw ConfigError("filter_easy: attempts must be > 0");
  int correct = 0;
  for (int k = 0; k < attempts; ++k) {
    const auto ans = solver.answer(record, k);
    if (!ans) {
      // solver failure: never drop data silently
      return {true, std::nullopt, "solver failure on attempt " + std::to_string(k), true};
    }
    if (checker(AnswerPair{*ans, record.reference_answer})) ++correct;
  }
  if (correct == attempts)
    return {false, DropReason::TooEasy,
            "correct in all " + std::to_string(attempts) + " attempts", false};
  return {};
}

FilterDecision filter_long_reference(const DatasetRecord& record, int max_len) {
  if (max_len <= 0) throw ConfigError("filter_long_reference: max_len must be > 0");
  const std::string norm = normalize_reference_answer(record.reference_answer);
  if (static_cast<int>(norm.size()) > max_len)
    return {false, DropReason::LongReference,
            "normalized reference length " + std::to_string(norm.size()), false};
  return {};
}

FilterDecision filter_inconsistent_reference(const DatasetRecord& record,
                                             const std::vector<Solver>& ensemble,
                                             const EquivalenceChecker& checker) {
  if (ensemble.size() < 2) throw ConfigError("filter_inconsistent_reference: ensemble size >= 2");
  std::vector<std::string> answers;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const auto ans = ensemble[i].answer(record, static_cast<int>(i));
    if (!ans) return {true, std::nullopt, "ensemble solver " + std::to_string(i) + " failed", true};
    answers.push_back(*ans);
  }
  bool consistent = true;
  for (std::size_t i = 1; i < answers.size(); ++i)
    if (!checker(AnswerPair{answers[i], answers[0]})) {
      consistent = false;
      break;
    }
  if (!consistent) return {};
  const bool agrees_with_reference =
      checker(AnswerPair{answers[0], record.reference_answer});
  if (!agrees_with_reference)
    return {false, DropReason::InconsistentReference,
            "ensemble consensus differs from reference", false};
  return {};
}

std::string normalize_reference_answer(const std::string& text) {
  std::string s = text;
  // strip \boxed{...} and $...$ wrappers
  auto strip_wrapper = [&s]() {
    bool changed = false;
    std::string t = s;
    // trim outer whitespace first
    const auto b = t.find_first_not_of(" \t\n\r");
    const auto e = t.find_last_not_of(" \t\n\r");
    t = b == std::string::npos ? "" : t.substr(b, e - b + 1);
    if (t.rfind("\\boxed{", 0) == 0 && !t.empty() && t.back() == '}') {
      t = t.substr(7, t.size() - 8);
      changed = true;
    } else if (t.size() >= 2 && t.front() == '$' && t.back() == '$') {
      t = t.substr(1, t.size() - 2);
      changed = true;
    }
    if (changed || t != s) {
      s = t;
      return true;
    }
    return false;
  };
  while (strip_wrapper()) {
  }
  // collapse internal whitespace
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending = true;
      continue;
    }
    if (pending) {
      out += ' ';
      pending = false;
    }
    out += c;
  }
  return out;
}

Solver make_oracle_solver(double noise, std::uint64_t seed) {
  return Solver{
      "oracle-noise-" + std::to_string(noise),
      [noise, seed](const DatasetRecord& rec, int attempt) -> std::optional<std::string> {
        const long truth = eval_modchain(rec.question);
        // stream keyed by (record, attempt) so verdicts are order-free
        Rng rng(derive_seed(seed ^ std::hash<std::string>{}(rec.id), static_cast<std::uint64_t>(attempt)));
        if (rng.uniform() < noise) return std::to_string(truth + 1 + rng.uniform_int(0, 3));
        return std::to_string(truth);
      }};
}

Solver make_scripted_solver(int ensemble_index) {
  return Solver{
      "scripted",
      [ensemble_index](const DatasetRecord& rec, int attempt) -> std::optional<std::string> {
        if (rec.meta.contains("solver_fail") && rec.meta["solver_fail"].get<bool>())
          return std::nullopt;
        if (ensemble_index >= 0) {
          if (!rec.meta.contains("ensemble_answers")) return std::nullopt;
          const auto& arr = rec.meta["ensemble_answers"];
          if (ensemble_index >= static_cast<int>(arr.size())) return std::nullopt;
          return arr[static_cast<std::size_t>(ensemble_index)].get<std::string>();
        }
        int correct_attempts = 0;
        if (rec.meta.contains("solver_correct"))
          correct_attempts = rec.meta["solver_correct"].get<int>();
        if (attempt < correct_attempts) return rec.reference_answer;
        return "not-" + rec.reference_answer;
      }};
}

void PipelineConfig::validate() const {
  if (drop_long_reference && max_reference_len <= 0)
    throw ConfigError("pipeline: max_reference_len must be > 0");
  if (drop_easy && (!easy_solver.answer || easy_attempts <= 0))
    throw ConfigError("pipeline: easy filter needs a solver and attempts > 0");
  if (drop_inconsistent && ensemble.size() < 2)
    throw ConfigError("pipeline: inconsistency filter needs an ensemble of >= 2 solvers");
}

PipelineResult run_pipeline(const JsonlReadResult& input, const PipelineConfig& cfg) {
  cfg.validate();

  std::vector<std::regex> extra;
  for (const auto& pat : cfg.extra_multipart_patterns) extra.emplace_back(pat);

  PipelineResult out;
  auto& report = out.report;
  report.input_lines = static_cast<long>(input.records.size() + input.malformed.size());
  report.malformed_lines = static_cast<long>(input.malformed.size());
  for (const auto& bad : input.malformed)
    report.removals.push_back({"", DropReason::Malformed, bad.message, bad.line_no});

  std::vector<DatasetRecord> live = input.records;

  struct Stage {
    std::string name;
    std::function<FilterDecision(DatasetRecord&)> apply;
    bool enabled;
  };

  std::vector<Stage> stages;
  stages.push_back({"multi_subquestion",
                    [&](DatasetRecord& r) { return filter_multi_subquestion(r, extra); },
                    cfg.drop_multi_subquestion});
  stages.push_back({"format_transform",
                    [&](DatasetRecord& r) {
                      DatasetRecord next = cfg.format_transform(r);
                      if (next.question != r.question || next.reference_answer != r.reference_answer ||
                          next.meta != r.meta)
                        next.raw_line.clear();  // modified records are re-serialized
                      r = std::move(next);
                      return FilterDecision{};
                    },
                    static_cast<bool>(cfg.format_transform)});
  stages.push_back({"normalize_reference",
                    [&](DatasetRecord& r) {
                      const std::string norm = normalize_reference_answer(r.reference_answer);
                      if (norm != r.reference_answer) {
                        r.reference_answer = norm;
                        r.raw_line.clear();
                      }
                      return FilterDecision{};
                    },
                    cfg.normalize_reference});
  stages.push_back({"long_reference",
                    [&](DatasetRecord& r) {
                      return filter_long_reference(r, cfg.max_reference_len);
                    },
                    cfg.drop_long_reference});
  stages.push_back({"inconsistent_reference",
                    [&](DatasetRecord& r) {
                      return filter_inconsistent_reference(r, cfg.ensemble, cfg.checker);
                    },
                    cfg.drop_inconsistent});
  stages.push_back({"too_easy",
                    [&](DatasetRecord& r) {
                      return filter_easy(r, cfg.easy_solver, cfg.easy_attempts, cfg.checker);
                    },
                    cfg.drop_easy});

  for (auto& stage : stages) {
    if (!stage.enabled) continue;
    StageCounts counts;
    counts.stage = stage.name;
    counts.input = static_cast<long>(live.size());
    std::vector<DatasetRecord> kept;
    kept.reserve(live.size());
    for (auto& rec : live) {
      FilterDecision d = stage.apply(rec);
      if (d.flagged &&
          std::find(report.flagged_ids.begin(), report.flagged_ids.end(), rec.id) ==
              report.flagged_ids.end())
        report.flagged_ids.push_back(rec.id);
      if (d.keep) {
        kept.push_back(std::move(rec));
      } else {
        ++counts.removed;
        report.removals.push_back({rec.id, *d.reason, d.note, 0});
      }
    }
    counts.retained = static_cast<long>(kept.size());
    if (counts.input != counts.removed + counts.retained)
      throw std::logic_error("pipeline stage count conservation violated");
    report.stages.push_back(counts);
    live = std::move(kept);
  }

  report.retained = static_cast<long>(live.size());
  out.records = std::move(live);
  return out;
}

}  // namespace segrl
