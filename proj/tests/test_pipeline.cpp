#include <segrl/pipeline.hpp>
#include <segrl/tasks.hpp>

#include <doctest.h>

#include <filesystem>
#include <map>

using namespace segrl;

namespace {

DatasetRecord rec(const std::string& id, const std::string& q, const std::string& ref) {
  DatasetRecord r;
  r.id = id;
  r.question = q;
  r.reference_answer = ref;
  return r;
}

PipelineConfig fixture_config() {
  PipelineConfig cfg;
  cfg.drop_inconsistent = true;
  cfg.drop_easy = true;
  cfg.easy_solver = make_scripted_solver();
  cfg.ensemble = {make_scripted_solver(0), make_scripted_solver(1)};
  return cfg;
}

}  // namespace

TEST_CASE("multi-subquestion heuristics") {
  CHECK_FALSE(filter_multi_subquestion(rec("a", "What is 2+2?", "4")).keep == false);
  CHECK(filter_multi_subquestion(rec("b", "What is x? What is y?", "1")).keep == false);
  CHECK(filter_multi_subquestion(rec("c", "(a) find p. (b) find q.", "1")).keep == false);
  CHECK(filter_multi_subquestion(rec("d", "Find 1) the mean 2) the mode.", "1")).keep == false);
  CHECK(filter_multi_subquestion(rec("e", "Just one question here.", "1")).keep);
  // config-extensible patterns
  std::vector<std::regex> extra = {std::regex("Part A.*Part B")};
  CHECK(filter_multi_subquestion(rec("f", "Part A asks... Part B asks...", "1"), extra).keep ==
        false);
  CHECK(filter_multi_subquestion(rec("g", "Part A only.", "1"), extra).keep);
}

TEST_CASE("reference normalization") {
  CHECK(normalize_reference_answer("\\boxed{42}") == "42");
  CHECK(normalize_reference_answer("$ 1/2 $") == "1/2");
  CHECK(normalize_reference_answer("  3   apples  ") == "3 apples");
  CHECK(normalize_reference_answer("\\boxed{$7$}") == "7");
  CHECK(normalize_reference_answer("plain") == "plain");
  // idempotent
  for (const char* s : {"\\boxed{42}", "a  b", "$x$"}) {
    const std::string once = normalize_reference_answer(s);
    CHECK(normalize_reference_answer(once) == once);
  }
}

TEST_CASE("long-reference boundary is strict") {
  CHECK(filter_long_reference(rec("a", "q", std::string(64, 'x')), 64).keep);
  CHECK_FALSE(filter_long_reference(rec("b", "q", std::string(65, 'x')), 64).keep);
  // normalization shortens before measuring
  CHECK(filter_long_reference(rec("c", "q", "\\boxed{" + std::string(60, 'x') + "}"), 64).keep);
  CHECK_THROWS_AS(filter_long_reference(rec("d", "q", "x"), 0), ConfigError);
}

TEST_CASE("easy filter k-pass rule") {
  const auto checker = EquivalenceChecker::rule_based();
  const auto solver = make_scripted_solver();
  auto r = rec("a", "q", "7");
  r.meta["solver_correct"] = 8;
  CHECK_FALSE(filter_easy(r, solver, 8, checker).keep);  // 8/8 -> drop

  r.meta["solver_correct"] = 7;
  CHECK(filter_easy(r, solver, 8, checker).keep);  // 7/8 -> keep

  r.meta["solver_correct"] = 0;
  CHECK(filter_easy(r, solver, 8, checker).keep);  // 0/8 -> keep

  r.meta["solver_fail"] = true;
  const auto d = filter_easy(r, solver, 8, checker);
  CHECK(d.keep);
  CHECK(d.flagged);
}

TEST_CASE("easy filter with a noisy oracle solver") {
  const auto checker = EquivalenceChecker::rule_based();
  auto exact = make_oracle_solver(0.0, 42);
  auto noisy = make_oracle_solver(0.35, 42);
  const auto r = rec("m", "3+4-2 mod 5", "0");
  CHECK_FALSE(filter_easy(r, exact, 8, checker).keep);  // perfect solver: too easy
  CHECK(filter_easy(r, noisy, 8, checker).keep);        // noise breaks the streak
  // determinism: same verdict across calls
  CHECK(filter_easy(r, noisy, 8, checker).keep == filter_easy(r, noisy, 8, checker).keep);
}

TEST_CASE("inconsistency filter consensus rule") {
  const auto checker = EquivalenceChecker::rule_based();
  const std::vector<Solver> ensemble = {make_scripted_solver(0), make_scripted_solver(1)};

  auto r = rec("a", "q", "9");
  r.meta["ensemble_answers"] = {"7", "7"};
  CHECK_FALSE(filter_inconsistent_reference(r, ensemble, checker).keep);

  r.meta["ensemble_answers"] = {"7", "9"};
  CHECK(filter_inconsistent_reference(r, ensemble, checker).keep);

  r.meta["ensemble_answers"] = {"9", "9"};
  CHECK(filter_inconsistent_reference(r, ensemble, checker).keep);

  CHECK_THROWS_AS(filter_inconsistent_reference(r, {make_scripted_solver(0)}, checker),
                  ConfigError);
}

TEST_CASE("empty dataset produces an all-zero report") {
  const PipelineResult out = run_pipeline(JsonlReadResult{}, fixture_config());
  CHECK(out.records.empty());
  CHECK(out.report.input_lines == 0);
  CHECK(out.report.retained == 0);
  for (const auto& s : out.report.stages) {
    CHECK(s.input == 0);
    CHECK(s.removed == 0);
  }
}

TEST_CASE("identity config is byte-preserving") {
  const std::string text =
      "{\"id\":\"z1\",\"question\":\"What is 2+2?\",\"reference_answer\":\"4\"}\n"
      "{\"reference_answer\":\"8\",\"question\":\"What is 4+4?\",\"id\":\"z2\",\"meta\":{\"k\":1}}\n";
  const JsonlReadResult input = parse_jsonl(text);
  PipelineConfig cfg;  // all destructive stages off
  cfg.drop_multi_subquestion = false;
  cfg.normalize_reference = false;
  cfg.drop_long_reference = false;
  const PipelineResult out = run_pipeline(input, cfg);
  REQUIRE(out.records.size() == 2);
  // raw lines preserved verbatim, field order and all
  CHECK(out.records[0].raw_line == "{\"id\":\"z1\",\"question\":\"What is 2+2?\",\"reference_answer\":\"4\"}");
  CHECK(out.records[1].raw_line ==
        "{\"reference_answer\":\"8\",\"question\":\"What is 4+4?\",\"id\":\"z2\",\"meta\":{\"k\":1}}");
}

TEST_CASE("every-record-trips-one-filter fixture partitions the input") {
  std::vector<std::string> lines = {
      R"({"id":"t1","question":"One? Two?","reference_answer":"1"})",
      R"({"id":"t2","question":"ok","reference_answer":")" + std::string(80, 'y') + R"("})",
      R"({"id":"t3","question":"ok","reference_answer":"9","meta":{"ensemble_answers":["7","7"]}})",
      R"({"id":"t4","question":"ok","reference_answer":"5","meta":{"ensemble_answers":["5","5"],"solver_correct":8}})",
  };
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  const PipelineResult out = run_pipeline(parse_jsonl(text), fixture_config());
  CHECK(out.records.empty());
  CHECK(out.report.retained == 0);
  std::map<std::string, std::string> reasons;
  for (const auto& r : out.report.removals) reasons[r.id] = to_string(r.reason);
  CHECK(reasons["t1"] == "multi_subquestion");
  CHECK(reasons["t2"] == "long_reference");
  CHECK(reasons["t3"] == "inconsistent_reference");
  CHECK(reasons["t4"] == "too_easy");
  CHECK(out.report.removals.size() == 4);
}

TEST_CASE("curated fixture reproduces known outcomes exactly") {
  const JsonlReadResult input = read_jsonl(std::filesystem::path(SEGRL_TEST_DIR) / "fixtures/pipeline_fixture.jsonl");
  CHECK(input.records.size() == 28);
  CHECK(input.malformed.size() == 2);

  const PipelineResult out = run_pipeline(input, fixture_config());

  const std::map<std::string, std::string> expected_drops = {
      {"r01", "multi_subquestion"},      {"r02", "multi_subquestion"},
      {"r03", "multi_subquestion"},      {"r04", "multi_subquestion"},
      {"r05", "long_reference"},         {"r06", "long_reference"},
      {"r07", "long_reference"},         {"r09", "inconsistent_reference"},
      {"r10", "inconsistent_reference"}, {"r11", "inconsistent_reference"},
      {"r15", "too_easy"},               {"r16", "too_easy"},
      {"r17", "too_easy"},               {"r18", "too_easy"},
      {"r19", "too_easy"},
  };
  const std::vector<std::string> expected_kept = {"r08", "r12", "r13", "r14", "r20", "r21", "r22",
                                                  "r23", "r24", "r25", "r26", "r27", "r28"};

  std::map<std::string, std::string> drops;
  for (const auto& r : out.report.removals)
    if (!r.id.empty()) drops[r.id] = to_string(r.reason);
  CHECK(drops.size() == expected_drops.size());
  for (const auto& [id, reason] : expected_drops) {
    REQUIRE(drops.count(id) == 1);
    CHECK(drops[id] == reason);
  }

  REQUIRE(out.records.size() == expected_kept.size());
  for (std::size_t i = 0; i < expected_kept.size(); ++i) CHECK(out.records[i].id == expected_kept[i]);

  // reasons partition: drops + keeps + malformed = input lines
  CHECK(out.report.input_lines == 30);
  CHECK(static_cast<long>(drops.size()) + out.report.retained + out.report.malformed_lines == 30);

  // count conservation per stage
  for (const auto& s : out.report.stages) CHECK(s.input == s.removed + s.retained);

  // solver failures flagged, never dropped
  CHECK(out.report.flagged_ids == std::vector<std::string>{"r23", "r24"});

  // boxed wrapper was normalized before the length filter
  bool found_r08 = false;
  for (const auto& r : out.records)
    if (r.id == "r08") {
      CHECK(r.reference_answer == "42");
      found_r08 = true;
    }
  CHECK(found_r08);
}

TEST_CASE("pipeline is idempotent on its own output") {
  const JsonlReadResult input = read_jsonl(std::filesystem::path(SEGRL_TEST_DIR) / "fixtures/pipeline_fixture.jsonl");
  const PipelineResult first = run_pipeline(input, fixture_config());

  // round-trip through jsonl, as cmd_clean would
  std::string text;
  for (const auto& r : first.records)
    text += (r.raw_line.empty() ? r.to_json().dump() : r.raw_line) + "\n";
  const PipelineResult second = run_pipeline(parse_jsonl(text), fixture_config());
  CHECK(second.records.size() == first.records.size());
  CHECK(second.report.removals.empty());
  for (std::size_t i = 0; i < first.records.size(); ++i)
    CHECK(second.records[i].id == first.records[i].id);
}

TEST_CASE("malformed records are rejected with line numbers") {
  const JsonlReadResult input = parse_jsonl("{bad\n{\"id\":\"x\",\"question\":\"q\",\"reference_answer\":\"1\"}\n{also bad\n");
  REQUIRE(input.malformed.size() == 2);
  CHECK(input.malformed[0].line_no == 1);
  CHECK(input.malformed[1].line_no == 3);
  const PipelineResult out = run_pipeline(input, PipelineConfig{});
  CHECK(out.report.malformed_lines == 2);
  long malformed_removals = 0;
  for (const auto& r : out.report.removals)
    if (r.reason == DropReason::Malformed) {
      ++malformed_removals;
      CHECK(r.line_no > 0);
    }
  CHECK(malformed_removals == 2);
}
