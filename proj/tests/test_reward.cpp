#include <segrl/reward.hpp>
#include <segrl/tasks.hpp>

#include <doctest.h>

using namespace segrl;

namespace {

const TaskVocab& tv() {
  static const TaskVocab v = make_modchain_vocab(1);
  return v;
}

Trajectory make_traj(TokenSeq response, TerminationStatus status) {
  Trajectory t;
  t.status = status;
  Segment seg;
  seg.tokens = std::move(response);
  seg.gen_logprobs = Vector::Zero(static_cast<Eigen::Index>(seg.tokens.size()));
  t.segments.push_back(std::move(seg));
  return t;
}

}  // namespace

TEST_CASE("rational parsing and equality") {
  CHECK(*parse_rational("1/2") == *parse_rational("0.5"));
  CHECK(*parse_rational("-3") == Rational::make(-3, 1));
  CHECK(*parse_rational("0.27") == Rational::make(27, 100));
  CHECK(*parse_rational("2/4") == Rational::make(1, 2));
  CHECK_FALSE(parse_rational("abc").has_value());
  CHECK_FALSE(parse_rational("1/0").has_value());
  CHECK_FALSE(parse_rational("").has_value());
  CHECK_FALSE(*parse_rational("1/3") == *parse_rational("0.3333"));
}

TEST_CASE("equivalence checker judges the documented pairs") {
  const auto checker = EquivalenceChecker::rule_based();
  CHECK(is_equivalent({"27cm", "0.27m"}, checker));
  CHECK(is_equivalent({"1/2", "one half"}, checker));
  CHECK(is_equivalent({"1/2", "0.5"}, checker));
  CHECK(is_equivalent({"  42 ", "42"}, checker));
  CHECK(is_equivalent({"Seven", "7"}, checker));
  CHECK(is_equivalent({"2kg", "2000g"}, checker));
  CHECK_FALSE(is_equivalent({"27cm", "0.27"}, checker));   // dimension mismatch
  CHECK_FALSE(is_equivalent({"27cm", "27g"}, checker));    // length vs mass
  CHECK_FALSE(is_equivalent({"3", "4"}, checker));
  CHECK_FALSE(is_equivalent({"", "42"}, checker));
}

TEST_CASE("checker is symmetric and deterministic") {
  const auto checker = EquivalenceChecker::rule_based();
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"27cm", "0.27m"}, {"1/2", "one half"}, {"3", "three"}, {"5", "6"}, {"1mm", "1"},
  };
  for (const auto& [a, b] : pairs) {
    const bool ab = is_equivalent({a, b}, checker);
    const bool ba = is_equivalent({b, a}, checker);
    CHECK(ab == ba);
    CHECK(ab == is_equivalent({a, b}, checker));
  }
}

TEST_CASE("extract_final_answer spans") {
  const auto& v = tv();
  const TokenId m = v.vocab.answer_marker_id;
  const TokenId e = v.vocab.eos_id;

  // [filler, marker, '4', '2', EOS] -> "42"
  const TokenSeq with_marker = {13, m, 4, 2, e};
  auto ans = extract_final_answer(with_marker, v.vocab, v.token_texts);
  REQUIRE(ans.has_value());
  CHECK(*ans == "42");

  // no marker -> absent
  const TokenSeq no_marker_seq = {1, 2, 3, e};
  CHECK_FALSE(extract_final_answer(no_marker_seq, v.vocab, v.token_texts).has_value());

  // two markers -> span after the last one
  const TokenSeq two_markers = {m, 9, m, 7, e};
  ans = extract_final_answer(two_markers, v.vocab, v.token_texts);
  REQUIRE(ans.has_value());
  CHECK(*ans == "7");

  // marker as final token -> empty (present) answer
  const TokenSeq marker_last = {1, m};
  ans = extract_final_answer(marker_last, v.vocab, v.token_texts);
  REQUIRE(ans.has_value());
  CHECK(ans->empty());
}

TEST_CASE("exhaustive small-sequence marker scan") {
  // every length-3 sequence over {digit 1, marker, eos}: the extracted span
  // must match a simple rescan from the right
  const auto& v = tv();
  const TokenId alphabet[] = {1, v.vocab.answer_marker_id, v.vocab.eos_id};
  for (TokenId a : alphabet)
    for (TokenId b : alphabet)
      for (TokenId c : alphabet) {
        const TokenSeq s = {a, b, c};
        const auto got = extract_final_answer(s, v.vocab, v.token_texts);
        // reference: last marker, then concatenate texts until eos
        int last = -1;
        for (int i = 0; i < 3; ++i)
          if (s[static_cast<std::size_t>(i)] == v.vocab.answer_marker_id) last = i;
        if (last < 0) {
          CHECK_FALSE(got.has_value());
        } else {
          std::string expect;
          for (int i = last + 1; i < 3; ++i) {
            if (s[static_cast<std::size_t>(i)] == v.vocab.eos_id) break;
            expect += v.token_texts[static_cast<std::size_t>(s[static_cast<std::size_t>(i)])];
          }
          REQUIRE(got.has_value());
          CHECK(*got == expect);
        }
      }
}

TEST_CASE("compute_reward rules") {
  const auto& v = tv();
  const auto checker = EquivalenceChecker::rule_based();
  const TokenId m = v.vocab.answer_marker_id;
  const TokenId e = v.vocab.eos_id;

  // truncated trajectories score 0 even when the content is right
  const auto truncated = make_traj({m, 4, 2}, TerminationStatus::TruncatedGlobal);
  CHECK(compute_reward(truncated, "42", checker, v.vocab, v.token_texts) == 0);

  const auto correct = make_traj({13, m, 4, 2, e}, TerminationStatus::FinishedEOS);
  CHECK(compute_reward(correct, "42", checker, v.vocab, v.token_texts) == 1);

  const auto no_marker = make_traj({1, 2, e}, TerminationStatus::FinishedEOS);
  CHECK(compute_reward(no_marker, "12", checker, v.vocab, v.token_texts) == 0);

  const auto wrong = make_traj({m, 5, e}, TerminationStatus::FinishedEOS);
  CHECK(compute_reward(wrong, "42", checker, v.vocab, v.token_texts) == 0);

  // rewards are exactly {0,1}
  for (const auto* t : {&truncated, &correct, &no_marker, &wrong}) {
    const int r = compute_reward(*t, "42", checker, v.vocab, v.token_texts);
    CHECK((r == 0 || r == 1));
  }
}

TEST_CASE("dataset mean reward equals accuracy on a labelled fixture") {
  const auto& v = tv();
  const auto checker = EquivalenceChecker::rule_based();
  const TokenId m = v.vocab.answer_marker_id;
  const TokenId e = v.vocab.eos_id;

  struct Fixture {
    TokenSeq response;
    TerminationStatus status;
    std::string reference;
    bool expect_correct;
  };
  const std::vector<Fixture> fixtures = {
      {{m, 4, e}, TerminationStatus::FinishedEOS, "4", true},
      {{m, 4, e}, TerminationStatus::FinishedEOS, "5", false},
      {{m, 0, e}, TerminationStatus::FinishedEOS, "0", true},
      {{m, 7}, TerminationStatus::TruncatedGlobal, "7", false},
      {{13, 13, e}, TerminationStatus::FinishedEOS, "1", false},
      {{m, 1, 2, e}, TerminationStatus::FinishedEOS, "12", true},
  };
  int rewards = 0;
  int correct = 0;
  for (const auto& f : fixtures) {
    const auto traj = make_traj(f.response, f.status);
    const int r = compute_reward(traj, f.reference, checker, v.vocab, v.token_texts);
    rewards += r;
    correct += f.expect_correct ? 1 : 0;
    CHECK(r == (f.expect_correct ? 1 : 0));
  }
  CHECK(rewards == correct);  // mean reward == accuracy, exactly
}
