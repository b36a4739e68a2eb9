#pragma once

#include <segrl/policy.hpp>
#include <segrl/rollout.hpp>
#include <segrl/types.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace segrl {

struct AnswerPair {
  std::string predicted;
  std::string reference;
};

// Exact rational on 64-bit terms; the equivalence checker compares numbers
// without floating-point round-off.
struct Rational {
  long long num = 0;
  long long den = 1;

  static Rational make(long long n, long long d);
  bool operator==(const Rational& other) const;
  Rational times(const Rational& other) const;
};

std::optional<Rational> parse_rational(const std::string& text);

// Tables behind the rule-based checker; extensible from the run config.
struct CheckerTables {
  // unit -> (factor to the dimension base unit, dimension id)
  std::map<std::string, std::pair<Rational, std::string>> units;
  std::map<std::string, Rational> word_numbers;

  static CheckerTables defaults();
};

// Pluggable answer-equivalence judgment. The reference implementation is
// rule-based: normalized exact match, exact rational comparison, a small
// unit-conversion table and a word-number map.
class EquivalenceChecker {
 public:
  using Fn = std::function<bool(const AnswerPair&)>;

  EquivalenceChecker(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

  bool operator()(const AnswerPair& pair) const { return fn_(pair); }
  const std::string& id() const { return id_; }

  static EquivalenceChecker rule_based(CheckerTables tables = CheckerTables::defaults());

 private:
  std::string id_;
  Fn fn_;
};

std::string normalize_answer(const std::string& text);

bool is_equivalent(const AnswerPair& pair, const EquivalenceChecker& checker);

// Detokenized span after the last answer marker, up to EOS or the end of
// the response; absent when no marker was emitted.
std::optional<std::string> extract_final_answer(std::span<const TokenId> response,
                                                const Vocab& vocab,
                                                const std::vector<std::string>& token_texts);

// {0,1} reward: truncation forces 0, a missing answer yields 0, otherwise
// the checker decides.
int compute_reward(const Trajectory& traj, const std::string& reference,
                   const EquivalenceChecker& checker, const Vocab& vocab,
                   const std::vector<std::string>& token_texts);

}  // namespace segrl
