#include <segrl/reward.hpp>

#include <algorithm>
#include <cctype>
#include <numeric>
#include <stdexcept>

namespace segrl {

Rational Rational::make(long long n, long long d) {
  if (d == 0) throw std::invalid_argument("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long long g = std::gcd(n < 0 ? -n : n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  return Rational{n, d};
}

bool Rational::operator==(const Rational& other) const {
  return static_cast<__int128>(num) * other.den == static_cast<__int128>(other.num) * den;
}

Rational Rational::times(const Rational& other) const {
  // cross-reduce before multiplying to keep terms in range
  const long long g1 = std::gcd(num < 0 ? -num : num, other.den);
  const long long g2 = std::gcd(other.num < 0 ? -other.num : other.num, den);
  return Rational::make((num / g1) * (other.num / g2), (den / g2) * (other.den / g1));
}

std::optional<Rational> parse_rational(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = 0;
  long long sign = 1;
  if (text[i] == '+' || text[i] == '-') {
    if (text[i] == '-') sign = -1;
    ++i;
  }

  long long int_part = 0;
  bool any_digit = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    if (int_part > (1LL << 56)) return std::nullopt;  // overflow guard
    int_part = int_part * 10 + (text[i] - '0');
    any_digit = true;
    ++i;
  }

  if (i < text.size() && text[i] == '/') {
    // fraction a/b
    if (!any_digit) return std::nullopt;
    ++i;
    long long den = 0;
    bool den_digit = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (den > (1LL << 56)) return std::nullopt;
      den = den * 10 + (text[i] - '0');
      den_digit = true;
      ++i;
    }
    if (!den_digit || den == 0 || i != text.size()) return std::nullopt;
    return Rational::make(sign * int_part, den);
  }

  if (i < text.size() && text[i] == '.') {
    // decimal
    ++i;
    long long frac = 0;
    long long scale = 1;
    bool frac_digit = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (scale > (1LL << 50)) return std::nullopt;
      frac = frac * 10 + (text[i] - '0');
      scale *= 10;
      frac_digit = true;
      ++i;
    }
    if ((!any_digit && !frac_digit) || i != text.size()) return std::nullopt;
    return Rational::make(sign * (int_part * scale + frac), scale);
  }

  if (!any_digit || i != text.size()) return std::nullopt;
  return Rational::make(sign * int_part, 1);
}

CheckerTables CheckerTables::defaults() {
  CheckerTables t;
  // lengths in millimetres, masses in grams
  t.units["mm"] = {Rational::make(1, 1), "length"};
  t.units["cm"] = {Rational::make(10, 1), "length"};
  t.units["m"] = {Rational::make(1000, 1), "length"};
  t.units["g"] = {Rational::make(1, 1), "mass"};
  t.units["kg"] = {Rational::make(1000, 1), "mass"};

  static const char* const kWords[] = {"zero",    "one",     "two",      "three",  "four",
                                       "five",    "six",     "seven",    "eight",  "nine",
                                       "ten",     "eleven",  "twelve",   "thirteen",
                                       "fourteen", "fifteen", "sixteen", "seventeen",
                                       "eighteen", "nineteen", "twenty"};
  for (int i = 0; i <= 20; ++i) t.word_numbers[kWords[i]] = Rational::make(i, 1);
  t.word_numbers["half"] = Rational::make(1, 2);
  t.word_numbers["one half"] = Rational::make(1, 2);
  t.word_numbers["a half"] = Rational::make(1, 2);
  t.word_numbers["quarter"] = Rational::make(1, 4);
  t.word_numbers["one quarter"] = Rational::make(1, 4);
  t.word_numbers["a quarter"] = Rational::make(1, 4);
  t.word_numbers["three quarters"] = Rational::make(3, 4);
  return t;
}

std::string normalize_answer(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace {

struct Quantity {
  Rational value;
  std::string dimension;  // empty for plain numbers
};

// number followed by an optional unit suffix, e.g. "27cm" or "0.27 m"
std::optional<Quantity> parse_quantity(const std::string& normalized, const CheckerTables& tables) {
  std::size_t split = normalized.size();
  while (split > 0) {
    const char c = normalized[split - 1];
    if (std::isalpha(static_cast<unsigned char>(c))) {
      --split;
      continue;
    }
    break;
  }
  std::string number_part = normalized.substr(0, split);
  std::string unit_part = normalized.substr(split);
  while (!number_part.empty() && number_part.back() == ' ') number_part.pop_back();

  const auto value = parse_rational(number_part);
  if (!value) return std::nullopt;
  if (unit_part.empty()) return Quantity{*value, ""};

  const auto it = tables.units.find(unit_part);
  if (it == tables.units.end()) return std::nullopt;
  return Quantity{value->times(it->second.first), it->second.second};
}

bool rule_based_equivalent(const AnswerPair& pair, const CheckerTables& tables) {
  const std::string a = normalize_answer(pair.predicted);
  const std::string b = normalize_answer(pair.reference);
  if (a == b) return true;

  // numeric / unit route
  const auto qa = parse_quantity(a, tables);
  const auto qb = parse_quantity(b, tables);
  if (qa && qb) return qa->dimension == qb->dimension && qa->value == qb->value;

  // word-number route, either side
  auto as_number = [&](const std::string& s) -> std::optional<Rational> {
    if (const auto q = parse_quantity(s, tables); q && q->dimension.empty()) return q->value;
    if (const auto it = tables.word_numbers.find(s); it != tables.word_numbers.end())
      return it->second;
    return std::nullopt;
  };
  const auto na = as_number(a);
  const auto nb = as_number(b);
  if (na && nb) return *na == *nb;

  return false;
}

}  // namespace

EquivalenceChecker EquivalenceChecker::rule_based(CheckerTables tables) {
  return EquivalenceChecker("rule-based-v1", [tables = std::move(tables)](const AnswerPair& pair) {
    return rule_based_equivalent(pair, tables);
  });
}

bool is_equivalent(const AnswerPair& pair, const EquivalenceChecker& checker) {
  return checker(pair);
}

std::optional<std::string> extract_final_answer(std::span<const TokenId> response,
                                                const Vocab& vocab,
                                                const std::vector<std::string>& token_texts) {
  std::ptrdiff_t marker = -1;
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(response.size()); ++i)
    if (response[static_cast<std::size_t>(i)] == vocab.answer_marker_id) marker = i;
  if (marker < 0) return std::nullopt;

  std::string out;
  for (std::size_t i = static_cast<std::size_t>(marker) + 1; i < response.size(); ++i) {
    const TokenId t = response[i];
    if (t == vocab.eos_id) break;
    if (t < 0 || t >= static_cast<TokenId>(token_texts.size()))
      throw std::invalid_argument("extract_final_answer: token id out of range");
    out += token_texts[static_cast<std::size_t>(t)];
  }
  return out;
}

int compute_reward(const Trajectory& traj, const std::string& reference,
                   const EquivalenceChecker& checker, const Vocab& vocab,
                   const std::vector<std::string>& token_texts) {
  if (traj.status == TerminationStatus::InProgress)
    throw std::logic_error("compute_reward: trajectory not completed");
  // overlong punishment: truncated samples are incorrect regardless of content
  if (traj.status == TerminationStatus::TruncatedGlobal) return 0;
  const TokenSeq resp = traj.response();
  const auto answer = extract_final_answer(resp, vocab, token_texts);
  if (!answer) return 0;
  return checker(AnswerPair{*answer, reference}) ? 1 : 0;
}

}  // namespace segrl
