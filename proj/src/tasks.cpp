#include <segrl/tasks.hpp>

#include <cctype>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace segrl {

void TaskFamilyConfig::validate() const {
  if (family != "modchain") throw ConfigError("unknown task family: " + family);
  if (count < 0) throw ConfigError("task count must be >= 0");
  if (modulus_min < 2 || modulus_max > 10 || modulus_min > modulus_max)
    throw ConfigError("modchain modulus range must satisfy 2 <= min <= max <= 10");
  if (max_terms < 1 || max_terms > static_cast<int>(term_count_weights.size()))
    throw ConfigError("modchain max_terms must be in [1, |term_count_weights|]");
  if (filler_tokens < 1) throw ConfigError("modchain needs at least one filler token");
}

TaskVocab make_modchain_vocab(int filler_tokens) {
  TaskVocab tv;
  for (int d = 0; d <= 9; ++d) tv.token_texts.push_back(std::string(1, char('0' + d)));
  tv.plus_id = static_cast<TokenId>(tv.token_texts.size());
  tv.token_texts.push_back("+");
  tv.minus_id = static_cast<TokenId>(tv.token_texts.size());
  tv.token_texts.push_back("-");
  tv.mod_id = static_cast<TokenId>(tv.token_texts.size());
  tv.token_texts.push_back(" mod ");
  for (int f = 0; f < filler_tokens; ++f) tv.token_texts.push_back(std::string(1, char('a' + (f % 26))));
  tv.vocab.answer_marker_id = static_cast<TokenId>(tv.token_texts.size());
  tv.token_texts.push_back("=");
  tv.vocab.eos_id = static_cast<TokenId>(tv.token_texts.size());
  tv.token_texts.push_back("");
  tv.vocab.size = static_cast<int>(tv.token_texts.size());
  tv.vocab.validate();
  return tv;
}

TokenSeq TaskVocab::tokenize_question(const std::string& question) const {
  TokenSeq out;
  std::size_t i = 0;
  while (i < question.size()) {
    const char c = question[i];
    if (c == ' ') {
      // " mod " is the only phrase containing spaces
      if (question.compare(i, 5, " mod ") == 0) {
        out.push_back(mod_id);
        i += 5;
        continue;
      }
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<TokenId>(c - '0'));
    } else if (c == '+') {
      out.push_back(plus_id);
    } else if (c == '-') {
      out.push_back(minus_id);
    } else {
      throw std::invalid_argument("tokenize_question: unsupported character in: " + question);
    }
    ++i;
  }
  return out;
}

std::string TaskVocab::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab.size) throw std::invalid_argument("detokenize: token id out of range");
    out += token_texts[static_cast<std::size_t>(t)];
  }
  return out;
}

long eval_modchain(const std::string& question) {
  const auto mod_pos = question.rfind(" mod ");
  if (mod_pos == std::string::npos)
    throw std::invalid_argument("modchain question lacks ' mod ': " + question);
  const long modulus = std::stol(question.substr(mod_pos + 5));
  if (modulus <= 0) throw std::invalid_argument("modchain modulus must be positive");

  const std::string expr = question.substr(0, mod_pos);
  long total = 0;
  long sign = +1;
  std::size_t i = 0;
  while (i < expr.size()) {
    const char c = expr[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t len = 0;
      const long v = std::stol(expr.substr(i), &len);
      total += sign * v;
      i += len;
    } else if (c == '+') {
      sign = +1;
      ++i;
    } else if (c == '-') {
      sign = -1;
      ++i;
    } else {
      throw std::invalid_argument("modchain expression has unsupported character: " + expr);
    }
  }
  return ((total % modulus) + modulus) % modulus;
}

std::vector<DatasetRecord> generate_tasks(const TaskFamilyConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<DatasetRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int n = 0; n < cfg.count; ++n) {
    // term count from the configured weights, truncated at max_terms
    double wsum = 0.0;
    for (int k = 0; k < cfg.max_terms; ++k) wsum += cfg.term_count_weights[static_cast<std::size_t>(k)];
    const double u = rng.uniform() * wsum;
    int terms = cfg.max_terms;
    double cum = 0.0;
    for (int k = 0; k < cfg.max_terms; ++k) {
      cum += cfg.term_count_weights[static_cast<std::size_t>(k)];
      if (u < cum) {
        terms = k + 1;
        break;
      }
    }

    const int modulus = rng.uniform_int(cfg.modulus_min, cfg.modulus_max);
    std::ostringstream q;
    for (int t = 0; t < terms; ++t) {
      if (t > 0) q << (rng.uniform() < 0.5 ? '+' : '-');
      q << rng.uniform_int(0, 9);
    }
    q << " mod " << modulus;

    DatasetRecord rec;
    {
      std::ostringstream id;
      id << cfg.family << '-' << std::setw(6) << std::setfill('0') << n;
      rec.id = id.str();
    }
    rec.question = q.str();
    rec.reference_answer = std::to_string(eval_modchain(rec.question));
    rec.meta["family"] = cfg.family;
    rec.meta["terms"] = terms;
    rec.meta["modulus"] = modulus;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace segrl
