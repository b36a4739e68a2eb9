#pragma once

#include <segrl/dataset.hpp>
#include <segrl/policy.hpp>
#include <segrl/rng.hpp>
#include <segrl/types.hpp>

#include <string>
#include <vector>

namespace segrl {

// Synthetic verifiable-task generation. The default family, "modchain",
// encodes chains of +/- operations over small integers reduced mod M:
// question "3+4-2 mod 5", reference answer "0". Prompts are short, answers
// are machine-checkable, and the vocabulary (digits, operators, filler,
// answer marker, EOS) lets sampled responses vary widely in length.
struct TaskFamilyConfig {
  std::string family = "modchain";
  int count = 256;
  int modulus_min = 5;
  int modulus_max = 9;
  int max_terms = 3;
  std::vector<double> term_count_weights = {0.5, 0.3, 0.2};  // 1, 2, 3 terms
  int filler_tokens = 1;  // extra non-semantic tokens widening the vocabulary

  void validate() const;
};

// Token surface map shared by decoding, answer extraction and evaluation.
struct TaskVocab {
  Vocab vocab;
  std::vector<std::string> token_texts;  // id -> surface text; eos maps to ""
  TokenId plus_id = -1;
  TokenId minus_id = -1;
  TokenId mod_id = -1;

  TokenSeq tokenize_question(const std::string& question) const;
  std::string detokenize(std::span<const TokenId> tokens) const;
};

TaskVocab make_modchain_vocab(int filler_tokens);

// Independent evaluator for modchain questions: parses "a+b-c mod M" and
// returns the nonnegative residue.
long eval_modchain(const std::string& question);

std::vector<DatasetRecord> generate_tasks(const TaskFamilyConfig& cfg, Rng& rng);

}  // namespace segrl
