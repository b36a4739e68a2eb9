#pragma once

#include <segrl/rng.hpp>
#include <segrl/types.hpp>

#include <cstdint>
#include <span>

namespace segrl {

struct Vocab {
  int size = 0;
  TokenId eos_id = -1;
  TokenId answer_marker_id = -1;

  void validate() const;
};

// Linear-softmax policy over one-hot encodings of the trailing context
// tokens. Contexts shorter than context_width are implicitly left-padded:
// the missing slots contribute an all-zero feature block, so no pad token
// exists in the vocabulary.
struct PolicyParams {
  Matrix weights;  // |V| x (context_width * |V|)
  int context_width = 1;
  std::uint64_t version = 0;

  int vocab_size() const { return static_cast<int>(weights.rows()); }
  int feature_dim() const { return static_cast<int>(weights.cols()); }

  static PolicyParams zeros(int vocab_size, int context_width);
  static PolicyParams random_init(int vocab_size, int context_width, double scale, Rng& rng);
};

struct TokenDistribution {
  Vector logits;
  Vector probs;  // softmax(logits)

  // For hand-built distributions in tests; zero probabilities get -inf logits.
  static TokenDistribution from_probs(const Vector& probs);
};

// Next-token distribution given the trailing context (temperature 1).
// Throws std::invalid_argument if a context token is out of range.
TokenDistribution distribution(const PolicyParams& params, std::span<const TokenId> context);

// Draws from softmax(logits / temperature). Throws ConfigError if
// temperature <= 0. Identical (dist, temperature, rng state) give
// identical tokens.
TokenId sample_token(const TokenDistribution& dist, double temperature, Rng& rng);

double token_entropy(const TokenDistribution& dist);

// log pi(token | context) at temperature 1.
double log_prob(const PolicyParams& params, std::span<const TokenId> context, TokenId token);

// Exact gradient of log pi(token | context) w.r.t. the weights:
// (onehot(token) - probs) outer contextfeatures.
Matrix grad_log_prob(const PolicyParams& params, std::span<const TokenId> context, TokenId token);

// acc += coef * grad_log_prob(params, context, token); touches only the
// active feature columns.
void add_scaled_grad_log_prob(Matrix& acc, const PolicyParams& params,
                              std::span<const TokenId> context, TokenId token, double coef);

// Per-position scores of a whole response under one parameter snapshot
// (context at position t is prompt + response[0..t)).
struct ResponseScore {
  Vector logprobs;      // log pi of each chosen token
  Vector chosen_probs;  // pi of each chosen token
  Vector entropies;     // full-distribution entropy at each position
};

ResponseScore score_response(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> response);

}  // namespace segrl
