#include <segrl/policy.hpp>
#include <segrl/softmax.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace segrl {

void Vocab::validate() const {
  if (size < 4) throw ConfigError("vocab: size must be >= 4");
  if (eos_id < 0 || eos_id >= size) throw ConfigError("vocab: eos_id out of range");
  if (answer_marker_id < 0 || answer_marker_id >= size)
    throw ConfigError("vocab: answer_marker_id out of range");
  if (eos_id == answer_marker_id)
    throw ConfigError("vocab: eos_id and answer_marker_id must differ");
}

PolicyParams PolicyParams::zeros(int vocab_size, int context_width) {
  PolicyParams p;
  p.weights = Matrix::Zero(vocab_size, vocab_size * context_width);
  p.context_width = context_width;
  return p;
}

PolicyParams PolicyParams::random_init(int vocab_size, int context_width, double scale, Rng& rng) {
  PolicyParams p = zeros(vocab_size, context_width);
  for (Eigen::Index j = 0; j < p.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) p.weights(i, j) = scale * rng.normal();
  return p;
}

TokenDistribution TokenDistribution::from_probs(const Vector& probs) {
  TokenDistribution d;
  d.probs = probs;
  d.logits = Vector(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    d.logits(i) = probs(i) > 0.0 ? std::log(probs(i))
                                 : -std::numeric_limits<double>::infinity();
  return d;
}

namespace {

// Feature column indices of the active (non-pad) context slots. Slot s holds
// the token context[n - width + s]; slots before the start of the context
// stay all-zero.
template <typename Fn>
void for_each_active_column(const PolicyParams& params, std::span<const TokenId> context, Fn&& fn) {
  const int v = params.vocab_size();
  const int width = params.context_width;
  const auto n = static_cast<std::ptrdiff_t>(context.size());
  for (int s = 0; s < width; ++s) {
    const std::ptrdiff_t pos = n - width + s;
    if (pos < 0) continue;
    const TokenId tok = context[static_cast<std::size_t>(pos)];
    if (tok < 0 || tok >= v)
      throw std::invalid_argument("context token id out of range");
    fn(s * v + tok);
  }
}

Vector context_logits(const PolicyParams& params, std::span<const TokenId> context) {
  Vector logits = Vector::Zero(params.vocab_size());
  for_each_active_column(params, context,
                         [&](int col) { logits += params.weights.col(col); });
  return logits;
}

}  // namespace

TokenDistribution distribution(const PolicyParams& params, std::span<const TokenId> context) {
  TokenDistribution d;
  d.logits = context_logits(params, context);
  d.probs = softmax(d.logits);
  return d;
}

TokenId sample_token(const TokenDistribution& dist, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw ConfigError("sample_token: temperature must be > 0");
  const Vector p = softmax(dist.logits / temperature);
  const double u = rng.uniform();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    cum += p(i);
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(p.size() - 1);  // guard against fp round-off
}

double token_entropy(const TokenDistribution& dist) { return entropy(dist.probs); }

double log_prob(const PolicyParams& params, std::span<const TokenId> context, TokenId token) {
  const Vector logits = context_logits(params, context);
  if (token < 0 || token >= logits.size())
    throw std::invalid_argument("log_prob: token id out of range");
  return logits(token) - log_sum_exp(logits);
}

Matrix grad_log_prob(const PolicyParams& params, std::span<const TokenId> context, TokenId token) {
  Matrix grad = Matrix::Zero(params.weights.rows(), params.weights.cols());
  add_scaled_grad_log_prob(grad, params, context, token, 1.0);
  return grad;
}

void add_scaled_grad_log_prob(Matrix& acc, const PolicyParams& params,
                              std::span<const TokenId> context, TokenId token, double coef) {
  const TokenDistribution d = distribution(params, context);
  if (token < 0 || token >= d.probs.size())
    throw std::invalid_argument("grad_log_prob: token id out of range");
  Vector delta = -coef * d.probs;
  delta(token) += coef;
  for_each_active_column(params, context, [&](int col) { acc.col(col) += delta; });
}

ResponseScore score_response(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> response) {
  const auto n = static_cast<Eigen::Index>(response.size());
  ResponseScore score;
  score.logprobs = Vector(n);
  score.chosen_probs = Vector(n);
  score.entropies = Vector(n);

  TokenSeq context(prompt.begin(), prompt.end());
  context.reserve(prompt.size() + response.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    const TokenDistribution d = distribution(params, context);
    const TokenId tok = response[static_cast<std::size_t>(t)];
    if (tok < 0 || tok >= d.probs.size())
      throw std::invalid_argument("score_response: token id out of range");
    score.logprobs(t) = d.logits(tok) - log_sum_exp(d.logits);
    score.chosen_probs(t) = d.probs(tok);
    score.entropies(t) = entropy(d.probs);
    context.push_back(tok);
  }
  return score;
}

}  // namespace segrl
