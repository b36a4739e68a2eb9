#include <segrl/ratios.hpp>

#include <cmath>
#include <stdexcept>

namespace segrl {

std::string to_string(RatioMode mode) {
  switch (mode) {
    case RatioMode::TOIS: return "TOIS";
    case RatioMode::SAIS: return "SAIS";
    case RatioMode::POIS: return "POIS";
  }
  throw std::logic_error("unreachable ratio mode");
}

RatioMode ratio_mode_from_string(const std::string& name) {
  if (name == "TOIS") return RatioMode::TOIS;
  if (name == "SAIS") return RatioMode::SAIS;
  if (name == "POIS") return RatioMode::POIS;
  throw ConfigError("unknown ratio mode: " + name);
}

int segment_of(int token_index, const Trajectory& traj) {
  if (token_index < 0 || token_index >= traj.response_length())
    throw std::invalid_argument("segment_of: token index out of range");
  int cum = 0;
  for (std::size_t s = 0; s < traj.segments.size(); ++s) {
    cum += static_cast<int>(traj.segments[s].tokens.size());
    if (token_index < cum) return static_cast<int>(s) + 1;
  }
  throw std::logic_error("segment_of: index not covered by segments");
}

TokenRatios compute_ratios(const Trajectory& traj, const Vector& current_logprobs, RatioMode mode) {
  if (traj.status == TerminationStatus::InProgress)
    throw std::logic_error("compute_ratios: trajectory not completed");
  const int n = traj.response_length();
  if (current_logprobs.size() != n)
    throw std::logic_error("compute_ratios: numerator length mismatch");

  Vector denom(n);
  if (mode == RatioMode::SAIS) {
    Eigen::Index at = 0;
    for (const auto& seg : traj.segments) {
      if (seg.gen_logprobs.size() != static_cast<Eigen::Index>(seg.tokens.size()))
        throw std::logic_error("compute_ratios: segment missing decode-time log-probs");
      denom.segment(at, seg.gen_logprobs.size()) = seg.gen_logprobs;
      at += seg.gen_logprobs.size();
    }
  } else {
    if (!traj.final_rollout_logprobs)
      throw std::logic_error("compute_ratios: final_rollout_logprobs missing");
    if (traj.final_rollout_logprobs->size() != n)
      throw std::logic_error("compute_ratios: final_rollout_logprobs length mismatch");
    denom = *traj.final_rollout_logprobs;
  }

  TokenRatios out;
  out.values = (current_logprobs - denom).array().exp();
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const double r = out.values(i);
    if (!std::isfinite(r) || !(r > 0.0))
      throw NumericError("compute_ratios: non-finite or non-positive ratio");
  }
  return out;
}

TokenRatios compute_ratios(const Trajectory& traj, const PolicyParams& params, RatioMode mode) {
  const TokenSeq resp = traj.response();
  const ResponseScore score = score_response(params, traj.prompt_tokens, resp);
  return compute_ratios(traj, score.logprobs, mode);
}

}  // namespace segrl
