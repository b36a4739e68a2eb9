#pragma once

#include <segrl/policy.hpp>
#include <segrl/rollout.hpp>
#include <segrl/types.hpp>

#include <string>

namespace segrl {

// Denominator policy for the token-level importance ratio:
//   TOIS — true on-policy, single-segment rollouts only;
//   SAIS — segment-aware, each token uses its own segment's decode-time
//          log-probs;
//   POIS — pseudo on-policy, every token uses the log-probs recorded when
//          the trajectory entered the experience pool.
enum class RatioMode { TOIS, SAIS, POIS };

std::string to_string(RatioMode mode);
RatioMode ratio_mode_from_string(const std::string& name);

struct TokenRatios {
  Vector values;  // one positive ratio per response token
};

// 1-based segment id of a response token (half-open cumulative ranges, so
// the first token of a segment belongs to that segment).
int segment_of(int token_index, const Trajectory& traj);

// Ratios from precomputed numerator log-probs (current policy, temperature
// 1). The denominator source depends on the mode; SAIS never reads
// final_rollout_logprobs.
TokenRatios compute_ratios(const Trajectory& traj, const Vector& current_logprobs, RatioMode mode);

// Convenience overload that scores the response under `params` first.
TokenRatios compute_ratios(const Trajectory& traj, const PolicyParams& params, RatioMode mode);

}  // namespace segrl
