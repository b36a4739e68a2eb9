#include <segrl/rollout.hpp>
#include <segrl/softmax.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace segrl {

TokenSeq Trajectory::response() const {
  TokenSeq out;
  for (const auto& seg : segments) out.insert(out.end(), seg.tokens.begin(), seg.tokens.end());
  return out;
}

int Trajectory::response_length() const {
  int n = 0;
  for (const auto& seg : segments) n += static_cast<int>(seg.tokens.size());
  return n;
}

Vector Trajectory::gen_logprobs_concat() const {
  Vector out(response_length());
  Eigen::Index at = 0;
  for (const auto& seg : segments) {
    out.segment(at, seg.gen_logprobs.size()) = seg.gen_logprobs;
    at += seg.gen_logprobs.size();
  }
  return out;
}

void RolloutConfig::validate() const {
  if (global_max_len <= 0) throw ConfigError("rollout: global_max_len must be positive");
  if (segment_count <= 0) throw ConfigError("rollout: segment_count must be positive");
  if (global_max_len % segment_count != 0)
    throw ConfigError("rollout: segment_count must divide global_max_len");
  if (group_size < 2) throw ConfigError("rollout: group_size must be >= 2");
  if (prompt_batch <= 0) throw ConfigError("rollout: prompt_batch must be positive");
  if (!(temperature > 0.0)) throw ConfigError("rollout: temperature must be > 0");
  if (eos_id < 0) throw ConfigError("rollout: eos_id must be set");
}

SegmentOutcome classify_termination(const Trajectory& traj, const RolloutConfig& cfg) {
  const int len = traj.response_length();
  if (len > cfg.global_max_len)
    throw std::logic_error("trajectory exceeded global_max_len: scheduler bug");
  if (traj.segments.empty() || traj.segments.back().tokens.empty())
    throw std::logic_error("classify_termination: trajectory has no freshly decoded segment");
  // EOS takes precedence, even on the last permitted global token.
  if (traj.segments.back().tokens.back() == cfg.eos_id) return SegmentOutcome::FinishedEOS;
  if (len == cfg.global_max_len) return SegmentOutcome::TruncatedGlobal;
  return SegmentOutcome::SegmentBoundary;
}

RolloutState::RolloutState(std::uint64_t seed, const RolloutConfig& cfg) : seed_(seed) {
  cfg.validate();
}

void RolloutState::push_prompt(const PromptEntry& prompt) { prompt_queue_.push_back(prompt); }

std::size_t RolloutState::assembling_size() const {
  std::size_t n = 0;
  for (const auto& [key, grp] : assembling_) n += grp.done.size();
  return n;
}

std::vector<Lane> admit_prompts(RolloutState& state, const RolloutConfig& cfg) {
  std::vector<Lane> lanes;
  const std::size_t capacity =
      static_cast<std::size_t>(cfg.prompt_batch) * static_cast<std::size_t>(cfg.group_size);

  // Unfinished work is never queued behind new prompts.
  while (!state.unfinished_pool_.empty()) {
    lanes.push_back(std::move(state.unfinished_pool_.front()));
    state.unfinished_pool_.pop_front();
  }

  // Admit whole groups only, so group statistics stay well-defined.
  while (!state.prompt_queue_.empty() &&
         lanes.size() + static_cast<std::size_t>(cfg.group_size) <= capacity) {
    PromptEntry prompt = std::move(state.prompt_queue_.front());
    state.prompt_queue_.pop_front();

    const std::uint64_t key = state.next_group_key_++;
    auto& grp = state.assembling_[key];
    grp.record_id = prompt.record_id;
    grp.reference_answer = prompt.reference_answer;
    grp.expected = cfg.group_size;

    for (int g = 0; g < cfg.group_size; ++g) {
      Lane lane{Trajectory{}, Rng(derive_seed(state.seed_, state.admission_counter_)), key};
      ++state.admission_counter_;
      std::ostringstream pid;
      pid << prompt.record_id << '#' << key << '.' << g;
      lane.traj.prompt_id = pid.str();
      lane.traj.record_id = prompt.record_id;
      lane.traj.prompt_tokens = prompt.tokens;
      lanes.push_back(std::move(lane));
    }
  }
  return lanes;
}

namespace {

// Decode at most one segment for a lane; stops early at EOS or the global
// length cap. Returns the number of tokens decoded.
int decode_segment(Lane& lane, const PolicyParams& params, const RolloutConfig& cfg) {
  Trajectory& traj = lane.traj;
  const int remaining = cfg.global_max_len - traj.response_length();
  const int budget = std::min(cfg.segment_len(), remaining);
  if (budget <= 0) throw std::logic_error("decode_segment: no token budget left");

  TokenSeq context = traj.prompt_tokens;
  {
    const TokenSeq resp = traj.response();
    context.insert(context.end(), resp.begin(), resp.end());
  }

  Segment seg;
  seg.gen_version = params.version;
  seg.tokens.reserve(static_cast<std::size_t>(budget));
  std::vector<double> logprobs;
  logprobs.reserve(static_cast<std::size_t>(budget));

  for (int t = 0; t < budget; ++t) {
    const TokenDistribution dist = distribution(params, context);
    const TokenId tok = sample_token(dist, cfg.temperature, lane.rng);
    // stored log-probs always use the temperature-1 distribution
    logprobs.push_back(dist.logits(tok) - log_sum_exp(dist.logits));
    seg.tokens.push_back(tok);
    context.push_back(tok);
    if (tok == cfg.eos_id) break;
  }

  seg.gen_logprobs =
      Eigen::Map<const Vector>(logprobs.data(), static_cast<Eigen::Index>(logprobs.size()));
  traj.segments.push_back(std::move(seg));
  return static_cast<int>(traj.segments.back().tokens.size());
}

}  // namespace

StepStats rollout_step(RolloutState& state, const PolicyParams& params, const RolloutConfig& cfg) {
  cfg.validate();
  StepStats stats;

  if (state.unfinished_pool_.empty() && state.prompt_queue_.empty()) {
    stats.status = StepStatus::EndOfData;
    return stats;
  }

  ++state.step_;
  std::vector<Lane> lanes = admit_prompts(state, cfg);
  stats.lanes = static_cast<int>(lanes.size());

  std::vector<std::uint64_t> touched_groups;
  for (auto& lane : lanes) {
    const int decoded = decode_segment(lane, params, cfg);
    stats.tokens_decoded += decoded;
    stats.max_tokens_decoded = std::max(stats.max_tokens_decoded, decoded);

    const SegmentOutcome outcome = classify_termination(lane.traj, cfg);
    if (outcome == SegmentOutcome::SegmentBoundary) {
      state.unfinished_pool_.push_back(std::move(lane));
      continue;
    }
    lane.traj.status = outcome == SegmentOutcome::FinishedEOS ? TerminationStatus::FinishedEOS
                                                              : TerminationStatus::TruncatedGlobal;
    if (outcome == SegmentOutcome::TruncatedGlobal) ++stats.truncated_trajectories;
    ++stats.completed_trajectories;
    auto it = state.assembling_.find(lane.group_key);
    if (it == state.assembling_.end())
      throw std::logic_error("completed trajectory belongs to no assembling group");
    it->second.done.push_back(std::move(lane.traj));
    touched_groups.push_back(lane.group_key);
  }

  // Groups whose last member just finished enter the experience pool as a
  // unit; every member's full-response log-probs are (re)computed here so
  // they all share the pool-entry policy version.
  for (std::uint64_t key : touched_groups) {
    auto it = state.assembling_.find(key);
    if (it == state.assembling_.end()) continue;  // already flushed this step
    auto& grp = it->second;
    if (static_cast<int>(grp.done.size()) < grp.expected) continue;

    CompletedGroup out;
    out.record_id = grp.record_id;
    out.reference_answer = grp.reference_answer;
    out.pool_entry_version = params.version;
    out.completed_step = state.step_;
    out.members = std::move(grp.done);
    for (auto& traj : out.members) {
      const TokenSeq resp = traj.response();
      traj.final_rollout_logprobs = score_response(params, traj.prompt_tokens, resp).logprobs;
      traj.final_logprob_version = params.version;
    }
    state.experience_pool_.push_back(std::move(out));
    state.assembling_.erase(it);
    ++stats.groups_entered_pool;
  }

  return stats;
}

}  // namespace segrl
