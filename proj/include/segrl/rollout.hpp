#pragma once

#include <segrl/policy.hpp>
#include <segrl/rng.hpp>
#include <segrl/types.hpp>

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace segrl {

// A contiguous run of tokens produced by one policy version, with the
// temperature-1 log-probabilities recorded at decode time.
struct Segment {
  TokenSeq tokens;
  std::uint64_t gen_version = 0;
  Vector gen_logprobs;
};

enum class TerminationStatus { InProgress, FinishedEOS, TruncatedGlobal };

// Outcome of extending a trajectory by one segment.
enum class SegmentOutcome { FinishedEOS, SegmentBoundary, TruncatedGlobal };

struct Trajectory {
  std::string prompt_id;  // unique per admitted rollout instance
  std::string record_id;  // source dataset record
  TokenSeq prompt_tokens;
  std::vector<Segment> segments;
  TerminationStatus status = TerminationStatus::InProgress;
  // Log-probabilities of every response token under the policy version in
  // charge when the trajectory entered the experience pool (set for
  // completed trajectories only).
  std::optional<Vector> final_rollout_logprobs;
  std::uint64_t final_logprob_version = 0;
  std::optional<int> reward;
  std::optional<double> advantage;

  TokenSeq response() const;
  int response_length() const;
  // Generation-time log-probs of all segments, concatenated.
  Vector gen_logprobs_concat() const;
};

struct RolloutConfig {
  int global_max_len = 256;
  int segment_count = 8;
  int group_size = 8;     // G responses per prompt
  int prompt_batch = 16;  // lane capacity is prompt_batch * group_size
  double temperature = 0.85;
  TokenId eos_id = -1;

  int segment_len() const { return global_max_len / segment_count; }
  void validate() const;
};

struct PromptEntry {
  std::string record_id;
  TokenSeq tokens;
  std::string reference_answer;
};

// Experience-pool entry: one prompt's full group of completed trajectories.
// Groups are atomic — a trajectory reaches the pool only when all of its
// group has completed, and final_rollout_logprobs for every member are
// computed at that moment under the current policy.
struct CompletedGroup {
  std::string record_id;
  std::string reference_answer;
  std::vector<Trajectory> members;
  std::uint64_t pool_entry_version = 0;
  long completed_step = 0;
};

// One decoding lane: an in-progress trajectory plus its private sample
// stream and its group assignment.
struct Lane {
  Trajectory traj;
  Rng rng;
  std::uint64_t group_key = 0;
};

enum class StepStatus { Progressed, EndOfData };

struct StepStats {
  StepStatus status = StepStatus::Progressed;
  int lanes = 0;
  int admitted_groups = 0;
  int completed_trajectories = 0;
  int truncated_trajectories = 0;
  int groups_entered_pool = 0;
  int max_tokens_decoded = 0;  // over lanes, this step
  long tokens_decoded = 0;
};

// Mutable state of the segment-rollout loop: unfinished lanes, prompt
// queue, assembling groups and the experience pool of completed groups.
class RolloutState {
 public:
  RolloutState(std::uint64_t seed, const RolloutConfig& cfg);

  void push_prompt(const PromptEntry& prompt);
  // Return an admitted lane to the unfinished pool without decoding.
  void requeue_lane(Lane lane) { unfinished_pool_.push_back(std::move(lane)); }
  std::size_t prompt_queue_size() const { return prompt_queue_.size(); }
  std::size_t unfinished_size() const { return unfinished_pool_.size(); }
  // Completed trajectories still waiting for their group to finish.
  std::size_t assembling_size() const;
  std::vector<CompletedGroup>& experience_pool() { return experience_pool_; }
  long step() const { return step_; }

  friend StepStats rollout_step(RolloutState& state, const PolicyParams& params,
                                const RolloutConfig& cfg);
  friend std::vector<Lane> admit_prompts(RolloutState& state, const RolloutConfig& cfg);

 private:
  struct AssemblingGroup {
    std::string record_id;
    std::string reference_answer;
    std::vector<Trajectory> done;
    int expected = 0;
  };

  std::uint64_t seed_ = 0;
  std::uint64_t admission_counter_ = 0;
  std::deque<Lane> unfinished_pool_;
  std::deque<PromptEntry> prompt_queue_;
  std::unordered_map<std::uint64_t, AssemblingGroup> assembling_;
  std::vector<CompletedGroup> experience_pool_;
  long step_ = 0;
  std::uint64_t next_group_key_ = 0;
};

// Classification of a trajectory that was just extended by one segment.
// EOS wins over global truncation when both apply.
SegmentOutcome classify_termination(const Trajectory& traj, const RolloutConfig& cfg);

// Lane composition for one step: unfinished trajectories first, then whole
// groups of fresh trajectories while a full group fits in the remaining
// capacity.
std::vector<Lane> admit_prompts(RolloutState& state, const RolloutConfig& cfg);

// One pass of the segment-rollout loop: every lane decodes at most one
// segment under `params`; finished groups move to the experience pool with
// final_rollout_logprobs computed under `params`.
StepStats rollout_step(RolloutState& state, const PolicyParams& params, const RolloutConfig& cfg);

}  // namespace segrl
