#pragma once

#include <segrl/policy.hpp>
#include <segrl/ratios.hpp>
#include <segrl/rollout.hpp>
#include <segrl/types.hpp>

#include <optional>
#include <string>
#include <vector>

namespace segrl {

// A complete group of G trajectories for one prompt: the unit of advantage
// normalization and dynamic-sampling filtering.
struct Group {
  std::string record_id;
  std::string reference_answer;
  std::vector<Trajectory> members;
  std::vector<int> rewards;          // one {0,1} value per member
  std::vector<double> advantages;    // set only for retained groups
  bool filtered = false;             // all-equal rewards: no training signal

  static Group from_completed(CompletedGroup&& g);
};

enum class MaskMode { None, Always, Dynamic };
enum class EntropyGate { PerResponse, BatchMean };
enum class MptProbSource { TrainingPolicy, GenerationPolicy };

MaskMode mask_mode_from_string(const std::string& name);
std::string to_string(MaskMode mode);

struct TrainerConfig {
  double eps_low = 0.2;
  double eps_high = 0.2;
  double tau = 0.99;    // mastered-token probability threshold
  double sigma = 0.2;   // target entropy for the dynamic mask
  double learning_rate = 0.05;
  int updates_per_step = 1;
  RatioMode ratio_mode = RatioMode::POIS;
  MaskMode mask_mode = MaskMode::Dynamic;
  EntropyGate entropy_gate = EntropyGate::PerResponse;
  MptProbSource mpt_source = MptProbSource::TrainingPolicy;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

using TokenMask = std::vector<std::uint8_t>;

// Group-relative advantages (reward - mean) / population std. Throws
// std::logic_error on all-equal rewards: those groups must have been
// removed by dynamic sampling.
std::vector<double> group_advantage(const std::vector<int>& rewards);

struct FilterStats {
  int retained = 0;
  int dropped_all_correct = 0;
  int dropped_all_wrong = 0;
  int dropped() const { return dropped_all_correct + dropped_all_wrong; }
};

// Drops groups whose rewards are all 0 or all 1 and assigns advantages to
// the retained ones.
std::vector<Group> dynamic_sampling_filter(std::vector<Group> groups, FilterStats* stats = nullptr);

// Mastered-token candidates: reward-1 responses only, chosen-token
// probability >= tau (inclusive).
TokenMask identify_mpts(int reward, const Vector& chosen_probs, double tau);

// Mean full-distribution entropy over the response positions.
double response_mean_entropy(const Trajectory& traj, const PolicyParams& params);

// Final mask: the candidates when mean entropy sits below sigma, all-zero
// otherwise.
TokenMask dmmpt_mask(const TokenMask& mpts, double h_bar, double sigma);

// One token's clipped surrogate term.
double token_objective(double ratio, double advantage, double eps_low, double eps_high);

struct BatchStats {
  long total_tokens = 0;
  long masked_tokens = 0;
  long clipped_tokens = 0;   // clipped branch active and binding
  double masked_fraction = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double max_ratio_dev = 0.0;  // max |ratio - 1| over unmasked tokens
  double mean_entropy = 0.0;   // token-weighted, current policy
};

struct LossGrad {
  double objective = 0.0;  // maximized; logs report -objective as "loss"
  Matrix grad;
  BatchStats stats;
};

// Token-level clipped objective over the retained groups and its exact
// gradient w.r.t. the weights (stored denominators held constant, clipped
// and binding tokens contribute zero gradient). Returns nullopt when no
// group is retained, signalling skip-update.
std::optional<LossGrad> batch_loss_and_grad(const std::vector<Group>& groups,
                                            const PolicyParams& params, const TrainerConfig& cfg);

struct AdamState {
  Matrix m;
  Matrix v;
  long t = 0;
};

// Ascent step on the objective with decoupled weight decay; bumps the
// parameter version. Throws NumericError on non-finite updates.
PolicyParams apply_update(const PolicyParams& params, const Matrix& grad, const TrainerConfig& cfg,
                          AdamState& state);

}  // namespace segrl
