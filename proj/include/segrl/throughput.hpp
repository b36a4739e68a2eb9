#pragma once

#include <segrl/rng.hpp>
#include <segrl/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace segrl {

// Output-length distribution for the rollout cost model. Support lies on
// positive integers capped at global_max_len.
struct LengthDistribution {
  enum class Kind { TwoPoint, TruncLognormal, Histogram };

  Kind kind = Kind::TwoPoint;
  int global_max_len = 0;

  // two-point: length round(alpha * global_max_len) with probability
  // short_prob, global_max_len otherwise
  double alpha = 0.25;
  double short_prob = 0.75;

  // truncated lognormal (of the untruncated variable, then clamped)
  double log_mean = 0.0;
  double log_sd = 1.0;

  std::vector<std::pair<int, double>> histogram;  // (length, mass)

  static LengthDistribution two_point(int global_max_len, double alpha, double short_prob);
  static LengthDistribution trunc_lognormal(int global_max_len, double log_mean, double log_sd);
  static LengthDistribution from_histogram(int global_max_len,
                                           std::vector<std::pair<int, double>> bins);

  void validate() const;
  int sample(Rng& rng) const;
};

struct CostModel {
  double cost_per_token = 1.0;  // seconds per decoded token (slowest lane)
  double step_overhead = 0.0;   // seconds per step
  int lanes = 256;

  void validate() const;
};

struct SimResult {
  int segment_count = 0;
  long steps = 0;
  double total_time = 0.0;
  double mean_step_time = 0.0;
  long tokens_decoded = 0;
  double utilization = 0.0;  // decoded / (steps * lanes * segment_len)
  std::uint64_t workload_hash = 0;
};

std::vector<int> sample_workload(const LengthDistribution& dist, int count, Rng& rng);

// Synchronous batched decode over the workload: each step every busy lane
// decodes min(remaining, segment_len) tokens, the step costs
// cost_per_token * (max decoded across lanes) + step_overhead, and idle
// lanes refill from the queue at step boundaries (carryover keeps its lane).
SimResult simulate(const std::vector<int>& workload, int segment_count, const CostModel& cost,
                   int global_max_len);

// Convenience: sample a workload from the distribution, then simulate.
SimResult simulate(const LengthDistribution& dist, int workload_size, int segment_count,
                   const CostModel& cost, Rng& rng);

// Equal-workload speedup: total time of the baseline over total time of the
// variant. Throws std::invalid_argument when the workloads differ.
double speedup(const SimResult& baseline, const SimResult& variant);

struct CalibrationResult {
  double alpha = 0.0;
  double short_prob = 0.0;
  double speedup_k2 = 0.0;  // achieved at the calibration point
  LengthDistribution dist;
};

// Grid search over two-point mixtures matching a target 2-segment speedup.
// Ties at the achieved error are broken toward the smallest alpha, then the
// smallest short_prob (first hit in scan order wins).
CalibrationResult calibrate_two_point(int global_max_len, const CostModel& cost, int workload_size,
                                      double target_speedup_k2, std::uint64_t seed);

}  // namespace segrl
