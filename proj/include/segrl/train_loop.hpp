#pragma once

#include <segrl/config.hpp>
#include <segrl/metrics.hpp>
#include <segrl/reward.hpp>
#include <segrl/trainer.hpp>

#include <filesystem>
#include <functional>
#include <optional>

namespace segrl {

// Per-step view handed to observers (tests assert invariants through it).
struct StepObservation {
  long step = 0;
  double mean_reward = 0.0;        // over trajectories entering the pool; nan if none
  double mean_entropy = 0.0;       // token-weighted, pre-update policy; nan if none
  double max_ratio_dev = 0.0;      // max |ratio-1| in the first update of the step
  bool updated = false;
  int retained_groups = 0;
  int dropped_groups = 0;
};

struct TrainHooks {
  std::function<void(const StepObservation&)> on_step;
};

struct TrainSummary {
  long steps_run = 0;
  double final_mean_reward = 0.0;        // mean over the last rows with data
  double max_first_update_ratio_dev = 0.0;
  double entropy_min = 0.0;
  double entropy_max = 0.0;
  long updates_applied = 0;
  std::uint64_t final_version = 0;
};

// Runs the full segment-rollout training loop and writes metrics.csv,
// run_manifest.json and parameter snapshots under out_dir.
TrainSummary run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const TrainHooks& hooks = {});

void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);

// Dataset resolution: load run.dataset_path when set, generate from [task]
// otherwise. Generation is seeded independently of the rollout streams.
std::vector<DatasetRecord> resolve_dataset(const RunConfig& cfg);

struct EvalSummary {
  double accuracy = 0.0;  // mean reward over all (question, repeat) pairs
  long questions = 0;
  int repeats = 0;
};

int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir,
             const std::filesystem::path& params_path, EvalSummary* summary = nullptr);
int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_clean(const RunConfig& cfg, const std::filesystem::path& dataset_path,
              const std::filesystem::path& out_dir);

Solver solver_from_id(const std::string& id, std::uint64_t seed, int ensemble_index = -1);

}  // namespace segrl
