#pragma once

#include <segrl/dataset.hpp>
#include <segrl/pipeline.hpp>
#include <segrl/rollout.hpp>
#include <segrl/tasks.hpp>
#include <segrl/throughput.hpp>
#include <segrl/trainer.hpp>
#include <segrl/types.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace segrl {

// Sectioned key-value config file:
//   # comment
//   [section]
//   key = value
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::filesystem::path& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      std::vector<double> fallback) const;

  const std::map<std::pair<std::string, std::string>, std::string>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> entries_;
};

struct PolicyInitConfig {
  int context_width = 8;
  double init_scale = 1.0;
};

struct RunSettings {
  std::uint64_t seed = 1;
  long total_steps = 300;
  std::string out_dir = "run_out";
  long snapshot_every = 100;  // 0 disables periodic snapshots
  std::string dataset_path;   // empty: generate from [task]
  std::string init_params_path;  // warm start from a snapshot
};

struct SimSettings {
  int global_max_len = 4096;
  int workload_size = 65536;
  std::vector<int> segment_counts = {1, 2, 4, 8};
  CostModel cost;
  bool calibrate = true;           // fit a two-point mixture at k=2 first
  double calibrate_target = 1.6;
  // used when calibrate = false
  std::string dist_kind = "two_point";
  double alpha = 0.25;
  double short_prob = 0.75;
  double log_mean = 0.0;
  double log_sd = 1.0;
};

struct EvalSettings {
  int repeats = 32;  // avg@k
  double temperature = 0.85;
};

struct PipelineSettings {
  bool drop_multi_subquestion = true;
  bool normalize_reference = true;
  bool drop_long_reference = true;
  int max_reference_len = 64;
  bool drop_inconsistent = false;
  bool drop_easy = false;
  int easy_attempts = 8;
  std::string easy_solver = "scripted";  // "scripted" | "oracle:<noise>"
  std::string ensemble_solver = "scripted";
  int ensemble_size = 2;
  std::vector<std::string> extra_multipart_patterns;
};

struct RunConfig {
  RunSettings run;
  TaskFamilyConfig task;
  PolicyInitConfig policy;
  RolloutConfig rollout;
  TrainerConfig trainer;
  SimSettings sim;
  EvalSettings eval;
  PipelineSettings pipeline;

  // Exhaustive validation: collects every problem instead of stopping at
  // the first.
  std::vector<std::string> validate() const;

  Json echo() const;  // manifest config echo

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_config(const ConfigFile& file);
};

}  // namespace segrl
