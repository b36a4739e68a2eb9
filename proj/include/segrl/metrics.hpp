#pragma once

#include <segrl/types.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace segrl {

// One row per training step; the header is versioned and append-only.
struct MetricsRow {
  long step = 0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double masked_fraction = 0.0;
  double clip_fraction = 0.0;
  long experience_pool_size = 0;
  long unfinished_pool_size = 0;
  long dropped_groups = 0;
  double loss = 0.0;
  double wall_time = 0.0;  // cumulative cost-model time, deterministic
};

inline constexpr const char* kMetricsSchema = "# segrl-metrics-v1";
inline constexpr const char* kMetricsHeader =
    "step,mean_reward,mean_entropy,masked_fraction,clip_fraction,"
    "experience_pool_size,unfinished_pool_size,dropped_groups,loss,wall_time";

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void append(const MetricsRow& row);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

struct MetricsLog {
  std::string schema;
  std::vector<MetricsRow> rows;
};

MetricsLog read_metrics(const std::filesystem::path& path);

std::string format_metric(double v);

}  // namespace segrl
