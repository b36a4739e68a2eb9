#include <segrl/metrics.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace segrl {

// Shortest round-trip decimal form; "nan" for missing values.
std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  for (int prec = 1; prec <= 16; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw ConfigError("cannot open metrics file: " + path.string());
  out_ << kMetricsSchema << '\n' << kMetricsHeader << '\n';
}

void MetricsWriter::append(const MetricsRow& r) {
  out_ << r.step << ',' << format_metric(r.mean_reward) << ',' << format_metric(r.mean_entropy)
       << ',' << format_metric(r.masked_fraction) << ',' << format_metric(r.clip_fraction) << ','
       << r.experience_pool_size << ',' << r.unfinished_pool_size << ',' << r.dropped_groups << ','
       << format_metric(r.loss) << ',' << format_metric(r.wall_time) << '\n';
}

MetricsLog read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file: " + path.string());
  MetricsLog log;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics file empty: " + path.string());
  log.schema = line;
  if (log.schema.rfind("# segrl-metrics-v", 0) != 0)
    throw std::runtime_error("metrics file lacks a schema line");
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics header mismatch");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw std::runtime_error("metrics row has wrong arity: " + line);
    MetricsRow r;
    r.step = std::stol(cells[0]);
    r.mean_reward = std::stod(cells[1]);
    r.mean_entropy = std::stod(cells[2]);
    r.masked_fraction = std::stod(cells[3]);
    r.clip_fraction = std::stod(cells[4]);
    r.experience_pool_size = std::stol(cells[5]);
    r.unfinished_pool_size = std::stol(cells[6]);
    r.dropped_groups = std::stol(cells[7]);
    r.loss = std::stod(cells[8]);
    r.wall_time = std::stod(cells[9]);
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace segrl
