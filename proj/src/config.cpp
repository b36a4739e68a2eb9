#include <segrl/config.hpp>

#include <fstream>
#include <sstream>

namespace segrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cf;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cf.entries_[{section, key}] = value;
  }
  return cf;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return entries_.count({section, key}) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const auto it = entries_.find({section, key});
  return it == entries_.end() ? fallback : it->second;
}

long ConfigFile::get_int(const std::string& section, const std::string& key, long fallback) const {
  const auto it = entries_.find({section, key});
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const long v = std::stol(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": not an integer: " + it->second);
  }
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  const auto it = entries_.find({section, key});
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": not a number: " + it->second);
  }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto it = entries_.find({section, key});
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config [" + section + "] " + key + ": not a boolean: " + v);
}

std::vector<double> ConfigFile::get_double_list(const std::string& section, const std::string& key,
                                                std::vector<double> fallback) const {
  const auto it = entries_.find({section, key});
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(trim(item)));
    } catch (const std::exception&) {
      throw ConfigError("config [" + section + "] " + key + ": bad list item: " + item);
    }
  }
  if (out.empty())
    throw ConfigError("config [" + section + "] " + key + ": empty list");
  return out;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_config(ConfigFile::parse_file(path));
}

RunConfig RunConfig::from_config(const ConfigFile& f) {
  RunConfig c;

  c.run.seed = static_cast<std::uint64_t>(f.get_int("run", "seed", 1));
  c.run.total_steps = f.get_int("run", "total_steps", 300);
  c.run.out_dir = f.get_string("run", "out_dir", "run_out");
  c.run.snapshot_every = f.get_int("run", "snapshot_every", 100);
  c.run.dataset_path = f.get_string("run", "dataset", "");
  c.run.init_params_path = f.get_string("run", "init_params", "");

  c.task.family = f.get_string("task", "family", c.task.family);
  c.task.count = static_cast<int>(f.get_int("task", "count", c.task.count));
  c.task.modulus_min = static_cast<int>(f.get_int("task", "modulus_min", c.task.modulus_min));
  c.task.modulus_max = static_cast<int>(f.get_int("task", "modulus_max", c.task.modulus_max));
  c.task.max_terms = static_cast<int>(f.get_int("task", "max_terms", c.task.max_terms));
  c.task.term_count_weights =
      f.get_double_list("task", "term_count_weights", c.task.term_count_weights);
  c.task.filler_tokens = static_cast<int>(f.get_int("task", "filler_tokens", c.task.filler_tokens));

  c.policy.context_width =
      static_cast<int>(f.get_int("policy", "context_width", c.policy.context_width));
  c.policy.init_scale = f.get_double("policy", "init_scale", c.policy.init_scale);

  c.rollout.global_max_len =
      static_cast<int>(f.get_int("rollout", "global_max_len", c.rollout.global_max_len));
  c.rollout.segment_count =
      static_cast<int>(f.get_int("rollout", "segment_count", c.rollout.segment_count));
  c.rollout.group_size = static_cast<int>(f.get_int("rollout", "group_size", c.rollout.group_size));
  c.rollout.prompt_batch =
      static_cast<int>(f.get_int("rollout", "prompt_batch", c.rollout.prompt_batch));
  c.rollout.temperature = f.get_double("rollout", "temperature", c.rollout.temperature);

  c.trainer.eps_low = f.get_double("trainer", "eps_low", c.trainer.eps_low);
  c.trainer.eps_high = f.get_double("trainer", "eps_high", c.trainer.eps_high);
  c.trainer.tau = f.get_double("trainer", "tau", c.trainer.tau);
  c.trainer.sigma = f.get_double("trainer", "sigma", c.trainer.sigma);
  c.trainer.learning_rate = f.get_double("trainer", "learning_rate", c.trainer.learning_rate);
  c.trainer.updates_per_step =
      static_cast<int>(f.get_int("trainer", "updates_per_step", c.trainer.updates_per_step));
  c.trainer.ratio_mode =
      ratio_mode_from_string(f.get_string("trainer", "ratio_mode", to_string(c.trainer.ratio_mode)));
  c.trainer.mask_mode =
      mask_mode_from_string(f.get_string("trainer", "mask_mode", to_string(c.trainer.mask_mode)));
  {
    const std::string gate = f.get_string("trainer", "entropy_gate", "response");
    if (gate == "response")
      c.trainer.entropy_gate = EntropyGate::PerResponse;
    else if (gate == "batch")
      c.trainer.entropy_gate = EntropyGate::BatchMean;
    else
      throw ConfigError("trainer: entropy_gate must be 'response' or 'batch'");
  }
  {
    const std::string src = f.get_string("trainer", "mpt_prob_source", "training");
    if (src == "training")
      c.trainer.mpt_source = MptProbSource::TrainingPolicy;
    else if (src == "generation")
      c.trainer.mpt_source = MptProbSource::GenerationPolicy;
    else
      throw ConfigError("trainer: mpt_prob_source must be 'training' or 'generation'");
  }
  c.trainer.adam_beta1 = f.get_double("trainer", "adam_beta1", c.trainer.adam_beta1);
  c.trainer.adam_beta2 = f.get_double("trainer", "adam_beta2", c.trainer.adam_beta2);
  c.trainer.adam_eps = f.get_double("trainer", "adam_eps", c.trainer.adam_eps);
  c.trainer.weight_decay = f.get_double("trainer", "weight_decay", c.trainer.weight_decay);

  c.sim.global_max_len =
      static_cast<int>(f.get_int("sim", "global_max_len", c.sim.global_max_len));
  c.sim.workload_size = static_cast<int>(f.get_int("sim", "workload_size", c.sim.workload_size));
  {
    std::vector<double> ks;
    for (int k : c.sim.segment_counts) ks.push_back(k);
    ks = f.get_double_list("sim", "segment_counts", ks);
    c.sim.segment_counts.clear();
    for (double k : ks) c.sim.segment_counts.push_back(static_cast<int>(k));
  }
  c.sim.cost.cost_per_token = f.get_double("sim", "cost_per_token", c.sim.cost.cost_per_token);
  c.sim.cost.step_overhead = f.get_double("sim", "step_overhead", c.sim.cost.step_overhead);
  c.sim.cost.lanes = static_cast<int>(f.get_int("sim", "lanes", c.sim.cost.lanes));
  c.sim.calibrate = f.get_bool("sim", "calibrate", c.sim.calibrate);
  c.sim.calibrate_target = f.get_double("sim", "calibrate_target", c.sim.calibrate_target);
  c.sim.dist_kind = f.get_string("sim", "dist_kind", c.sim.dist_kind);
  c.sim.alpha = f.get_double("sim", "alpha", c.sim.alpha);
  c.sim.short_prob = f.get_double("sim", "short_prob", c.sim.short_prob);
  c.sim.log_mean = f.get_double("sim", "log_mean", c.sim.log_mean);
  c.sim.log_sd = f.get_double("sim", "log_sd", c.sim.log_sd);

  c.eval.repeats = static_cast<int>(f.get_int("eval", "repeats", c.eval.repeats));
  c.eval.temperature = f.get_double("eval", "temperature", c.eval.temperature);

  c.pipeline.drop_multi_subquestion =
      f.get_bool("pipeline", "drop_multi_subquestion", c.pipeline.drop_multi_subquestion);
  c.pipeline.normalize_reference =
      f.get_bool("pipeline", "normalize_reference", c.pipeline.normalize_reference);
  c.pipeline.drop_long_reference =
      f.get_bool("pipeline", "drop_long_reference", c.pipeline.drop_long_reference);
  c.pipeline.max_reference_len =
      static_cast<int>(f.get_int("pipeline", "max_reference_len", c.pipeline.max_reference_len));
  c.pipeline.drop_inconsistent =
      f.get_bool("pipeline", "drop_inconsistent", c.pipeline.drop_inconsistent);
  c.pipeline.drop_easy = f.get_bool("pipeline", "drop_easy", c.pipeline.drop_easy);
  c.pipeline.easy_attempts =
      static_cast<int>(f.get_int("pipeline", "easy_attempts", c.pipeline.easy_attempts));
  c.pipeline.easy_solver = f.get_string("pipeline", "easy_solver", c.pipeline.easy_solver);
  c.pipeline.ensemble_solver =
      f.get_string("pipeline", "ensemble_solver", c.pipeline.ensemble_solver);
  c.pipeline.ensemble_size =
      static_cast<int>(f.get_int("pipeline", "ensemble_size", c.pipeline.ensemble_size));

  return c;
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> errors;
  auto check = [&errors](const auto& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
  };
  check([&] { task.validate(); });
  check([&] {
    RolloutConfig rc = rollout;
    rc.eos_id = 0;  // the vocabulary binds eos later; validate the geometry
    rc.validate();
  });
  check([&] { trainer.validate(); });
  check([&] { sim.cost.validate(); });
  if (run.total_steps < 0) errors.emplace_back("run: total_steps must be >= 0");
  if (policy.context_width < 1) errors.emplace_back("policy: context_width must be >= 1");
  if (policy.init_scale < 0.0) errors.emplace_back("policy: init_scale must be >= 0");
  if (eval.repeats < 1) errors.emplace_back("eval: repeats must be >= 1");
  if (!(eval.temperature > 0.0)) errors.emplace_back("eval: temperature must be > 0");
  if (trainer.ratio_mode == RatioMode::TOIS && rollout.segment_count != 1)
    errors.emplace_back("trainer: TOIS requires rollout segment_count = 1");
  for (int k : sim.segment_counts)
    if (k <= 0 || sim.global_max_len % k != 0)
      errors.emplace_back("sim: segment_counts must divide sim global_max_len");
  return errors;
}

Json RunConfig::echo() const {
  Json j;
  j["run"] = {{"seed", run.seed},
              {"total_steps", run.total_steps},
              {"out_dir", run.out_dir},
              {"snapshot_every", run.snapshot_every},
              {"dataset", run.dataset_path},
              {"init_params", run.init_params_path}};
  j["task"] = {{"family", task.family},
               {"count", task.count},
               {"modulus_min", task.modulus_min},
               {"modulus_max", task.modulus_max},
               {"max_terms", task.max_terms},
               {"term_count_weights", task.term_count_weights},
               {"filler_tokens", task.filler_tokens}};
  j["policy"] = {{"context_width", policy.context_width}, {"init_scale", policy.init_scale}};
  j["rollout"] = {{"global_max_len", rollout.global_max_len},
                  {"segment_count", rollout.segment_count},
                  {"group_size", rollout.group_size},
                  {"prompt_batch", rollout.prompt_batch},
                  {"temperature", rollout.temperature}};
  j["trainer"] = {{"eps_low", trainer.eps_low},
                  {"eps_high", trainer.eps_high},
                  {"tau", trainer.tau},
                  {"sigma", trainer.sigma},
                  {"learning_rate", trainer.learning_rate},
                  {"updates_per_step", trainer.updates_per_step},
                  {"ratio_mode", to_string(trainer.ratio_mode)},
                  {"mask_mode", to_string(trainer.mask_mode)},
                  {"entropy_gate",
                   trainer.entropy_gate == EntropyGate::PerResponse ? "response" : "batch"},
                  {"mpt_prob_source",
                   trainer.mpt_source == MptProbSource::TrainingPolicy ? "training" : "generation"},
                  {"adam_beta1", trainer.adam_beta1},
                  {"adam_beta2", trainer.adam_beta2},
                  {"adam_eps", trainer.adam_eps},
                  {"weight_decay", trainer.weight_decay}};
  j["sim"] = {{"global_max_len", sim.global_max_len},
              {"workload_size", sim.workload_size},
              {"segment_counts", sim.segment_counts},
              {"cost_per_token", sim.cost.cost_per_token},
              {"step_overhead", sim.cost.step_overhead},
              {"lanes", sim.cost.lanes},
              {"calibrate", sim.calibrate},
              {"calibrate_target", sim.calibrate_target},
              {"dist_kind", sim.dist_kind},
              {"alpha", sim.alpha},
              {"short_prob", sim.short_prob}};
  j["eval"] = {{"repeats", eval.repeats}, {"temperature", eval.temperature}};
  j["pipeline"] = {{"drop_multi_subquestion", pipeline.drop_multi_subquestion},
                   {"normalize_reference", pipeline.normalize_reference},
                   {"drop_long_reference", pipeline.drop_long_reference},
                   {"max_reference_len", pipeline.max_reference_len},
                   {"drop_inconsistent", pipeline.drop_inconsistent},
                   {"drop_easy", pipeline.drop_easy},
                   {"easy_attempts", pipeline.easy_attempts},
                   {"easy_solver", pipeline.easy_solver},
                   {"ensemble_solver", pipeline.ensemble_solver},
                   {"ensemble_size", pipeline.ensemble_size}};
  return j;
}

}  // namespace segrl
