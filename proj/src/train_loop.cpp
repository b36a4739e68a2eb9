#include <segrl/train_loop.hpp>

#include <segrl/pipeline.hpp>
#include <segrl/softmax.hpp>
#include <segrl/tasks.hpp>
#include <segrl/throughput.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

namespace segrl {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir.string());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open file for writing: " + path.string());
  out << j.dump(2) << '\n';
}

void require_valid(const RunConfig& cfg) {
  const auto errors = cfg.validate();
  if (errors.empty()) return;
  std::string all = "configuration invalid:";
  for (const auto& e : errors) all += "\n  - " + e;
  throw ConfigError(all);
}

}  // namespace

std::vector<DatasetRecord> resolve_dataset(const RunConfig& cfg) {
  if (!cfg.run.dataset_path.empty()) {
    const auto loaded = read_jsonl(cfg.run.dataset_path);
    if (!loaded.malformed.empty())
      throw ConfigError("dataset has " + std::to_string(loaded.malformed.size()) +
                        " malformed lines; clean it first");
    return loaded.records;
  }
  Rng rng(derive_seed(cfg.run.seed, 0xDA7A));
  return generate_tasks(cfg.task, rng);
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
  Json j;
  j["vocab_size"] = params.vocab_size();
  j["context_width"] = params.context_width;
  j["version"] = params.version;
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < params.weights.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < params.weights.cols(); ++c) row.push_back(params.weights(i, c));
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  write_json(path, j);
}

PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open params file: " + path.string());
  Json j = Json::parse(in);
  PolicyParams p;
  const int v = j.at("vocab_size").get<int>();
  p.context_width = j.at("context_width").get<int>();
  p.version = j.at("version").get<std::uint64_t>();
  const auto& rows = j.at("weights");
  p.weights = Matrix(v, v * p.context_width);
  if (static_cast<int>(rows.size()) != v) throw ConfigError("params file: wrong row count");
  for (int i = 0; i < v; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != p.weights.cols())
      throw ConfigError("params file: wrong column count");
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c)
      p.weights(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return p;
}

TrainSummary run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const TrainHooks& hooks) {
  require_valid(cfg);
  ensure_dir(out_dir);

  const TaskVocab tv = make_modchain_vocab(cfg.task.filler_tokens);
  RolloutConfig rcfg = cfg.rollout;
  rcfg.eos_id = tv.vocab.eos_id;
  rcfg.validate();

  const std::vector<DatasetRecord> dataset = resolve_dataset(cfg);
  if (dataset.empty() && cfg.run.total_steps > 0)
    throw ConfigError("training requires a nonempty dataset");

  const EquivalenceChecker checker = EquivalenceChecker::rule_based();

  PolicyParams params;
  if (!cfg.run.init_params_path.empty()) {
    params = load_params(cfg.run.init_params_path);
    if (params.vocab_size() != tv.vocab.size)
      throw ConfigError("init_params vocabulary size does not match the task vocabulary");
  } else {
    Rng init_rng(derive_seed(cfg.run.seed, 0x1217));
    params = PolicyParams::random_init(tv.vocab.size, cfg.policy.context_width,
                                       cfg.policy.init_scale, init_rng);
  }
  AdamState adam;

  RolloutState state(derive_seed(cfg.run.seed, 0x5EED), rcfg);
  std::size_t dataset_cursor = 0;

  MetricsWriter metrics(out_dir / "metrics.csv");

  TrainSummary summary;
  summary.entropy_min = std::numeric_limits<double>::infinity();
  summary.entropy_max = -std::numeric_limits<double>::infinity();
  double logical_time = 0.0;
  double last_reward_sum = 0.0;
  long last_reward_rows = 0;

  for (long step = 1; step <= cfg.run.total_steps; ++step) {
    // keep enough queued prompts that admission can fill all lanes
    while (state.prompt_queue_size() < static_cast<std::size_t>(rcfg.prompt_batch)) {
      const DatasetRecord& rec = dataset[dataset_cursor];
      dataset_cursor = (dataset_cursor + 1) % dataset.size();
      state.push_prompt({rec.id, tv.tokenize_question(rec.question), rec.reference_answer});
    }

    const StepStats rollout_stats = rollout_step(state, params, rcfg);
    if (rollout_stats.status == StepStatus::EndOfData) break;
    logical_time += cfg.sim.cost.cost_per_token * rollout_stats.max_tokens_decoded +
                    cfg.sim.cost.step_overhead;

    // drain the experience pool (groups are complete by construction)
    std::vector<CompletedGroup> drained = std::move(state.experience_pool());
    state.experience_pool().clear();

    MetricsRow row;
    row.step = step;
    row.experience_pool_size =
        static_cast<long>(drained.size()) * static_cast<long>(rcfg.group_size);
    row.unfinished_pool_size = static_cast<long>(state.unfinished_size());
    row.wall_time = logical_time;

    std::vector<Group> groups;
    groups.reserve(drained.size());
    double reward_sum = 0.0;
    long reward_count = 0;
    double entropy_sum = 0.0;
    long entropy_tokens = 0;
    for (auto& cg : drained) {
      Group g = Group::from_completed(std::move(cg));
      for (auto& traj : g.members) {
        const int r = compute_reward(traj, g.reference_answer, checker, tv.vocab, tv.token_texts);
        traj.reward = r;
        g.rewards.push_back(r);
        reward_sum += r;
        ++reward_count;
        const ResponseScore score = score_response(params, traj.prompt_tokens, traj.response());
        entropy_sum += score.entropies.sum();
        entropy_tokens += score.entropies.size();
      }
      groups.push_back(std::move(g));
    }

    row.mean_reward = reward_count > 0 ? reward_sum / reward_count : kNan;
    row.mean_entropy = entropy_tokens > 0 ? entropy_sum / entropy_tokens : kNan;
    if (entropy_tokens > 0) {
      summary.entropy_min = std::min(summary.entropy_min, row.mean_entropy);
      summary.entropy_max = std::max(summary.entropy_max, row.mean_entropy);
    }
    if (reward_count > 0) {
      last_reward_sum = reward_sum;
      last_reward_rows = reward_count;
    }

    FilterStats fstats;
    std::vector<Group> retained = dynamic_sampling_filter(std::move(groups), &fstats);
    row.dropped_groups = fstats.dropped();

    StepObservation obs;
    obs.step = step;
    obs.mean_reward = row.mean_reward;
    obs.mean_entropy = row.mean_entropy;
    obs.retained_groups = fstats.retained;
    obs.dropped_groups = fstats.dropped();

    row.masked_fraction = kNan;
    row.clip_fraction = kNan;
    row.loss = kNan;
    if (!retained.empty()) {
      for (int u = 0; u < cfg.trainer.updates_per_step; ++u) {
        const auto lg = batch_loss_and_grad(retained, params, cfg.trainer);
        if (!lg) break;
        if (u == 0) {
          row.masked_fraction = lg->stats.masked_fraction;
          row.clip_fraction = lg->stats.clip_fraction;
          row.loss = -lg->objective;
          obs.max_ratio_dev = lg->stats.max_ratio_dev;
          summary.max_first_update_ratio_dev =
              std::max(summary.max_first_update_ratio_dev, lg->stats.max_ratio_dev);
        }
        params = apply_update(params, lg->grad, cfg.trainer, adam);
        ++summary.updates_applied;
        obs.updated = true;
      }
    }

    metrics.append(row);
    summary.steps_run = step;
    if (cfg.run.snapshot_every > 0 && step % cfg.run.snapshot_every == 0)
      save_params(params, out_dir / ("params_step_" + std::to_string(step) + ".json"));
    if (hooks.on_step) hooks.on_step(obs);
  }
  metrics.flush();

  summary.final_mean_reward = last_reward_rows > 0 ? last_reward_sum / last_reward_rows : kNan;
  summary.final_version = params.version;
  if (summary.entropy_min > summary.entropy_max) {
    summary.entropy_min = kNan;
    summary.entropy_max = kNan;
  }

  save_params(params, out_dir / "params_final.json");

  Json manifest;
  manifest["command"] = "train";
  manifest["config"] = cfg.echo();
  manifest["checker_id"] = checker.id();
  manifest["ratio_mode"] = to_string(cfg.trainer.ratio_mode);
  manifest["mask_mode"] = to_string(cfg.trainer.mask_mode);
  manifest["vocab"] = {{"size", tv.vocab.size},
                       {"eos_id", tv.vocab.eos_id},
                       {"answer_marker_id", tv.vocab.answer_marker_id}};
  manifest["dataset"] = {{"source", cfg.run.dataset_path.empty() ? "generated" : cfg.run.dataset_path},
                         {"records", dataset.size()}};
  manifest["metrics_schema"] = kMetricsSchema;
  manifest["eval_note"] = "sampling uses temperature only; no top-p/top-k at this scale";
  manifest["summary"] = {
      {"steps_run", summary.steps_run},
      {"updates_applied", summary.updates_applied},
      {"final_mean_reward", summary.final_mean_reward},
      {"max_first_update_ratio_dev", summary.max_first_update_ratio_dev},
      {"entropy_min", summary.entropy_min},
      {"entropy_max", summary.entropy_max},
      {"final_version", summary.final_version},
  };
  write_json(out_dir / "run_manifest.json", manifest);
  return summary;
}

int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  run_training(cfg, out_dir);
  return 0;
}

namespace {

// Single-pass decode to completion, used by evaluation.
Trajectory decode_full(const PolicyParams& params, const TokenSeq& prompt, const Vocab& vocab,
                       int global_max_len, double temperature, Rng& rng) {
  Trajectory traj;
  traj.prompt_tokens = prompt;
  Segment seg;
  seg.gen_version = params.version;
  TokenSeq context = prompt;
  std::vector<double> logprobs;
  for (int t = 0; t < global_max_len; ++t) {
    const TokenDistribution dist = distribution(params, context);
    const TokenId tok = sample_token(dist, temperature, rng);
    logprobs.push_back(dist.logits(tok) - log_sum_exp(dist.logits));
    seg.tokens.push_back(tok);
    context.push_back(tok);
    if (tok == vocab.eos_id) break;
  }
  seg.gen_logprobs =
      Eigen::Map<const Vector>(logprobs.data(), static_cast<Eigen::Index>(logprobs.size()));
  const bool eos = !seg.tokens.empty() && seg.tokens.back() == vocab.eos_id;
  traj.segments.push_back(std::move(seg));
  traj.status = eos ? TerminationStatus::FinishedEOS : TerminationStatus::TruncatedGlobal;
  return traj;
}

}  // namespace

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir,
             const std::filesystem::path& params_path, EvalSummary* summary_out) {
  require_valid(cfg);
  ensure_dir(out_dir);

  const TaskVocab tv = make_modchain_vocab(cfg.task.filler_tokens);
  const std::vector<DatasetRecord> dataset = resolve_dataset(cfg);
  if (dataset.empty()) throw ConfigError("eval requires a nonempty dataset");
  const EquivalenceChecker checker = EquivalenceChecker::rule_based();

  PolicyParams params;
  if (!params_path.empty()) {
    params = load_params(params_path);
    if (params.vocab_size() != tv.vocab.size)
      throw ConfigError("params vocabulary size does not match the task vocabulary");
  } else {
    Rng init_rng(derive_seed(cfg.run.seed, 0x1217));
    params = PolicyParams::random_init(tv.vocab.size, cfg.policy.context_width,
                                       cfg.policy.init_scale, init_rng);
  }

  std::ofstream csv(out_dir / "eval_results.csv");
  if (!csv) throw ConfigError("cannot open eval_results.csv");
  csv << "id,correct,repeats,accuracy\n";

  long correct_total = 0;
  long trials_total = 0;
  for (std::size_t qi = 0; qi < dataset.size(); ++qi) {
    const DatasetRecord& rec = dataset[qi];
    const TokenSeq prompt = tv.tokenize_question(rec.question);
    int correct = 0;
    for (int rep = 0; rep < cfg.eval.repeats; ++rep) {
      Rng rng(derive_seed(cfg.run.seed ^ 0xE7A1, qi * 1000003ULL + static_cast<std::uint64_t>(rep)));
      const Trajectory traj = decode_full(params, prompt, tv.vocab, cfg.rollout.global_max_len,
                                          cfg.eval.temperature, rng);
      correct += compute_reward(traj, rec.reference_answer, checker, tv.vocab, tv.token_texts);
    }
    correct_total += correct;
    trials_total += cfg.eval.repeats;
    csv << rec.id << ',' << correct << ',' << cfg.eval.repeats << ','
        << format_metric(static_cast<double>(correct) / cfg.eval.repeats) << '\n';
  }

  EvalSummary summary;
  summary.accuracy = trials_total > 0 ? static_cast<double>(correct_total) / trials_total : 0.0;
  summary.questions = static_cast<long>(dataset.size());
  summary.repeats = cfg.eval.repeats;
  if (summary_out) *summary_out = summary;

  Json manifest;
  manifest["command"] = "eval";
  manifest["config"] = cfg.echo();
  manifest["checker_id"] = checker.id();
  manifest["params"] = params_path.empty() ? "fresh-init" : params_path.string();
  manifest["eval_note"] = "sampling uses temperature only; no top-p/top-k at this scale";
  manifest["summary"] = {{"accuracy", summary.accuracy},
                         {"questions", summary.questions},
                         {"repeats", summary.repeats}};
  write_json(out_dir / "eval_manifest.json", manifest);
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  require_valid(cfg);
  ensure_dir(out_dir);

  LengthDistribution dist;
  Json calibration = Json::object();
  if (cfg.sim.calibrate) {
    const CalibrationResult cal =
        calibrate_two_point(cfg.sim.global_max_len, cfg.sim.cost, cfg.sim.workload_size,
                            cfg.sim.calibrate_target, cfg.run.seed);
    dist = cal.dist;
    calibration = {{"alpha", cal.alpha},
                   {"short_prob", cal.short_prob},
                   {"achieved_speedup_k2", cal.speedup_k2},
                   {"target_speedup_k2", cfg.sim.calibrate_target}};
  } else if (cfg.sim.dist_kind == "two_point") {
    dist = LengthDistribution::two_point(cfg.sim.global_max_len, cfg.sim.alpha, cfg.sim.short_prob);
  } else if (cfg.sim.dist_kind == "lognormal") {
    dist = LengthDistribution::trunc_lognormal(cfg.sim.global_max_len, cfg.sim.log_mean,
                                               cfg.sim.log_sd);
  } else {
    throw ConfigError("sim: unknown dist_kind: " + cfg.sim.dist_kind);
  }

  Rng rng(derive_seed(cfg.run.seed, 0x51AB));
  const std::vector<int> workload = sample_workload(dist, cfg.sim.workload_size, rng);

  std::vector<int> ks = cfg.sim.segment_counts;
  if (ks.empty() || ks.front() != 1) ks.insert(ks.begin(), 1);

  std::ofstream csv(out_dir / "sim_results.csv");
  if (!csv) throw ConfigError("cannot open sim_results.csv");
  csv << "segment_count,mean_step_time,speedup,utilization\n";

  SimResult baseline;
  Json rows = Json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const SimResult res = simulate(workload, ks[i], cfg.sim.cost, cfg.sim.global_max_len);
    if (i == 0) baseline = res;
    const double sp = speedup(baseline, res);
    csv << res.segment_count << ',' << format_metric(res.mean_step_time) << ','
        << format_metric(sp) << ',' << format_metric(res.utilization) << '\n';
    rows.push_back({{"segment_count", res.segment_count},
                    {"mean_step_time", res.mean_step_time},
                    {"total_time", res.total_time},
                    {"steps", res.steps},
                    {"speedup", sp},
                    {"utilization", res.utilization}});
  }

  Json manifest;
  manifest["command"] = "simulate";
  manifest["config"] = cfg.echo();
  manifest["calibration"] = calibration;
  manifest["results"] = rows;
  write_json(out_dir / "sim_manifest.json", manifest);
  return 0;
}

Solver solver_from_id(const std::string& id, std::uint64_t seed, int ensemble_index) {
  if (id == "scripted") return make_scripted_solver(ensemble_index);
  if (id.rfind("oracle", 0) == 0) {
    double noise = 0.0;
    const auto colon = id.find(':');
    if (colon != std::string::npos) noise = std::stod(id.substr(colon + 1));
    return make_oracle_solver(noise, seed);
  }
  throw ConfigError("unknown solver id: " + id);
}

int cmd_clean(const RunConfig& cfg, const std::filesystem::path& dataset_path,
              const std::filesystem::path& out_dir) {
  require_valid(cfg);
  if (dataset_path.empty()) throw ConfigError("clean requires a dataset path");
  ensure_dir(out_dir);

  PipelineConfig pcfg;
  pcfg.drop_multi_subquestion = cfg.pipeline.drop_multi_subquestion;
  pcfg.normalize_reference = cfg.pipeline.normalize_reference;
  pcfg.drop_long_reference = cfg.pipeline.drop_long_reference;
  pcfg.max_reference_len = cfg.pipeline.max_reference_len;
  pcfg.extra_multipart_patterns = cfg.pipeline.extra_multipart_patterns;
  pcfg.drop_inconsistent = cfg.pipeline.drop_inconsistent;
  pcfg.drop_easy = cfg.pipeline.drop_easy;
  pcfg.easy_attempts = cfg.pipeline.easy_attempts;
  if (pcfg.drop_easy)
    pcfg.easy_solver = solver_from_id(cfg.pipeline.easy_solver, derive_seed(cfg.run.seed, 0xEA5E));
  if (pcfg.drop_inconsistent)
    for (int i = 0; i < cfg.pipeline.ensemble_size; ++i)
      pcfg.ensemble.push_back(solver_from_id(cfg.pipeline.ensemble_solver,
                                             derive_seed(cfg.run.seed, 0xE000 + i), i));

  const JsonlReadResult input = read_jsonl(dataset_path);
  PipelineResult result = run_pipeline(input, pcfg);

  write_jsonl(out_dir / "cleaned.jsonl", result.records);
  write_json(out_dir / "report.json", result.report.to_json());
  {
    std::ofstream txt(out_dir / "report.txt");
    if (!txt) throw ConfigError("cannot open report.txt");
    txt << result.report.to_text();
  }

  Json manifest;
  manifest["command"] = "clean";
  manifest["config"] = cfg.echo();
  manifest["checker_id"] = pcfg.checker.id();
  manifest["input"] = dataset_path.string();
  manifest["summary"] = {{"input_lines", result.report.input_lines},
                         {"malformed", result.report.malformed_lines},
                         {"retained", result.report.retained}};
  write_json(out_dir / "clean_manifest.json", manifest);
  return 0;
}

}  // namespace segrl
