#include <segrl/config.hpp>
#include <segrl/train_loop.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

// exit codes: 0 success, 1 validation error, 2 runtime/numeric error
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct CommonArgs {
  std::string config_path;
  std::optional<long> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file")->required();
  cmd->add_option("--seed", args.seed, "override [run] seed");
  cmd->add_option("--out", args.out_dir, "override [run] out_dir");
}

segrl::RunConfig load(const CommonArgs& args) {
  segrl::RunConfig cfg = segrl::RunConfig::from_file(args.config_path);
  if (args.seed) cfg.run.seed = static_cast<std::uint64_t>(*args.seed);
  if (!args.out_dir.empty()) cfg.run.out_dir = args.out_dir;
  const auto errors = cfg.validate();
  if (!errors.empty()) {
    std::cerr << "configuration invalid:\n";
    for (const auto& e : errors) std::cerr << "  - " << e << "\n";
    throw segrl::ConfigError("aborting: " + std::to_string(errors.size()) + " config error(s)");
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segment-rollout RL engine for verifiable-reward tasks"};
  app.require_subcommand(1);

  CommonArgs train_args, sim_args, clean_args, eval_args;
  std::string clean_dataset;
  std::string eval_params;

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  add_common(train, train_args);

  CLI::App* simulate = app.add_subcommand("simulate", "rollout throughput cost model");
  add_common(simulate, sim_args);

  CLI::App* clean = app.add_subcommand("clean", "dataset cleaning pipeline");
  add_common(clean, clean_args);
  clean->add_option("--dataset", clean_dataset, "input JSONL (defaults to [run] dataset)");

  CLI::App* eval = app.add_subcommand("eval", "avg@k accuracy of a parameter snapshot");
  add_common(eval, eval_args);
  eval->add_option("--params", eval_params, "parameter snapshot to evaluate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = load(train_args);
      return segrl::cmd_train(cfg, cfg.run.out_dir);
    }
    if (simulate->parsed()) {
      const auto cfg = load(sim_args);
      return segrl::cmd_simulate(cfg, cfg.run.out_dir);
    }
    if (clean->parsed()) {
      const auto cfg = load(clean_args);
      const std::string dataset = clean_dataset.empty() ? cfg.run.dataset_path : clean_dataset;
      return segrl::cmd_clean(cfg, dataset, cfg.run.out_dir);
    }
    if (eval->parsed()) {
      const auto cfg = load(eval_args);
      segrl::EvalSummary summary;
      const int rc = segrl::cmd_eval(cfg, cfg.run.out_dir, eval_params, &summary);
      std::cout << "avg@" << summary.repeats << " over " << summary.questions
                << " questions: " << summary.accuracy << "\n";
      return rc;
    }
  } catch (const segrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
