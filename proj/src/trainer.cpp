#include <segrl/trainer.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segrl {

Group Group::from_completed(CompletedGroup&& g) {
  Group out;
  out.record_id = std::move(g.record_id);
  out.reference_answer = std::move(g.reference_answer);
  out.members = std::move(g.members);
  return out;
}

MaskMode mask_mode_from_string(const std::string& name) {
  if (name == "none") return MaskMode::None;
  if (name == "always") return MaskMode::Always;
  if (name == "dynamic") return MaskMode::Dynamic;
  throw ConfigError("unknown mask mode: " + name);
}

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::None: return "none";
    case MaskMode::Always: return "always";
    case MaskMode::Dynamic: return "dynamic";
  }
  throw std::logic_error("unreachable mask mode");
}

void TrainerConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low < 1.0)) throw ConfigError("trainer: eps_low must be in (0,1)");
  if (!(eps_high > 0.0 && eps_high < 1.0)) throw ConfigError("trainer: eps_high must be in (0,1)");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("trainer: tau must be in (0,1)");
  if (!(sigma >= 0.0)) throw ConfigError("trainer: sigma must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("trainer: learning_rate must be > 0");
  if (updates_per_step < 1) throw ConfigError("trainer: updates_per_step must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("trainer: adam_beta1 out of range");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("trainer: adam_beta2 out of range");
  if (!(adam_eps > 0.0)) throw ConfigError("trainer: adam_eps must be > 0");
  if (weight_decay < 0.0) throw ConfigError("trainer: weight_decay must be >= 0");
}

std::vector<double> group_advantage(const std::vector<int>& rewards) {
  const auto g = static_cast<double>(rewards.size());
  if (rewards.size() < 2) throw std::logic_error("group_advantage: need at least 2 rewards");
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  var /= g;  // population variance
  if (var <= 0.0)
    throw std::logic_error(
        "group_advantage: zero variance; all-equal groups must be filtered upstream");
  const double std_dev = std::sqrt(var);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / std_dev;
  return adv;
}

std::vector<Group> dynamic_sampling_filter(std::vector<Group> groups, FilterStats* stats) {
  FilterStats local;
  std::vector<Group> retained;
  retained.reserve(groups.size());
  for (auto& g : groups) {
    if (g.rewards.size() != g.members.size())
      throw std::logic_error("dynamic_sampling_filter: rewards not assigned");
    int sum = 0;
    for (int r : g.rewards) sum += r;
    if (sum == 0 || sum == static_cast<int>(g.rewards.size())) {
      g.filtered = true;
      if (sum == 0)
        ++local.dropped_all_wrong;
      else
        ++local.dropped_all_correct;
      continue;
    }
    g.advantages = group_advantage(g.rewards);
    for (std::size_t i = 0; i < g.members.size(); ++i) g.members[i].advantage = g.advantages[i];
    ++local.retained;
    retained.push_back(std::move(g));
  }
  if (stats) *stats = local;
  return retained;
}

TokenMask identify_mpts(int reward, const Vector& chosen_probs, double tau) {
  TokenMask mask(static_cast<std::size_t>(chosen_probs.size()), 0);
  if (reward != 1) return mask;  // only reward-1 responses carry MPTs
  for (Eigen::Index i = 0; i < chosen_probs.size(); ++i)
    if (chosen_probs(i) >= tau) mask[static_cast<std::size_t>(i)] = 1;
  return mask;
}

double response_mean_entropy(const Trajectory& traj, const PolicyParams& params) {
  const TokenSeq resp = traj.response();
  if (resp.empty()) throw std::invalid_argument("response_mean_entropy: empty response");
  const ResponseScore score = score_response(params, traj.prompt_tokens, resp);
  return score.entropies.mean();
}

TokenMask dmmpt_mask(const TokenMask& mpts, double h_bar, double sigma) {
  if (h_bar < sigma) return mpts;
  return TokenMask(mpts.size(), 0);
}

double token_objective(double ratio, double advantage, double eps_low, double eps_high) {
  if (!(ratio > 0.0)) throw std::invalid_argument("token_objective: ratio must be > 0");
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct ScoredMember {
  const Trajectory* traj = nullptr;
  TokenSeq response;
  ResponseScore score;
  double advantage = 0.0;
  int reward = 0;
  TokenMask mpts;
  double h_bar = 0.0;
};

}  // namespace

std::optional<LossGrad> batch_loss_and_grad(const std::vector<Group>& groups,
                                            const PolicyParams& params, const TrainerConfig& cfg) {
  cfg.validate();
  if (groups.empty()) return std::nullopt;

  // Pass 1: score every response under the current policy. Needed up front
  // because the batch-mean entropy gate looks at the whole batch.
  std::vector<ScoredMember> batch;
  long total_tokens = 0;
  double entropy_token_sum = 0.0;
  for (const auto& g : groups) {
    if (g.filtered) throw std::logic_error("batch_loss_and_grad: filtered group in batch");
    if (g.advantages.size() != g.members.size())
      throw std::logic_error("batch_loss_and_grad: advantages not assigned");
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      ScoredMember m;
      m.traj = &g.members[i];
      m.response = m.traj->response();
      m.score = score_response(params, m.traj->prompt_tokens, m.response);
      m.advantage = g.advantages[i];
      m.reward = g.rewards.at(i);
      m.h_bar = m.score.entropies.mean();
      Vector mpt_probs;
      if (cfg.mpt_source == MptProbSource::TrainingPolicy)
        mpt_probs = m.score.chosen_probs;
      else
        mpt_probs = m.traj->gen_logprobs_concat().array().exp().matrix();
      m.mpts = identify_mpts(m.reward, mpt_probs, cfg.tau);
      total_tokens += static_cast<long>(m.response.size());
      entropy_token_sum += m.score.entropies.sum();
      batch.push_back(std::move(m));
    }
  }
  if (total_tokens == 0) throw std::logic_error("batch_loss_and_grad: empty responses");

  const double batch_mean_entropy = entropy_token_sum / static_cast<double>(total_tokens);

  LossGrad out;
  out.grad = Matrix::Zero(params.weights.rows(), params.weights.cols());
  out.stats.total_tokens = total_tokens;
  out.stats.mean_entropy = batch_mean_entropy;

  const double denom = static_cast<double>(total_tokens);
  double ratio_sum = 0.0;
  long unmasked = 0;

  for (const auto& m : batch) {
    TokenMask mask(m.mpts.size(), 0);
    switch (cfg.mask_mode) {
      case MaskMode::None: break;
      case MaskMode::Always: mask = m.mpts; break;
      case MaskMode::Dynamic: {
        const double gate_entropy =
            cfg.entropy_gate == EntropyGate::PerResponse ? m.h_bar : batch_mean_entropy;
        mask = dmmpt_mask(m.mpts, gate_entropy, cfg.sigma);
        break;
      }
    }

    const TokenRatios ratios = compute_ratios(*m.traj, m.score.logprobs, cfg.ratio_mode);
    TokenSeq context = m.traj->prompt_tokens;
    context.reserve(context.size() + m.response.size());

    for (std::size_t t = 0; t < m.response.size(); ++t) {
      const double r = ratios.values(static_cast<Eigen::Index>(t));
      if (mask[t]) {
        ++out.stats.masked_tokens;
        context.push_back(m.response[t]);
        continue;
      }
      ++unmasked;
      ratio_sum += r;
      out.stats.max_ratio_dev = std::max(out.stats.max_ratio_dev, std::abs(r - 1.0));

      out.objective += token_objective(r, m.advantage, cfg.eps_low, cfg.eps_high) / denom;

      // Gradient of min(r*A, clip(r)*A): zero where the clipped branch is
      // active and binding, A*r*grad_log_prob elsewhere.
      const bool clipped_binding = (r > 1.0 + cfg.eps_high && m.advantage > 0.0) ||
                                   (r < 1.0 - cfg.eps_low && m.advantage < 0.0);
      if (clipped_binding) {
        ++out.stats.clipped_tokens;
      } else {
        add_scaled_grad_log_prob(out.grad, params, context, m.response[t],
                                 m.advantage * r / denom);
      }
      context.push_back(m.response[t]);
    }
  }

  out.stats.masked_fraction =
      static_cast<double>(out.stats.masked_tokens) / static_cast<double>(total_tokens);
  out.stats.clip_fraction =
      unmasked > 0 ? static_cast<double>(out.stats.clipped_tokens) / static_cast<double>(unmasked)
                   : 0.0;
  out.stats.mean_ratio = unmasked > 0 ? ratio_sum / static_cast<double>(unmasked) : 0.0;
  return out;
}

PolicyParams apply_update(const PolicyParams& params, const Matrix& grad, const TrainerConfig& cfg,
                          AdamState& state) {
  if (!grad.allFinite()) throw NumericError("apply_update: non-finite gradient");
  if (state.t == 0) {
    state.m = Matrix::Zero(params.weights.rows(), params.weights.cols());
    state.v = Matrix::Zero(params.weights.rows(), params.weights.cols());
  }
  ++state.t;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad;
  state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));

  PolicyParams next = params;
  const Matrix m_hat = state.m / bias1;
  const Matrix v_hat = state.v / bias2;
  // ascent on the objective, decoupled decay toward zero
  next.weights -= cfg.learning_rate * cfg.weight_decay * params.weights;
  next.weights.array() +=
      cfg.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps);
  if (!next.weights.allFinite()) throw NumericError("apply_update: non-finite weights");
  next.version = params.version + 1;
  return next;
}

}  // namespace segrl
