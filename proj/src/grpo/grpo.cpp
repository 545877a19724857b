#include "icprl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "icprl/errors.hpp"
#include "icprl/rng.hpp"

namespace icprl::grpo {

namespace {

constexpr int V = tok::kVocabSize;

int attempt_reward(const sim::Task& task, const std::vector<int>& generated, std::string& label) {
  try {
    const EnvAction action = decode_action(task.scene.env, generated);
    label = action.to_string();
    return sim::run_outcome(task.scene, action) ? 1 : 0;
  } catch (const DecodeError&) {
    label = "invalid";
  } catch (const InvalidAction&) {
  } catch (const SimulationDiverged&) {
  }
  return 0;
}

}  // namespace

GroupBatch collect_group(const sim::Task& task, const History& history, const policy::PolicyParams& params,
                         const GrpoConfig& config, std::uint64_t seed) {
  if (config.group_size < 2) throw UsageError("group size must be at least 2");
  if (config.attempts < 1) throw UsageError("attempt limit must be at least 1");
  if (history.size() + config.attempts - 1 > history.max_context()) {
    throw UsageError("history window too small for the requested attempt count");
  }
  const sim::Observation obs = sim::render_observation(task.scene);
  const TokenSeq prefix = build_context(history, obs);

  GroupBatch batch;
  batch.task_id = task.id;
  batch.env = task.scene.env;
  batch.prefix_length = prefix.size();
  for (int i = 0; i < config.group_size; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Member m;
    m.features = obs.features;
    m.seq = prefix;
    m.old_logprobs.assign(prefix.size(), 0.0);
    for (int k = 0; k < config.attempts; ++k) {
      const policy::Context ctx{m.features, m.seq.tokens};
      auto sample = policy::sample_sequence(params, ctx, config.temperature, config.top_p, rng);
      std::string label = "invalid";
      const int reward = sample.truncated ? 0 : attempt_reward(task, sample.tokens, label);
      m.seq.push_turn(sample.tokens);
      m.old_logprobs.insert(m.old_logprobs.end(), sample.logprobs.begin(), sample.logprobs.end());
      m.seq.push(outcome_token(reward), false);
      m.old_logprobs.push_back(0.0);
      m.rewards.push_back(reward);
      m.actions.push_back(label);
      if (reward > 0) break;
    }
    batch.members.push_back(std::move(m));
  }
  assign_advantages(batch, config);
  return batch;
}

std::vector<double> turn_returns(const std::vector<double>& rewards, double gamma_turn) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma_turn * acc;
    out[k] = acc;
  }
  return out;
}

std::vector<double> turn_returns(const std::vector<int>& rewards, double gamma_turn) {
  return turn_returns(std::vector<double>(rewards.begin(), rewards.end()), gamma_turn);
}

Matrix group_advantages(const Matrix& returns) {
  std::vector<std::vector<bool>> present;
  for (const auto& row : returns) present.emplace_back(row.size(), true);
  return group_advantages(returns, present);
}

Matrix group_advantages(const Matrix& returns, const std::vector<std::vector<bool>>& present) {
  Matrix adv;
  std::size_t width = 0;
  for (const auto& row : returns) {
    adv.emplace_back(row.size(), 0.0);
    width = std::max(width, row.size());
  }
  for (std::size_t k = 0; k < width; ++k) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
      if (k < returns[i].size() && present[i][k]) {
        sum += returns[i][k];
        ++n;
      }
    }
    if (n < 2) continue;
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
      if (k < returns[i].size() && present[i][k]) ss += (returns[i][k] - mean) * (returns[i][k] - mean);
    }
    const double sd = std::sqrt(ss / n);
    // Spread below rounding noise of the mean counts as a constant column.
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) continue;
    for (std::size_t i = 0; i < returns.size(); ++i) {
      if (k < returns[i].size() && present[i][k]) adv[i][k] = (returns[i][k] - mean) / sd;
    }
  }
  return adv;
}

void assign_advantages(GroupBatch& batch, const GrpoConfig& config) {
  Matrix returns;
  std::vector<std::vector<bool>> present;
  for (const auto& m : batch.members) {
    returns.push_back(turn_returns(m.rewards, config.gamma_turn));
    present.emplace_back(m.rewards.size(), true);
  }
  batch.advantages = group_advantages(returns, present);
}

Objective grpo_objective(const GroupBatch& batch, const policy::PolicyParams& params,
                         const policy::RefPolicy& ref, const GrpoConfig& config, bool with_gradient) {
  const auto& rp = ref.params();
  if (rp.feature_dim() != params.feature_dim() || rp.hidden_dim() != params.hidden_dim()) {
    throw UsageError("reference policy shape differs from the trained policy");
  }
  Objective out;
  if (with_gradient) out.gradient.assign(params.size(), 0.0);
  const double G = static_cast<double>(batch.members.size());
  std::vector<double> dlogits(V);
  double kl_sum = 0.0;
  std::size_t clipped = 0;

  for (std::size_t i = 0; i < batch.members.size(); ++i) {
    const Member& m = batch.members[i];
    const auto proj = policy::project_features(params, m.features);
    const auto ref_proj = policy::project_features(rp, m.features);
    std::vector<double> dproj(params.hidden_dim(), 0.0);
    const std::span<const int> all(m.seq.tokens);

    for (std::size_t k = 0; k < m.seq.turns.size(); ++k) {
      const auto [s, e] = m.seq.turns[k];
      std::size_t count = 0;
      for (std::size_t p = s; p < e; ++p) count += m.seq.loss_mask[p];
      if (count == 0) continue;
      const double w = 1.0 / (G * static_cast<double>(count));
      const double A = batch.advantages.at(i).at(k);

      for (std::size_t pos = s; pos < e; ++pos) {
        if (!m.seq.loss_mask[pos]) continue;
        const int a = m.seq.tokens[pos];
        const auto fw = policy::forward(params, proj, all.first(pos));
        const auto fr = policy::forward(rp, ref_proj, all.first(pos));
        if (!fw.legal[a]) throw DecodeError("generated token " + tok::name(a) + " is illegal in its context");

        const double ratio = std::exp(fw.logprobs[a] - m.old_logprobs[pos]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
        const double unclipped_term = ratio * A;
        const double clipped_term = clipped_ratio * A;
        const bool use_unclipped = unclipped_term <= clipped_term;
        const double surrogate = use_unclipped ? unclipped_term : clipped_term;
        if (!use_unclipped) ++clipped;

        double kl = 0.0;
        for (int v = 0; v < V; ++v) {
          if (fw.probs[v] > 0.0) kl += fw.probs[v] * (fw.logprobs[v] - fr.logprobs[v]);
        }
        const double term = surrogate - config.beta * kl;
        if (!std::isfinite(term)) {
          throw NumericError("non-finite objective term at token " + std::to_string(pos) + " of member " +
                                 std::to_string(i),
                             static_cast<long>(pos));
        }
        out.value += w * term;
        kl_sum += kl;
        out.max_ratio_error = std::max(out.max_ratio_error, std::fabs(ratio - 1.0));
        ++out.tokens;

        if (!with_gradient) continue;
        const double coef = use_unclipped ? A * ratio : 0.0;
        for (int v = 0; v < V; ++v) {
          if (!fw.legal[v]) {
            dlogits[v] = 0.0;
            continue;
          }
          const double p = fw.probs[v];
          const double d_surr = coef * ((v == a ? 1.0 : 0.0) - p);
          const double d_kl = p * (fw.logprobs[v] - fr.logprobs[v] - kl);
          dlogits[v] = w * (d_surr - config.beta * d_kl);
        }
        policy::backward(params, fw, dlogits, out.gradient, dproj);
      }
    }
    if (with_gradient) policy::backward_projection(params, m.features, dproj, out.gradient);
  }
  if (out.tokens > 0) {
    out.mean_kl = kl_sum / static_cast<double>(out.tokens);
    out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(out.tokens);
  }
  return out;
}

StepMetrics train_step(policy::PolicyParams& params, const policy::RefPolicy& ref,
                       const std::vector<sim::Task>& tasks, const GrpoConfig& config, std::uint64_t seed,
                       int iteration) {
  if (tasks.empty()) throw UsageError("train_step needs at least one task");
  std::vector<std::size_t> chosen(tasks.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (config.tasks_per_step > 0 && static_cast<std::size_t>(config.tasks_per_step) < tasks.size()) {
    Rng rng(derive_seed(seed, 0x7a5c));
    for (std::size_t i = 0; i < static_cast<std::size_t>(config.tasks_per_step); ++i) {
      std::swap(chosen[i], chosen[i + uniform_int(rng, static_cast<int>(tasks.size() - i))]);
    }
    chosen.resize(config.tasks_per_step);
  }

  std::vector<GroupBatch> groups;
  StepMetrics metrics;
  metrics.iteration = iteration;
  std::size_t attempts = 0, members = 0;
  double reward_sum = 0.0, solved = 0.0;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    const auto& task = tasks[chosen[j]];
    groups.push_back(collect_group(task, History(task.id), params, config, derive_seed(seed, 1 + j)));
    for (const auto& m : groups.back().members) {
      for (int r : m.rewards) reward_sum += r;
      attempts += m.rewards.size();
      solved += m.solved() ? 1.0 : 0.0;
      ++members;
    }
  }
  metrics.mean_reward = attempts ? reward_sum / static_cast<double>(attempts) : 0.0;
  metrics.solve_rate = members ? solved / static_cast<double>(members) : 0.0;

  const double inv = 1.0 / static_cast<double>(groups.size());
  for (int epoch = 0; epoch < std::max(1, config.epochs); ++epoch) {
    std::vector<double> grad(params.size(), 0.0);
    double value = 0.0, kl = 0.0, clip = 0.0;
    for (const auto& g : groups) {
      const Objective obj = grpo_objective(g, params, ref, config);
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += inv * obj.gradient[p];
      value += inv * obj.value;
      kl += inv * obj.mean_kl;
      clip += inv * obj.clip_fraction;
    }
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    norm = std::sqrt(norm);
    double scale = config.learning_rate;
    if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) scale *= config.max_grad_norm / norm;
    auto& w = params.values();
    for (std::size_t p = 0; p < w.size(); ++p) w[p] += scale * grad[p];
    if (epoch == 0) {
      metrics.objective = value;
      metrics.kl = kl;
      metrics.clip_fraction = clip;
      metrics.grad_norm = norm;
    }
  }
  return metrics;
}

std::string to_line(const StepMetrics& m) {
  nlohmann::json j = {{"iteration", m.iteration},     {"J", m.objective},
                      {"kl", m.kl},                   {"clip_fraction", m.clip_fraction},
                      {"mean_reward", m.mean_reward}, {"solve_rate", m.solve_rate},
                      {"grad_norm", m.grad_norm}};
  return j.dump();
}

}  // namespace icprl::grpo
