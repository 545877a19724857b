#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "icprl/episode.hpp"
#include "icprl/policy.hpp"
#include "icprl/tasks.hpp"

namespace icprl::grpo {

struct GrpoConfig {
  double gamma_turn = 0.95;
  double gamma_token = 1.0;  // only 1.0 is supported: every token of a turn shares its advantage
  double clip_eps = 0.2;
  double beta = 0.001;
  int group_size = 8;
  int attempts = 10;          // K: attempts per member
  double learning_rate = 0.3;
  double temperature = 0.7;
  double top_p = 0.95;
  int epochs = 1;             // >1 reuses one collection for several updates
  int tasks_per_step = 0;     // 0: every task each step
  double max_grad_norm = 0.0; // 0: no rescaling
};

/// One sampled episode of a group.
struct Member {
  std::vector<double> features;
  TokenSeq seq;                      // shared prefix, then generated turns and outcome tokens
  std::vector<double> old_logprobs;  // per token of seq; only mask-1 entries are read
  std::vector<int> rewards;          // per turn
  std::vector<std::string> actions;  // per turn, "invalid" for undecodable generations
  bool solved() const { return !rewards.empty() && rewards.back() > 0; }
};

struct GroupBatch {
  std::string task_id;
  EnvKind env = EnvKind::GridDrop;
  std::size_t prefix_length = 0;  // tokens shared by every member before its first turn
  std::vector<Member> members;
  /// advantages[i][k] for member i, turn k; filled by assign_advantages.
  std::vector<std::vector<double>> advantages;
};

/// G members sampled from the same (task, history) state. Each member plays
/// up to config.attempts turns, stopping at its first success and feeding
/// its own failures back as history.
GroupBatch collect_group(const sim::Task& task, const History& history, const policy::PolicyParams& params,
                         const GrpoConfig& config, std::uint64_t seed);

/// R_k = sum_{l >= k} gamma^(l-k) r_l.
std::vector<double> turn_returns(const std::vector<int>& rewards, double gamma_turn);
std::vector<double> turn_returns(const std::vector<double>& rewards, double gamma_turn);

/// Column-wise standardisation with population std. present[i][k] == false
/// excludes an entry from its column statistics and gives it advantage 0.
/// Columns with fewer than two present entries or zero spread map to 0.
using Matrix = std::vector<std::vector<double>>;
Matrix group_advantages(const Matrix& returns);
Matrix group_advantages(const Matrix& returns, const std::vector<std::vector<bool>>& present);

/// Fills batch.advantages from member rewards.
void assign_advantages(GroupBatch& batch, const GrpoConfig& config);

struct Objective {
  double value = 0.0;
  std::vector<double> gradient;  // d value / d params
  double mean_kl = 0.0;          // per masked token
  double clip_fraction = 0.0;    // masked tokens whose clipped branch is the active minimum
  double max_ratio_error = 0.0;  // max |r - 1| over masked tokens
  std::size_t tokens = 0;
};

/// Masked clipped surrogate with per-turn normalisation and a per-token exact
/// KL penalty against ref, averaged over members. Reads batch.advantages.
/// Throws NumericError naming the first token with a non-finite term.
Objective grpo_objective(const GroupBatch& batch, const policy::PolicyParams& params,
                         const policy::RefPolicy& ref, const GrpoConfig& config, bool with_gradient = true);

struct StepMetrics {
  int iteration = 0;
  double objective = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double mean_reward = 0.0;  // mean reward per attempt
  double solve_rate = 0.0;   // fraction of members that solved their task
  double grad_norm = 0.0;
};

/// Collects one group per selected task, then takes config.epochs ascent
/// steps on the summed objective.
StepMetrics train_step(policy::PolicyParams& params, const policy::RefPolicy& ref,
                       const std::vector<sim::Task>& tasks, const GrpoConfig& config, std::uint64_t seed,
                       int iteration = 0);

std::string to_line(const StepMetrics& m);

}  // namespace icprl::grpo
