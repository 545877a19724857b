#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icprl/curation.hpp"
#include "icprl/episode.hpp"
#include "icprl/grpo.hpp"
#include "icprl/planner.hpp"
#include "icprl/policy.hpp"
#include "icprl/tasks.hpp"
#include "icprl/worldmodel.hpp"

namespace icprl::harness {

enum class AgentKind : std::uint8_t { Mock, PolicyOnly, Full };
std::string_view to_string(AgentKind kind);
AgentKind agent_from_string(std::string_view name);

struct Decision {
  std::optional<EnvAction> action;  // empty when the generation did not decode
  std::vector<int> tokens;
  std::vector<double> logprobs;
  std::vector<planner::TraceEntry> trace;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;
  virtual Decision act(const sim::Observation& obs, const History& history, std::uint64_t seed) const = 0;
};

/// Uniformly random legal actions.
class MockAgent final : public Agent {
 public:
  AgentKind kind() const override { return AgentKind::Mock; }
  Decision act(const sim::Observation& obs, const History& history, std::uint64_t seed) const override;
};

/// Samples one generation from the policy per attempt.
class PolicyAgent final : public Agent {
 public:
  PolicyAgent(policy::PolicyParams params, double temperature, double top_p)
      : params_(std::move(params)), temperature_(temperature), top_p_(top_p) {}
  AgentKind kind() const override { return AgentKind::PolicyOnly; }
  Decision act(const sim::Observation& obs, const History& history, std::uint64_t seed) const override;

 private:
  policy::PolicyParams params_;
  double temperature_;
  double top_p_;
};

/// Policy candidates re-ranked by world-model guided root search.
class FullAgent final : public Agent {
 public:
  FullAgent(policy::PolicyParams params, wm::WMParams model, planner::PlannerConfig config)
      : params_(std::move(params)), model_(std::move(model)), config_(config) {}
  AgentKind kind() const override { return AgentKind::Full; }
  Decision act(const sim::Observation& obs, const History& history, std::uint64_t seed) const override;

 private:
  policy::PolicyParams params_;
  wm::WMParams model_;
  planner::PlannerConfig config_;
};

/// Attempts until the first success or K; each failure joins the history.
/// Agent and simulator errors count as failed attempts.
EpisodeRecord run_episode(const sim::Task& task, const Agent& agent, int K, std::uint64_t seed,
                          std::vector<Trajectory>* attempts = nullptr);

inline const std::vector<int> kReportAttempts = {1, 4, 7, 10};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<double> success_rate;  // aligned with ResultsTable::attempts
  double avg_attempts = 0.0;         // over solved tasks; 0 if none solved
  int solved = 0;
  int tasks = 0;
};

struct ResultsTable {
  std::string label;
  std::vector<int> attempts = kReportAttempts;
  std::vector<RunResult> runs;
  std::vector<double> mean_success_rate;
  double mean_avg_attempts = 0.0;
};

/// Aggregates episode records of one run.
RunResult summarize(const std::vector<EpisodeRecord>& episodes, const std::vector<int>& attempts, std::uint64_t seed);
void finalize(ResultsTable& table);

struct RunConfig {
  EnvKind env = EnvKind::GridDrop;
  int task_count = 20;
  std::uint64_t task_seed = 1;
  std::string tasks_dir;  // overrides count/seed when set
  AgentKind agent = AgentKind::Mock;
  int K = 10;
  int runs = 3;
  std::uint64_t seed = 7;
  double policy_temperature = 0.7;
  double policy_top_p = 0.95;
  planner::PlannerConfig planner;
  std::string policy_checkpoint;
  std::vector<std::string> wm_checkpoints;
  std::string output_dir;
  grpo::GrpoConfig grpo;
  int train_iterations = 80;
  wm::TrainConfig wm_train;
  curation::CurationConfig curation;
};

std::string to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// $ICPRL_OUT_DIR, or "icprl-out".
std::string default_output_dir();

std::vector<sim::Task> load_or_generate_tasks(const RunConfig& config);

std::unique_ptr<Agent> make_agent(const RunConfig& config, const std::string& wm_checkpoint = "");

struct EvalOutput {
  ResultsTable table;
  std::vector<std::vector<EpisodeRecord>> episodes;  // per run, ordered by task id
};

/// runs x tasks episodes with run-derived seeds.
EvalOutput evaluate(const std::vector<sim::Task>& tasks, const Agent& agent, int K, int runs, std::uint64_t seed,
                    const std::string& label);

std::string table_json(const std::vector<ResultsTable>& tables, const RunConfig& config);
std::string render_table(const std::vector<ResultsTable>& tables);
/// results.json, table.txt and episodes.jsonl under dir.
void write_report(const std::filesystem::path& dir, const std::vector<EvalOutput>& outputs, const RunConfig& config);

/// GRPO training loop writing one metrics line per iteration to `metrics`.
policy::PolicyParams train_policy(const std::vector<sim::Task>& tasks, const grpo::GrpoConfig& config,
                                  int iterations, std::uint64_t seed, std::ostream* metrics = nullptr);

}  // namespace icprl::harness
