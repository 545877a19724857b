#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "icprl/episode.hpp"
#include "icprl/policy.hpp"
#include "icprl/worldmodel.hpp"

namespace icprl::planner {

struct PlannerConfig {
  int samples = 32;   // S
  int budget = 32;    // B
  double c_puct = 1.5;
  double lambda_puct = 0.25;
  int neighbors = 12;  // J
  int passes = 8;      // K (LCB)
  double lambda_lcb = 0.2;
  int strategy = 1;
  double stop_threshold = 0.8;
  int stop_repeat = 3;
  bool cold_start_uniform_first_pick = false;
  // Candidate sampling from the policy.
  double temperature = 1.0;
  double top_p = 1.0;
  /// Drop candidates identical to an action that already failed in the history.
  bool exclude_failed = true;
};

struct SearchState {
  std::vector<EnvAction> actions;  // unique, in order of first appearance
  std::vector<double> prior;
  std::vector<int> visits;
  std::vector<double> q;
  int last = -1;
  int n_same = 0;

  std::size_t size() const { return actions.size(); }
  /// Zeroed statistics over the given candidates and prior.
  static SearchState fresh(std::vector<EnvAction> actions, std::vector<double> prior);
};

struct Candidates {
  std::vector<EnvAction> actions;
  std::vector<double> prior;  // count / number of valid samples
  int valid_samples = 0;
  int excluded_samples = 0;   // valid samples dropped by the history filter
  std::string fallback;       // "", "greedy" or "random"
};

/// S policy samples from build_context(history, obs); malformed decodes are
/// dropped. Falls back to the greedy decode, then to a seeded uniform legal action.
Candidates generate_candidates(const policy::PolicyParams& policy, const sim::Observation& obs,
                               const History& history, const PlannerConfig& config, std::uint64_t seed);

/// A uniformly random legal action for the observation's environment.
EnvAction random_legal_action(const sim::Observation& obs, Rng& rng);

/// argmax_a Q(a) + c * P(a) * sqrt(N_tot) / (1 + N(a)); first index wins ties.
int puct_select(const SearchState& state, double c_puct);

void update_stats(SearchState& state, int index, double v);

struct Score {
  double v = 0.0;
  double mu = 0.0;  // p_succ (strategy 1) or mean over temperatures (strategy 2)
};

/// Scoring function used by plan; swappable for tests.
using Scorer = std::function<Score(const EnvAction& action, std::uint64_t seed)>;

Score score(int strategy, const wm::WMParams& model, const sim::Observation& obs, const EnvAction& action,
            const PlannerConfig& config, std::uint64_t seed);

struct TraceEntry {
  int iteration = 0;
  int selected = -1;
  std::string action;
  double v = 0.0;
  double mu = 0.0;
  bool scored = false;
  bool cached = false;
  std::string q_hash;
  std::string stop;  // "", "repeat", "confident", "budget", or "error: ..."
};

struct PlanResult {
  EnvAction action;
  SearchState state;
  std::vector<TraceEntry> trace;
  std::string stop_reason;
  int score_calls = 0;
  Candidates candidates;
};

/// Root-node PUCT over a prepared state.
PlanResult search(SearchState state, const Scorer& scorer, const PlannerConfig& config, std::uint64_t seed);

/// Candidates from the policy, then search with the world model.
PlanResult plan(const sim::Observation& obs, const History& history, const policy::PolicyParams& policy,
                const wm::WMParams& model, const PlannerConfig& config, std::uint64_t seed);

std::string q_hash(const SearchState& state);
std::string to_line(const TraceEntry& entry);

}  // namespace icprl::planner
