#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icprl/action.hpp"
#include "icprl/sim.hpp"
#include "icprl/tokens.hpp"

namespace icprl {

/// Token stream with a per-token loss mask (1 on agent-generated tokens) and
/// one [start, end) boundary pair per generated turn.
struct TokenSeq {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::pair<std::size_t, std::size_t>> turns;

  std::size_t size() const { return tokens.size(); }
  void push(int token, bool generated);
  /// Appends a generated turn and records its boundary.
  void push_turn(const std::vector<int>& generated);
  std::size_t masked_count() const;
  bool operator==(const TokenSeq&) const = default;
};

/// One attempt: the observation it started from, what was generated, what it
/// decoded to (empty when the generation was malformed) and the binary reward.
struct Trajectory {
  std::vector<sim::Observation> observations;
  std::optional<EnvAction> action;
  std::vector<int> generated;
  std::vector<double> old_logprobs;  // per generated token, under the sampling-time policy
  int reward = 0;
};

/// Failed attempts on one task instance, oldest first. Value type: with()
/// returns a new history and leaves this one untouched.
class History {
 public:
  static constexpr std::size_t kDefaultMaxContext = 9;

  History() = default;
  explicit History(std::string task_id, std::size_t max_context = kDefaultMaxContext)
      : task_id_(std::move(task_id)), max_context_(max_context) {}

  const std::string& task_id() const { return task_id_; }
  std::size_t max_context() const { return max_context_; }
  const std::vector<Trajectory>& attempts() const { return attempts_; }
  std::size_t size() const { return attempts_.size(); }
  bool empty() const { return attempts_.empty(); }

  History with(Trajectory attempt) const;

 private:
  std::string task_id_;
  std::size_t max_context_ = kDefaultMaxContext;
  std::vector<Trajectory> attempts_;
};

struct EpisodeRecord {
  std::string task_id;
  int attempts_used = 0;
  bool solved = false;
  std::vector<int> outcomes;         // reward per attempt
  std::vector<std::string> actions;  // executed action per attempt ("invalid" if malformed)
  std::uint64_t seed = 0;
};

/// Context for the next generation: OBS, then for each of the most recent
/// max_context attempts its action tokens followed by its outcome token.
/// Every token is context (mask 0); no turn boundaries are recorded.
TokenSeq build_context(const History& history, const sim::Observation& obs);

/// Outcome token for a reward.
inline int outcome_token(int reward) { return reward > 0 ? tok::kSuccess : tok::kFail; }

/// Full multi-turn training sequence for an episode: OBS, then per attempt its
/// generated tokens (mask 1, one turn boundary each) and an outcome token
/// (mask 0).
TokenSeq episode_sequence(const std::vector<Trajectory>& attempts);

// ---------------------------------------------------------------------------
// Line-delimited persistence (one JSON object per line).

struct TrajectoryLine {
  std::string task_id;
  TokenSeq seq;
  std::string action;
  int reward = 0;
  std::uint64_t seed = 0;
  bool operator==(const TrajectoryLine&) const = default;
};

std::string to_line(const TrajectoryLine& rec);
TrajectoryLine trajectory_from_line(const std::string& line);
std::string to_line(const EpisodeRecord& rec);
EpisodeRecord episode_from_line(const std::string& line);

}  // namespace icprl
