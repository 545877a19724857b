#include "icprl/episode.hpp"

#include <json.hpp>

#include "icprl/errors.hpp"

namespace icprl {

using nlohmann::json;

void TokenSeq::push(int token, bool generated) {
  tokens.push_back(token);
  loss_mask.push_back(generated ? 1 : 0);
}

void TokenSeq::push_turn(const std::vector<int>& generated) {
  const std::size_t start = tokens.size();
  for (int t : generated) push(t, true);
  turns.emplace_back(start, tokens.size());
}

std::size_t TokenSeq::masked_count() const {
  std::size_t n = 0;
  for (auto m : loss_mask) n += m;
  return n;
}

History History::with(Trajectory attempt) const {
  History next = *this;
  next.attempts_.push_back(std::move(attempt));
  return next;
}

TokenSeq build_context(const History& history, const sim::Observation& /*obs*/) {
  TokenSeq seq;
  seq.push(tok::kObs, false);
  const auto& attempts = history.attempts();
  const std::size_t first =
      attempts.size() > history.max_context() ? attempts.size() - history.max_context() : 0;
  for (std::size_t i = first; i < attempts.size(); ++i) {
    for (int t : attempts[i].generated) seq.push(t, false);
    seq.push(outcome_token(attempts[i].reward), false);
  }
  return seq;
}

TokenSeq episode_sequence(const std::vector<Trajectory>& attempts) {
  TokenSeq seq;
  seq.push(tok::kObs, false);
  for (const auto& a : attempts) {
    seq.push_turn(a.generated);
    seq.push(outcome_token(a.reward), false);
  }
  return seq;
}

std::string to_line(const TrajectoryLine& rec) {
  json turns = json::array();
  for (const auto& [s, e] : rec.seq.turns) turns.push_back({s, e});
  json j = {{"task_id", rec.task_id},          {"tokens", rec.seq.tokens}, {"mask", rec.seq.loss_mask},
            {"turns", turns},                  {"action", rec.action},     {"reward", rec.reward},
            {"seed", rec.seed}};
  return j.dump();
}

TrajectoryLine trajectory_from_line(const std::string& line) {
  try {
    json j = json::parse(line);
    TrajectoryLine rec;
    rec.task_id = j.at("task_id").get<std::string>();
    rec.seq.tokens = j.at("tokens").get<std::vector<int>>();
    rec.seq.loss_mask = j.at("mask").get<std::vector<std::uint8_t>>();
    for (const auto& t : j.at("turns")) rec.seq.turns.emplace_back(t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>());
    rec.action = j.at("action").get<std::string>();
    rec.reward = j.at("reward").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    if (rec.seq.tokens.size() != rec.seq.loss_mask.size()) throw FormatError("tokens/mask length mismatch");
    return rec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad trajectory line: ") + e.what());
  }
}

std::string to_line(const EpisodeRecord& rec) {
  json j = {{"task_id", rec.task_id}, {"attempts_used", rec.attempts_used}, {"solved", rec.solved},
            {"outcomes", rec.outcomes}, {"actions", rec.actions},         {"seed", rec.seed}};
  return j.dump();
}

EpisodeRecord episode_from_line(const std::string& line) {
  try {
    json j = json::parse(line);
    EpisodeRecord rec;
    rec.task_id = j.at("task_id").get<std::string>();
    rec.attempts_used = j.at("attempts_used").get<int>();
    rec.solved = j.at("solved").get<bool>();
    rec.outcomes = j.at("outcomes").get<std::vector<int>>();
    rec.actions = j.at("actions").get<std::vector<std::string>>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    return rec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad episode line: ") + e.what());
  }
}

}  // namespace icprl
