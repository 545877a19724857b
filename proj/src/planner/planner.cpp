#include "icprl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "icprl/errors.hpp"
#include "icprl/tokens.hpp"

namespace icprl::planner {

namespace {

bool failed_before(const History& history, const EnvAction& a) {
  for (const auto& t : history.attempts())
    if (t.action && *t.action == a && t.reward == 0) return true;
  return false;
}

Candidates from_samples(const std::vector<EnvAction>& valid) {
  Candidates c;
  std::vector<int> counts;
  for (const auto& a : valid) {
    auto it = std::find(c.actions.begin(), c.actions.end(), a);
    if (it == c.actions.end()) {
      c.actions.push_back(a);
      counts.push_back(1);
    } else {
      ++counts[it - c.actions.begin()];
    }
  }
  c.valid_samples = static_cast<int>(valid.size());
  for (int n : counts) c.prior.push_back(static_cast<double>(n) / static_cast<double>(valid.size()));
  return c;
}

}  // namespace

SearchState SearchState::fresh(std::vector<EnvAction> actions, std::vector<double> prior) {
  if (actions.empty()) throw UsageError("search needs at least one candidate");
  if (prior.size() != actions.size()) throw UsageError("prior and candidate counts differ");
  SearchState s;
  s.visits.assign(actions.size(), 0);
  s.q.assign(actions.size(), 0.0);
  s.actions = std::move(actions);
  s.prior = std::move(prior);
  return s;
}

EnvAction random_legal_action(const sim::Observation& obs, Rng& rng) {
  if (obs.env == EnvKind::GridDrop) {
    return GridPlace::from_dense_index(uniform_int(rng, kGridActionCount));
  }
  std::vector<int> removable;
  for (const auto& a : obs.annotations)
    if (a.role == sim::Role::RemovableBlock && a.element_id < kMaxBodyIndex) removable.push_back(a.element_id);
  std::vector<TimedEvent> events;
  for (int id : removable) {
    if (static_cast<int>(events.size()) >= kMaxEvents) break;
    const int slot = uniform_int(rng, 12);  // 0..10 on the lattice, 11 = keep
    if (slot <= 10) events.push_back(TimedEvent{id, slot});
  }
  return EventSeq(std::move(events));
}

Candidates generate_candidates(const policy::PolicyParams& policy, const sim::Observation& obs,
                               const History& history, const PlannerConfig& config, std::uint64_t seed) {
  if (config.samples < 1) throw UsageError("candidate sample count must be at least 1");
  const TokenSeq ctx_seq = build_context(history, obs);
  const policy::Context ctx{obs.features, ctx_seq.tokens};
  std::vector<EnvAction> valid;
  int excluded = 0;
  for (int i = 0; i < config.samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto s = policy::sample_sequence(policy, ctx, config.temperature, config.top_p, rng);
    if (s.truncated) continue;
    try {
      EnvAction a = decode_action(obs.env, s.tokens);
      if (config.exclude_failed && failed_before(history, a)) {
        ++excluded;
        continue;
      }
      valid.push_back(std::move(a));
    } catch (const DecodeError&) {
    }
  }
  if (!valid.empty()) {
    Candidates c = from_samples(valid);
    c.excluded_samples = excluded;
    return c;
  }
  Candidates c;
  c.excluded_samples = excluded;
  const auto greedy = policy::sample_sequence(policy, ctx, 0.0, 1.0, seed);
  try {
    if (!greedy.truncated) {
      EnvAction a = decode_action(obs.env, greedy.tokens);
      if (!(config.exclude_failed && failed_before(history, a))) {
        c.actions = {a};
        c.prior = {1.0};
        c.fallback = "greedy";
        return c;
      }
    }
  } catch (const DecodeError&) {
  }
  Rng rng(derive_seed(seed, 0xfa11));
  EnvAction a = random_legal_action(obs, rng);
  for (int tries = 0; tries < 1000 && config.exclude_failed && failed_before(history, a); ++tries) {
    a = random_legal_action(obs, rng);
  }
  c.actions = {a};
  c.prior = {1.0};
  c.fallback = "random";
  return c;
}

int puct_select(const SearchState& s, double c_puct) {
  if (s.actions.empty()) throw UsageError("puct_select on an empty candidate set");
  int n_tot = 0;
  for (int n : s.visits) n_tot += n;
  const double root = std::sqrt(static_cast<double>(n_tot));
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    const double u = s.q[i] + c_puct * s.prior[i] * root / (1.0 + s.visits[i]);
    if (u > best_value) {
      best_value = u;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void update_stats(SearchState& s, int index, double v) {
  auto& q = s.q.at(index);
  auto& n = s.visits.at(index);
  q = (q * n + v) / (n + 1);
  ++n;
}

Score score(int strategy, const wm::WMParams& model, const sim::Observation& obs, const EnvAction& action,
            const PlannerConfig& config, std::uint64_t seed) {
  if (strategy == 1) {
    const double p = wm::predict(model, obs, action).p_succ;
    const double stab = wm::stability_score(model, obs.features, action, config.neighbors, seed);
    return Score{wm::strategy1_value(p, stab, config.lambda_puct), p};
  }
  if (strategy == 2) {
    const auto l = wm::lcb_score(model, obs.features, action, config.passes, config.lambda_lcb, seed);
    return Score{l.score, l.mean};
  }
  throw UsageError("strategy must be 1 or 2");
}

std::string q_hash(const SearchState& s) {
  std::uint64_t h = 1469598103934665603ULL;
  char buf[64];
  for (std::size_t i = 0; i < s.q.size(); ++i) {
    const int n = std::snprintf(buf, sizeof buf, "%a:%d;", s.q[i], s.visits[i]);
    for (int k = 0; k < n; ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ULL;
    }
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PlanResult search(SearchState state, const Scorer& scorer, const PlannerConfig& config, std::uint64_t seed) {
  if (config.budget < 1) throw UsageError("planning budget must be at least 1");
  PlanResult out;
  std::map<int, Score> memo;
  out.stop_reason = "budget";
  for (int t = 1; t <= config.budget; ++t) {
    int n_tot = 0;
    for (int n : state.visits) n_tot += n;
    int pick = puct_select(state, config.c_puct);
    if (config.cold_start_uniform_first_pick && n_tot == 0) {
      pick = static_cast<int>(std::max_element(state.prior.begin(), state.prior.end()) - state.prior.begin());
    }
    TraceEntry e;
    e.iteration = t;
    e.selected = pick;
    e.action = state.actions[pick].to_string();

    state.n_same = pick == state.last ? state.n_same + 1 : 1;
    if (state.n_same >= config.stop_repeat) {
      e.q_hash = q_hash(state);
      e.stop = out.stop_reason = "repeat";
      out.trace.push_back(e);
      break;
    }
    state.last = pick;

    Score sc;
    try {
      auto it = memo.find(pick);
      if (it != memo.end()) {
        sc = it->second;
        e.cached = true;
      } else {
        sc = scorer(state.actions[pick], derive_seed(seed, static_cast<std::uint64_t>(pick)));
        ++out.score_calls;
        memo.emplace(pick, sc);
      }
    } catch (const Error& err) {
      e.q_hash = q_hash(state);
      e.stop = std::string("error: ") + err.what();
      out.trace.push_back(e);
      continue;
    }
    e.scored = true;
    e.v = sc.v;
    e.mu = sc.mu;
    update_stats(state, pick, sc.v);
    e.q_hash = q_hash(state);
    if (sc.mu > config.stop_threshold) {
      e.stop = out.stop_reason = "confident";
      out.trace.push_back(e);
      break;
    }
    out.trace.push_back(e);
  }
  if (out.stop_reason == "budget" && !out.trace.empty()) out.trace.back().stop = "budget";
  const int best = static_cast<int>(std::max_element(state.q.begin(), state.q.end()) - state.q.begin());
  out.action = state.actions[best];
  out.state = std::move(state);
  return out;
}

PlanResult plan(const sim::Observation& obs, const History& history, const policy::PolicyParams& policy,
                const wm::WMParams& model, const PlannerConfig& config, std::uint64_t seed) {
  Candidates cands = generate_candidates(policy, obs, history, config, derive_seed(seed, 1));
  SearchState state = SearchState::fresh(cands.actions, cands.prior);
  const Scorer scorer = [&](const EnvAction& a, std::uint64_t s) {
    return score(config.strategy, model, obs, a, config, s);
  };
  PlanResult r = search(std::move(state), scorer, config, derive_seed(seed, 2));
  r.candidates = std::move(cands);
  return r;
}

std::string to_line(const TraceEntry& e) {
  nlohmann::ordered_json j;
  j["iteration"] = e.iteration;
  j["selected"] = e.selected;
  j["action"] = e.action;
  j["scored"] = e.scored;
  j["cached"] = e.cached;
  j["v"] = e.v;
  j["mu"] = e.mu;
  j["q_hash"] = e.q_hash;
  j["stop"] = e.stop;
  return j.dump();
}

}  // namespace icprl::planner
