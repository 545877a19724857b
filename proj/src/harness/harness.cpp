#include "icprl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "icprl/errors.hpp"
#include "icprl/rng.hpp"

namespace icprl::harness {

using nlohmann::ordered_json;

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Mock: return "mock";
    case AgentKind::PolicyOnly: return "policy-only";
    case AgentKind::Full: return "full";
  }
  return "mock";
}

AgentKind agent_from_string(std::string_view name) {
  if (name == "mock") return AgentKind::Mock;
  if (name == "policy-only" || name == "policy") return AgentKind::PolicyOnly;
  if (name == "full") return AgentKind::Full;
  throw UsageError("unknown agent '" + std::string(name) + "' (expected mock|policy-only|full)");
}

Decision MockAgent::act(const sim::Observation& obs, const History&, std::uint64_t seed) const {
  Rng rng(seed);
  Decision d;
  d.action = planner::random_legal_action(obs, rng);
  d.tokens = encode_action(*d.action);
  return d;
}

Decision PolicyAgent::act(const sim::Observation& obs, const History& history, std::uint64_t seed) const {
  const TokenSeq ctx = build_context(history, obs);
  const auto s = policy::sample_sequence(params_, {obs.features, ctx.tokens}, temperature_, top_p_, seed);
  Decision d;
  d.tokens = s.tokens;
  d.logprobs = s.logprobs;
  if (!s.truncated) {
    try {
      d.action = decode_action(obs.env, s.tokens);
    } catch (const DecodeError&) {
    }
  }
  return d;
}

Decision FullAgent::act(const sim::Observation& obs, const History& history, std::uint64_t seed) const {
  auto r = planner::plan(obs, history, params_, model_, config_, seed);
  Decision d;
  d.action = r.action;
  d.tokens = encode_action(r.action);
  d.trace = std::move(r.trace);
  return d;
}

EpisodeRecord run_episode(const sim::Task& task, const Agent& agent, int K, std::uint64_t seed,
                          std::vector<Trajectory>* attempts) {
  if (K < 1) throw UsageError("attempt limit K must be at least 1");
  EpisodeRecord rec;
  rec.task_id = task.id;
  rec.seed = seed;
  const sim::Observation obs = sim::render_observation(task.scene);
  History history(task.id, std::max<std::size_t>(History::kDefaultMaxContext, static_cast<std::size_t>(K - 1)));
  for (int k = 1; k <= K; ++k) {
    Trajectory t;
    t.observations = {obs};
    try {
      Decision d = agent.act(obs, history, derive_seed(seed, static_cast<std::uint64_t>(k)));
      t.generated = std::move(d.tokens);
      t.old_logprobs = std::move(d.logprobs);
      t.action = std::move(d.action);
      if (t.action) t.reward = sim::run_outcome(task.scene, *t.action) ? 1 : 0;
    } catch (const Error&) {
      t.reward = 0;
    }
    rec.attempts_used = k;
    rec.outcomes.push_back(t.reward);
    rec.actions.push_back(t.action ? t.action->to_string() : "invalid");
    if (attempts) attempts->push_back(t);
    if (t.reward > 0) {
      rec.solved = true;
      break;
    }
    history = history.with(std::move(t));
  }
  return rec;
}

RunResult summarize(const std::vector<EpisodeRecord>& episodes, const std::vector<int>& attempts,
                    std::uint64_t seed) {
  RunResult r;
  r.seed = seed;
  r.tasks = static_cast<int>(episodes.size());
  double att = 0.0;
  for (const auto& e : episodes) {
    if (!e.solved) continue;
    ++r.solved;
    att += e.attempts_used;
  }
  r.avg_attempts = r.solved ? att / r.solved : 0.0;
  for (int n : attempts) {
    int s = 0;
    for (const auto& e : episodes) s += e.solved && e.attempts_used <= n;
    r.success_rate.push_back(r.tasks ? static_cast<double>(s) / r.tasks : 0.0);
  }
  return r;
}

void finalize(ResultsTable& t) {
  t.mean_success_rate.assign(t.attempts.size(), 0.0);
  t.mean_avg_attempts = 0.0;
  if (t.runs.empty()) return;
  for (const auto& r : t.runs) {
    for (std::size_t i = 0; i < t.attempts.size(); ++i) t.mean_success_rate[i] += r.success_rate[i];
    t.mean_avg_attempts += r.avg_attempts;
  }
  for (double& v : t.mean_success_rate) v /= static_cast<double>(t.runs.size());
  t.mean_avg_attempts /= static_cast<double>(t.runs.size());
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_json(const RunConfig& c) {
  ordered_json j;
  j["env"] = to_string(c.env);
  j["tasks"] = {{"count", c.task_count}, {"seed", c.task_seed}, {"dir", c.tasks_dir}};
  j["agent"] = to_string(c.agent);
  j["K"] = c.K;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["policy"] = {{"checkpoint", c.policy_checkpoint},
                 {"temperature", c.policy_temperature},
                 {"top_p", c.policy_top_p}};
  j["wm_checkpoints"] = c.wm_checkpoints;
  const auto& p = c.planner;
  j["planner"] = {{"samples", p.samples},
                  {"budget", p.budget},
                  {"c_puct", p.c_puct},
                  {"lambda_puct", p.lambda_puct},
                  {"neighbors", p.neighbors},
                  {"passes", p.passes},
                  {"lambda_lcb", p.lambda_lcb},
                  {"strategy", p.strategy},
                  {"stop_threshold", p.stop_threshold},
                  {"stop_repeat", p.stop_repeat},
                  {"cold_start_uniform_first_pick", p.cold_start_uniform_first_pick},
                  {"temperature", p.temperature},
                  {"top_p", p.top_p},
                  {"exclude_failed", p.exclude_failed}};
  const auto& g = c.grpo;
  j["grpo"] = {{"gamma_turn", g.gamma_turn},
               {"clip_eps", g.clip_eps},
               {"beta", g.beta},
               {"group_size", g.group_size},
               {"attempts", g.attempts},
               {"learning_rate", g.learning_rate},
               {"temperature", g.temperature},
               {"top_p", g.top_p},
               {"epochs", g.epochs},
               {"tasks_per_step", g.tasks_per_step},
               {"max_grad_norm", g.max_grad_norm},
               {"iterations", c.train_iterations}};
  const auto& w = c.wm_train;
  j["wm_train"] = {{"epochs", w.epochs},
                   {"batch_size", w.batch_size},
                   {"learning_rate", w.learning_rate},
                   {"weight_decay", w.weight_decay},
                   {"lambda_text", w.lambda_text},
                   {"hidden_dim", w.hidden_dim},
                   {"seed", w.seed}};
  j["curation"] = {{"diversity", c.curation.diversity},
                   {"max_iterations", c.curation.max_iterations},
                   {"seed", c.curation.seed},
                   {"labeler", curation::to_string(c.curation.labeler)}};
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

namespace {

// Reads one JSON object; every key must be consumed, otherwise finish() throws.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError("config: '" + path_ + "' must be a JSON object");
  }
  template <typename T>
  void take(const std::string& key, T& out) {
    seen_.push_back(key);
    if (j_.contains(key)) out = j_.at(key).get<T>();
  }
  std::optional<Section> child(const std::string& key) {
    seen_.push_back(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_.empty() ? key : path_ + "." + key);
  }
  std::optional<std::string> text(const std::string& key) {
    seen_.push_back(key);
    if (!j_.contains(key)) return std::nullopt;
    return j_.at(key).get<std::string>();
  }
  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        throw UsageError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
      }
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const auto j = ordered_json::parse(text);
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    Section root(j, "");
    if (auto v = root.text("env")) c.env = env_kind_from_string(*v);
    if (auto t = root.child("tasks")) {
      t->take("count", c.task_count);
      t->take("seed", c.task_seed);
      t->take("dir", c.tasks_dir);
      t->finish();
    }
    if (auto v = root.text("agent")) c.agent = agent_from_string(*v);
    root.take("K", c.K);
    root.take("runs", c.runs);
    root.take("seed", c.seed);
    if (auto p = root.child("policy")) {
      p->take("checkpoint", c.policy_checkpoint);
      p->take("temperature", c.policy_temperature);
      p->take("top_p", c.policy_top_p);
      p->finish();
    }
    root.take("wm_checkpoints", c.wm_checkpoints);
    root.take("output_dir", c.output_dir);
    if (auto p = root.child("planner")) {
      p->take("samples", c.planner.samples);
      p->take("budget", c.planner.budget);
      p->take("c_puct", c.planner.c_puct);
      p->take("lambda_puct", c.planner.lambda_puct);
      p->take("neighbors", c.planner.neighbors);
      p->take("passes", c.planner.passes);
      p->take("lambda_lcb", c.planner.lambda_lcb);
      p->take("strategy", c.planner.strategy);
      p->take("stop_threshold", c.planner.stop_threshold);
      p->take("stop_repeat", c.planner.stop_repeat);
      p->take("cold_start_uniform_first_pick", c.planner.cold_start_uniform_first_pick);
      p->take("temperature", c.planner.temperature);
      p->take("top_p", c.planner.top_p);
      p->take("exclude_failed", c.planner.exclude_failed);
      p->finish();
    }
    if (auto g = root.child("grpo")) {
      g->take("gamma_turn", c.grpo.gamma_turn);
      g->take("clip_eps", c.grpo.clip_eps);
      g->take("beta", c.grpo.beta);
      g->take("group_size", c.grpo.group_size);
      g->take("attempts", c.grpo.attempts);
      g->take("learning_rate", c.grpo.learning_rate);
      g->take("temperature", c.grpo.temperature);
      g->take("top_p", c.grpo.top_p);
      g->take("epochs", c.grpo.epochs);
      g->take("tasks_per_step", c.grpo.tasks_per_step);
      g->take("max_grad_norm", c.grpo.max_grad_norm);
      g->take("iterations", c.train_iterations);
      g->finish();
    }
    if (auto w = root.child("wm_train")) {
      w->take("epochs", c.wm_train.epochs);
      w->take("batch_size", c.wm_train.batch_size);
      w->take("learning_rate", c.wm_train.learning_rate);
      w->take("weight_decay", c.wm_train.weight_decay);
      w->take("lambda_text", c.wm_train.lambda_text);
      w->take("hidden_dim", c.wm_train.hidden_dim);
      w->take("seed", c.wm_train.seed);
      w->finish();
    }
    if (auto cu = root.child("curation")) {
      cu->take("diversity", c.curation.diversity);
      cu->take("max_iterations", c.curation.max_iterations);
      cu->take("seed", c.curation.seed);
      if (auto v = cu->text("labeler")) c.curation.labeler = curation::labeler_from_string(*v);
      cu->finish();
    }
    root.finish();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  if (c.K < 1) throw UsageError("config: K must be at least 1");
  if (c.runs < 1) throw UsageError("config: runs must be at least 1");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string default_output_dir() {
  const char* env = std::getenv("ICPRL_OUT_DIR");
  return env && *env ? env : "icprl-out";
}

std::vector<sim::Task> load_or_generate_tasks(const RunConfig& c) {
  if (!c.tasks_dir.empty()) return sim::load_task_set(c.tasks_dir);
  return sim::generate_tasks(c.env, c.task_count, c.task_seed);
}

std::unique_ptr<Agent> make_agent(const RunConfig& c, const std::string& wm_checkpoint) {
  switch (c.agent) {
    case AgentKind::Mock: return std::make_unique<MockAgent>();
    case AgentKind::PolicyOnly:
      if (c.policy_checkpoint.empty()) throw UsageError("policy-only agent needs a policy checkpoint");
      return std::make_unique<PolicyAgent>(policy::load_policy(c.policy_checkpoint), c.policy_temperature,
                                           c.policy_top_p);
    case AgentKind::Full: {
      if (c.policy_checkpoint.empty()) throw UsageError("full agent needs a policy checkpoint");
      const std::string wm_path = !wm_checkpoint.empty()       ? wm_checkpoint
                                  : !c.wm_checkpoints.empty() ? c.wm_checkpoints.front()
                                                              : std::string{};
      if (wm_path.empty()) throw UsageError("full agent needs a world-model checkpoint");
      return std::make_unique<FullAgent>(policy::load_policy(c.policy_checkpoint), wm::load_wm(wm_path), c.planner);
    }
  }
  throw UsageError("unknown agent");
}

EvalOutput evaluate(const std::vector<sim::Task>& tasks, const Agent& agent, int K, int runs, std::uint64_t seed,
                    const std::string& label) {
  if (tasks.empty()) throw UsageError("evaluation needs a non-empty task set");
  std::vector<const sim::Task*> ordered;
  for (const auto& t : tasks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
  EvalOutput out;
  out.table.label = label;
  for (int run = 0; run < runs; ++run) {
    const std::uint64_t run_seed = derive_seed(seed, static_cast<std::uint64_t>(run));
    std::vector<EpisodeRecord> episodes;
    for (const sim::Task* t : ordered) {
      episodes.push_back(run_episode(*t, agent, K, derive_seed(run_seed, t->seed)));
    }
    out.table.runs.push_back(summarize(episodes, out.table.attempts, run_seed));
    out.episodes.push_back(std::move(episodes));
  }
  finalize(out.table);
  return out;
}

std::string table_json(const std::vector<ResultsTable>& tables, const RunConfig& config) {
  ordered_json rows = ordered_json::array();
  for (const auto& t : tables) {
    ordered_json runs = ordered_json::array();
    for (const auto& r : t.runs) {
      runs.push_back({{"seed", r.seed},
                      {"success_rate", r.success_rate},
                      {"avg_attempts", r.avg_attempts},
                      {"solved", r.solved},
                      {"tasks", r.tasks}});
    }
    rows.push_back({{"label", t.label},
                    {"attempts", t.attempts},
                    {"mean_success_rate", t.mean_success_rate},
                    {"mean_avg_attempts", t.mean_avg_attempts},
                    {"runs", runs}});
  }
  ordered_json j;
  j["format"] = "icprl-results 1";
  j["config"] = ordered_json::parse(to_json(config));
  j["tables"] = rows;
  return j.dump(2);
}

std::string render_table(const std::vector<ResultsTable>& tables) {
  std::ostringstream os;
  std::size_t width = 8;
  for (const auto& t : tables) width = std::max(width, t.label.size());
  os << std::left << std::setw(static_cast<int>(width)) << "agent";
  if (!tables.empty()) {
    for (int n : tables.front().attempts) os << "  Att. " << std::setw(3) << n;
  }
  os << "  Avg. Att.\n";
  for (const auto& t : tables) {
    os << std::left << std::setw(static_cast<int>(width)) << t.label;
    for (double v : t.mean_success_rate) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "  %7.1f%%", 100.0 * v);
      os << buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "  %9.2f\n", t.mean_avg_attempts);
    os << buf;
  }
  return os.str();
}

void write_report(const std::filesystem::path& dir, const std::vector<EvalOutput>& outputs, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::vector<ResultsTable> tables;
  for (const auto& o : outputs) tables.push_back(o.table);
  {
    std::ofstream out(dir / "results.json");
    if (!out) throw FormatError("cannot write " + (dir / "results.json").string());
    out << table_json(tables, config) << "\n";
  }
  {
    std::ofstream out(dir / "table.txt");
    out << render_table(tables);
  }
  std::ofstream out(dir / "episodes.jsonl");
  out << "{\"format\":\"icprl-episodes 1\"}\n";
  for (const auto& o : outputs) {
    for (std::size_t run = 0; run < o.episodes.size(); ++run) {
      for (const auto& e : o.episodes[run]) {
        auto j = ordered_json::parse(to_line(e));
        j["label"] = o.table.label;
        j["run"] = run;
        out << j.dump() << "\n";
      }
    }
  }
}

policy::PolicyParams train_policy(const std::vector<sim::Task>& tasks, const grpo::GrpoConfig& config,
                                  int iterations, std::uint64_t seed, std::ostream* metrics) {
  if (tasks.empty()) throw UsageError("policy training needs tasks");
  const EnvKind env = tasks.front().scene.env;
  auto params = policy::PolicyParams::random(env, sim::feature_dim(env), derive_seed(seed, 0));
  const auto ref = policy::snapshot(params);
  for (int it = 0; it < iterations; ++it) {
    const auto m = grpo::train_step(params, ref, tasks, config, derive_seed(seed, 1, it), it);
    if (metrics) *metrics << grpo::to_line(m) << "\n";
  }
  return params;
}

}  // namespace icprl::harness
