// Command-line front end: task generation, curation, training, evaluation,
// single-decision planning and report rendering.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "icprl/errors.hpp"
#include "icprl/harness.hpp"

using namespace icprl;

namespace {

struct Common {
  std::string config_path;
  std::string env;
  int task_count = -1;
  long long task_seed = -1;
  std::string tasks_dir;
};

void add_task_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config");
  cmd->add_option("--env", c.env, "griddrop | timedremove");
  cmd->add_option("--tasks", c.task_count, "number of generated tasks");
  cmd->add_option("--task-seed", c.task_seed, "generator seed");
  cmd->add_option("--tasks-dir", c.tasks_dir, "saved task set (overrides generation)");
}

harness::RunConfig base_config(const Common& c) {
  harness::RunConfig cfg = c.config_path.empty() ? harness::RunConfig{} : harness::load_config(c.config_path);
  if (!c.env.empty()) cfg.env = env_kind_from_string(c.env);
  if (c.task_count >= 0) cfg.task_count = c.task_count;
  if (c.task_seed >= 0) cfg.task_seed = static_cast<std::uint64_t>(c.task_seed);
  if (!c.tasks_dir.empty()) cfg.tasks_dir = c.tasks_dir;
  if (cfg.output_dir.empty()) cfg.output_dir = harness::default_output_dir();
  return cfg;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!std::filesystem::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icprl: in-context physical reasoning agents on 2D puzzles"};
  app.require_subcommand(1);

  // gen-tasks
  Common gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-tasks", "generate a solvable task set");
  add_task_flags(gen_cmd, gen);
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // curate
  Common cur;
  std::string cur_out, cur_labeler;
  long long cur_seed = -1;
  int cur_div = -1;
  auto* cur_cmd = app.add_subcommand("curate", "build a balanced world-model dataset");
  add_task_flags(cur_cmd, cur);
  cur_cmd->add_option("--out", cur_out, "dataset directory")->required();
  cur_cmd->add_option("--labeler", cur_labeler, "frames | terminal");
  cur_cmd->add_option("--seed", cur_seed, "sampling seed");
  cur_cmd->add_option("--diversity", cur_div, "minimum action distance");

  // train-wm
  Common twm;
  std::string twm_data, twm_out, twm_eval, twm_report;
  int twm_epochs = -1;
  long long twm_seed = -1;
  auto* twm_cmd = app.add_subcommand("train-wm", "train the world model on a curated dataset");
  twm_cmd->add_option("--config", twm.config_path, "JSON run config");
  twm_cmd->add_option("--data", twm_data, "dataset directory")->required();
  twm_cmd->add_option("--out", twm_out, "checkpoint path")->required();
  twm_cmd->add_option("--eval-data", twm_eval, "held-out dataset directory");
  twm_cmd->add_option("--report", twm_report, "calibration report path (JSON)");
  twm_cmd->add_option("--epochs", twm_epochs, "training epochs");
  twm_cmd->add_option("--seed", twm_seed, "initialisation and shuffling seed");

  // train-policy
  Common tp;
  std::string tp_out, tp_metrics;
  int tp_iters = -1;
  long long tp_seed = -1;
  double tp_lr = -1;
  auto* tp_cmd = app.add_subcommand("train-policy", "train the policy with turn-aware GRPO");
  add_task_flags(tp_cmd, tp);
  tp_cmd->add_option("--out", tp_out, "checkpoint path")->required();
  tp_cmd->add_option("--metrics", tp_metrics, "metrics log (one JSON object per iteration)");
  tp_cmd->add_option("--iterations", tp_iters, "training iterations");
  tp_cmd->add_option("--seed", tp_seed, "training seed");
  tp_cmd->add_option("--lr", tp_lr, "gradient-ascent step size");

  // eval
  Common ev;
  std::string ev_agent, ev_policy, ev_out;
  std::vector<std::string> ev_wm;
  int ev_k = -1, ev_runs = -1, ev_strategy = -1;
  long long ev_seed = -1;
  auto* ev_cmd = app.add_subcommand("eval", "evaluate an agent over K attempts per task");
  add_task_flags(ev_cmd, ev);
  ev_cmd->add_option("--agent", ev_agent, "mock | policy-only | full");
  ev_cmd->add_option("--k", ev_k, "attempt limit");
  ev_cmd->add_option("--runs", ev_runs, "repetitions");
  ev_cmd->add_option("--seed", ev_seed, "evaluation seed");
  ev_cmd->add_option("--policy", ev_policy, "policy checkpoint");
  ev_cmd->add_option("--wm", ev_wm, "world-model checkpoint(s); several produce a comparison table");
  ev_cmd->add_option("--strategy", ev_strategy, "planner scoring strategy (1 or 2)");
  ev_cmd->add_option("--out", ev_out, "report directory");

  // plan
  Common pl;
  std::string pl_task, pl_policy, pl_wm, pl_trace;
  long long pl_seed = 0;
  int pl_strategy = -1;
  auto* pl_cmd = app.add_subcommand("plan", "run one planning decision and dump its search trace");
  add_task_flags(pl_cmd, pl);
  pl_cmd->add_option("--task", pl_task, "task id (default: first task)");
  pl_cmd->add_option("--policy", pl_policy, "policy checkpoint")->required();
  pl_cmd->add_option("--wm", pl_wm, "world-model checkpoint")->required();
  pl_cmd->add_option("--trace", pl_trace, "trace output path")->required();
  pl_cmd->add_option("--seed", pl_seed, "planning seed");
  pl_cmd->add_option("--strategy", pl_strategy, "scoring strategy (1 or 2)");

  // report
  std::string rep_in;
  auto* rep_cmd = app.add_subcommand("report", "render the table of an evaluation report");
  rep_cmd->add_option("--in", rep_in, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) {
      auto cfg = base_config(gen);
      cfg.tasks_dir.clear();
      const auto tasks = harness::load_or_generate_tasks(cfg);
      sim::save_task_set(gen_out, tasks);
      std::printf("wrote %zu %s tasks to %s\n", tasks.size(), std::string(to_string(cfg.env)).c_str(),
                  gen_out.c_str());
    } else if (*cur_cmd) {
      auto cfg = base_config(cur);
      if (!cur_labeler.empty()) cfg.curation.labeler = curation::labeler_from_string(cur_labeler);
      if (cur_seed >= 0) cfg.curation.seed = static_cast<std::uint64_t>(cur_seed);
      if (cur_div > 0) cfg.curation.diversity = cur_div;
      const auto tasks = harness::load_or_generate_tasks(cfg);
      const auto ds = curation::curate(tasks, cfg.curation);
      curation::write_dataset(cur_out, ds);
      int skipped = 0;
      for (const auto& t : ds.tasks) {
        if (!t.error.empty()) {
          ++skipped;
          std::fprintf(stderr, "skipped %s: %s\n", t.task_id.c_str(), t.error.c_str());
        }
      }
      std::printf("wrote %zu records (%s labeler, %d tasks skipped) to %s\n", ds.records.size(),
                  std::string(curation::to_string(cfg.curation.labeler)).c_str(), skipped, cur_out.c_str());
    } else if (*twm_cmd) {
      auto cfg = base_config(twm);
      if (twm_epochs > 0) cfg.wm_train.epochs = twm_epochs;
      if (twm_seed >= 0) cfg.wm_train.seed = static_cast<std::uint64_t>(twm_seed);
      const auto records = curation::read_dataset(twm_data);
      if (records.empty()) throw UsageError("dataset " + twm_data + " is empty");
      const auto samples = curation::to_samples(records);
      auto params = wm::WMParams::random(samples.front().action.kind(), derive_seed(cfg.wm_train.seed, 1),
                                         cfg.wm_train.hidden_dim);
      const auto rep = wm::train(params, samples, cfg.wm_train);
      wm::save_wm(twm_out, params);
      std::printf("trained on %zu samples, final loss %.4f -> %s\n", samples.size(),
                  rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back(), twm_out.c_str());
      if (!twm_eval.empty()) {
        const auto held = curation::to_samples(curation::read_dataset(twm_eval));
        const auto e = wm::evaluate(params, held);
        std::printf("held-out: accuracy %.3f  bce %.4f (baseline %.4f)\n", e.accuracy, e.bce, std::log(2.0));
        if (!twm_report.empty()) write_text(twm_report, wm::to_json(e) + "\n");
      }
    } else if (*tp_cmd) {
      auto cfg = base_config(tp);
      if (tp_iters >= 0) cfg.train_iterations = tp_iters;
      if (tp_lr > 0) cfg.grpo.learning_rate = tp_lr;
      const std::uint64_t seed = tp_seed >= 0 ? static_cast<std::uint64_t>(tp_seed) : cfg.seed;
      const auto tasks = harness::load_or_generate_tasks(cfg);
      std::ofstream metrics;
      if (!tp_metrics.empty()) {
        metrics.open(tp_metrics);
        if (!metrics) throw UsageError("cannot write " + tp_metrics);
      }
      const auto params =
          harness::train_policy(tasks, cfg.grpo, cfg.train_iterations, seed, tp_metrics.empty() ? nullptr : &metrics);
      policy::save_policy(tp_out, params);
      std::printf("trained policy for %d iterations on %zu tasks -> %s\n", cfg.train_iterations, tasks.size(),
                  tp_out.c_str());
    } else if (*ev_cmd) {
      auto cfg = base_config(ev);
      if (!ev_agent.empty()) cfg.agent = harness::agent_from_string(ev_agent);
      if (ev_k > 0) cfg.K = ev_k;
      if (ev_runs > 0) cfg.runs = ev_runs;
      if (ev_seed >= 0) cfg.seed = static_cast<std::uint64_t>(ev_seed);
      if (!ev_policy.empty()) cfg.policy_checkpoint = ev_policy;
      if (!ev_wm.empty()) cfg.wm_checkpoints = ev_wm;
      if (ev_strategy > 0) cfg.planner.strategy = ev_strategy;
      if (!ev_out.empty()) cfg.output_dir = ev_out;
      if (cfg.agent != harness::AgentKind::Mock) require_file(cfg.policy_checkpoint, "policy checkpoint");
      for (const auto& w : cfg.wm_checkpoints) require_file(w, "world-model checkpoint");
      const auto tasks = harness::load_or_generate_tasks(cfg);
      std::vector<harness::EvalOutput> outputs;
      if (cfg.agent == harness::AgentKind::Full) {
        if (cfg.wm_checkpoints.empty()) throw UsageError("full agent needs --wm");
        for (const auto& w : cfg.wm_checkpoints) {
          const auto agent = harness::make_agent(cfg, w);
          outputs.push_back(harness::evaluate(tasks, *agent, cfg.K, cfg.runs, cfg.seed,
                                              "full[" + std::filesystem::path(w).filename().string() + "]"));
        }
      } else {
        const auto agent = harness::make_agent(cfg);
        outputs.push_back(
            harness::evaluate(tasks, *agent, cfg.K, cfg.runs, cfg.seed, std::string(harness::to_string(cfg.agent))));
      }
      harness::write_report(cfg.output_dir, outputs, cfg);
      std::vector<harness::ResultsTable> tables;
      for (const auto& o : outputs) tables.push_back(o.table);
      std::printf("%s", harness::render_table(tables).c_str());
    } else if (*pl_cmd) {
      auto cfg = base_config(pl);
      if (pl_strategy > 0) cfg.planner.strategy = pl_strategy;
      require_file(pl_policy, "policy checkpoint");
      require_file(pl_wm, "world-model checkpoint");
      const auto tasks = harness::load_or_generate_tasks(cfg);
      if (tasks.empty()) throw UsageError("no tasks");
      const sim::Task* task = &tasks.front();
      if (!pl_task.empty()) {
        task = nullptr;
        for (const auto& t : tasks)
          if (t.id == pl_task) task = &t;
        if (!task) throw UsageError("unknown task id " + pl_task);
      }
      const auto r = planner::plan(sim::render_observation(task->scene), History(task->id),
                                   policy::load_policy(pl_policy), wm::load_wm(pl_wm), cfg.planner,
                                   static_cast<std::uint64_t>(pl_seed));
      std::string text = "{\"format\":\"icprl-trace 1\",\"task\":\"" + task->id + "\",\"seed\":" +
                         std::to_string(pl_seed) + "}\n";
      for (const auto& e : r.trace) text += planner::to_line(e) + "\n";
      write_text(pl_trace, text);
      std::printf("%s -> %s (%s after %zu iterations)\n", task->id.c_str(), r.action.to_string().c_str(),
                  r.stop_reason.c_str(), r.trace.size());
    } else if (*rep_cmd) {
      const auto j = nlohmann::json::parse(read_text(std::filesystem::path(rep_in) / "results.json"));
      std::vector<harness::ResultsTable> tables;
      for (const auto& t : j.at("tables")) {
        harness::ResultsTable rt;
        rt.label = t.at("label").get<std::string>();
        rt.attempts = t.at("attempts").get<std::vector<int>>();
        rt.mean_success_rate = t.at("mean_success_rate").get<std::vector<double>>();
        rt.mean_avg_attempts = t.at("mean_avg_attempts").get<double>();
        tables.push_back(rt);
      }
      std::printf("%s", harness::render_table(tables).c_str());
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
