// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "icprl/curation.hpp"
#include "icprl/grpo.hpp"
#include "icprl/harness.hpp"
#include "icprl/planner.hpp"
#include "icprl/policy.hpp"
#include "icprl/sim.hpp"
#include "icprl/tasks.hpp"
#include "icprl/worldmodel.hpp"
#include "oracles.hpp"

using namespace icprl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("icprl_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) v.require(false, fmt("runtime %.1fs over limit %.0fs", secs, limit_s));
  if (!v.pass) ++failures;
  std::printf("criterion %2d: %s  %s [%s] (%.1fs)\n", id, v.pass ? "PASS" : "FAIL", title.c_str(), v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

const std::vector<sim::Task>& golden() {
  static const auto t = sim::generate_tasks(EnvKind::GridDrop, 20, 1);
  return t;
}

const std::vector<sim::Task>& held_out() {
  static const auto t = sim::generate_tasks(EnvKind::GridDrop, 20, 2);
  return t;
}

grpo::GrpoConfig small_config() {
  grpo::GrpoConfig c;
  c.group_size = 3;
  c.attempts = 3;
  c.beta = 0.05;
  c.temperature = 1.0;
  c.top_p = 1.0;
  return c;
}

policy::PolicyParams small_policy(std::uint64_t seed) {
  return policy::PolicyParams::random(EnvKind::GridDrop, sim::feature_dim(EnvKind::GridDrop), seed, 6, 0.3);
}

void random_advantages(grpo::GroupBatch& b, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& row : b.advantages)
    for (double& a : row) a = uniform(rng, -2.0, 2.0);
}

// Batch, off-policy parameters and a distinct reference for trial `k`.
struct OffPolicyCase {
  grpo::GroupBatch batch;
  policy::PolicyParams theta;
  policy::RefPolicy ref;
};

OffPolicyCase off_policy_case(std::uint64_t k) {
  const auto theta0 = small_policy(100 + k);
  const auto& task = golden()[k % golden().size()];
  auto b = grpo::collect_group(task, History(task.id), theta0, small_config(), 200 + k);
  random_advantages(b, 300 + k);
  auto theta = theta0;
  Rng rng(400 + k);
  for (double& v : theta.values()) v += uniform(rng, -0.5, 0.5);
  return {std::move(b), theta, policy::snapshot(small_policy(500 + k))};
}

// ---------------------------------------------------------------------------

Verdict advantages() {
  Verdict v;
  Rng rng(1);
  double worst_mean = 0, worst_sd = 0;
  int degenerate = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int G = 2 + uniform_int(rng, 15);
    const int K = 1 + uniform_int(rng, 10);
    grpo::Matrix R(G, std::vector<double>(K));
    for (auto& row : R)
      for (double& x : row) x = uniform(rng, -5.0, 5.0);
    const int flat = uniform_int(rng, K);
    const bool make_flat = trial % 4 == 0;
    if (make_flat)
      for (auto& row : R) row[flat] = 0.37 * trial;
    const auto A = grpo::group_advantages(R);
    for (int k = 0; k < K; ++k) {
      if (make_flat && k == flat) {
        ++degenerate;
        for (int i = 0; i < G; ++i) v.require(A[i][k] == 0.0, "degenerate column not zero");
        continue;
      }
      long double mean = 0, var = 0;
      for (int i = 0; i < G; ++i) mean += A[i][k];
      mean /= G;
      for (int i = 0; i < G; ++i) var += (A[i][k] - mean) * (A[i][k] - mean);
      const double sd = double(std::sqrt(var / G));
      worst_mean = std::max(worst_mean, double(std::fabs(mean)));
      worst_sd = std::max(worst_sd, std::fabs(sd - 1.0));
    }
    const auto want = oracle::standardize_columns(R);
    for (int i = 0; i < G; ++i)
      for (int k = 0; k < K; ++k) v.require(std::fabs(A[i][k] - want[i][k]) < 1e-9, "oracle mismatch");
  }
  v.require(worst_mean < 1e-9, "column mean too large");
  v.require(worst_sd < 1e-9, "column std off");
  v.note(fmt("max|mean| %.1e, max|std-1| %.1e", worst_mean, worst_sd));
  v.note(std::to_string(degenerate) + " degenerate columns zeroed");
  return v;
}

Verdict gradient() {
  Verdict v;
  double worst = 0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto c = off_policy_case(k);
    const auto cfg = small_config();
    const auto obj = grpo::grpo_objective(c.batch, c.theta, c.ref, cfg);
    v.require(obj.clip_fraction > 0.0, "batch " + std::to_string(k) + " has no active clipping");
    Rng rng(600 + k);
    std::vector<std::size_t> coords;
    for (int i = 0; i < 200; ++i) coords.push_back(uniform_int(rng, int(c.theta.size())));
    auto f = [&](const std::vector<double>& x) {
      auto q = c.theta;
      q.values() = x;
      return grpo::grpo_objective(c.batch, q, c.ref, cfg, false).value;
    };
    const auto fd = oracle::central_diff(f, c.theta.values(), coords, 1e-5);
    std::vector<double> an;
    for (auto i : coords) an.push_back(obj.gradient[i]);
    worst = std::max(worst, oracle::relative_error(an, fd));
  }
  v.require(worst < 1e-4, "relative error too large");
  v.note(fmt("5 batches, beta 0.05, max relative error %.2e", worst));
  return v;
}

Verdict masking() {
  Verdict v;
  int poisoned_tokens = 0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto c = off_policy_case(k);
    const auto cfg = small_config();
    const auto base = grpo::grpo_objective(c.batch, c.theta, c.ref, cfg);
    for (double fill : {std::numeric_limits<double>::quiet_NaN(), 1e300, -7.0}) {
      auto b = c.batch;
      for (auto& m : b.members)
        for (std::size_t t = 0; t < m.seq.size(); ++t)
          if (!m.seq.loss_mask[t]) {
            m.old_logprobs[t] = fill;
            ++poisoned_tokens;
          }
      const auto after = grpo::grpo_objective(b, c.theta, c.ref, cfg);
      v.require(after.value == base.value, "J changed under mask-0 perturbation");
      v.require(after.gradient == base.gradient, "gradient changed under mask-0 perturbation");
    }
    auto b = c.batch;
    auto& m0 = b.members[0];
    m0.seq.loss_mask[m0.seq.turns[0].first] = 0;
    v.require(grpo::grpo_objective(b, c.theta, c.ref, cfg, false).value != base.value,
              "masking a generated token had no effect");
  }
  v.note(std::to_string(poisoned_tokens) + " mask-0 entries perturbed, J and gradient bit-identical");
  return v;
}

Verdict on_policy() {
  Verdict v;
  double worst = 0, kl = 0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto p = small_policy(700 + k);
    const auto& task = golden()[k];
    const auto b = grpo::collect_group(task, History(task.id), p, small_config(), 800 + k);
    const auto obj = grpo::grpo_objective(b, p, policy::snapshot(p), small_config());
    worst = std::max(worst, obj.max_ratio_error);
    kl = std::max(kl, std::fabs(obj.mean_kl));
  }
  v.require(worst <= 1e-9, "ratio off one");
  v.require(kl == 0.0, "KL not zero");
  v.note(fmt("max|r-1| %.1e, KL %.1e", worst, kl));
  return v;
}

planner::SearchState random_state(Rng& rng, int m, bool coarse) {
  std::vector<EnvAction> acts;
  for (int i = 0; i < m; ++i) acts.emplace_back(GridPlace::from_dense_index(i));
  std::vector<double> prior(m);
  double z = 0;
  for (double& p : prior) z += (p = coarse ? 1 + uniform_int(rng, 3) : uniform(rng, 0.01, 1));
  for (double& p : prior) p /= z;
  auto s = planner::SearchState::fresh(acts, prior);
  for (int i = 0; i < m; ++i) {
    s.visits[i] = uniform_int(rng, coarse ? 3 : 10);
    s.q[i] = coarse ? uniform_int(rng, 3) * 0.25 : uniform01(rng);
  }
  return s;
}

Verdict puct() {
  Verdict v;
  Rng rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + uniform_int(rng, 12);
    const auto s = random_state(rng, m, trial % 2 == 0);
    const double c = trial % 5 == 0 ? 0.0 : uniform(rng, 0.1, 4.0);
    mismatches += planner::puct_select(s, c) != oracle::brute_puct(s.q, s.visits, s.prior, c);
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " PUCT mismatches");

  std::set<std::string> stops;
  int trace_mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + uniform_int(rng, 8);
    std::vector<planner::Score> table;
    for (int i = 0; i < m; ++i) {
      const double mu = uniform01(rng);
      table.push_back({uniform01(rng), trial % 3 == 0 ? mu : 0.7 * mu});
    }
    auto score = [&](int i, std::uint64_t sd) {
      planner::Score s = table[i];
      s.v += 1e-6 * double(sd % 1000);
      return s;
    };
    std::vector<EnvAction> acts;
    std::vector<double> prior(m);
    double z = 0;
    for (int i = 0; i < m; ++i) {
      acts.emplace_back(GridPlace::from_dense_index(7 * i));
      z += (prior[i] = uniform(rng, 0.05, 1.0));
    }
    for (double& p : prior) p /= z;
    planner::PlannerConfig cfg;
    cfg.budget = 1 + uniform_int(rng, 40);
    cfg.c_puct = uniform(rng, 0.2, 3.0);
    const std::uint64_t seed = rng();
    const auto got = planner::search(
        planner::SearchState::fresh(acts, prior),
        [&](const EnvAction& a, std::uint64_t sd) {
          return score(int(std::find(acts.begin(), acts.end(), a) - acts.begin()), sd);
        },
        cfg, seed);
    const auto want = oracle::reference_plan(m, prior, score, cfg.budget, cfg.c_puct, cfg.stop_repeat,
                                             cfg.stop_threshold, seed);
    bool same = got.trace.size() == want.steps.size() && got.state.q == want.q && got.state.visits == want.n &&
                got.action == acts[want.chosen];
    for (std::size_t t = 0; same && t < want.steps.size(); ++t) {
      const auto& g = got.trace[t];
      const auto& w = want.steps[t];
      same = g.iteration == int(t + 1) && g.selected == w.pick && g.scored == w.scored && g.v == w.v &&
             g.mu == w.mu && g.stop == w.stop;
    }
    trace_mismatches += !same;
    stops.insert(got.stop_reason);
  }
  v.require(trace_mismatches == 0, std::to_string(trace_mismatches) + " trace mismatches");
  for (const char* s : {"repeat", "confident", "budget"})
    v.require(stops.count(s) == 1, std::string("stop rule '") + s + "' never exercised");
  v.note("1000 states, 300 traces, stops seen: repeat/confident/budget");
  return v;
}

// Curated golden dataset shared by criteria 6, 7 and 10.
curation::Dataset golden_dataset;
curation::SolutionCache golden_cache;

Verdict curation_golden() {
  Verdict v;
  const curation::CurationConfig cfg;
  golden_dataset = curation::curate(golden(), cfg, &golden_cache);
  const auto& ds = golden_dataset;
  std::size_t skipped = 0, checked_pairs = 0, resim = 0;
  for (const auto& s : ds.tasks) {
    if (!s.error.empty()) {
      ++skipped;
      continue;
    }
    v.require(s.positives == s.negatives && s.positives > 0, "unbalanced task " + s.task_id);
  }
  v.require(skipped == 0, std::to_string(skipped) + " tasks skipped");
  for (const auto& task : golden()) {
    const auto solutions = curation::enumerate_solutions(task, &golden_cache);
    std::vector<EnvAction> pos, neg;
    for (const auto& r : ds.records) {
      if (r.task_id != task.id) continue;
      (r.y ? pos : neg).push_back(r.action);
    }
    v.require(pos.size() == neg.size(), "record counts unbalanced for " + task.id);
    for (const auto& a : pos)
      v.require(std::find(solutions.begin(), solutions.end(), a) != solutions.end(), "positive not in S");
    // Every failure keeps the margin to all of S and to the failures accepted before it.
    for (std::size_t j = 0; j < neg.size(); ++j) {
      for (const auto& s : solutions) {
        ++checked_pairs;
        v.require(action_distance(neg[j], s) >= cfg.diversity, "failure too close to a solution");
      }
      for (std::size_t i = 0; i < j; ++i) {
        ++checked_pairs;
        v.require(action_distance(neg[j], neg[i]) >= cfg.diversity, "failures too close");
      }
    }
  }
  for (const auto& r : ds.records) {
    const sim::Task* task = nullptr;
    for (const auto& t : golden())
      if (t.id == r.task_id) task = &t;
    const auto res = sim::simulate_until_stable(sim::apply_action(task->scene, r.action));
    v.require(int(sim::check_success(res.terminal)) == r.y, "label disagrees with re-simulation");
    v.require(res.frames == r.frames, "frames disagree with re-simulation");
    ++resim;
  }
  const auto a = scratch("cur_a"), b = scratch("cur_b");
  curation::write_dataset(a, ds);
  curation::write_dataset(b, curation::curate(golden(), cfg));
  v.require(slurp(a / "dataset.jsonl") == slurp(b / "dataset.jsonl"), "dataset bytes differ across reruns");
  v.require(slurp(a / "manifest.json") == slurp(b / "manifest.json"), "manifest bytes differ across reruns");
  fs::remove_all(a);
  fs::remove_all(b);
  v.note(std::to_string(ds.records.size()) + " records, " + std::to_string(checked_pairs) + " margin pairs, " +
         std::to_string(resim) + " re-simulated, byte-identical rerun");
  return v;
}

wm::WMParams trained_wm;

Verdict world_model() {
  Verdict v;
  if (golden_dataset.records.empty()) golden_dataset = curation::curate(golden(), {}, &golden_cache);
  const auto train = curation::to_samples(golden_dataset.records);
  // Held-out split by task: a disjoint generator seed.
  const auto held = curation::to_samples(curation::curate(sim::generate_tasks(EnvKind::GridDrop, 10, 2), {}).records);
  trained_wm = wm::WMParams::random(EnvKind::GridDrop, 5);
  wm::train(trained_wm, train, {});
  const auto e = wm::evaluate(trained_wm, held);
  v.require(e.accuracy >= 0.8, "held-out accuracy below 0.8");
  v.require(e.bce < std::log(2.0), "held-out BCE not below ln 2");

  const std::vector<wm::WMSample> batch(held.begin(), held.begin() + std::min<std::size_t>(24, held.size()));
  const auto l = wm::wm_loss(trained_wm, batch);
  Rng rng(9);
  std::vector<std::size_t> coords;
  for (int i = 0; i < 300; ++i) coords.push_back(uniform_int(rng, int(trained_wm.size())));
  auto f = [&](const std::vector<double>& x) {
    auto q = trained_wm;
    q.values() = x;
    return wm::wm_loss(q, batch, wm::kLambdaText, false).value;
  };
  const auto fd = oracle::central_diff(f, trained_wm.values(), coords, 1e-5);
  std::vector<double> an;
  for (auto c : coords) an.push_back(l.gradient[c]);
  const double rel = oracle::relative_error(an, fd);
  v.require(rel < 1e-4, "wm_loss gradient fails the finite-difference check");
  v.note(fmt("held-out (%.0f samples) accuracy %.3f", double(held.size()), e.accuracy));
  v.note(fmt("BCE %.4f < ln2 %.4f", e.bce, std::log(2.0)));
  v.note(fmt("FD relative error %.1e", rel));
  return v;
}

Verdict physics() {
  Verdict v;
  int reruns = 0, energy_steps = 0;
  double worst = -1e300;
  for (std::size_t i = 0; i < golden().size(); ++i) {
    const auto& t = golden()[i];
    for (int d : {0, 77, 137, 300, 511}) {
      const auto start = sim::apply_action(t.scene, GridPlace::from_dense_index(d));
      const auto a = sim::simulate_until_stable(start);
      const auto b = sim::simulate_until_stable(start);
      v.require(a.frames == b.frames && a.terminal == b.terminal, "rerun not bit-identical");
      ++reruns;
      sim::Scene s = start;
      v.require(s.restitution <= 1.0, "restitution above one");
      double e = sim::total_energy(s);
      for (int k = 0; k < 400; ++k) {
        s = sim::step(s);
        const double e1 = sim::total_energy(s);
        worst = std::max(worst, (e1 - e) / std::max(1e-300, std::fabs(e)));
        e = e1;
        ++energy_steps;
      }
    }
  }
  v.require(worst <= 1e-6, "energy increased by more than 1e-6 relative in one step");

  sim::Scene s;
  s.env = EnvKind::GridDrop;
  s.gravity = {0.0, 0.0};
  s.restitution = 1.0;
  const double r1 = 0.3, r2 = 0.6, u1 = 1.5, u2 = -0.5;
  s.bodies.push_back(sim::Body::circle(0, sim::Role::RedBall, {3.0, 4.0}, r1, {u1, 0.0}));
  s.bodies.push_back(sim::Body::circle(1, sim::Role::RedBall, {3.0 + r1 + r2, 4.0}, r2, {u2, 0.0}));
  const double m1 = r1 * r1, m2 = r2 * r2;
  const double v1 = ((m1 - m2) * u1 + 2 * m2 * u2) / (m1 + m2);
  const double v2 = ((m2 - m1) * u2 + 2 * m1 * u1) / (m1 + m2);
  const auto next = sim::step(s);
  const double err = std::max(std::fabs(next.bodies[0].velocity.x - v1), std::fabs(next.bodies[1].velocity.x - v2));
  v.require(err < 1e-12, "elastic exchange off the closed form");
  v.note(std::to_string(reruns) + " bit-identical reruns");
  v.note(fmt("%.0f steps, max relative energy change %.1e", energy_steps, worst));
  v.note(fmt("elastic error %.1e", err));
  return v;
}

// S.R.@n for n = 1..K averaged over runs.
std::vector<double> success_curve(const harness::EvalOutput& out, int K) {
  std::vector<int> ns(K);
  for (int n = 1; n <= K; ++n) ns[n - 1] = n;
  std::vector<double> mean(K, 0.0);
  for (const auto& eps : out.episodes) {
    const auto r = harness::summarize(eps, ns, 0);
    for (int i = 0; i < K; ++i) mean[i] += r.success_rate[i] / double(out.episodes.size());
  }
  return mean;
}

policy::PolicyParams trained_policy;
bool have_policy = false;

Verdict end_to_end() {
  Verdict v;
  trained_policy = harness::train_policy(golden(), grpo::GrpoConfig{}, 80, 11);
  have_policy = true;
  const harness::RunConfig rc;
  const harness::MockAgent mock;
  const harness::PolicyAgent pol(trained_policy, rc.policy_temperature, rc.policy_top_p);
  const auto m = success_curve(harness::evaluate(golden(), mock, 10, 3, 7, "mock"), 10);
  const auto p = success_curve(harness::evaluate(golden(), pol, 10, 3, 7, "policy"), 10);
  v.require(p[9] >= 3.0 * m[9], "trained S.R.@10 below 3x mock");
  for (int i = 1; i < 10; ++i) {
    v.require(p[i] >= p[i - 1], "policy S.R.@n decreases");
    v.require(m[i] >= m[i - 1], "mock S.R.@n decreases");
  }
  v.require(p[9] - p[0] > 0.0, "no in-context gain over attempts");
  v.note(fmt("policy S.R.@1 %.3f, S.R.@10 %.3f", p[0], p[9]));
  v.note(fmt("mock S.R.@10 %.3f (ratio %.1f)", m[9], m[9] > 0 ? p[9] / m[9] : INFINITY));
  return v;
}

Verdict planner_uplift() {
  Verdict v;
  if (!have_policy) trained_policy = harness::train_policy(golden(), grpo::GrpoConfig{}, 80, 11);
  if (trained_wm.size() == 0) {
    trained_wm = wm::WMParams::random(EnvKind::GridDrop, 5);
    wm::train(trained_wm, curation::to_samples(curation::curate(golden(), {}, &golden_cache).records), {});
  }
  const harness::RunConfig rc;
  const harness::PolicyAgent pol(trained_policy, rc.policy_temperature, rc.policy_top_p);
  const harness::FullAgent full(trained_policy, trained_wm, rc.planner);
  const auto p = harness::evaluate(held_out(), pol, 10, 3, 7, "policy").table;
  const auto f = harness::evaluate(held_out(), full, 10, 3, 7, "full").table;
  const double ps = p.mean_success_rate.back(), fs_ = f.mean_success_rate.back();
  v.require(fs_ >= ps, "full agent below policy-only");
  v.note(fmt("held-out S.R.@10 full %.3f vs policy-only %.3f over 3 runs", fs_, ps));
  return v;
}

int run_cli(const std::string& args, std::string* out) {
  const std::string cmd = std::string("\"") + ICPRL_CLI + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) *out += buf;
  const int status = pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict ablation() {
  Verdict v;
  if (!have_policy) trained_policy = harness::train_policy(golden(), grpo::GrpoConfig{}, 80, 11);
  const auto dir = scratch("ablation");
  const auto pol = dir / "policy.ckpt";
  policy::save_policy(pol, trained_policy);
  std::string log;
  std::vector<std::string> wms;
  for (const char* labeler : {"frames", "terminal"}) {
    const auto data = dir / (std::string("data_") + labeler);
    const auto ckpt = dir / (std::string("wm_") + labeler + ".ckpt");
    v.require(run_cli("curate --out " + data.string() + " --labeler " + labeler, &log) == 0,
              std::string("curate --labeler ") + labeler + " failed");
    v.require(fs::exists(data / "dataset.jsonl") && fs::exists(data / "manifest.json"),
              std::string(labeler) + " dataset missing");
    v.require(slurp(data / "manifest.json").find(labeler) != std::string::npos,
              std::string("manifest does not name the ") + labeler + " labeler");
    v.require(run_cli("train-wm --data " + data.string() + " --out " + ckpt.string() + " --seed 5", &log) == 0,
              std::string("train-wm on ") + labeler + " failed");
    wms.push_back(ckpt.string());
  }
  std::string table;
  const auto rep = dir / "report";
  const int rc = run_cli("eval --agent full --task-seed 2 --k 10 --runs 3 --seed 7 --policy " + pol.string() +
                             " --wm " + wms[0] + " --wm " + wms[1] + " --out " + rep.string(),
                         &table);
  v.require(rc == 0, "eval exited with " + std::to_string(rc));
  v.require(table.find("full[wm_frames.ckpt]") != std::string::npos, "frames row missing");
  v.require(table.find("full[wm_terminal.ckpt]") != std::string::npos, "terminal row missing");
  v.require(fs::exists(rep / "results.json") && fs::exists(rep / "table.txt"), "report files missing");
  if (!v.pass) v.note(log + table);
  std::printf("%s", table.c_str());
  fs::remove_all(dir);
  v.note("both labelers curated and trained; comparison table emitted under identical seeds");
  return v;
}

}  // namespace

int main() {
  report(1, "advantage standardization", 5, advantages);
  report(2, "GRPO gradient vs finite differences", 120, gradient);
  report(3, "mask-0 perturbation invariance", 0, masking);
  report(4, "on-policy identity", 0, on_policy);
  report(5, "PUCT and search-trace oracle equivalence", 0, puct);
  report(6, "golden curation", 300, curation_golden);
  report(7, "world-model calibration", 0, world_model);
  report(8, "physics", 0, physics);
  report(9, "end-to-end learning", 1800, end_to_end);
  report(10, "planner uplift", 0, planner_uplift);
  report(11, "ablation harness", 0, ablation);
  std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
