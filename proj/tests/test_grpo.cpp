#include <doctest.h>

#include <cmath>
#include <limits>

#include "icprl/errors.hpp"
#include "icprl/grpo.hpp"
#include "icprl/tasks.hpp"
#include "oracles.hpp"

using namespace icprl;
using namespace icprl::grpo;

namespace {

const std::vector<sim::Task>& tasks() {
  static const auto t = sim::generate_tasks(EnvKind::GridDrop, 3, 1);
  return t;
}

GrpoConfig small_config() {
  GrpoConfig c;
  c.group_size = 3;
  c.attempts = 3;
  c.beta = 0.05;
  c.temperature = 1.0;
  c.top_p = 1.0;
  return c;
}

policy::PolicyParams small_policy(std::uint64_t seed, double scale = 0.3) {
  return policy::PolicyParams::random(EnvKind::GridDrop, sim::feature_dim(EnvKind::GridDrop), seed, 6, scale);
}

void random_advantages(GroupBatch& b, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& row : b.advantages)
    for (double& a : row) a = uniform(rng, -2.0, 2.0);
}

// Objective recomputed token by token from the reference forward pass.
double reference_objective(const GroupBatch& b, const policy::PolicyParams& p, const policy::PolicyParams& ref,
                           const GrpoConfig& c) {
  double total = 0;
  for (std::size_t i = 0; i < b.members.size(); ++i) {
    const Member& m = b.members[i];
    for (std::size_t k = 0; k < m.seq.turns.size(); ++k) {
      const auto [s, e] = m.seq.turns[k];
      double turn = 0;
      int n = 0;
      for (std::size_t t = s; t < e; ++t) {
        if (!m.seq.loss_mask[t]) continue;
        const std::vector<int> prefix(m.seq.tokens.begin(), m.seq.tokens.begin() + t);
        const auto pt = oracle::policy_dist(p, m.features, prefix);
        const auto pr = oracle::policy_dist(ref, m.features, prefix);
        const double r = pt[m.seq.tokens[t]] / std::exp(m.old_logprobs[t]);
        const double A = b.advantages[i][k];
        const double surr = std::min(r * A, std::clamp(r, 1 - c.clip_eps, 1 + c.clip_eps) * A);
        double kl = 0;
        for (std::size_t v = 0; v < pt.size(); ++v)
          if (pt[v] > 0) kl += pt[v] * std::log(pt[v] / pr[v]);
        turn += surr - c.beta * kl;
        ++n;
      }
      if (n) total += turn / n;
    }
  }
  return total / double(b.members.size());
}

}  // namespace

TEST_CASE("turn returns are discounted suffix sums") {
  const std::vector<int> r{0, 0, 1};
  const auto R = turn_returns(r, 0.95);
  CHECK(R[2] == 1.0);
  CHECK(R[1] == doctest::Approx(0.95));
  CHECK(R[0] == doctest::Approx(0.95 * 0.95));
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1 + uniform_int(rng, 8));
    for (double& v : x) v = uniform(rng, -1, 1);
    const auto got = turn_returns(x, 0.9);
    for (std::size_t k = 0; k < x.size(); ++k) {
      double want = 0;
      for (std::size_t l = k; l < x.size(); ++l) want += std::pow(0.9, double(l - k)) * x[l];
      CHECK(got[k] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("advantages agree with the long-double reference on ragged matrices") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int G = 2 + uniform_int(rng, 7);
    Matrix R(G);
    for (auto& row : R) {
      row.resize(1 + uniform_int(rng, 6));
      for (double& v : row) v = uniform(rng, -3, 3);
    }
    const auto got = group_advantages(R);
    const auto want = oracle::standardize_columns(R);
    for (int i = 0; i < G; ++i)
      for (std::size_t k = 0; k < R[i].size(); ++k) CHECK(got[i][k] == doctest::Approx(want[i][k]).epsilon(1e-10));
  }
}

TEST_CASE("degenerate and singleton columns map to zero") {
  const Matrix R{{1.0, 0.5, 2.0}, {1.0, 0.7}, {1.0}};
  const auto A = group_advantages(R);
  CHECK(A[0][0] == 0.0);
  CHECK(A[1][0] == 0.0);
  CHECK(A[2][0] == 0.0);
  CHECK(A[0][1] == doctest::Approx(-1.0));
  CHECK(A[1][1] == doctest::Approx(1.0));
  CHECK(A[0][2] == 0.0);  // only one member reached turn 3
}

TEST_CASE("absent entries are excluded from column statistics") {
  const Matrix R{{0.0}, {2.0}, {100.0}};
  const auto A = group_advantages(R, {{true}, {true}, {false}});
  CHECK(A[0][0] == doctest::Approx(-1.0));
  CHECK(A[1][0] == doctest::Approx(1.0));
  CHECK(A[2][0] == 0.0);
}

TEST_CASE("collected groups have per-turn boundaries, masks and advantages") {
  const auto p = small_policy(1);
  const auto c = small_config();
  const auto b = collect_group(tasks()[0], History(tasks()[0].id), p, c, 5);
  REQUIRE(b.members.size() == 3);
  for (std::size_t i = 0; i < b.members.size(); ++i) {
    const auto& m = b.members[i];
    CHECK(m.seq.turns.size() == m.rewards.size());
    CHECK(b.advantages[i].size() == m.rewards.size());
    CHECK(m.old_logprobs.size() == m.seq.size());
    for (std::size_t t = 0; t < b.prefix_length; ++t) CHECK(m.seq.loss_mask[t] == 0);
    for (auto [s, e] : m.seq.turns) {
      CHECK(m.seq.loss_mask[e] == 0);  // outcome token
      CHECK(tok::is_outcome(m.seq.tokens[e]));
    }
  }
  const auto again = collect_group(tasks()[0], History(tasks()[0].id), p, c, 5);
  CHECK(again.members[2].seq == b.members[2].seq);
}

TEST_CASE("objective matches the token-by-token reference") {
  const auto theta0 = small_policy(2);
  auto c = small_config();
  auto b = collect_group(tasks()[1], History(tasks()[1].id), theta0, c, 8);
  random_advantages(b, 4);
  auto theta = theta0;
  Rng rng(6);
  for (double& v : theta.values()) v += uniform(rng, -0.2, 0.2);
  const auto ref = policy::snapshot(small_policy(9));
  const auto obj = grpo_objective(b, theta, ref, c, false);
  CHECK(obj.value == doctest::Approx(reference_objective(b, theta, ref.params(), c)).epsilon(1e-10));
  CHECK(obj.clip_fraction > 0.0);
}

TEST_CASE("on-policy: ratios are one and KL to itself is zero") {
  const auto p = small_policy(3);
  const auto c = small_config();
  const auto b = collect_group(tasks()[2], History(tasks()[2].id), p, c, 1);
  const auto obj = grpo_objective(b, p, policy::snapshot(p), c);
  CHECK(obj.max_ratio_error <= 1e-9);
  CHECK(obj.mean_kl == 0.0);
  CHECK(obj.clip_fraction == 0.0);
}

TEST_CASE("mask-0 positions never influence the objective or its gradient") {
  const auto p = small_policy(4);
  auto c = small_config();
  auto b = collect_group(tasks()[0], History(tasks()[0].id), p, c, 3);
  random_advantages(b, 8);
  auto theta = p;
  for (double& v : theta.values()) v *= 1.5;
  const auto ref = policy::snapshot(small_policy(10));
  const auto base = grpo_objective(b, theta, ref, c);

  auto poisoned = b;
  for (auto& m : poisoned.members)
    for (std::size_t t = 0; t < m.seq.size(); ++t)
      if (!m.seq.loss_mask[t]) m.old_logprobs[t] = std::numeric_limits<double>::quiet_NaN();
  const auto after = grpo_objective(poisoned, theta, ref, c);
  CHECK(after.value == base.value);
  CHECK(after.gradient == base.gradient);

  auto masked = b;
  auto& m0 = masked.members[0];
  m0.seq.loss_mask[m0.seq.turns[0].first] = 0;
  CHECK(grpo_objective(masked, theta, ref, c, false).value != base.value);
}

TEST_CASE("objective gradient matches central finite differences with clipping and KL") {
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    const auto theta0 = small_policy(20 + trial);
    auto c = small_config();
    auto b = collect_group(tasks()[trial], History(tasks()[trial].id), theta0, c, 30 + trial);
    random_advantages(b, 40 + trial);
    auto theta = theta0;
    Rng rng(50 + trial);
    for (double& v : theta.values()) v += uniform(rng, -0.5, 0.5);
    const auto ref = policy::snapshot(small_policy(60 + trial));
    const auto obj = grpo_objective(b, theta, ref, c);
    REQUIRE(obj.clip_fraction > 0.0);
    std::vector<std::size_t> coords;
    for (int i = 0; i < 150; ++i) coords.push_back(uniform_int(rng, int(theta.size())));
    auto f = [&](const std::vector<double>& x) {
      auto q = theta;
      q.values() = x;
      return grpo_objective(b, q, ref, c, false).value;
    };
    const auto fd = oracle::central_diff(f, theta.values(), coords, 1e-5);
    std::vector<double> an;
    for (auto k : coords) an.push_back(obj.gradient[k]);
    CHECK(oracle::relative_error(an, fd) < 1e-4);
  }
}

TEST_CASE("a small ascent step increases the objective") {
  const auto p = small_policy(5);
  auto c = small_config();
  auto b = collect_group(tasks()[1], History(tasks()[1].id), p, c, 2);
  random_advantages(b, 3);
  const auto ref = policy::snapshot(p);
  const auto obj = grpo_objective(b, p, ref, c);
  auto q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q.values()[i] += 1e-3 * obj.gradient[i];
  CHECK(grpo_objective(b, q, ref, c, false).value > obj.value);
}

TEST_CASE("train_step is deterministic and reports metrics") {
  auto c = small_config();
  c.learning_rate = 0.1;
  auto a = small_policy(7), b = small_policy(7);
  const auto ref = policy::snapshot(a);
  const auto ma = train_step(a, ref, tasks(), c, 11, 0);
  const auto mb = train_step(b, ref, tasks(), c, 11, 0);
  CHECK(a == b);
  CHECK(ma.objective == mb.objective);
  CHECK(ma.grad_norm >= 0.0);
  CHECK(ma.solve_rate >= 0.0);
  CHECK(ma.solve_rate <= 1.0);
  CHECK(to_line(ma).find("\"grad_norm\"") != std::string::npos);
}

TEST_CASE("group configuration errors") {
  auto c = small_config();
  c.group_size = 1;
  CHECK_THROWS_AS(collect_group(tasks()[0], History(tasks()[0].id), small_policy(1), c, 0), UsageError);
  c = small_config();
  c.attempts = 20;
  CHECK_THROWS_AS(collect_group(tasks()[0], History(tasks()[0].id), small_policy(1), c, 0), UsageError);
}
