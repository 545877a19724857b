#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "icprl/errors.hpp"
#include "icprl/tasks.hpp"
#include "icprl/worldmodel.hpp"
#include "oracles.hpp"

using namespace icprl;
using namespace icprl::wm;

namespace {

std::vector<WMSample> batch(EnvKind env, int n, std::uint64_t seed) {
  const auto tasks = sim::generate_tasks(env, 2, 1);
  Rng rng(seed);
  std::vector<WMSample> out;
  for (int i = 0; i < n; ++i) {
    const auto& t = tasks[i % 2];
    const auto obs = sim::render_observation(t.scene);
    EnvAction a;
    if (env == EnvKind::GridDrop) {
      a = GridPlace::from_dense_index(uniform_int(rng, 512));
    } else {
      const auto space = sim::action_space(t.scene);
      a = space[uniform_int(rng, int(space.size()))];
    }
    const auto& vocab = label_vocab(env);
    out.push_back({obs.features, a, uniform_int(rng, 2), vocab[uniform_int(rng, int(vocab.size()))]});
  }
  return out;
}

}  // namespace

TEST_CASE("all-zero parameters give the uniform-prediction loss") {
  for (EnvKind env : {EnvKind::GridDrop, EnvKind::TimedRemove}) {
    WMParams p(env, 8);
    const auto b = batch(env, 10, 1);
    const auto l = wm_loss(p, b);
    CHECK(l.bce == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(l.ce == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(l.value == doctest::Approx(std::log(2.0) + 0.2 * std::log(4.0)).epsilon(1e-14));
    CHECK(predict(p, b[0].obs_features, b[0].action).p_succ == 0.5);
  }
}

TEST_CASE("loss gradient matches central finite differences") {
  for (EnvKind env : {EnvKind::GridDrop, EnvKind::TimedRemove}) {
    const auto p = WMParams::random(env, 3, 10);
    const auto b = batch(env, 12, 2);
    const auto l = wm_loss(p, b);
    Rng rng(4);
    std::vector<std::size_t> coords;
    for (int i = 0; i < 300; ++i) coords.push_back(uniform_int(rng, int(p.size())));
    coords.push_back(p.off_bs());
    coords.push_back(p.off_bl() + 2);
    auto f = [&](const std::vector<double>& x) {
      auto q = p;
      q.values() = x;
      return wm_loss(q, b, kLambdaText, false).value;
    };
    const auto fd = oracle::central_diff(f, p.values(), coords, 1e-5);
    std::vector<double> an;
    for (auto c : coords) an.push_back(l.gradient[c]);
    CHECK(oracle::relative_error(an, fd) < 1e-6);
  }
}

TEST_CASE("temperature scales the success logit and label logits") {
  const auto p = WMParams::random(EnvKind::GridDrop, 5);
  const auto b = batch(EnvKind::GridDrop, 1, 3);
  const auto base = predict(p, b[0].obs_features, b[0].action);
  const auto hot = predict(p, b[0].obs_features, b[0].action, 0.5);
  CHECK(hot.p_succ == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * base.success_logit))).epsilon(1e-12));
  CHECK(hot.success_logit == base.success_logit);
  double s = 0;
  for (double v : hot.labels) s += v;
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("GridDrop neighbourhood: 4 directions x 3 radius offsets, in range only") {
  CHECK(grid_neighbors(GridPlace::from_coords(3, 3, 4)).size() == 12);
  CHECK(grid_neighbors(GridPlace::from_coords(0, 0, 1)).size() == 4);  // 2 directions x 2 radii
  for (const auto& n : grid_neighbors(GridPlace::from_coords(4, 5, 8))) {
    CHECK(action_distance(n, GridPlace::from_coords(4, 5, 8)) == 1);
    CHECK(n.radius <= 8);
  }
  Rng rng(1);
  const auto sub = perturb_neighbors(GridPlace::from_coords(3, 3, 4), 5, rng);
  std::set<EnvAction> unique(sub.begin(), sub.end());
  CHECK(unique.size() == 5);
  const auto pad = perturb_neighbors(GridPlace::from_coords(0, 0, 1), 12, rng);
  CHECK(pad.size() == 12);
  for (std::size_t i = 0; i < 4; ++i) CHECK(pad[i] == EnvAction(grid_neighbors(GridPlace::from_coords(0, 0, 1))[i]));
}

TEST_CASE("TimedRemove neighbourhood: small jitters that keep the removal order") {
  const EnvAction a = EventSeq({{1, 4}, {3, 8}, {2, 15}});
  Rng rng(2);
  const auto ns = perturb_neighbors(a, 200, rng);
  for (const auto& n : ns) {
    const auto& ev = n.events().events();
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].index == 1);
    CHECK(ev[1].index == 3);
    CHECK(ev[2].index == 2);
    CHECK(n != a);
    CHECK(action_distance(n, a) <= 2);
    CHECK(n.valid());
  }
  const auto same = perturb_neighbors(EventSeq(), 3, rng);
  for (const auto& n : same) CHECK(n.events().empty());
}

TEST_CASE("launch neighbourhood drops identity and out-of-range combinations") {
  CHECK(launch_neighbors({45, 0.5}).size() == 8);
  const auto corner = launch_neighbors({0, 0.0});
  CHECK(corner.size() == 3);
  for (const auto& n : corner) {
    CHECK(n.angle_deg >= 0);
    CHECK(n.power >= 0.0);
  }
}

TEST_CASE("stability score is the mean prediction over the sampled neighbours") {
  const auto p = WMParams::random(EnvKind::GridDrop, 7);
  const auto b = batch(EnvKind::GridDrop, 1, 5);
  const EnvAction a = GridPlace::from_coords(3, 3, 4);
  Rng rng(9);
  const auto ns = perturb_neighbors(a, 12, rng);
  double mean = 0;
  for (const auto& n : ns) mean += predict(p, b[0].obs_features, n).p_succ / 12.0;
  CHECK(stability_score(p, b[0].obs_features, a, 12, std::uint64_t(9)) == doctest::Approx(mean).epsilon(1e-14));
  WMParams flat(EnvKind::GridDrop, 4);
  CHECK(stability_score(flat, b[0].obs_features, a, 12, std::uint64_t(1)) == 0.5);
}

TEST_CASE("LCB is mean minus lambda times the population standard deviation") {
  auto p = WMParams::random(EnvKind::GridDrop, 8);
  const auto b = batch(EnvKind::GridDrop, 1, 6);
  const EnvAction a = GridPlace::from_coords(2, 5, 3);
  const std::vector<double> temps{0.1, 0.4, 1.0};
  const double z = predict(p, b[0].obs_features, a).success_logit;
  std::vector<double> ps;
  for (double t : temps) ps.push_back(1.0 / (1.0 + std::exp(-z / t)));
  const double mean = (ps[0] + ps[1] + ps[2]) / 3.0;
  double var = 0;
  for (double v : ps) var += (v - mean) * (v - mean) / 3.0;
  const auto l = lcb_score_at(p, b[0].obs_features, a, temps, 0.2);
  CHECK(l.mean == doctest::Approx(mean).epsilon(1e-14));
  CHECK(l.stddev == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(l.score == doctest::Approx(mean - 0.2 * std::sqrt(var)).epsilon(1e-12));
  const auto r = lcb_score(p, b[0].obs_features, a, 16, 0.2, 3);
  for (double t : r.temperatures) {
    CHECK(t >= 0.1);
    CHECK(t <= 1.0);
  }
  CHECK(r.score <= r.mean);
}

TEST_CASE("strategy-one value mixes point and stability predictions") {
  CHECK(strategy1_value(0.8, 0.4) == doctest::Approx(0.75 * 0.8 + 0.25 * 0.4));
  CHECK(strategy1_value(0.3, 0.3, 0.9) == doctest::Approx(0.3));
}

TEST_CASE("training reduces the loss on a learnable rule") {
  const auto tasks = sim::generate_tasks(EnvKind::GridDrop, 1, 1);
  const auto obs = sim::render_observation(tasks[0].scene);
  std::vector<WMSample> data;
  for (int d = 0; d < 512; d += 2) {
    const auto g = GridPlace::from_dense_index(d);
    const int y = g.column() < 4 ? 1 : 0;
    data.push_back({obs.features, g, y, y ? OutcomeLabel::GreenReachesTarget : OutcomeLabel::NoContact});
  }
  auto p = WMParams::random(EnvKind::GridDrop, 1, 16);
  TrainConfig c;
  c.epochs = 30;
  const auto rep = train(p, data, c);
  CHECK(rep.epoch_loss.back() < rep.epoch_loss.front());
  const auto e = evaluate(p, data);
  CHECK(e.accuracy > 0.95);
  CHECK(e.bce < std::log(2.0));
  int binned = 0;
  for (const auto& b : e.bins) binned += b.count;
  CHECK(binned == int(data.size()));
}

TEST_CASE("world-model checkpoint round trip and mismatch errors") {
  const auto p = WMParams::random(EnvKind::TimedRemove, 2, 12);
  const auto path = std::filesystem::temp_directory_path() / "icprl_wm_rt.txt";
  save_wm(path, p);
  CHECK(load_wm(path) == p);
  const auto pol = std::filesystem::temp_directory_path() / "icprl_wm_rt_policy.txt";
  policy::PolicyParams pp(EnvKind::GridDrop, 3, 2);
  policy::save_policy(pol, pp);
  CHECK_THROWS_AS(load_wm(pol), FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(pol);
}

TEST_CASE("label vocabularies") {
  CHECK(label_vocab(EnvKind::GridDrop).size() == 4);
  CHECK(label_vocab(EnvKind::TimedRemove).size() == 4);
  CHECK_THROWS_AS(label_index(EnvKind::GridDrop, OutcomeLabel::BallFallsAbyss), UsageError);
  for (auto l : label_vocab(EnvKind::TimedRemove)) CHECK(label_from_string(to_string(l)) == l);
}
