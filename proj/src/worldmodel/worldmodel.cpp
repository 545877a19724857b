#include "icprl/worldmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "icprl/checkpoint.hpp"
#include "icprl/errors.hpp"
#include "icprl/tokens.hpp"

namespace icprl::wm {

namespace {

constexpr int kGridActionDim = 3 * kGridSide + 8 + 15;
constexpr int kTimedActionSlots = sim::kTimedSlots;
constexpr int kTimedActionDim = 3 * kTimedActionSlots + 1;

// Offsets of the green-ball and target scalars inside the GridDrop observation features.
constexpr int kGreenX = 3 * kGridCells + 0;
constexpr int kGreenY = 3 * kGridCells + 1;
constexpr int kGreenR = 3 * kGridCells + 2;
constexpr int kTargetDx = 3 * kGridCells + 6;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct Pass {
  std::vector<double> input;
  std::vector<double> hidden;
  double logit = 0.0;
  std::vector<double> label_logits;
};

Pass run(const WMParams& p, std::span<const double> obs_features, const EnvAction& action) {
  if (action.kind() != p.env()) throw InvalidAction("action kind does not match the world model environment");
  Pass out;
  out.input.assign(obs_features.begin(), obs_features.end());
  const auto af = action_features(p.env(), obs_features, action);
  out.input.insert(out.input.end(), af.begin(), af.end());
  if (static_cast<int>(out.input.size()) != p.input_dim()) {
    throw UsageError("world model input length " + std::to_string(out.input.size()) + " != " +
                     std::to_string(p.input_dim()));
  }
  const int D = p.input_dim(), H = p.hidden_dim(), L = p.label_count();
  const auto& w = p.values();
  out.hidden.resize(H);
  for (int h = 0; h < H; ++h) {
    const double* row = w.data() + p.off_w1() + std::size_t(h) * D;
    double s = w[p.off_b1() + h];
    for (int d = 0; d < D; ++d) s += row[d] * out.input[d];
    out.hidden[h] = std::tanh(s);
  }
  out.logit = w[p.off_bs()];
  for (int h = 0; h < H; ++h) out.logit += w[p.off_ws() + h] * out.hidden[h];
  out.label_logits.resize(L);
  for (int l = 0; l < L; ++l) {
    const double* row = w.data() + p.off_wl() + std::size_t(l) * H;
    double s = w[p.off_bl() + l];
    for (int h = 0; h < H; ++h) s += row[h] * out.hidden[h];
    out.label_logits[l] = s;
  }
  if (!std::isfinite(out.logit)) throw NumericError("non-finite success logit");
  for (double v : out.label_logits)
    if (!std::isfinite(v)) throw NumericError("non-finite label logit");
  return out;
}

std::vector<double> softmax(const std::vector<double>& z, double temperature) {
  std::vector<double> p(z.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) mx = std::max(mx, v / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] / temperature - mx));
  for (double& v : p) v /= sum;
  return p;
}

std::vector<int> event_order(const EventSeq& s) {
  std::vector<int> order;
  for (const auto& e : s.events()) order.push_back(e.index);
  return order;
}

}  // namespace

std::string_view to_string(OutcomeLabel label) {
  switch (label) {
    case OutcomeLabel::NoContact: return "no-contact";
    case OutcomeLabel::AgentHitsGreen: return "agent-hits-green";
    case OutcomeLabel::GreenReachesTarget: return "green-reaches-target";
    case OutcomeLabel::BallFallsAbyss: return "ball-falls-abyss";
    case OutcomeLabel::Blocked: return "blocked";
    case OutcomeLabel::Other: return "other";
  }
  return "other";
}

OutcomeLabel label_from_string(std::string_view name) {
  for (auto l : {OutcomeLabel::NoContact, OutcomeLabel::AgentHitsGreen, OutcomeLabel::GreenReachesTarget,
                 OutcomeLabel::BallFallsAbyss, OutcomeLabel::Blocked, OutcomeLabel::Other}) {
    if (to_string(l) == name) return l;
  }
  throw FormatError("unknown outcome label '" + std::string(name) + "'");
}

const std::vector<OutcomeLabel>& label_vocab(EnvKind env) {
  static const std::vector<OutcomeLabel> grid{OutcomeLabel::NoContact, OutcomeLabel::AgentHitsGreen,
                                              OutcomeLabel::GreenReachesTarget, OutcomeLabel::Blocked};
  static const std::vector<OutcomeLabel> timed{OutcomeLabel::NoContact, OutcomeLabel::BallFallsAbyss,
                                               OutcomeLabel::Blocked, OutcomeLabel::Other};
  return env == EnvKind::GridDrop ? grid : timed;
}

int label_index(EnvKind env, OutcomeLabel label) {
  const auto& v = label_vocab(env);
  auto it = std::find(v.begin(), v.end(), label);
  if (it == v.end()) {
    throw UsageError("label " + std::string(to_string(label)) + " not in the " + std::string(icprl::to_string(env)) +
                     " vocabulary");
  }
  return static_cast<int>(it - v.begin());
}

int action_feature_dim(EnvKind env) { return env == EnvKind::GridDrop ? kGridActionDim : kTimedActionDim; }

std::vector<double> action_features(EnvKind env, std::span<const double> obs, const EnvAction& action) {
  std::vector<double> f(action_feature_dim(env), 0.0);
  if (env == EnvKind::GridDrop) {
    const GridPlace& g = action.grid();
    const int col = g.column(), row = g.row();
    f[col] = 1.0;
    f[kGridSide + row] = 1.0;
    f[2 * kGridSide + g.radius - 1] = 1.0;
    const double gx = obs[kGreenX], gy = obs[kGreenY];
    const double gr = obs[kGreenR] / 8.0;
    const double dir = obs[kTargetDx] >= 0.0 ? 1.0 : -1.0;
    const double ax = (col + 0.5) / kGridSide;
    const double ay = 1.0 - (row + 0.5) / kGridSide;
    const double ar = g.radius / 16.0 / kGridSide;
    const double dx = (ax - gx) * dir;
    const double dy = ay - gy;
    double* s = f.data() + 3 * kGridSide;
    s[0] = ax;
    s[1] = ay;
    s[2] = g.radius / 8.0;
    s[3] = dx;
    s[4] = dy;
    s[5] = std::fabs(dx);
    s[6] = std::fabs(dx) - ar - gr;
    s[7] = dy > 0.0 ? dx : 0.0;
    const int gcol = std::clamp(static_cast<int>(gx * kGridSide), 0, kGridSide - 1);
    const int d = std::clamp(static_cast<int>((col - gcol) * dir), -7, 7);
    f[3 * kGridSide + 8 + d + 7] = 1.0;
    return f;
  }
  const auto& events = action.events().events();
  for (const auto& e : events) {
    if (e.index < 0 || e.index >= kTimedActionSlots) continue;
    const double t = e.time_step / static_cast<double>(kTimeSteps - 1);
    f[3 * e.index] = 1.0;
    f[3 * e.index + 1] = t;
    f[3 * e.index + 2] = t * t;
  }
  f[3 * kTimedActionSlots] = static_cast<double>(events.size()) / kMaxEvents;
  return f;
}

WMParams::WMParams(EnvKind env, int hidden_dim)
    : env_(env),
      input_dim_(sim::feature_dim(env) + action_feature_dim(env)),
      hidden_dim_(hidden_dim),
      label_count_(static_cast<int>(label_vocab(env).size())) {
  if (hidden_dim <= 0) throw UsageError("hidden dimension must be positive");
  values_.assign(off_bl() + label_count_, 0.0);
}

WMParams WMParams::random(EnvKind env, std::uint64_t seed, int hidden_dim) {
  WMParams p(env, hidden_dim);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(p.input_dim_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (std::size_t i = 0; i < p.values_.size(); ++i) {
    const bool first = i < p.off_b1();
    const bool bias = (i >= p.off_b1() && i < p.off_ws()) || i == p.off_bs() || i >= p.off_bl();
    p.values_[i] = bias ? 0.0 : uniform(rng, -1.0, 1.0) * (first ? s1 : s2);
  }
  return p;
}

WMPrediction predict(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                     double temperature) {
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  const Pass pass = run(params, obs_features, action);
  WMPrediction out;
  out.success_logit = pass.logit;
  out.p_succ = sigmoid(pass.logit / temperature);
  out.labels = softmax(pass.label_logits, temperature);
  return out;
}

WMPrediction predict(const WMParams& params, const sim::Observation& obs, const EnvAction& action,
                     double temperature) {
  if (obs.env != params.env()) throw InvalidAction("observation environment does not match the world model");
  return predict(params, obs.features, action, temperature);
}

Loss wm_loss(const WMParams& params, std::span<const WMSample> batch, double lambda_text, bool with_gradient) {
  Loss out;
  if (batch.empty()) return out;
  if (with_gradient) out.gradient.assign(params.size(), 0.0);
  const int D = params.input_dim(), H = params.hidden_dim(), L = params.label_count();
  const double inv = 1.0 / static_cast<double>(batch.size());
  const auto& w = params.values();
  std::vector<double> dh(H);
  for (const auto& sample : batch) {
    if (sample.y != 0 && sample.y != 1) throw UsageError("success label must be 0 or 1");
    const Pass pass = run(params, sample.obs_features, sample.action);
    const int target = label_index(params.env(), sample.label);
    out.bce += inv * (softplus(pass.logit) - sample.y * pass.logit);
    const auto probs = softmax(pass.label_logits, 1.0);
    double mx = *std::max_element(pass.label_logits.begin(), pass.label_logits.end());
    double z = 0.0;
    for (double v : pass.label_logits) z += std::exp(v - mx);
    out.ce += inv * (mx + std::log(z) - pass.label_logits[target]);
    if (!with_gradient) continue;

    auto& g = out.gradient;
    const double ds = inv * (sigmoid(pass.logit) - sample.y);
    std::fill(dh.begin(), dh.end(), 0.0);
    g[params.off_bs()] += ds;
    for (int h = 0; h < H; ++h) {
      g[params.off_ws() + h] += ds * pass.hidden[h];
      dh[h] += ds * w[params.off_ws() + h];
    }
    for (int l = 0; l < L; ++l) {
      const double dl = inv * lambda_text * (probs[l] - (l == target ? 1.0 : 0.0));
      g[params.off_bl() + l] += dl;
      double* gr = g.data() + params.off_wl() + std::size_t(l) * H;
      const double* row = w.data() + params.off_wl() + std::size_t(l) * H;
      for (int h = 0; h < H; ++h) {
        gr[h] += dl * pass.hidden[h];
        dh[h] += dl * row[h];
      }
    }
    for (int h = 0; h < H; ++h) {
      const double dp = dh[h] * (1.0 - pass.hidden[h] * pass.hidden[h]);
      if (dp == 0.0) continue;
      g[params.off_b1() + h] += dp;
      double* gr = g.data() + params.off_w1() + std::size_t(h) * D;
      for (int d = 0; d < D; ++d) gr[d] += dp * pass.input[d];
    }
  }
  out.value = out.bce + lambda_text * out.ce;
  return out;
}

std::vector<GridPlace> grid_neighbors(const GridPlace& place) {
  static constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  std::vector<GridPlace> out;
  for (const auto& d : kDirs) {
    const int c = place.column() + d[0], r = place.row() + d[1];
    if (c < 0 || c >= kGridSide || r < 0 || r >= kGridSide) continue;
    for (int dr = -1; dr <= 1; ++dr) {
      const int rad = place.radius + dr;
      if (rad < 1 || rad > kGridRadii) continue;
      out.push_back(GridPlace::from_coords(c, r, rad));
    }
  }
  return out;
}

std::vector<EnvAction> perturb_neighbors(const EnvAction& action, int count, Rng& rng) {
  if (count < 1) throw UsageError("neighbour count must be positive");
  if (!action.valid()) throw InvalidAction("cannot perturb invalid action " + action.to_string());
  std::vector<EnvAction> out;
  if (action.kind() == EnvKind::GridDrop) {
    auto pool = grid_neighbors(action.grid());
    const int n = static_cast<int>(pool.size());
    if (count >= n) {
      for (const auto& g : pool) out.emplace_back(g);
      while (static_cast<int>(out.size()) < count) out.emplace_back(pool[uniform_int(rng, n)]);
    } else {
      for (int i = 0; i < count; ++i) {
        std::swap(pool[i], pool[i + uniform_int(rng, n - i)]);
        out.emplace_back(pool[i]);
      }
    }
    return out;
  }

  const auto& base = action.events();
  if (base.empty()) return std::vector<EnvAction>(count, action);
  static constexpr int kOffsets[4] = {-2, -1, 1, 2};
  const auto order = event_order(base);
  for (int j = 0; j < count; ++j) {
    EnvAction pick = action;
    for (int tries = 0; tries < 1000; ++tries) {
      std::vector<TimedEvent> ev = base.events();
      bool moved = false;
      for (auto& e : ev) {
        if (uniform01(rng) >= 0.5) continue;
        const int t = e.time_step + kOffsets[uniform_int(rng, 4)];
        if (t < 0 || t >= kTimeSteps) continue;
        e.time_step = t;
        moved = true;
      }
      if (!moved) continue;
      EventSeq seq(std::move(ev));
      if (event_order(seq) != order) continue;
      pick = EnvAction(std::move(seq));
      break;
    }
    out.push_back(std::move(pick));
  }
  return out;
}

std::vector<LaunchAction> launch_neighbors(const LaunchAction& a) {
  std::vector<LaunchAction> out;
  for (int da : {-5, 0, 5}) {
    for (int dp : {-1, 0, 1}) {
      if (da == 0 && dp == 0) continue;
      LaunchAction n{a.angle_deg + da, std::round((a.power + 0.1 * dp) * 1e9) / 1e9};
      if (n.angle_deg < 0 || n.angle_deg > 90 || n.power < 0.0 || n.power > 1.0) continue;
      out.push_back(n);
    }
  }
  return out;
}

double stability_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                       int count, Rng& rng) {
  const auto neighbors = perturb_neighbors(action, count, rng);
  double sum = 0.0;
  for (const auto& n : neighbors) sum += predict(params, obs_features, n).p_succ;
  return sum / static_cast<double>(neighbors.size());
}

double stability_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                       int count, std::uint64_t seed) {
  Rng rng(seed);
  return stability_score(params, obs_features, action, count, rng);
}

LcbScore lcb_score_at(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                      std::span<const double> temperatures, double lambda) {
  if (temperatures.size() < 2) throw UsageError("LCB needs at least two passes");
  LcbScore out;
  out.temperatures.assign(temperatures.begin(), temperatures.end());
  const double logit = predict(params, obs_features, action).success_logit;
  std::vector<double> p;
  for (double t : temperatures) p.push_back(sigmoid(logit / t));
  out.mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  double ss = 0.0;
  for (double v : p) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(p.size()));
  out.score = out.mean - lambda * out.stddev;
  return out;
}

LcbScore lcb_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                   int passes, double lambda, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> temps(passes);
  for (double& t : temps) t = uniform(rng, 0.1, 1.0);
  return lcb_score_at(params, obs_features, action, temps, lambda);
}

double strategy1_value(double p_succ, double p_stab, double lambda) {
  return (1.0 - lambda) * p_succ + lambda * p_stab;
}

TrainReport train(WMParams& params, std::span<const WMSample> data, const TrainConfig& config) {
  TrainReport report;
  if (data.empty()) return report;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, 0x3d));
  std::vector<WMSample> batch;
  long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_int(rng, int(i))]);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(data[order[i]]);
      Loss loss = wm_loss(params, batch, config.lambda_text);
      total += loss.value * static_cast<double>(batch.size());
      ++t;
      auto& w = params.values();
      const double c1 = 1.0 - std::pow(b1, double(t)), c2 = 1.0 - std::pow(b2, double(t));
      for (std::size_t p = 0; p < w.size(); ++p) {
        const double g = loss.gradient[p] + config.weight_decay * w[p];
        m[p] = b1 * m[p] + (1 - b1) * g;
        v[p] = b2 * v[p] + (1 - b2) * g * g;
        w[p] -= config.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + eps);
      }
    }
    report.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  return report;
}

Evaluation evaluate(const WMParams& params, std::span<const WMSample> data, int bins) {
  Evaluation e;
  e.count = data.size();
  e.bins.resize(bins);
  for (int b = 0; b < bins; ++b) {
    e.bins[b].lo = double(b) / bins;
    e.bins[b].hi = double(b + 1) / bins;
  }
  if (data.empty()) return e;
  std::size_t correct = 0, label_correct = 0;
  for (const auto& s : data) {
    const auto pred = predict(params, s.obs_features, s.action);
    correct += (pred.p_succ >= 0.5) == (s.y == 1);
    e.bce += softplus(pred.success_logit) - s.y * pred.success_logit;
    const auto best = std::max_element(pred.labels.begin(), pred.labels.end()) - pred.labels.begin();
    label_correct += best == label_index(params.env(), s.label);
    auto& bin = e.bins[std::min(bins - 1, static_cast<int>(pred.p_succ * bins))];
    ++bin.count;
    bin.mean_predicted += pred.p_succ;
    bin.empirical += s.y;
  }
  const double n = static_cast<double>(data.size());
  e.accuracy = correct / n;
  e.bce /= n;
  e.label_accuracy = label_correct / n;
  for (auto& bin : e.bins) {
    if (bin.count == 0) continue;
    bin.mean_predicted /= bin.count;
    bin.empirical /= bin.count;
  }
  return e;
}

std::string to_json(const Evaluation& e) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : e.bins) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"mean_predicted", b.mean_predicted},
                    {"empirical", b.empirical}});
  }
  nlohmann::json j = {{"count", e.count},       {"accuracy", e.accuracy},
                      {"bce", e.bce},           {"baseline_bce", std::log(2.0)},
                      {"label_accuracy", e.label_accuracy}, {"calibration", bins}};
  return j.dump(2);
}

void save_wm(const std::filesystem::path& path, const WMParams& params) {
  Checkpoint c;
  c.kind = "worldmodel";
  c.env = std::string(icprl::to_string(params.env()));
  c.dims = {{"input", params.input_dim()}, {"hidden", params.hidden_dim()}, {"labels", params.label_count()}};
  c.vocab_hash = tok::vocab_hash();
  c.values = params.values();
  save_checkpoint(path, c);
}

WMParams load_wm(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "worldmodel") throw FormatError(path.string() + ": not a world-model checkpoint (kind " + c.kind + ")");
  if (c.vocab_hash != tok::vocab_hash()) throw FormatError(path.string() + ": vocabulary mismatch");
  WMParams p(env_kind_from_string(c.env), c.dims.at("hidden"));
  if (c.dims.at("input") != p.input_dim() || c.dims.at("labels") != p.label_count() || c.values.size() != p.size()) {
    throw FormatError(path.string() + ": world-model dimensions mismatch");
  }
  for (double v : c.values)
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite parameter");
  p.values() = std::move(c.values);
  return p;
}

}  // namespace icprl::wm
