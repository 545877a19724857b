#include "icprl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icprl/checkpoint.hpp"
#include "icprl/errors.hpp"

namespace icprl::policy {

namespace {

constexpr int V = tok::kVocabSize;

struct Parsed {
  std::vector<std::vector<int>> blocks;
  std::vector<int> prefix;
};

Parsed parse_context(std::span<const int> tokens) {
  Parsed p;
  std::size_t i = 0;
  if (!tokens.empty() && tokens[0] == tok::kObs) i = 1;
  std::vector<int> current;
  for (; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= V) throw DecodeError("token id out of range: " + std::to_string(t));
    if (t == tok::kObs) throw DecodeError("OBS token after the start of the context");
    current.push_back(t);
    if (tok::is_outcome(t)) {
      p.blocks.push_back(std::move(current));
      current.clear();
    }
  }
  p.prefix = std::move(current);
  return p;
}

TokenMask legal_after(EnvKind env, std::span<const int> prefix) {
  Grammar g(env);
  for (int t : prefix) g.advance(t);
  if (g.done()) throw DecodeError("turn already complete; no token may follow END");
  return g.legal();
}

}  // namespace

PolicyParams::PolicyParams(EnvKind env, int feature_dim, int hidden_dim)
    : env_(env), feature_dim_(feature_dim), hidden_dim_(hidden_dim) {
  if (feature_dim <= 0 || hidden_dim <= 0) throw UsageError("policy dims must be positive");
  values_.assign(off_bo() + V, 0.0);
}

PolicyParams PolicyParams::random(EnvKind env, int feature_dim, std::uint64_t seed, int hidden_dim, double scale) {
  PolicyParams p(env, feature_dim, hidden_dim);
  Rng rng(seed);
  for (double& v : p.values_) v = uniform(rng, -scale, scale);
  return p;
}

std::vector<double> project_features(const PolicyParams& params, std::span<const double> features) {
  const int H = params.hidden_dim(), F = params.feature_dim();
  if (static_cast<int>(features.size()) != F) {
    throw UsageError("feature length " + std::to_string(features.size()) + " != " + std::to_string(F));
  }
  const auto& w = params.values();
  std::vector<double> out(H);
  for (int h = 0; h < H; ++h) {
    const double* row = w.data() + params.off_wf() + std::size_t(h) * F;
    double s = w[params.off_b1() + h];
    for (int f = 0; f < F; ++f) s += row[f] * features[f];
    out[h] = s;
  }
  return out;
}

Forward forward(const PolicyParams& params, std::span<const double> projection, std::span<const int> tokens) {
  const int H = params.hidden_dim();
  const auto& w = params.values();
  Parsed parsed = parse_context(tokens);

  Forward fw;
  fw.legal = legal_after(params.env(), parsed.prefix);
  fw.pre.assign(projection.begin(), projection.end());
  if (!parsed.blocks.empty()) {
    const double inv = 1.0 / static_cast<double>(parsed.blocks.size());
    for (const auto& block : parsed.blocks) {
      for (int t : block) {
        const double* u = w.data() + params.off_hist() + std::size_t(t) * H;
        for (int h = 0; h < H; ++h) fw.pre[h] += inv * u[h];
      }
    }
  }
  for (int t : parsed.prefix) {
    const double* c = w.data() + params.off_turn() + std::size_t(t) * H;
    for (int h = 0; h < H; ++h) fw.pre[h] += c[h];
  }
  fw.hidden.resize(H);
  for (int h = 0; h < H; ++h) fw.hidden[h] = std::tanh(fw.pre[h]);

  fw.logits.assign(V, 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < V; ++v) {
    const double* row = w.data() + params.off_wo() + std::size_t(v) * H;
    double s = w[params.off_bo() + v];
    for (int h = 0; h < H; ++h) s += row[h] * fw.hidden[h];
    if (!std::isfinite(s)) throw NumericError("non-finite logit for token " + tok::name(v), long(tokens.size()));
    fw.logits[v] = s;
    if (fw.legal[v]) mx = std::max(mx, s);
  }
  fw.probs.assign(V, 0.0);
  fw.logprobs.assign(V, -std::numeric_limits<double>::infinity());
  double z = 0.0;
  for (int v = 0; v < V; ++v)
    if (fw.legal[v]) z += std::exp(fw.logits[v] - mx);
  const double logz = mx + std::log(z);
  for (int v = 0; v < V; ++v) {
    if (!fw.legal[v]) continue;
    fw.logprobs[v] = fw.logits[v] - logz;
    fw.probs[v] = std::exp(fw.logprobs[v]);
  }
  fw.blocks = std::move(parsed.blocks);
  fw.turn_prefix = std::move(parsed.prefix);
  return fw;
}

std::vector<double> next_token_dist(const PolicyParams& params, const Context& ctx) {
  const auto proj = project_features(params, ctx.features);
  return forward(params, proj, ctx.tokens).probs;
}

void backward(const PolicyParams& params, const Forward& fw, std::span<const double> dlogits,
              std::vector<double>& grad, std::vector<double>& dprojection) {
  const int H = params.hidden_dim();
  const auto& w = params.values();
  std::vector<double> dpre(H, 0.0);
  for (int v = 0; v < V; ++v) {
    const double g = dlogits[v];
    if (g == 0.0) continue;
    grad[params.off_bo() + v] += g;
    double* gw = grad.data() + params.off_wo() + std::size_t(v) * H;
    const double* row = w.data() + params.off_wo() + std::size_t(v) * H;
    for (int h = 0; h < H; ++h) {
      gw[h] += g * fw.hidden[h];
      dpre[h] += g * row[h];
    }
  }
  for (int h = 0; h < H; ++h) {
    dpre[h] *= 1.0 - fw.hidden[h] * fw.hidden[h];
    dprojection[h] += dpre[h];
  }
  if (!fw.blocks.empty()) {
    const double inv = 1.0 / static_cast<double>(fw.blocks.size());
    for (const auto& block : fw.blocks) {
      for (int t : block) {
        double* gu = grad.data() + params.off_hist() + std::size_t(t) * H;
        for (int h = 0; h < H; ++h) gu[h] += inv * dpre[h];
      }
    }
  }
  for (int t : fw.turn_prefix) {
    double* gc = grad.data() + params.off_turn() + std::size_t(t) * H;
    for (int h = 0; h < H; ++h) gc[h] += dpre[h];
  }
}

void backward_projection(const PolicyParams& params, std::span<const double> features,
                         std::span<const double> dprojection, std::vector<double>& grad) {
  const int H = params.hidden_dim(), F = params.feature_dim();
  for (int h = 0; h < H; ++h) {
    const double g = dprojection[h];
    grad[params.off_b1() + h] += g;
    if (g == 0.0) continue;
    double* row = grad.data() + params.off_wf() + std::size_t(h) * F;
    for (int f = 0; f < F; ++f) row[f] += g * features[f];
  }
}

SampleResult sample_sequence(const PolicyParams& params, const Context& ctx, double temperature, double top_p,
                             Rng& rng) {
  if (!(temperature >= 0.0)) throw UsageError("temperature must be non-negative");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw UsageError("top-p must lie in (0, 1]");
  const auto proj = project_features(params, ctx.features);
  std::vector<int> tokens(ctx.tokens.begin(), ctx.tokens.end());
  SampleResult out;
  std::vector<int> order(V);
  std::vector<double> q(V);
  while (out.tokens.size() < kMaxGeneratedTokens) {
    const Forward fw = forward(params, proj, tokens);
    int pick = -1;
    if (temperature < 1e-6) {
      for (int v = 0; v < V; ++v)
        if (fw.legal[v] && (pick < 0 || fw.logits[v] > fw.logits[pick])) pick = v;
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < V; ++v)
        if (fw.legal[v]) mx = std::max(mx, fw.logits[v] / temperature);
      double z = 0.0;
      for (int v = 0; v < V; ++v) {
        q[v] = fw.legal[v] ? std::exp(fw.logits[v] / temperature - mx) : 0.0;
        z += q[v];
      }
      for (double& x : q) x /= z;
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return q[a] > q[b]; });
      double kept = 0.0;
      std::size_t n = 0;
      while (n < order.size() && q[order[n]] > 0.0) {
        kept += q[order[n]];
        ++n;
        if (kept >= top_p) break;
      }
      double u = uniform01(rng) * kept;
      pick = order[n - 1];
      for (std::size_t i = 0; i < n; ++i) {
        u -= q[order[i]];
        if (u < 0.0) {
          pick = order[i];
          break;
        }
      }
    }
    out.tokens.push_back(pick);
    out.logprobs.push_back(fw.logprobs[pick]);
    tokens.push_back(pick);
    if (pick == tok::kEnd) return out;
  }
  out.truncated = true;
  return out;
}

SampleResult sample_sequence(const PolicyParams& params, const Context& ctx, double temperature, double top_p,
                             std::uint64_t seed) {
  Rng rng(seed);
  return sample_sequence(params, ctx, temperature, top_p, rng);
}

std::vector<double> sequence_logprobs(const PolicyParams& params, const Context& ctx, std::span<const int> tokens) {
  const auto proj = project_features(params, ctx.features);
  std::vector<int> prefix(ctx.tokens.begin(), ctx.tokens.end());
  std::vector<double> out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    const Forward fw = forward(params, proj, prefix);
    if (t < 0 || t >= V || !fw.legal[t]) throw DecodeError("illegal token " + tok::name(t) + " in sequence");
    out.push_back(fw.logprobs[t]);
    prefix.push_back(t);
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return std::max(kl, 0.0);
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  Checkpoint c;
  c.kind = "policy";
  c.env = std::string(to_string(params.env()));
  c.dims = {{"feature", params.feature_dim()}, {"hidden", params.hidden_dim()}, {"vocab", V}};
  c.vocab_hash = tok::vocab_hash();
  c.values = params.values();
  save_checkpoint(path, c);
}

PolicyParams load_policy(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "policy") throw FormatError(path.string() + ": not a policy checkpoint (kind " + c.kind + ")");
  if (c.vocab_hash != tok::vocab_hash() || c.dims["vocab"] != V) {
    throw FormatError(path.string() + ": vocabulary mismatch");
  }
  PolicyParams p(env_kind_from_string(c.env), c.dims.at("feature"), c.dims.at("hidden"));
  if (c.values.size() != p.size()) throw FormatError(path.string() + ": parameter count mismatch");
  for (double v : c.values)
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite parameter");
  p.values() = std::move(c.values);
  return p;
}

}  // namespace icprl::policy
