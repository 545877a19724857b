#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// into the code it checks except for plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "icprl/planner.hpp"
#include "icprl/policy.hpp"
#include "icprl/rng.hpp"
#include "icprl/tokens.hpp"

namespace oracle {

// Column standardisation in long double, two-pass.
inline std::vector<std::vector<double>> standardize_columns(const std::vector<std::vector<double>>& r) {
  std::vector<std::vector<double>> out;
  std::size_t width = 0;
  for (const auto& row : r) {
    out.emplace_back(row.size(), 0.0);
    width = std::max(width, row.size());
  }
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<long double> col;
    for (const auto& row : r)
      if (k < row.size()) col.push_back(row[k]);
    if (col.size() < 2) continue;
    long double mean = 0;
    for (auto v : col) mean += v;
    mean /= col.size();
    long double var = 0;
    for (auto v : col) var += (v - mean) * (v - mean);
    var /= col.size();
    if (var == 0) continue;
    const long double sd = std::sqrt(var);
    for (std::size_t i = 0; i < r.size(); ++i)
      if (k < r[i].size()) out[i][k] = static_cast<double>((r[i][k] - mean) / sd);
  }
  return out;
}

// Evaluates every PUCT criterion, then returns the lowest index attaining the maximum.
inline int brute_puct(const std::vector<double>& q, const std::vector<int>& n, const std::vector<double>& p,
                      double c) {
  long total = 0;
  for (int v : n) total += v;
  std::vector<double> u(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) u[i] = q[i] + c * p[i] * std::sqrt(double(total)) / (1.0 + n[i]);
  const double best = *std::max_element(u.begin(), u.end());
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u[i] == best) return int(i);
  return -1;
}

struct RefStep {
  int pick = -1;
  double v = 0.0;
  double mu = 0.0;
  bool scored = false;
  std::string stop;
};

struct RefPlan {
  std::vector<RefStep> steps;
  std::vector<double> q;
  std::vector<int> n;
  int chosen = -1;
};

// Root-only PUCT search written straight from the algorithm box: select,
// repeat check, evaluate (memoised per candidate), running-mean update,
// confidence check; final answer is argmax Q.
inline RefPlan reference_plan(std::size_t m, const std::vector<double>& prior,
                              const std::function<icprl::planner::Score(int, std::uint64_t)>& evaluate,
                              int budget, double c, int repeat_limit, double threshold, std::uint64_t seed) {
  RefPlan out;
  out.q.assign(m, 0.0);
  out.n.assign(m, 0);
  std::map<int, icprl::planner::Score> seen;
  int last = -1, same = 0;
  for (int t = 1; t <= budget; ++t) {
    RefStep s;
    s.pick = brute_puct(out.q, out.n, prior, c);
    same = (s.pick == last) ? same + 1 : 1;
    if (same >= repeat_limit) {
      s.stop = "repeat";
      out.steps.push_back(s);
      break;
    }
    last = s.pick;
    if (!seen.count(s.pick)) seen[s.pick] = evaluate(s.pick, icprl::derive_seed(seed, std::uint64_t(s.pick)));
    const auto sc = seen[s.pick];
    s.v = sc.v;
    s.mu = sc.mu;
    s.scored = true;
    out.q[s.pick] = (out.q[s.pick] * out.n[s.pick] + sc.v) / (out.n[s.pick] + 1);
    out.n[s.pick] += 1;
    if (sc.mu > threshold) {
      s.stop = "confident";
      out.steps.push_back(s);
      break;
    }
    out.steps.push_back(s);
  }
  if (!out.steps.empty() && out.steps.back().stop.empty()) out.steps.back().stop = "budget";
  out.chosen = int(std::max_element(out.q.begin(), out.q.end()) - out.q.begin());
  return out;
}

// Next-token distribution of the tokenized policy, recomputed from the raw
// parameter vector and the grammar.
inline std::vector<double> policy_dist(const icprl::policy::PolicyParams& p, const std::vector<double>& features,
                                       const std::vector<int>& context) {
  const int H = p.hidden_dim(), F = p.feature_dim(), V = icprl::tok::kVocabSize;
  const auto& w = p.values();
  std::vector<std::vector<int>> blocks;
  std::vector<int> cur;
  for (std::size_t i = 1; i < context.size(); ++i) {
    cur.push_back(context[i]);
    if (context[i] == icprl::tok::kFail || context[i] == icprl::tok::kSuccess) {
      blocks.push_back(cur);
      cur.clear();
    }
  }
  std::vector<double> a(H);
  for (int h = 0; h < H; ++h) {
    double s = w[p.off_b1() + h];
    for (int f = 0; f < F; ++f) s += w[p.off_wf() + h * F + f] * features[f];
    double hist = 0;
    for (const auto& b : blocks)
      for (int t : b) hist += w[p.off_hist() + t * H + h];
    if (!blocks.empty()) s += hist / double(blocks.size());
    for (int t : cur) s += w[p.off_turn() + t * H + h];
    a[h] = std::tanh(s);
  }
  icprl::Grammar g(p.env());
  for (int t : cur) g.advance(t);
  const auto legal = g.legal();
  std::vector<long double> e(V, 0.0L);
  long double z = 0;
  for (int v = 0; v < V; ++v) {
    if (!legal[v]) continue;
    long double s = w[p.off_bo() + v];
    for (int h = 0; h < H; ++h) s += w[p.off_wo() + v * H + h] * a[h];
    e[v] = std::exp(s);
    z += e[v];
  }
  std::vector<double> out(V);
  for (int v = 0; v < V; ++v) out[v] = double(e[v] / z);
  return out;
}

// Central finite differences of f at x over the listed coordinates.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, const std::vector<std::size_t>& coords,
                                        double h) {
  std::vector<double> g;
  for (std::size_t c : coords) {
    const double x0 = x[c];
    x[c] = x0 + h;
    const double up = f(x);
    x[c] = x0 - h;
    const double down = f(x);
    x[c] = x0;
    g.push_back((up - down) / (2 * h));
  }
  return g;
}

// max |a - b| / max(1e-8, max |b|) over paired entries.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(a[i] - b[i]));
    den = std::max(den, std::fabs(b[i]));
  }
  return num / den;
}

}  // namespace oracle
