#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "icprl/action.hpp"
#include "icprl/rng.hpp"
#include "icprl/tokens.hpp"

namespace icprl::policy {

/// Tokenized policy:
///   pre    = W_f * features + b_1 + mean_j(sum_{t in block j} U[t]) + sum_{t in turn prefix} C[t]
///   hidden = tanh(pre)
///   logits = W_o * hidden + b_o, grammar-illegal tokens masked out of the softmax.
/// A history block is one past attempt's action tokens plus its outcome token.
class PolicyParams {
 public:
  static constexpr int kDefaultHidden = 64;

  PolicyParams() = default;
  PolicyParams(EnvKind env, int feature_dim, int hidden_dim = kDefaultHidden);
  /// Uniform(-scale, scale) initialisation.
  static PolicyParams random(EnvKind env, int feature_dim, std::uint64_t seed, int hidden_dim = kDefaultHidden,
                             double scale = 0.05);

  EnvKind env() const { return env_; }
  int feature_dim() const { return feature_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int vocab_size() const { return tok::kVocabSize; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // Row-major blocks inside values().
  std::size_t off_wf() const { return 0; }
  std::size_t off_b1() const { return off_wf() + std::size_t(hidden_dim_) * feature_dim_; }
  std::size_t off_hist() const { return off_b1() + hidden_dim_; }
  std::size_t off_turn() const { return off_hist() + std::size_t(tok::kVocabSize) * hidden_dim_; }
  std::size_t off_wo() const { return off_turn() + std::size_t(tok::kVocabSize) * hidden_dim_; }
  std::size_t off_bo() const { return off_wo() + std::size_t(tok::kVocabSize) * hidden_dim_; }

  bool operator==(const PolicyParams&) const = default;

 private:
  EnvKind env_ = EnvKind::GridDrop;
  int feature_dim_ = 0;
  int hidden_dim_ = 0;
  std::vector<double> values_;
};

/// Frozen copy of a policy. Only const access is exposed.
class RefPolicy {
 public:
  explicit RefPolicy(PolicyParams params) : params_(std::move(params)) {}
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
};

inline RefPolicy snapshot(const PolicyParams& params) { return RefPolicy(params); }

/// What the policy conditions on: the observation features and the token
/// prefix (build_context output plus anything generated so far this turn).
struct Context {
  std::span<const double> features;
  std::span<const int> tokens;
};

/// W_f * features + b_1; shared by every position of an episode.
std::vector<double> project_features(const PolicyParams& params, std::span<const double> features);

struct Forward {
  std::vector<double> pre;
  std::vector<double> hidden;
  std::vector<double> logits;
  TokenMask legal{};
  std::vector<double> probs;     // 0 on illegal tokens
  std::vector<double> logprobs;  // -inf on illegal tokens
  std::vector<std::vector<int>> blocks;  // parsed history blocks
  std::vector<int> turn_prefix;
};

/// Throws NumericError on non-finite logits and DecodeError when the prefix
/// violates the grammar or leaves no legal continuation.
Forward forward(const PolicyParams& params, std::span<const double> projection, std::span<const int> tokens);

std::vector<double> next_token_dist(const PolicyParams& params, const Context& ctx);

/// Accumulates d(objective)/d(params) for the given d(objective)/d(logits)
/// into grad, except the W_f/b_1 contribution which is returned through
/// dprojection (summed across positions, then finished by backward_projection).
void backward(const PolicyParams& params, const Forward& fwd, std::span<const double> dlogits,
              std::vector<double>& grad, std::vector<double>& dprojection);
void backward_projection(const PolicyParams& params, std::span<const double> features,
                         std::span<const double> dprojection, std::vector<double>& grad);

struct SampleResult {
  std::vector<int> tokens;
  std::vector<double> logprobs;  // log next_token_dist (temperature 1, no nucleus cut)
  bool truncated = false;
};

inline constexpr std::size_t kMaxGeneratedTokens = 16;

/// Autoregressive sampling with temperature and nucleus (top-p) truncation.
/// temperature < 1e-6 selects greedily.
SampleResult sample_sequence(const PolicyParams& params, const Context& ctx, double temperature, double top_p,
                             Rng& rng);
SampleResult sample_sequence(const PolicyParams& params, const Context& ctx, double temperature, double top_p,
                             std::uint64_t seed);

/// Exact per-token log-probabilities of `tokens` continuing `ctx`.
/// Throws DecodeError on a grammar-illegal token.
std::vector<double> sequence_logprobs(const PolicyParams& params, const Context& ctx, std::span<const int> tokens);

/// KL(p || q) over tokens where p > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

}  // namespace icprl::policy
