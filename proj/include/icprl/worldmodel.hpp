#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icprl/action.hpp"
#include "icprl/rng.hpp"
#include "icprl/sim.hpp"

namespace icprl::wm {

// Categorical outcome labels predicted by the second head.
enum class OutcomeLabel : std::uint8_t {
  NoContact,
  AgentHitsGreen,
  GreenReachesTarget,
  BallFallsAbyss,
  Blocked,
  Other,
};

std::string_view to_string(OutcomeLabel label);
OutcomeLabel label_from_string(std::string_view name);

/// Label vocabulary of the head, per environment (four labels each).
const std::vector<OutcomeLabel>& label_vocab(EnvKind env);
/// Position of a label in label_vocab(env); throws UsageError if absent.
int label_index(EnvKind env, OutcomeLabel label);

int action_feature_dim(EnvKind env);
/// Encoding of an action relative to the observation it is applied to.
/// GridDrop: column/row/radius one-hots, the drop point, and its offset from
/// the green ball oriented towards the target. TimedRemove: per body slot a
/// removed flag and the removal time.
std::vector<double> action_features(EnvKind env, std::span<const double> obs_features, const EnvAction& action);

/// Two-headed predictor:
///   h      = tanh(W_1 [obs; act] + b_1)
///   s      = w_s . h + b_s          (success logit)
///   l      = W_l h + b_l            (label logits)
class WMParams {
 public:
  static constexpr int kDefaultHidden = 64;

  WMParams() = default;
  WMParams(EnvKind env, int hidden_dim = kDefaultHidden);
  static WMParams random(EnvKind env, std::uint64_t seed, int hidden_dim = kDefaultHidden);

  EnvKind env() const { return env_; }
  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int label_count() const { return label_count_; }
  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return off_w1() + std::size_t(hidden_dim_) * input_dim_; }
  std::size_t off_ws() const { return off_b1() + hidden_dim_; }
  std::size_t off_bs() const { return off_ws() + hidden_dim_; }
  std::size_t off_wl() const { return off_bs() + 1; }
  std::size_t off_bl() const { return off_wl() + std::size_t(label_count_) * hidden_dim_; }

  bool operator==(const WMParams&) const = default;

 private:
  EnvKind env_ = EnvKind::GridDrop;
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  int label_count_ = 0;
  std::vector<double> values_;
};

struct WMPrediction {
  double p_succ = 0.5;
  double success_logit = 0.0;   // untempered
  std::vector<double> labels;   // distribution over label_vocab(env)
};

WMPrediction predict(const WMParams& params, const sim::Observation& obs, const EnvAction& action,
                     double temperature = 1.0);
/// Same as predict, on raw observation features.
WMPrediction predict(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                     double temperature = 1.0);

/// One supervised example.
struct WMSample {
  std::vector<double> obs_features;
  EnvAction action;
  int y = 0;
  OutcomeLabel label = OutcomeLabel::Other;
};

inline constexpr double kLambdaText = 0.2;

struct Loss {
  double value = 0.0;
  double bce = 0.0;
  double ce = 0.0;
  std::vector<double> gradient;
};

/// mean BCE (logit space) + lambda_text * mean label cross-entropy.
Loss wm_loss(const WMParams& params, std::span<const WMSample> batch, double lambda_text = kLambdaText,
             bool with_gradient = true);

// ---------------------------------------------------------------------------
// Perturbation neighbourhoods

/// GridDrop: +-1 column/row crossed with radius offsets {-1, 0, +1}.
/// TimedRemove: each event jittered with probability 1/2 by +-1 or +-2
/// lattice steps (0.5 s / 1.0 s); at least one event moves; order is
/// re-canonicalised.
std::vector<EnvAction> perturb_neighbors(const EnvAction& action, int count, Rng& rng);

/// In-range GridDrop neighbours in canonical order (direction-major), before
/// padding or subsampling.
std::vector<GridPlace> grid_neighbors(const GridPlace& place);

/// Angle/power launch action of slingshot-style environments (no simulator
/// here; only the neighbourhood rule is provided).
struct LaunchAction {
  int angle_deg = 45;  // [0, 90]
  double power = 0.5;  // [0, 1]
  bool operator==(const LaunchAction&) const = default;
};
/// Angle offsets {-5, 0, +5} degrees crossed with power offsets {-0.1, 0, +0.1},
/// identity and out-of-range combinations removed.
std::vector<LaunchAction> launch_neighbors(const LaunchAction& action);

inline constexpr int kDefaultNeighbors = 12;

/// Mean p_succ over `count` sampled neighbours of `action`.
double stability_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                       int count, Rng& rng);
double stability_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                       int count = kDefaultNeighbors, std::uint64_t seed = 0);

struct LcbScore {
  double score = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> temperatures;
};

inline constexpr double kLambdaLcb = 0.2;

/// K temperatures uniform on [0.1, 1.0]; mean minus lambda * population std.
LcbScore lcb_score(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                   int passes = 8, double lambda = kLambdaLcb, std::uint64_t seed = 0);
/// Same with explicit temperatures.
LcbScore lcb_score_at(const WMParams& params, std::span<const double> obs_features, const EnvAction& action,
                      std::span<const double> temperatures, double lambda = kLambdaLcb);

inline constexpr double kLambdaPuct = 0.25;

double strategy1_value(double p_succ, double p_stab, double lambda = kLambdaPuct);

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 3e-3;
  double weight_decay = 1e-4;
  double lambda_text = kLambdaText;
  int hidden_dim = WMParams::kDefaultHidden;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

/// Adam on wm_loss plus L2 weight decay.
TrainReport train(WMParams& params, std::span<const WMSample> data, const TrainConfig& config);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double mean_predicted = 0.0;
  double empirical = 0.0;
};

struct Evaluation {
  std::size_t count = 0;
  double accuracy = 0.0;     // threshold 0.5
  double bce = 0.0;
  double label_accuracy = 0.0;
  std::vector<CalibrationBin> bins;
};

Evaluation evaluate(const WMParams& params, std::span<const WMSample> data, int bins = 10);
std::string to_json(const Evaluation& e);

void save_wm(const std::filesystem::path& path, const WMParams& params);
WMParams load_wm(const std::filesystem::path& path);

}  // namespace icprl::wm
