#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icprl/action.hpp"

namespace icprl {

/// Fixed token vocabulary shared by both environments.
namespace tok {
inline constexpr int kEnd = 0;
inline constexpr int kFail = 1;
inline constexpr int kSuccess = 2;
inline constexpr int kObs = 3;
inline constexpr int kCellBase = 4;                            // CELL_1 .. CELL_64
inline constexpr int kRadBase = kCellBase + kGridCells;        // RAD_1 .. RAD_8
inline constexpr int kIdxBase = kRadBase + kGridRadii;         // IDX_0 .. IDX_15
inline constexpr int kTimeBase = kIdxBase + kMaxBodyIndex;     // TIME_0 .. TIME_20
inline constexpr int kVocabSize = kTimeBase + kTimeSteps;

inline constexpr int cell(int c) { return kCellBase + c - 1; }
inline constexpr int rad(int r) { return kRadBase + r - 1; }
inline constexpr int idx(int i) { return kIdxBase + i; }
inline constexpr int time(int t) { return kTimeBase + t; }

inline constexpr bool is_cell(int t) { return t >= kCellBase && t < kRadBase; }
inline constexpr bool is_rad(int t) { return t >= kRadBase && t < kIdxBase; }
inline constexpr bool is_idx(int t) { return t >= kIdxBase && t < kTimeBase; }
inline constexpr bool is_time(int t) { return t >= kTimeBase && t < kVocabSize; }
inline constexpr bool is_outcome(int t) { return t == kFail || t == kSuccess; }

std::string name(int token);
/// FNV-1a over all token names; stored in checkpoints to detect vocabulary drift.
std::uint64_t vocab_hash();
}  // namespace tok

using TokenMask = std::array<bool, tok::kVocabSize>;

/// Incremental parser for the action grammar of one turn:
///   GridDrop:    CELL RAD END
///   TimedRemove: (IDX TIME)* END, canonical order, each index at most once,
///                at most four events.
class Grammar {
 public:
  explicit Grammar(EnvKind env) : env_(env) {}

  EnvKind env() const { return env_; }
  bool done() const { return done_; }
  TokenMask legal() const;
  bool is_legal(int token) const;
  /// Throws DecodeError on an illegal token.
  void advance(int token);

 private:
  EnvKind env_;
  bool done_ = false;
  int cell_ = 0;
  bool have_cell_ = false;
  bool have_rad_ = false;
  int pending_index_ = -1;
  int last_time_ = -1;
  int last_index_ = -1;
  int events_ = 0;
  std::uint32_t used_ = 0;
};

std::vector<int> encode_action(const EnvAction& action);
/// Strict inverse of encode_action. Throws DecodeError on any deviation from
/// the grammar, including trailing tokens after END.
EnvAction decode_action(EnvKind env, std::span<const int> tokens);

}  // namespace icprl
