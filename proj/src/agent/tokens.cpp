#include "icprl/tokens.hpp"

#include "icprl/errors.hpp"

namespace icprl {

namespace tok {

std::string name(int t) {
  if (t == kEnd) return "END";
  if (t == kFail) return "FAIL";
  if (t == kSuccess) return "SUCCESS";
  if (t == kObs) return "OBS";
  if (is_cell(t)) return "CELL_" + std::to_string(t - kCellBase + 1);
  if (is_rad(t)) return "RAD_" + std::to_string(t - kRadBase + 1);
  if (is_idx(t)) return "IDX_" + std::to_string(t - kIdxBase);
  if (is_time(t)) return "TIME_" + std::to_string(t - kTimeBase);
  return "UNK_" + std::to_string(t);
}

std::uint64_t vocab_hash() {
  std::uint64_t h = 1469598103934665603ULL;
  for (int t = 0; t < kVocabSize; ++t) {
    for (char c : name(t) + ";") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace tok

TokenMask Grammar::legal() const {
  TokenMask mask{};
  if (done_) return mask;
  if (env_ == EnvKind::GridDrop) {
    if (!have_cell_) {
      for (int c = 1; c <= kGridCells; ++c) mask[tok::cell(c)] = true;
    } else if (!have_rad_) {
      for (int r = 1; r <= kGridRadii; ++r) mask[tok::rad(r)] = true;
    } else {
      mask[tok::kEnd] = true;
    }
    return mask;
  }
  if (pending_index_ >= 0) {
    for (int t = std::max(last_time_, 0); t < kTimeSteps; ++t) {
      if (t == last_time_ && pending_index_ <= last_index_) continue;
      mask[tok::time(t)] = true;
    }
    return mask;
  }
  mask[tok::kEnd] = true;
  if (events_ >= kMaxEvents) return mask;
  for (int i = 0; i < kMaxBodyIndex; ++i) {
    if (used_ & (1u << i)) continue;
    // An index below the previous one needs a strictly later time slot.
    if (last_time_ == kTimeSteps - 1 && i <= last_index_) continue;
    mask[tok::idx(i)] = true;
  }
  return mask;
}

bool Grammar::is_legal(int token) const {
  if (token < 0 || token >= tok::kVocabSize) return false;
  return legal()[token];
}

void Grammar::advance(int token) {
  if (!is_legal(token)) {
    throw DecodeError("token " + tok::name(token) + " not allowed here");
  }
  if (token == tok::kEnd) {
    done_ = true;
  } else if (tok::is_cell(token)) {
    have_cell_ = true;
    cell_ = token - tok::kCellBase + 1;
  } else if (tok::is_rad(token)) {
    have_rad_ = true;
  } else if (tok::is_idx(token)) {
    pending_index_ = token - tok::kIdxBase;
  } else if (tok::is_time(token)) {
    last_time_ = token - tok::kTimeBase;
    last_index_ = pending_index_;
    used_ |= 1u << pending_index_;
    pending_index_ = -1;
    ++events_;
  }
}

std::vector<int> encode_action(const EnvAction& action) {
  if (!action.valid()) throw InvalidAction("cannot encode invalid action " + action.to_string());
  if (action.kind() == EnvKind::GridDrop) {
    return {tok::cell(action.grid().cell), tok::rad(action.grid().radius), tok::kEnd};
  }
  std::vector<int> out;
  for (const auto& e : action.events().events()) {
    out.push_back(tok::idx(e.index));
    out.push_back(tok::time(e.time_step));
  }
  out.push_back(tok::kEnd);
  return out;
}

EnvAction decode_action(EnvKind env, std::span<const int> tokens) {
  Grammar grammar(env);
  GridPlace place;
  std::vector<TimedEvent> events;
  int pending = -1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (grammar.done()) throw DecodeError("trailing tokens after END");
    const int t = tokens[i];
    grammar.advance(t);
    if (tok::is_cell(t)) place.cell = t - tok::kCellBase + 1;
    if (tok::is_rad(t)) place.radius = t - tok::kRadBase + 1;
    if (tok::is_idx(t)) pending = t - tok::kIdxBase;
    if (tok::is_time(t)) events.push_back(TimedEvent{pending, t - tok::kTimeBase});
  }
  if (!grammar.done()) throw DecodeError("sequence ended without END");
  if (env == EnvKind::GridDrop) return place;
  return EventSeq(std::move(events));
}

}  // namespace icprl
