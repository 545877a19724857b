#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace icprl {

enum class EnvKind : std::uint8_t { GridDrop, TimedRemove };

std::string_view to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);

// Action lattice constants shared by the simulator, the token codec and the
// planner's perturbation rules.
inline constexpr int kGridSide = 8;
inline constexpr int kGridCells = kGridSide * kGridSide;
inline constexpr int kGridRadii = 8;
inline constexpr int kGridActionCount = kGridCells * kGridRadii;
inline constexpr double kTimeStepSeconds = 0.5;
inline constexpr int kTimeSteps = 21;  // 0.0 .. 10.0 s
inline constexpr int kMaxBodyIndex = 16;
inline constexpr int kMaxEvents = 4;

/// Drop an agent ball at the centre of an 8x8 cell (1..64, row-major from the
/// top-left) with a quantised radius (1..8, in sixteenths of a cell width).
struct GridPlace {
  int cell = 1;
  int radius = 1;

  int column() const { return (cell - 1) % kGridSide; }
  int row() const { return (cell - 1) / kGridSide; }
  bool valid() const;

  /// Dense index in [0, 512) used for exhaustive enumeration and tables.
  int dense_index() const { return (cell - 1) * kGridRadii + (radius - 1); }
  static GridPlace from_dense_index(int index);
  static GridPlace from_coords(int column, int row, int radius);

  auto operator<=>(const GridPlace&) const = default;
};

/// Removal of body `index` at `time_step` * 0.5 s.
struct TimedEvent {
  int index = 0;
  int time_step = 0;

  double seconds() const { return time_step * kTimeStepSeconds; }
  auto operator<=>(const TimedEvent& other) const {
    if (auto c = time_step <=> other.time_step; c != 0) return c;
    return index <=> other.index;
  }
  bool operator==(const TimedEvent&) const = default;
};

/// Ordered removal schedule. Construction canonicalises the order: by time,
/// ties broken by ascending body index.
class EventSeq {
 public:
  EventSeq() = default;
  explicit EventSeq(std::vector<TimedEvent> events);

  const std::vector<TimedEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  bool valid() const;

  auto operator<=>(const EventSeq&) const = default;

 private:
  std::vector<TimedEvent> events_;
};

class EnvAction {
 public:
  EnvAction() : value_(GridPlace{}) {}
  EnvAction(GridPlace p) : value_(p) {}  // NOLINT(google-explicit-constructor)
  EnvAction(EventSeq s) : value_(std::move(s)) {}  // NOLINT

  EnvKind kind() const {
    return std::holds_alternative<GridPlace>(value_) ? EnvKind::GridDrop : EnvKind::TimedRemove;
  }
  bool valid() const;

  const GridPlace& grid() const { return std::get<GridPlace>(value_); }
  const EventSeq& events() const { return std::get<EventSeq>(value_); }
  const std::variant<GridPlace, EventSeq>& value() const { return value_; }

  /// Compact human-readable form, e.g. "cell=5,radius=2" or
  /// `[{"time":1.0,"index":2}]`. Parsed back by parse_action.
  std::string to_string() const;

  auto operator<=>(const EnvAction&) const = default;

 private:
  std::variant<GridPlace, EventSeq> value_;
};

EnvAction parse_action(EnvKind kind, std::string_view text);

/// L-infinity distance on quantised action coordinates. GridDrop compares
/// (column, row, radius); TimedRemove compares per-body removal time steps,
/// with "never removed" placed one lattice step past the last time.
int action_distance(const EnvAction& a, const EnvAction& b);

}  // namespace icprl
