#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "icprl/action.hpp"
#include "icprl/sim.hpp"
#include "icprl/tasks.hpp"
#include "icprl/worldmodel.hpp"

namespace icprl::curation {

enum class LabelerKind : std::uint8_t {
  Frames,    // sees all five post-action frames
  Terminal,  // sees only the pre-action observation and the last frame
};

std::string_view to_string(LabelerKind kind);
LabelerKind labeler_from_string(std::string_view name);

struct CurationConfig {
  int diversity = 1;          // minimum action_distance to every accepted solution and failure
  int max_iterations = 10000; // rejection-sampling draws per task
  int frames = sim::kFrameCount;
  std::uint64_t seed = 0;
  LabelerKind labeler = LabelerKind::Frames;
};

struct WMRecord {
  std::string task_id;
  std::uint64_t task_seed = 0;
  sim::Observation observation;  // pre-action scene: raster, annotations, features
  EnvAction action;
  sim::FrameSet frames;
  int y = 0;
  wm::OutcomeLabel label = wm::OutcomeLabel::Other;
  bool verified = true;
  bool operator==(const WMRecord&) const = default;
};

wm::WMSample to_sample(const WMRecord& record);
std::vector<wm::WMSample> to_samples(const std::vector<WMRecord>& records);

/// Solution sets memoised by (task id, generator seed).
class SolutionCache {
 public:
  const std::vector<EnvAction>* find(const sim::Task& task) const;
  void store(const sim::Task& task, std::vector<EnvAction> solutions);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::uint64_t>, std::vector<EnvAction>> entries_;
};

/// Every action of the enumerable action space that succeeds, in action_space order.
std::vector<EnvAction> enumerate_solutions(const sim::Task& task, SolutionCache* cache = nullptr);

struct FailureDraw {
  std::vector<EnvAction> failures;
  int iterations = 0;
  bool complete = false;  // |failures| reached the requested count
};

/// Rejection sampling over the action space: a draw is kept iff it fails
/// in simulation and lies at least config.diversity from every solution and
/// every failure kept so far. Stops at `wanted` failures or the iteration cap.
FailureDraw draw_failures(const sim::Task& task, const std::vector<EnvAction>& solutions, std::size_t wanted,
                          const CurationConfig& config);
/// |F| = |S|; throws CurationInfeasible naming the task when the cap is hit.
std::vector<EnvAction> sample_balanced_failures(const sim::Task& task, const std::vector<EnvAction>& solutions,
                                                const CurationConfig& config);

/// Rule-based outcome label from a rollout.
/// GridDrop: success, else agent-hits-green when the agent touches or the
/// green ball moves, else blocked when the agent barely fell, else
/// no-contact. TimedRemove: success, else no-contact when nothing was
/// removed, else other/blocked by whether a red ball moved. The Frames
/// variant applies the rules to frames 2..5, the Terminal variant to frame 5.
wm::OutcomeLabel auto_label(const sim::Observation& before, const EnvAction& action, const sim::FrameSet& frames,
                            int y, LabelerKind kind);

/// Re-simulates `action`; throws ConsistencyError if the outcome differs from `label`.
WMRecord compile_record(const sim::Task& task, const EnvAction& action, int label,
                        LabelerKind labeler = LabelerKind::Frames);

struct TaskSummary {
  std::string task_id;
  std::uint64_t task_seed = 0;
  std::size_t solutions = 0;   // |S| found by enumeration
  std::size_t positives = 0;   // after subsampling
  std::size_t negatives = 0;
  int iterations = 0;
  std::string error;           // non-empty when the task was skipped
};

struct Dataset {
  std::vector<WMRecord> records;
  std::vector<TaskSummary> tasks;
  CurationConfig config;
};

Dataset curate(const std::vector<sim::Task>& tasks, const CurationConfig& config, SolutionCache* cache = nullptr);

/// Number of records whose re-simulated outcome differs from the stored label.
std::size_t label_mismatches(const std::vector<sim::Task>& tasks, const std::vector<WMRecord>& records);

// Persistence: <dir>/dataset.jsonl (one record per line, first line a
// version header) and <dir>/manifest.json (config, per-task counts, seeds,
// FNV-1a hash of the dataset file).
std::string record_to_line(const WMRecord& record);
WMRecord record_from_line(const std::string& line);
std::uint64_t content_hash(const std::string& bytes);
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
std::vector<WMRecord> read_dataset(const std::filesystem::path& dir);
/// Hash recorded in the manifest; compare against content_hash of the file.
std::uint64_t manifest_hash(const std::filesystem::path& dir);

}  // namespace icprl::curation
