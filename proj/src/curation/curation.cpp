#include "icprl/curation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "icprl/errors.hpp"
#include "icprl/rng.hpp"

namespace icprl::curation {

using nlohmann::ordered_json;

namespace {

constexpr double kMoveThreshold = 0.2;   // metres; displacement that counts as "moved"
constexpr double kBlockedDrop = 0.5;     // agent fell less than this: came to rest where it was placed
constexpr double kContactGap = 0.05;     // centre distance slack for "touching"
constexpr const char* kDatasetHeader = "icprl-wm-dataset 1";

const sim::Annotation* find_role(const sim::Observation& obs, sim::Role role) {
  for (const auto& a : obs.annotations)
    if (a.role == role) return &a;
  return nullptr;
}

const sim::Annotation* find_id(const sim::Observation& obs, int id) {
  for (const auto& a : obs.annotations)
    if (a.element_id == id) return &a;
  return nullptr;
}

double distance(const sim::Annotation& a, const sim::Annotation& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::span<const sim::Frame> visible_frames(const sim::FrameSet& frames, LabelerKind kind) {
  std::span<const sim::Frame> all(frames.frames);
  return kind == LabelerKind::Frames ? all.subspan(1) : all.last(1);
}

ordered_json observation_json(const sim::Observation& o) {
  ordered_json ann = ordered_json::array();
  for (const auto& a : o.annotations) {
    ann.push_back({{"id", a.element_id}, {"role", sim::to_string(a.role)}, {"cell", a.cell}, {"x", a.x}, {"y", a.y}});
  }
  return {{"env", to_string(o.env)}, {"raster", o.raster}, {"annotations", ann}, {"features", o.features}};
}

sim::Observation observation_from(const ordered_json& j) {
  sim::Observation o;
  o.env = env_kind_from_string(j.at("env").get<std::string>());
  o.overlay = o.env == EnvKind::GridDrop ? sim::OverlayKind::Grid8x8 : sim::OverlayKind::IndexIds;
  o.raster = j.at("raster").get<std::string>();
  for (const auto& a : j.at("annotations")) {
    o.annotations.push_back(sim::Annotation{a.at("id").get<int>(), sim::role_from_string(a.at("role").get<std::string>()),
                                            a.at("cell").get<int>(), a.at("x").get<double>(),
                                            a.at("y").get<double>()});
  }
  o.features = j.at("features").get<std::vector<double>>();
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view to_string(LabelerKind kind) { return kind == LabelerKind::Frames ? "frames" : "terminal"; }

LabelerKind labeler_from_string(std::string_view name) {
  if (name == "frames") return LabelerKind::Frames;
  if (name == "terminal") return LabelerKind::Terminal;
  throw UsageError("unknown labeler '" + std::string(name) + "' (expected frames|terminal)");
}

wm::WMSample to_sample(const WMRecord& r) { return wm::WMSample{r.observation.features, r.action, r.y, r.label}; }

std::vector<wm::WMSample> to_samples(const std::vector<WMRecord>& records) {
  std::vector<wm::WMSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_sample(r));
  return out;
}

const std::vector<EnvAction>* SolutionCache::find(const sim::Task& task) const {
  auto it = entries_.find({task.id, task.seed});
  return it == entries_.end() ? nullptr : &it->second;
}

void SolutionCache::store(const sim::Task& task, std::vector<EnvAction> solutions) {
  entries_[{task.id, task.seed}] = std::move(solutions);
}

std::vector<EnvAction> enumerate_solutions(const sim::Task& task, SolutionCache* cache) {
  if (cache) {
    if (const auto* hit = cache->find(task)) return *hit;
  }
  const auto actions = sim::action_space(task.scene);
  const auto table = sim::outcome_table(task.scene, actions);
  std::vector<EnvAction> solutions;
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (table[i]) solutions.push_back(actions[i]);
  if (cache) cache->store(task, solutions);
  return solutions;
}

FailureDraw draw_failures(const sim::Task& task, const std::vector<EnvAction>& solutions, std::size_t wanted,
                          const CurationConfig& config) {
  if (config.diversity <= 0) throw UsageError("diversity threshold must be positive");
  const auto space = sim::action_space(task.scene);
  Rng rng(derive_seed(config.seed, task.seed));
  FailureDraw out;
  while (out.failures.size() < wanted && out.iterations < config.max_iterations) {
    ++out.iterations;
    const EnvAction& a = space[uniform_int(rng, static_cast<int>(space.size()))];
    int d_min = std::numeric_limits<int>::max();
    for (const auto& s : solutions) d_min = std::min(d_min, action_distance(a, s));
    for (const auto& f : out.failures) d_min = std::min(d_min, action_distance(a, f));
    if (d_min < config.diversity) continue;
    if (sim::run_outcome(task.scene, a)) continue;
    out.failures.push_back(a);
  }
  out.complete = out.failures.size() >= wanted;
  return out;
}

std::vector<EnvAction> sample_balanced_failures(const sim::Task& task, const std::vector<EnvAction>& solutions,
                                                const CurationConfig& config) {
  FailureDraw d = draw_failures(task, solutions, solutions.size(), config);
  if (!d.complete) {
    throw CurationInfeasible("task " + task.id + ": found " + std::to_string(d.failures.size()) + " of " +
                             std::to_string(solutions.size()) + " diverse failures in " +
                             std::to_string(d.iterations) + " draws");
  }
  return d.failures;
}

wm::OutcomeLabel auto_label(const sim::Observation& before, const EnvAction& action, const sim::FrameSet& frames,
                            int y, LabelerKind kind) {
  using wm::OutcomeLabel;
  const auto seen = visible_frames(frames, kind);
  if (before.env == EnvKind::GridDrop) {
    if (y) return OutcomeLabel::GreenReachesTarget;
    const auto* green0 = find_role(before, sim::Role::GreenTargetBall);
    const auto* agent0 = find_role(frames.frames[0].observation, sim::Role::Agent);
    const double cell = 8.0 / kGridSide;
    const double reach = before.features[3 * kGridCells + 2] + action.grid().radius / 16.0 * cell + kContactGap;
    double green_move = 0.0, agent_drop = 0.0;
    bool touched = false;
    for (const auto& f : seen) {
      const auto* g = find_role(f.observation, sim::Role::GreenTargetBall);
      const auto* a = find_role(f.observation, sim::Role::Agent);
      if (g && green0) green_move = std::max(green_move, distance(*g, *green0));
      if (a && agent0) agent_drop = std::max(agent_drop, agent0->y - a->y);
      if (a && g && distance(*a, *g) <= reach) touched = true;
    }
    if (touched || green_move > kMoveThreshold) return OutcomeLabel::AgentHitsGreen;
    if (agent_drop < kBlockedDrop) return OutcomeLabel::Blocked;
    return OutcomeLabel::NoContact;
  }
  if (y) return OutcomeLabel::BallFallsAbyss;
  bool any_removed = false;
  for (const auto& a : before.annotations) {
    if (a.role == sim::Role::RemovableBlock && !find_id(frames.frames.back().observation, a.element_id)) {
      any_removed = true;
    }
  }
  if (!any_removed) return OutcomeLabel::NoContact;
  double red_move = 0.0;
  for (const auto& r0 : before.annotations) {
    if (r0.role != sim::Role::RedBall) continue;
    for (const auto& f : seen) {
      if (const auto* r = find_id(f.observation, r0.element_id)) red_move = std::max(red_move, distance(*r, r0));
    }
  }
  return red_move > kMoveThreshold ? OutcomeLabel::Other : OutcomeLabel::Blocked;
}

WMRecord compile_record(const sim::Task& task, const EnvAction& action, int label, LabelerKind labeler) {
  WMRecord r;
  r.task_id = task.id;
  r.task_seed = task.seed;
  r.observation = sim::render_observation(task.scene);
  r.action = action;
  const auto sim_result = sim::simulate_until_stable(sim::apply_action(task.scene, action));
  r.frames = sim_result.frames;
  r.y = sim::check_success(sim_result.terminal) ? 1 : 0;
  if (r.y != label) {
    throw ConsistencyError("task " + task.id + ", action " + action.to_string() + ": stored label " +
                           std::to_string(label) + " but re-simulation gives " + std::to_string(r.y));
  }
  r.label = auto_label(r.observation, action, r.frames, r.y, labeler);
  r.verified = true;
  return r;
}

Dataset curate(const std::vector<sim::Task>& tasks, const CurationConfig& config, SolutionCache* cache) {
  Dataset ds;
  ds.config = config;
  std::vector<const sim::Task*> ordered;
  for (const auto& t : tasks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const sim::Task* task : ordered) {
    TaskSummary summary;
    summary.task_id = task->id;
    summary.task_seed = task->seed;
    try {
      auto solutions = enumerate_solutions(*task, cache);
      summary.solutions = solutions.size();
      if (solutions.empty()) {
        summary.error = "no solutions";
        ds.tasks.push_back(summary);
        continue;
      }
      FailureDraw draw = draw_failures(*task, solutions, solutions.size(), config);
      summary.iterations = draw.iterations;
      if (draw.failures.empty()) throw CurationInfeasible("no diverse failure found for task " + task->id);
      if (!draw.complete) {
        // Keep the balance: draw a seeded subset of the solutions to match.
        Rng rng(derive_seed(config.seed, task->seed, 0x5b));
        for (std::size_t i = 0; i < draw.failures.size(); ++i) {
          std::swap(solutions[i], solutions[i + uniform_int(rng, static_cast<int>(solutions.size() - i))]);
        }
        solutions.resize(draw.failures.size());
      }
      std::vector<WMRecord> records;
      for (const auto& s : solutions) records.push_back(compile_record(*task, s, 1, config.labeler));
      for (const auto& f : draw.failures) records.push_back(compile_record(*task, f, 0, config.labeler));
      summary.positives = solutions.size();
      summary.negatives = draw.failures.size();
      ds.records.insert(ds.records.end(), records.begin(), records.end());
    } catch (const Error& e) {
      summary.error = e.what();
    }
    ds.tasks.push_back(summary);
  }
  return ds;
}

std::size_t label_mismatches(const std::vector<sim::Task>& tasks, const std::vector<WMRecord>& records) {
  std::size_t bad = 0;
  for (const auto& r : records) {
    auto it = std::find_if(tasks.begin(), tasks.end(), [&](const auto& t) { return t.id == r.task_id; });
    if (it == tasks.end()) {
      ++bad;
      continue;
    }
    const int y = sim::check_success(sim::simulate_until_stable(sim::apply_action(it->scene, r.action)).terminal);
    bad += y != r.y;
  }
  return bad;
}

std::string record_to_line(const WMRecord& r) {
  ordered_json frames = ordered_json::array();
  for (const auto& f : r.frames.frames) frames.push_back({{"time", f.time}, {"observation", observation_json(f.observation)}});
  ordered_json j;
  j["task_id"] = r.task_id;
  j["task_seed"] = r.task_seed;
  j["action"] = r.action.to_string();
  j["y"] = r.y;
  j["label"] = wm::to_string(r.label);
  j["verified"] = r.verified;
  j["observation"] = observation_json(r.observation);
  j["frames"] = frames;
  j["stable"] = r.frames.stable;
  j["steps"] = r.frames.steps;
  return j.dump();
}

WMRecord record_from_line(const std::string& line) {
  try {
    const ordered_json j = ordered_json::parse(line);
    WMRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.task_seed = j.at("task_seed").get<std::uint64_t>();
    r.observation = observation_from(j.at("observation"));
    r.action = parse_action(r.observation.env, j.at("action").get<std::string>());
    r.y = j.at("y").get<int>();
    r.label = wm::label_from_string(j.at("label").get<std::string>());
    r.verified = j.at("verified").get<bool>();
    const auto& frames = j.at("frames");
    if (frames.size() != sim::kFrameCount) throw FormatError("record must carry exactly 5 frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      r.frames.frames[i].time = frames[i].at("time").get<double>();
      r.frames.frames[i].observation = observation_from(frames[i].at("observation"));
    }
    r.frames.stable = j.at("stable").get<bool>();
    r.frames.steps = j.at("steps").get<std::int64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad dataset record: ") + e.what());
  }
}

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::string body = std::string(kDatasetHeader) + "\n";
  for (const auto& r : ds.records) body += record_to_line(r) + "\n";
  {
    std::ofstream out(dir / "dataset.jsonl", std::ios::binary);
    if (!out) throw FormatError("cannot write " + (dir / "dataset.jsonl").string());
    out << body;
  }
  ordered_json tasks = ordered_json::array();
  std::size_t pos = 0, neg = 0;
  for (const auto& t : ds.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"task_seed", t.task_seed},
                     {"solutions", t.solutions},
                     {"positives", t.positives},
                     {"negatives", t.negatives},
                     {"iterations", t.iterations},
                     {"error", t.error}});
    pos += t.positives;
    neg += t.negatives;
  }
  ordered_json m;
  m["format"] = "icprl-wm-manifest 1";
  m["config"] = {{"diversity", ds.config.diversity},
                 {"max_iterations", ds.config.max_iterations},
                 {"frames", ds.config.frames},
                 {"seed", ds.config.seed},
                 {"labeler", to_string(ds.config.labeler)}};
  m["records"] = ds.records.size();
  m["positives"] = pos;
  m["negatives"] = neg;
  m["tasks"] = tasks;
  m["content_hash"] = hex64(content_hash(body));
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << "\n";
}

std::vector<WMRecord> read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.jsonl");
  if (!in) throw FormatError("cannot read " + (dir / "dataset.jsonl").string());
  std::string line;
  if (!std::getline(in, line) || line != kDatasetHeader) {
    throw FormatError((dir / "dataset.jsonl").string() + ": missing '" + kDatasetHeader + "' header");
  }
  std::vector<WMRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(record_from_line(line));
  }
  return out;
}

std::uint64_t manifest_hash(const std::filesystem::path& dir) {
  try {
    const auto m = ordered_json::parse(read_file(dir / "manifest.json"));
    return std::stoull(m.at("content_hash").get<std::string>(), nullptr, 16);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
}

}  // namespace icprl::curation
