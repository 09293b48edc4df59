#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "locagent/environment.hpp"
#include "locagent/features.hpp"
#include "locagent/qnet.hpp"

namespace locagent {

struct RunnerConfig {
  EnvConfig env;  // max_steps 200 and restart_after 40 drive the protocol
  double trigger_bonus = 1e6;
};

void validate(const RunnerConfig& cfg);
nlohmann::json to_json(const RunnerConfig& cfg);
RunnerConfig runner_config_from_json(const nlohmann::json& j, const EnvConfig& env);

struct AttendedRegion {
  Box box;
  int step = 0;
  ActionValues q_values{};
  Action chosen = Action::kTrigger;
  bool triggered = false;
  int steps_since_restart = 0;  // actions already taken in this search before this one
};

struct RestartEvent {
  int step = 0;  // step after which the restart happened
  RestartReason reason = RestartReason::kTimeout;
};

struct Trajectory {
  std::string scene_id;
  std::vector<AttendedRegion> regions;
  std::vector<RestartEvent> restarts;
  std::vector<Box> ior_marks;  // boxes whose cross was painted, in order
};

// Any mapping from a state to nine action values. The runner acts greedily on it.
using ActionValueFn = std::function<ActionValues(const StateVector&)>;

// Greedy test-time search: full-image start, restart after a trigger or after
// restart_after steps without one, history cleared at every restart, at most
// max_steps attended regions.
Trajectory run_episode(const Scene& scene, const ActionValueFn& policy, const FeatureExtractor& extractor,
                       const RunnerConfig& cfg);

// Convenience overload for a trained network. Throws ContractError when the
// network input does not match the extractor.
Trajectory run_episode(const Scene& scene, const QNetwork& net, const FeatureExtractorSpec& extractor,
                       const RunnerConfig& cfg);

enum class DetectionMode : std::uint8_t { kTerminalRegions, kAllAttendedRegions };

std::string_view detection_mode_name(DetectionMode m);
DetectionMode detection_mode_from_name(std::string_view name);

struct Detection {
  std::string scene_id;
  Box box;
  double score = 0.0;
  int step = 0;
  int steps_to_detection = 0;  // actions since the last restart, trigger included
  bool triggered = false;
};

// TR: triggered regions only. AAR: every attended region. Score is the max
// Q-value, plus trigger_bonus on triggered regions.
std::vector<Detection> detections_from_trajectory(const Trajectory& traj, DetectionMode mode, double trigger_bonus);

// JSON-lines, one record per attended region:
// {scene, step, box, action, action_name, q_values, triggered, restart}
std::string trajectory_to_jsonl(const Trajectory& traj);
Trajectory trajectory_from_jsonl(const std::string& text);

// Box sequence, IoR crosses and optional ground truth over the image extent.
std::string trajectory_to_svg(const Trajectory& traj, const Scene& scene, double cross_thickness);

}  // namespace locagent
