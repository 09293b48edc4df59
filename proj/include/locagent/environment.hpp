#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "locagent/geometry.hpp"
#include "locagent/image.hpp"

namespace locagent {

inline constexpr int kMinSceneSide = 32;

// One image plus the ground-truth boxes of the category the agent looks for.
struct Scene {
  std::string id;
  Image image;
  std::vector<Box> truths;
  std::string category;

  Frame frame(double min_side) const {
    return {static_cast<double>(image.width), static_cast<double>(image.height), min_side};
  }
};

// Throws ValidationError when the image is too small or a truth leaves it.
void validate_scene(const Scene& scene);

struct EnvConfig {
  double alpha = 0.2;
  double tau = 0.6;
  double eta = 3.0;
  double min_side = 10.0;
  double match_iou = 0.5;
  double cross_thickness = 0.2;
  int max_steps = 200;
  int restart_after = 40;
};

void validate(const EnvConfig& cfg);
nlohmann::json to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j);

struct TriggeredRegion {
  Box box;
  int step = 0;
};

struct EpisodeState {
  Box current_box;
  int steps_taken = 0;
  int steps_since_restart = 0;
  int restart_index = 0;
  std::vector<TriggeredRegion> triggered_regions;
  std::vector<std::uint8_t> ior_mask;  // width * height, 1 where a cross was painted
  std::vector<std::uint8_t> matched_truths;
};

struct Reward {
  double value = 0.0;
  friend bool operator==(const Reward&, const Reward&) = default;
};

enum class RestartReason : std::uint8_t { kTrigger, kTimeout };
std::string_view restart_reason_name(RestartReason r);

// Unmatched truth with the largest IoU against the current box. Ties go to
// the lowest index; nullopt when every truth is matched.
std::optional<std::size_t> select_target(const EpisodeState& state, const Scene& scene);

// +1 when the transform improved IoU with g, -1 otherwise (including no change).
Reward step_reward(const Box& prev, const Box& next, const Box& g);

Reward trigger_reward(const Box& b, const Box& g, double eta, double tau);

// Paints a black cross centred in b into the scene image, records it in the
// mask and flags the best unmatched truth as matched when IoU >= match_iou.
void apply_ior_mark(Scene& scene, EpisodeState& state, const Box& b, const EnvConfig& cfg);

// Index 0 covers the whole image; later restarts cycle the four corners
// (top-left, top-right, bottom-left, bottom-right) with 75% sides.
Box restart_box(int restart_index, double image_w, double image_h);

struct StepResult {
  int step = 0;  // zero-based index of this step within the episode
  Action action = Action::kTrigger;
  Box box;       // region attended when the action was chosen
  Box next_box;  // region after the action (before any restart)
  Reward reward;
  double iou = 0.0;  // IoU of next_box with the target truth, 0 without one
  std::optional<std::size_t> target;
  bool triggered = false;
  std::optional<RestartReason> restart;
};

nlohmann::json to_trace_json(const StepResult& r);

// Single-owner episode over a private copy of a scene.
class Environment {
 public:
  Environment(const Scene& scene, const EnvConfig& cfg);

  const Scene& scene() const { return scene_; }
  const EpisodeState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  Frame frame() const { return scene_.frame(cfg_.min_side); }
  const Box& current_box() const { return state_.current_box; }
  std::optional<std::size_t> target() const { return select_target(state_, scene_); }
  bool done() const { return state_.steps_taken >= cfg_.max_steps; }
  bool all_matched() const;

  // Applies the action. A trigger marks the region and restarts the search;
  // a transform that exhausts restart_after steps restarts on timeout.
  StepResult step(Action a);

  // Starts a new search from restart_box(restart_index).
  void restart(int restart_index);

 private:
  Scene scene_;
  EnvConfig cfg_;
  EpisodeState state_;
};

}  // namespace locagent
