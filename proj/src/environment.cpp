#include "locagent/environment.hpp"

#include <algorithm>
#include <cmath>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

// Paints the pixels whose centres fall inside [x1, x2) x [y1, y2).
void paint_black(Scene& scene, EpisodeState& state, double x1, double y1, double x2, double y2) {
  Image& img = scene.image;
  const int px1 = std::max(0, static_cast<int>(std::ceil(x1 - 0.5)));
  const int py1 = std::max(0, static_cast<int>(std::ceil(y1 - 0.5)));
  const int px2 = std::min(img.width, static_cast<int>(std::ceil(x2 - 0.5)));
  const int py2 = std::min(img.height, static_cast<int>(std::ceil(y2 - 0.5)));
  for (int y = py1; y < py2; ++y) {
    for (int x = px1; x < px2; ++x) {
      for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = 0;
      state.ior_mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) +
                     static_cast<std::size_t>(x)] = 1;
    }
  }
}

std::optional<std::size_t> best_unmatched(const std::vector<std::uint8_t>& matched, const std::vector<Box>& truths,
                                          const Box& b) {
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (i < matched.size() && matched[i]) continue;
    const double v = iou(b, truths[i]);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

}  // namespace

void validate_scene(const Scene& scene) {
  const Image& img = scene.image;
  if (img.width < kMinSceneSide || img.height < kMinSceneSide) {
    throw ValidationError("scene " + scene.id + ": image smaller than 32x32");
  }
  if (img.channels <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) *
                               static_cast<std::size_t>(img.channels)) {
    throw ValidationError("scene " + scene.id + ": pixel buffer does not match dimensions");
  }
  const Frame frame = scene.frame(0.0);
  for (const Box& t : scene.truths) {
    if (!t.valid() || t.x1 < 0.0 || t.y1 < 0.0 || t.x2 > frame.width || t.y2 > frame.height) {
      throw ValidationError("scene " + scene.id + ": ground-truth box outside the image");
    }
  }
}

void validate(const EnvConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ValidationError("env.alpha must be in (0,1)");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw ValidationError("env.tau must be in [0,1]");
  if (!(cfg.eta > 0.0)) throw ValidationError("env.eta must be positive");
  if (!(cfg.min_side > 0.0)) throw ValidationError("env.min_side must be positive");
  if (!(cfg.cross_thickness > 0.0 && cfg.cross_thickness <= 1.0)) {
    throw ValidationError("env.cross_thickness must be in (0,1]");
  }
  if (cfg.max_steps <= 0) throw ValidationError("env.max_steps must be positive");
  if (cfg.restart_after <= 0) throw ValidationError("env.restart_after must be positive");
}

nlohmann::json to_json(const EnvConfig& cfg) {
  return {
      {"alpha", cfg.alpha},
      {"tau", cfg.tau},
      {"eta", cfg.eta},
      {"min_side", cfg.min_side},
      {"match_iou", cfg.match_iou},
      {"cross_thickness", cfg.cross_thickness},
      {"max_steps", cfg.max_steps},
      {"restart_after", cfg.restart_after},
  };
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig cfg;
  try {
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.eta = j.value("eta", cfg.eta);
    cfg.min_side = j.value("min_side", cfg.min_side);
    cfg.match_iou = j.value("match_iou", cfg.match_iou);
    cfg.cross_thickness = j.value("cross_thickness", cfg.cross_thickness);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.restart_after = j.value("restart_after", cfg.restart_after);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("env: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string_view restart_reason_name(RestartReason r) {
  return r == RestartReason::kTrigger ? "trigger" : "timeout";
}

std::optional<std::size_t> select_target(const EpisodeState& state, const Scene& scene) {
  return best_unmatched(state.matched_truths, scene.truths, state.current_box);
}

Reward step_reward(const Box& prev, const Box& next, const Box& g) {
  return {iou(next, g) > iou(prev, g) ? 1.0 : -1.0};
}

Reward trigger_reward(const Box& b, const Box& g, double eta, double tau) {
  return {iou(b, g) >= tau ? eta : -eta};
}

void apply_ior_mark(Scene& scene, EpisodeState& state, const Box& b, const EnvConfig& cfg) {
  const std::size_t npix =
      static_cast<std::size_t>(scene.image.width) * static_cast<std::size_t>(scene.image.height);
  if (state.ior_mask.size() != npix) state.ior_mask.assign(npix, 0);
  if (state.matched_truths.size() != scene.truths.size()) {
    state.matched_truths.resize(scene.truths.size(), 0);
  }

  const double cx = 0.5 * (b.x1 + b.x2);
  const double cy = 0.5 * (b.y1 + b.y2);
  const double half_h = 0.5 * cfg.cross_thickness * b.height();
  const double half_w = 0.5 * cfg.cross_thickness * b.width();
  paint_black(scene, state, b.x1, cy - half_h, b.x2, cy + half_h);
  paint_black(scene, state, cx - half_w, b.y1, cx + half_w, b.y2);

  if (const auto t = best_unmatched(state.matched_truths, scene.truths, b)) {
    if (iou(b, scene.truths[*t]) >= cfg.match_iou) state.matched_truths[*t] = 1;
  }
}

Box restart_box(int restart_index, double image_w, double image_h) {
  if (restart_index < 0) throw ContractError("restart_box: negative restart index");
  if (restart_index == 0) return {0.0, 0.0, image_w, image_h};
  const double w = 0.75 * image_w;
  const double h = 0.75 * image_h;
  switch ((restart_index - 1) % 4) {
    case 0:
      return {0.0, 0.0, w, h};
    case 1:
      return {image_w - w, 0.0, image_w, h};
    case 2:
      return {0.0, image_h - h, w, image_h};
    default:
      return {image_w - w, image_h - h, image_w, image_h};
  }
}

nlohmann::json to_trace_json(const StepResult& r) {
  return {
      {"step", r.step},
      {"action", to_index(r.action)},
      {"action_name", action_name(r.action)},
      {"box", r.box.to_array()},
      {"reward", r.reward.value},
      {"iou", r.iou},
  };
}

Environment::Environment(const Scene& scene, const EnvConfig& cfg) : scene_(scene), cfg_(cfg) {
  validate_scene(scene_);
  validate(cfg_);
  state_.ior_mask.assign(
      static_cast<std::size_t>(scene_.image.width) * static_cast<std::size_t>(scene_.image.height), 0);
  state_.matched_truths.assign(scene_.truths.size(), 0);
  restart(0);
}

bool Environment::all_matched() const {
  return std::all_of(state_.matched_truths.begin(), state_.matched_truths.end(),
                     [](std::uint8_t m) { return m != 0; });
}

void Environment::restart(int restart_index) {
  state_.current_box = restart_box(restart_index, scene_.image.width, scene_.image.height);
  state_.restart_index = restart_index;
  state_.steps_since_restart = 0;
}

StepResult Environment::step(Action a) {
  if (done()) throw ContractError("Environment::step: step budget exhausted");
  StepResult r;
  r.step = state_.steps_taken;
  r.action = a;
  r.box = state_.current_box;
  r.target = target();

  if (a == Action::kTrigger) {
    r.next_box = r.box;
    r.triggered = true;
    if (r.target) {
      const Box& g = scene_.truths[*r.target];
      r.reward = trigger_reward(r.box, g, cfg_.eta, cfg_.tau);
      r.iou = iou(r.box, g);
    } else {
      r.reward = {-cfg_.eta};
    }
    state_.triggered_regions.push_back({r.box, r.step});
    apply_ior_mark(scene_, state_, r.box, cfg_);
    ++state_.steps_taken;
    restart(state_.restart_index + 1);
    r.restart = RestartReason::kTrigger;
    return r;
  }

  r.next_box = apply_action(r.box, a, cfg_.alpha, frame());
  if (r.target) {
    const Box& g = scene_.truths[*r.target];
    r.reward = step_reward(r.box, r.next_box, g);
    r.iou = iou(r.next_box, g);
  } else {
    r.reward = {-1.0};
  }
  state_.current_box = r.next_box;
  ++state_.steps_taken;
  ++state_.steps_since_restart;
  if (state_.steps_since_restart >= cfg_.restart_after) {
    restart(state_.restart_index + 1);
    r.restart = RestartReason::kTimeout;
  }
  return r;
}

}  // namespace locagent
