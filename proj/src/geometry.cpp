#include "locagent/geometry.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "move_right", "move_left", "move_up",    "move_down",   "scale_up",
    "scale_down", "make_wider", "make_taller", "trigger",
};

// Shifts [lo, hi] into [0, limit] without changing its length, or pins it to
// the full range when it does not fit.
void shift_into(double& lo, double& hi, double limit) {
  if (hi - lo >= limit) {
    lo = 0.0;
    hi = limit;
    return;
  }
  if (lo < 0.0) {
    hi -= lo;
    lo = 0.0;
  }
  if (hi > limit) {
    lo -= hi - limit;
    hi = limit;
  }
}

void clip_into(double& lo, double& hi, double limit) {
  lo = std::clamp(lo, 0.0, limit);
  hi = std::clamp(hi, 0.0, limit);
  if (hi < lo) hi = lo;
}

void enforce_min_side(double& lo, double& hi, double limit, double min_side) {
  if (hi - lo >= min_side) return;
  const double center = 0.5 * (lo + hi);
  lo = center - 0.5 * min_side;
  hi = center + 0.5 * min_side;
  shift_into(lo, hi, limit);
}

}  // namespace

bool box_less(const Box& a, const Box& b) {
  return std::tie(a.x1, a.y1, a.x2, a.y2) < std::tie(b.x1, b.y1, b.x2, b.y2);
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw ContractError("action index out of range: " + std::to_string(index));
  }
  return static_cast<Action>(index);
}

std::string_view action_name(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

std::optional<Action> action_from_name(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[static_cast<std::size_t>(i)] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& b, const Box& g) {
  const double inter = intersection_area(b, g);
  if (inter <= 0.0) return 0.0;
  const double uni = b.area() + g.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Box clamp_box(const Box& b, const Frame& frame, bool preserve_size) {
  Box out = b;
  if (preserve_size) {
    shift_into(out.x1, out.x2, frame.width);
    shift_into(out.y1, out.y2, frame.height);
  } else {
    clip_into(out.x1, out.x2, frame.width);
    clip_into(out.y1, out.y2, frame.height);
  }
  enforce_min_side(out.x1, out.x2, frame.width, std::min(frame.min_side, frame.width));
  enforce_min_side(out.y1, out.y2, frame.height, std::min(frame.min_side, frame.height));
  return out;
}

Box apply_action(const Box& b, Action a, double alpha, const Frame& frame) {
  const StepDeltas d = StepDeltas::of(b, alpha);
  Box out = b;
  bool translation = false;
  switch (a) {
    case Action::kMoveRight:
      out.x1 += d.alpha_w;
      out.x2 += d.alpha_w;
      translation = true;
      break;
    case Action::kMoveLeft:
      out.x1 -= d.alpha_w;
      out.x2 -= d.alpha_w;
      translation = true;
      break;
    case Action::kMoveUp:
      out.y1 -= d.alpha_h;
      out.y2 -= d.alpha_h;
      translation = true;
      break;
    case Action::kMoveDown:
      out.y1 += d.alpha_h;
      out.y2 += d.alpha_h;
      translation = true;
      break;
    case Action::kScaleUp:
      out.x1 -= d.alpha_w;
      out.x2 += d.alpha_w;
      out.y1 -= d.alpha_h;
      out.y2 += d.alpha_h;
      break;
    case Action::kScaleDown:
      out.x1 += d.alpha_w;
      out.x2 -= d.alpha_w;
      out.y1 += d.alpha_h;
      out.y2 -= d.alpha_h;
      break;
    case Action::kMakeWider:
      out.x1 -= d.alpha_w;
      out.x2 += d.alpha_w;
      break;
    case Action::kMakeTaller:
      out.y1 -= d.alpha_h;
      out.y2 += d.alpha_h;
      break;
    case Action::kTrigger:
      throw ContractError("apply_action: trigger does not transform the box");
  }
  return clamp_box(out, frame, translation);
}

std::vector<Action> positive_actions(const Box& b, const Box& g, double alpha, double tau,
                                     const Frame& frame) {
  const double current = iou(b, g);
  std::vector<Action> out;
  for (int i = 0; i < kNumTransforms; ++i) {
    const Action a = static_cast<Action>(i);
    if (iou(apply_action(b, a, alpha, frame), g) > current) out.push_back(a);
  }
  if (current >= tau) out.push_back(Action::kTrigger);
  return out;
}

void check_box_in_frame(const Box& b, const Frame& frame) {
  if (!b.valid() || b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > frame.width || b.y2 > frame.height) {
    throw ContractError("box outside frame or degenerate");
  }
}

}  // namespace locagent
