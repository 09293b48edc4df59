#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace locagent {

// Axis-aligned box in continuous pixel coordinates, origin at the top-left
// corner. Valid boxes satisfy x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  std::array<double, 4> to_array() const { return {x1, y1, x2, y2}; }
  static Box from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Lexicographic on (x1, y1, x2, y2); used for reproducible tie-breaks.
bool box_less(const Box& a, const Box& b);

// Ordinals are part of the checkpoint and log formats. Do not reorder.
enum class Action : std::uint8_t {
  kMoveRight = 0,
  kMoveLeft = 1,
  kMoveUp = 2,
  kMoveDown = 3,
  kScaleUp = 4,
  kScaleDown = 5,
  kMakeWider = 6,
  kMakeTaller = 7,
  kTrigger = 8,
};

inline constexpr int kNumActions = 9;
inline constexpr int kNumTransforms = 8;
// Bumped whenever the action list or its ordering changes.
inline constexpr std::uint32_t kActionOrderingVersion = 1;

constexpr int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
std::string_view action_name(Action a);
std::optional<Action> action_from_name(std::string_view name);
constexpr bool is_transform(Action a) { return a != Action::kTrigger; }

// Step amounts are rounded to multiples of 2^-16 px, so moving a box whose
// coordinates lie on that grid is exact: widths survive translation bit for
// bit and opposite moves cancel.
inline constexpr int kStepGridBits = 16;

inline double snap_step(double v) { return std::ldexp(std::nearbyint(std::ldexp(v, kStepGridBits)), -kStepGridBits); }

// Per-step pixel amounts derived from the current box size.
struct StepDeltas {
  double alpha = 0.0;
  double alpha_w = 0.0;
  double alpha_h = 0.0;

  static StepDeltas of(const Box& b, double alpha) {
    return {alpha, snap_step(alpha * (b.x2 - b.x1)), snap_step(alpha * (b.y2 - b.y1))};
  }
};

// Image extent plus the limits every transformed box must respect.
struct Frame {
  double width = 0.0;
  double height = 0.0;
  double min_side = 10.0;
};

double intersection_area(const Box& a, const Box& b);

// Intersection over union with continuous areas; 0 for disjoint boxes.
double iou(const Box& b, const Box& g);

// Pulls a box back inside the frame and grows it to at least min_side per
// axis. Translations are shifted back (size preserved); any other overflow
// is clipped at the border.
Box clamp_box(const Box& b, const Frame& frame, bool preserve_size);

// Applies one of the eight transforms. Throws ContractError for Trigger.
Box apply_action(const Box& b, Action a, double alpha, const Frame& frame);

// Transforms that strictly increase IoU with g, in ordinal order, plus
// Trigger when iou(b, g) >= tau.
std::vector<Action> positive_actions(const Box& b, const Box& g, double alpha, double tau,
                                     const Frame& frame);

// Throws ContractError unless the box is valid and inside the frame.
void check_box_in_frame(const Box& b, const Frame& frame);

}  // namespace locagent
