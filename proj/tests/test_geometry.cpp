#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "locagent/errors.hpp"
#include "locagent/geometry.hpp"

using namespace locagent;
using locagent::testing::random_box;

namespace {

// Counts cells of a 0.25 px lattice; exact for boxes whose coordinates are
// multiples of 0.25.
double lattice_iou(const Box& a, const Box& b) {
  const double step = 0.25;
  const double lo_x = std::min(a.x1, b.x1), hi_x = std::max(a.x2, b.x2);
  const double lo_y = std::min(a.y1, b.y1), hi_y = std::max(a.y2, b.y2);
  long inter = 0, uni = 0;
  for (double y = lo_y + step / 2; y < hi_y; y += step) {
    for (double x = lo_x + step / 2; x < hi_x; x += step) {
      const bool in_a = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
      const bool in_b = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

Box quarter_box(Rng& rng, int extent) {
  const auto x1 = rng.between(0, extent * 4 - 2);
  const auto y1 = rng.between(0, extent * 4 - 2);
  const auto x2 = rng.between(x1 + 1, extent * 4);
  const auto y2 = rng.between(y1 + 1, extent * 4);
  return {x1 / 4.0, y1 / 4.0, x2 / 4.0, y2 / 4.0};
}

const Frame kFrame200{200, 200, 10};

}  // namespace

TEST_CASE("iou worked values") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);  // edge contact only
}

TEST_CASE("iou agrees with a lattice-counting oracle") {
  Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    const Box a = quarter_box(rng, 24);
    const Box b = quarter_box(rng, 24);
    REQUIRE(iou(a, b) == doctest::Approx(lattice_iou(a, b)).epsilon(1e-9));
  }
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(lattice_iou({0, 0, 10, 10}, {5, 5, 15, 15})));
}

TEST_CASE("iou is symmetric, bounded and reflexive") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const Box a = random_box(rng, 100, 80);
    const Box b = random_box(rng, 100, 80);
    const double v = iou(a, b);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    REQUIRE(v == iou(b, a));
    REQUIRE(iou(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("action ordinals and names are fixed") {
  const char* names[] = {"move_right", "move_left",  "move_up",     "move_down", "scale_up",
                         "scale_down", "make_wider", "make_taller", "trigger"};
  for (int i = 0; i < kNumActions; ++i) {
    const Action a = action_from_index(i);
    CHECK(to_index(a) == i);
    CHECK(action_name(a) == names[i]);
    CHECK(action_from_name(names[i]) == a);
  }
  CHECK(to_index(Action::kTrigger) == 8);
  CHECK_FALSE(action_from_name("jump").has_value());
  CHECK_THROWS_AS(action_from_index(9), ContractError);
  CHECK_THROWS_AS(action_from_index(-1), ContractError);
}

TEST_CASE("worked transform examples") {
  const Box b{10, 10, 110, 60};
  CHECK(apply_action(b, Action::kMoveRight, 0.2, kFrame200) == Box{30, 10, 130, 60});
  CHECK(apply_action(b, Action::kScaleUp, 0.2, kFrame200) == Box{0, 0, 130, 70});
  CHECK(apply_action(b, Action::kMakeTaller, 0.2, kFrame200) == Box{10, 0, 110, 70});
}

TEST_CASE("transform table away from the border") {
  const Box b{50, 60, 90, 80};  // w 40, h 20 -> alpha_w 8, alpha_h 4
  CHECK(apply_action(b, Action::kMoveLeft, 0.2, kFrame200) == Box{42, 60, 82, 80});
  CHECK(apply_action(b, Action::kMoveUp, 0.2, kFrame200) == Box{50, 56, 90, 76});
  CHECK(apply_action(b, Action::kMoveDown, 0.2, kFrame200) == Box{50, 64, 90, 84});
  CHECK(apply_action(b, Action::kScaleDown, 0.2, kFrame200) == Box{58, 64, 82, 76});
  CHECK(apply_action(b, Action::kMakeWider, 0.2, kFrame200) == Box{42, 60, 98, 80});
  CHECK_THROWS_AS(apply_action(b, Action::kTrigger, 0.2, kFrame200), ContractError);
}

TEST_CASE("step deltas follow the box size") {
  const StepDeltas d = StepDeltas::of({10, 10, 110, 60}, 0.2);
  CHECK(d.alpha_w == 20.0);
  CHECK(d.alpha_h == 10.0);
  const StepDeltas e = StepDeltas::of({0, 0, 33, 7}, 0.2);
  CHECK(e.alpha_w == doctest::Approx(6.6).epsilon(1e-5));
  CHECK(std::abs(e.alpha_h - 1.4) <= std::ldexp(1.0, -kStepGridBits - 1));
}

TEST_CASE("moves into a wall are shifted back and keep their size") {
  const Frame f{100, 100, 10};
  CHECK(apply_action({80, 0, 100, 20}, Action::kMoveRight, 0.2, f) == Box{80, 0, 100, 20});
  CHECK(apply_action({2, 5, 22, 25}, Action::kMoveLeft, 0.2, f) == Box{0, 5, 20, 25});
  CHECK(apply_action({0, 0, 100, 100}, Action::kMoveDown, 0.2, f) == Box{0, 0, 100, 100});
}

TEST_CASE("min side is enforced symmetrically") {
  const Frame f{100, 100, 10};
  const Box small = apply_action({40, 40, 51, 51}, Action::kScaleDown, 0.2, f);
  CHECK(small.width() == doctest::Approx(10.0));
  CHECK(small.height() == doctest::Approx(10.0));
  CHECK(0.5 * (small.x1 + small.x2) == doctest::Approx(45.5));
  const Box corner = apply_action({0, 0, 11, 11}, Action::kScaleDown, 0.2, f);
  CHECK(corner.x1 >= 0.0);
  CHECK(corner.width() == doctest::Approx(10.0));
}

TEST_CASE("property: moves preserve size and opposite moves cancel") {
  Rng rng(77);
  const Frame f{256, 192, 10};
  for (int i = 0; i < 10000; ++i) {
    // Sixteenth-pixel coordinates.
    const Box b = locagent::testing::random_int_box(rng, 256 * 16, 192 * 16, 160);
    const Box box{b.x1 / 16, b.y1 / 16, b.x2 / 16, b.y2 / 16};
    for (Action a : {Action::kMoveRight, Action::kMoveLeft, Action::kMoveUp, Action::kMoveDown}) {
      const Box m = apply_action(box, a, 0.2, f);
      REQUIRE(m.width() == box.width());
      REQUIRE(m.height() == box.height());
    }
    const StepDeltas d = StepDeltas::of(box, 0.2);
    if (box.x1 - d.alpha_w >= 0.0 && box.x2 + d.alpha_w <= f.width) {
      REQUIRE(apply_action(apply_action(box, Action::kMoveRight, 0.2, f), Action::kMoveLeft, 0.2, f) == box);
    }
    REQUIRE(apply_action(box, Action::kMakeWider, 0.2, f).height() == box.height());
    REQUIRE(apply_action(box, Action::kMakeTaller, 0.2, f).width() == box.width());
  }
}

TEST_CASE("property: any action sequence keeps boxes valid and in frame") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Frame f{double(rng.between(32, 300)), double(rng.between(32, 300)), 10};
    Box b = random_box(rng, f.width, f.height, 10);
    for (int k = 0; k < 100; ++k) {
      b = apply_action(b, action_from_index(int(rng.below(kNumTransforms))), rng.uniform(0.05, 0.5), f);
      REQUIRE(b.valid());
      REQUIRE(b.x1 >= 0.0);
      REQUIRE(b.y1 >= 0.0);
      REQUIRE(b.x2 <= f.width);
      REQUIRE(b.y2 <= f.height);
      REQUIRE(b.width() >= 10.0 - 1e-9);
      REQUIRE(b.height() >= 10.0 - 1e-9);
    }
  }
}

TEST_CASE("positive actions") {
  const Frame f{200, 200, 10};
  SUBCASE("identical boxes include trigger") {
    const Box g{50, 50, 100, 100};
    const auto pos = positive_actions(g, g, 0.2, 0.6, f);
    CHECK(std::find(pos.begin(), pos.end(), Action::kTrigger) != pos.end());
  }
  SUBCASE("box left of target") {
    const auto pos = positive_actions({10, 50, 50, 90}, {45, 50, 85, 90}, 0.2, 0.6, f);
    CHECK(std::find(pos.begin(), pos.end(), Action::kMoveRight) != pos.end());
    CHECK(std::find(pos.begin(), pos.end(), Action::kMoveLeft) == pos.end());
    CHECK(std::find(pos.begin(), pos.end(), Action::kTrigger) == pos.end());
  }
  SUBCASE("matches an independent recomputation") {
    Rng rng(31);
    for (int i = 0; i < 10000; ++i) {
      const Box b = random_box(rng, 200, 200, 10);
      const Box g = random_box(rng, 200, 200, 10);
      const auto pos = positive_actions(b, g, 0.2, 0.6, f);
      const double before = iou(b, g);
      std::vector<Action> expect;
      for (int a = 0; a < kNumTransforms; ++a) {
        if (iou(apply_action(b, Action(a), 0.2, f), g) > before) expect.push_back(Action(a));
      }
      if (before >= 0.6) expect.push_back(Action::kTrigger);
      REQUIRE(pos == expect);
      for (Action a : pos) {
        if (a != Action::kTrigger) REQUIRE(iou(apply_action(b, a, 0.2, f), g) > before);
      }
    }
  }
}

TEST_CASE("box helpers") {
  CHECK(box_less({0, 0, 1, 1}, {0, 0, 1, 2}));
  CHECK_FALSE(box_less({1, 0, 2, 1}, {0, 5, 9, 9}));
  CHECK(Box::from_array({1, 2, 3, 4}) == Box{1, 2, 3, 4});
  CHECK_NOTHROW(check_box_in_frame({0, 0, 10, 10}, {10, 10, 1}));
  CHECK_THROWS_AS(check_box_in_frame({0, 0, 11, 10}, {10, 10, 1}), ContractError);
  CHECK_THROWS_AS(check_box_in_frame({5, 0, 5, 10}, {10, 10, 1}), ContractError);
}
