#include <algorithm>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "locagent/environment.hpp"
#include "locagent/errors.hpp"

using namespace locagent;
using locagent::testing::make_scene;
using locagent::testing::random_box;

TEST_CASE("select_target picks the best unmatched truth") {
  EpisodeState st;
  st.current_box = {0, 0, 50, 50};
  Scene one = make_scene(100, 100, {{10, 10, 30, 30}});
  CHECK(select_target(st, one) == 0u);

  Scene two = make_scene(100, 100, {{60, 60, 90, 90}, {0, 0, 40, 40}});
  CHECK(select_target(st, two) == 1u);
  st.matched_truths = {0, 1};
  CHECK(select_target(st, two) == 0u);
  st.matched_truths = {1, 1};
  CHECK_FALSE(select_target(st, two).has_value());
  CHECK_FALSE(select_target(EpisodeState{}, make_scene(64, 64, {})).has_value());
}

TEST_CASE("select_target agrees with a brute-force argmax") {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    std::vector<Box> truths;
    const int n = int(rng.between(1, 5));
    for (int k = 0; k < n; ++k) truths.push_back(random_box(rng, 100, 100, 5));
    Scene s = make_scene(100, 100, truths);
    EpisodeState st;
    st.current_box = random_box(rng, 100, 100, 5);
    for (int k = 0; k < n; ++k) st.matched_truths.push_back(rng.bernoulli(0.3));
    int best = -1;
    for (int k = 0; k < n; ++k) {
      if (st.matched_truths[k]) continue;
      if (best < 0 || iou(st.current_box, truths[k]) > iou(st.current_box, truths[best])) best = k;
    }
    const auto got = select_target(st, s);
    if (best < 0) {
      REQUIRE_FALSE(got.has_value());
    } else {
      REQUIRE(got == std::size_t(best));
    }
  }
}

TEST_CASE("transform reward is the sign of the IoU change, zero counting as negative") {
  const Box g{0, 0, 100, 100};
  const Box b30{0, 0, 30, 100};
  const Box b42{0, 0, 42, 100};
  CHECK(iou(b30, g) == doctest::Approx(0.30));
  CHECK(step_reward(b30, b42, g).value == 1.0);
  CHECK(step_reward(b42, b30, g).value == -1.0);
  CHECK(step_reward(b42, b42, g).value == -1.0);
}

TEST_CASE("trigger reward thresholds at tau inclusive") {
  const Box g{0, 0, 10, 10};
  CHECK(trigger_reward({0, 0, 6.5, 10}, g, 3.0, 0.6).value == 3.0);
  CHECK(trigger_reward({0, 0, 5, 10}, g, 3.0, 0.6).value == -3.0);
  CHECK(iou({0, 0, 6, 10}, g) == 0.6);
  CHECK(trigger_reward({0, 0, 6, 10}, g, 3.0, 0.6).value == 3.0);
}

TEST_CASE("ior cross covers 36 percent of the box") {
  Scene s = make_scene(100, 100, {{20, 20, 80, 80}});
  EpisodeState st;
  apply_ior_mark(s, st, {20, 20, 80, 80}, EnvConfig{});
  int black = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      const bool on_h = y >= 44 && y < 56 && x >= 20 && x < 80;
      const bool on_v = x >= 44 && x < 56 && y >= 20 && y < 80;
      const bool painted = st.ior_mask[std::size_t(y * 100 + x)] != 0;
      REQUIRE(painted == (on_h || on_v));
      if (painted) {
        ++black;
        for (int c = 0; c < 3; ++c) REQUIRE(s.image.at(x, y, c) == 0);
      } else {
        REQUIRE(s.image.at(x, y, 0) == 90);
      }
    }
  }
  CHECK(black == 1296);
  CHECK(black / 3600.0 == doctest::Approx(0.36));
  CHECK(st.matched_truths == std::vector<std::uint8_t>{1});

  const Image before = s.image;
  const auto mask = st.ior_mask;
  apply_ior_mark(s, st, {20, 20, 80, 80}, EnvConfig{});
  CHECK(s.image == before);
  CHECK(st.ior_mask == mask);
}

TEST_CASE("ior mark stays inside the image and respects the match threshold") {
  Scene s = make_scene(40, 40, {{0, 0, 10, 10}});
  EpisodeState st;
  apply_ior_mark(s, st, {0, 0, 40, 40}, EnvConfig{});
  CHECK(st.ior_mask.size() == 1600u);
  CHECK(st.matched_truths == std::vector<std::uint8_t>{0});
  apply_ior_mark(s, st, {0, 0, 12, 12}, EnvConfig{});
  CHECK(st.matched_truths == std::vector<std::uint8_t>{1});
}

TEST_CASE("restart boxes") {
  CHECK(restart_box(0, 100, 100) == Box{0, 0, 100, 100});
  CHECK(restart_box(1, 100, 100) == Box{0, 0, 75, 75});
  CHECK(restart_box(2, 100, 100) == Box{25, 0, 100, 75});
  CHECK(restart_box(3, 100, 100) == Box{0, 25, 75, 100});
  CHECK(restart_box(4, 100, 100) == Box{25, 25, 100, 100});
  CHECK(restart_box(5, 100, 100) == restart_box(1, 100, 100));
  CHECK(restart_box(2, 128, 64) == Box{32, 0, 128, 48});
  CHECK_THROWS_AS(restart_box(-1, 10, 10), ContractError);
}

TEST_CASE("environment step mechanics") {
  Scene s = make_scene(100, 100, {{10, 10, 60, 60}});
  EnvConfig cfg;
  Environment env(s, cfg);
  CHECK(env.current_box() == Box{0, 0, 100, 100});

  const StepResult r = env.step(Action::kScaleDown);
  CHECK(r.step == 0);
  CHECK(r.box == Box{0, 0, 100, 100});
  CHECK(r.next_box == Box{20, 20, 80, 80});
  CHECK(r.reward.value == (iou(r.next_box, s.truths[0]) > iou(r.box, s.truths[0]) ? 1.0 : -1.0));
  CHECK_FALSE(r.restart.has_value());
  CHECK(env.state().steps_since_restart == 1);

  const Box before = env.current_box();
  const StepResult t = env.step(Action::kTrigger);
  CHECK(t.triggered);
  CHECK(t.next_box == before);
  CHECK(t.restart == RestartReason::kTrigger);
  CHECK(std::abs(t.reward.value) == 3.0);
  CHECK(env.current_box() == restart_box(1, 100, 100));
  CHECK(env.state().triggered_regions.size() == 1u);
  CHECK(env.state().steps_taken == 2);
}

TEST_CASE("timeouts, budget and reward alphabet") {
  Scene s = make_scene(64, 64, {{5, 5, 25, 25}, {40, 40, 60, 60}});
  EnvConfig cfg;
  Environment env(s, cfg);
  Rng rng(3);
  std::set<double> rewards;
  int timeouts = 0;
  while (!env.done()) {
    const int since = env.state().steps_since_restart;
    const Action a = action_from_index(int(rng.below(kNumTransforms)));
    const StepResult r = env.step(a);
    rewards.insert(r.reward.value);
    REQUIRE(env.state().steps_since_restart <= cfg.restart_after);
    if (r.restart) {
      REQUIRE(since + 1 == cfg.restart_after);
      ++timeouts;
    }
  }
  CHECK(env.state().steps_taken == 200);
  CHECK(timeouts == 5);
  CHECK_THROWS_AS(env.step(Action::kMoveLeft), ContractError);
  for (double v : rewards) CHECK((v == 1.0 || v == -1.0));
}

TEST_CASE("without unmatched truths every action is penalised") {
  Scene s = make_scene(64, 64, {});
  Environment env(s, EnvConfig{});
  CHECK(env.step(Action::kScaleDown).reward.value == -1.0);
  CHECK(env.step(Action::kTrigger).reward.value == -3.0);
}

TEST_CASE("scene and config validation") {
  CHECK_THROWS_AS(validate_scene(make_scene(31, 64, {})), ValidationError);
  CHECK_THROWS_AS(validate_scene(make_scene(64, 64, {{0, 0, 65, 10}})), ValidationError);
  CHECK_NOTHROW(validate_scene(make_scene(64, 64, {{0, 0, 64, 10}})));
  EnvConfig bad;
  bad.tau = 1.5;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  const EnvConfig round = env_config_from_json(to_json(EnvConfig{}));
  CHECK(to_json(round) == to_json(EnvConfig{}));
  CHECK_THROWS_AS(env_config_from_json({{"alpha", "big"}}), ValidationError);
}

TEST_CASE("trace records carry the documented keys") {
  Scene s = make_scene(64, 64, {{5, 5, 25, 25}});
  Environment env(s, EnvConfig{});
  const auto j = to_trace_json(env.step(Action::kMoveRight));
  for (const char* key : {"step", "action", "action_name", "box", "reward", "iou"}) CHECK(j.contains(key));
  CHECK(j["action_name"] == "move_right");
}
