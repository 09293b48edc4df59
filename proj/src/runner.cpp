#include "locagent/runner.hpp"

#include <algorithm>
#include <sstream>

#include "locagent/errors.hpp"

namespace locagent {

void validate(const RunnerConfig& cfg) {
  validate(cfg.env);
  if (!(cfg.trigger_bonus >= 0.0)) throw ValidationError("runner.trigger_bonus must be >= 0");
}

nlohmann::json to_json(const RunnerConfig& cfg) {
  return {{"max_steps", cfg.env.max_steps},
          {"restart_after", cfg.env.restart_after},
          {"trigger_bonus", cfg.trigger_bonus}};
}

RunnerConfig runner_config_from_json(const nlohmann::json& j, const EnvConfig& env) {
  RunnerConfig cfg;
  cfg.env = env;
  try {
    cfg.env.max_steps = j.value("max_steps", cfg.env.max_steps);
    cfg.env.restart_after = j.value("restart_after", cfg.env.restart_after);
    cfg.trigger_bonus = j.value("trigger_bonus", cfg.trigger_bonus);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("runner: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

Trajectory run_episode(const Scene& scene, const ActionValueFn& policy, const FeatureExtractor& extractor,
                       const RunnerConfig& cfg) {
  Environment env(scene, cfg.env);
  Trajectory traj;
  traj.scene_id = scene.id;
  HistoryVector history;
  while (!env.done()) {
    const StateVector state = observe(extractor, env.scene().image, env.current_box(), history);
    AttendedRegion region;
    region.box = env.current_box();
    region.step = env.state().steps_taken;
    region.steps_since_restart = env.state().steps_since_restart;
    region.q_values = policy(state);
    region.chosen = action_from_index(argmax_action(region.q_values));
    region.triggered = region.chosen == Action::kTrigger;

    const StepResult r = env.step(region.chosen);
    if (r.triggered) traj.ior_marks.push_back(r.box);
    traj.regions.push_back(region);
    if (r.restart) {
      traj.restarts.push_back({r.step, *r.restart});
      history = HistoryVector{};
    } else {
      history = push_history(history, region.chosen);
    }
  }
  return traj;
}

Trajectory run_episode(const Scene& scene, const QNetwork& net, const FeatureExtractorSpec& extractor_spec,
                       const RunnerConfig& cfg) {
  const FeatureExtractor extractor(extractor_spec, scene.image.channels);
  if (extractor.output_dim() + kHistoryDim != net.input_dim()) {
    throw ContractError("run_episode: network input does not match the feature extractor");
  }
  return run_episode(
      scene, [&net](const StateVector& s) { return net.evaluate(s.values); }, extractor, cfg);
}

std::string_view detection_mode_name(DetectionMode m) {
  return m == DetectionMode::kTerminalRegions ? "tr" : "aar";
}

DetectionMode detection_mode_from_name(std::string_view name) {
  if (name == "tr" || name == "TR") return DetectionMode::kTerminalRegions;
  if (name == "aar" || name == "AAR") return DetectionMode::kAllAttendedRegions;
  throw ValidationError("unknown detection mode '" + std::string(name) + "' (expected tr or aar)");
}

std::vector<Detection> detections_from_trajectory(const Trajectory& traj, DetectionMode mode, double trigger_bonus) {
  std::vector<Detection> out;
  for (const AttendedRegion& r : traj.regions) {
    if (mode == DetectionMode::kTerminalRegions && !r.triggered) continue;
    Detection d;
    d.scene_id = traj.scene_id;
    d.box = r.box;
    d.score = *std::max_element(r.q_values.begin(), r.q_values.end()) + (r.triggered ? trigger_bonus : 0.0);
    d.step = r.step;
    d.steps_to_detection = r.steps_since_restart + 1;
    d.triggered = r.triggered;
    out.push_back(std::move(d));
  }
  return out;
}

std::string trajectory_to_jsonl(const Trajectory& traj) {
  std::string out;
  std::size_t next_restart = 0;
  for (const AttendedRegion& r : traj.regions) {
    nlohmann::json rec = {
        {"scene", traj.scene_id},
        {"step", r.step},
        {"box", r.box.to_array()},
        {"action", to_index(r.chosen)},
        {"action_name", action_name(r.chosen)},
        {"q_values", r.q_values},
        {"triggered", r.triggered},
        {"steps_since_restart", r.steps_since_restart},
        {"restart", nullptr},
    };
    if (next_restart < traj.restarts.size() && traj.restarts[next_restart].step == r.step) {
      rec["restart"] = restart_reason_name(traj.restarts[next_restart].reason);
      ++next_restart;
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_jsonl(const std::string& text) {
  Trajectory traj;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      AttendedRegion r;
      const std::string scene = rec.at("scene").get<std::string>();
      if (traj.scene_id.empty()) {
        traj.scene_id = scene;
      } else if (scene != traj.scene_id) {
        throw ValidationError("records from more than one scene");
      }
      r.step = rec.at("step").get<int>();
      r.box = Box::from_array(rec.at("box").get<std::array<double, 4>>());
      r.chosen = action_from_index(rec.at("action").get<int>());
      r.q_values = rec.at("q_values").get<ActionValues>();
      r.triggered = rec.at("triggered").get<bool>();
      r.steps_since_restart = rec.value("steps_since_restart", 0);
      if (r.triggered != (r.chosen == Action::kTrigger)) {
        throw ValidationError("'triggered' disagrees with the chosen action");
      }
      if (!rec.at("restart").is_null()) {
        const auto reason = rec.at("restart").get<std::string>();
        if (reason == "trigger") {
          traj.restarts.push_back({r.step, RestartReason::kTrigger});
        } else if (reason == "timeout") {
          traj.restarts.push_back({r.step, RestartReason::kTimeout});
        } else {
          throw ValidationError("unknown restart reason '" + reason + "'");
        }
      }
      if (r.triggered) traj.ior_marks.push_back(r.box);
      traj.regions.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ContractError& e) {
      throw ValidationError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return traj;
}

std::string trajectory_to_svg(const Trajectory& traj, const Scene& scene, double cross_thickness) {
  std::ostringstream svg;
  const int w = scene.image.width;
  const int h = scene.image.height;
  auto rect = [&svg](const Box& b, const char* style) {
    svg << "  <rect x=\"" << b.x1 << "\" y=\"" << b.y1 << "\" width=\"" << b.width() << "\" height=\"" << b.height()
        << "\" style=\"" << style << "\"/>\n";
  };
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << " " << h << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" style=\"fill:#808080\"/>\n";
  for (const Box& g : scene.truths) rect(g, "fill:none;stroke:#00c000;stroke-width:1.5");
  for (const AttendedRegion& r : traj.regions) {
    if (!r.triggered) rect(r.box, "fill:none;stroke:#3060ff;stroke-width:0.5;stroke-opacity:0.4");
  }
  for (const Box& b : traj.ior_marks) {
    const double cx = 0.5 * (b.x1 + b.x2);
    const double cy = 0.5 * (b.y1 + b.y2);
    const double hh = 0.5 * cross_thickness * b.height();
    const double hw = 0.5 * cross_thickness * b.width();
    rect({b.x1, cy - hh, b.x2, cy + hh}, "fill:#000000;fill-opacity:0.6");
    rect({cx - hw, b.y1, cx + hw, b.y2}, "fill:#000000;fill-opacity:0.6");
    rect(b, "fill:none;stroke:#ff2020;stroke-width:1.5");
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace locagent
