#include "locagent/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "locagent/errors.hpp"
#include "locagent/image.hpp"
#include "locagent/qnet.hpp"
#include "locagent/rng.hpp"

namespace locagent {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::set<std::string> kSections = {"seed", "gen", "features", "env", "train", "sgd", "runner", "output_dir"};

std::set<std::string> keys_of(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

// Component seeds come from the master seed, so they are not accepted per section.
void check_keys(const json& section, const std::string& name, std::set<std::string> allowed) {
  if (!section.is_object()) throw ValidationError("config." + name + ": expected an object");
  allowed.erase("seed");
  allowed.erase("projection_seed");
  for (const auto& [k, v] : section.items()) {
    if (!allowed.count(k)) {
      if (k == "seed" || k == "projection_seed") {
        throw ValidationError("config." + name + "." + k + ": component seeds derive from the top-level seed");
      }
      throw ValidationError("config." + name + "." + k + ": unknown key");
    }
  }
}

json section(const json& j, const char* name) { return j.contains(name) ? j.at(name) : json::object(); }

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::vector<fs::path> jsonl_files(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + ": no such trajectory file or directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::uint64_t component_seed(const ExperimentConfig& cfg, std::string_view component) {
  return derive_seed(cfg.seed, component);
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!kSections.count(k)) throw ValidationError("config." + k + ": unknown section");
  }
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config.seed/output_dir: ") + e.what());
  }

  const json gen = section(j, "gen");
  check_keys(gen, "gen", keys_of(to_json(GenSpec{})));
  cfg.gen = gen_spec_from_json(gen);
  cfg.gen.seed = component_seed(cfg, "scenegen");

  const json features = section(j, "features");
  check_keys(features, "features", keys_of(to_json(FeatureExtractorSpec{})));
  cfg.features = extractor_spec_from_json(features);
  cfg.features.projection_seed = component_seed(cfg, "features");

  const json env = section(j, "env");
  check_keys(env, "env", keys_of(to_json(EnvConfig{})));
  cfg.env = env_config_from_json(env);

  const json train = section(j, "train");
  check_keys(train, "train", keys_of(to_json(TrainConfig{})));
  cfg.train = train_config_from_json(train);
  cfg.train.seed = component_seed(cfg, "trainer");
  cfg.train.env = cfg.env;

  const json sgd = section(j, "sgd");
  check_keys(sgd, "sgd", keys_of(to_json(SgdConfig{})));
  cfg.train.sgd = sgd_config_from_json(sgd);
  validate(cfg.train);

  const json runner = section(j, "runner");
  check_keys(runner, "runner", keys_of(to_json(RunnerConfig{})));
  cfg.runner = runner_config_from_json(runner, cfg.env);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json gen = to_json(cfg.gen);
  gen.erase("seed");
  json features = to_json(cfg.features);
  features.erase("projection_seed");
  json train = to_json(cfg.train);
  train.erase("seed");
  return {
      {"seed", cfg.seed},          {"gen", gen},
      {"features", features},      {"env", to_json(cfg.env)},
      {"train", train},            {"sgd", to_json(cfg.train.sgd)},
      {"runner", to_json(cfg.runner)}, {"output_dir", cfg.output_dir},
  };
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("--set: empty path component in '" + key + "'");
    if (!node->is_object()) throw ValidationError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_experiment_config(const fs::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    try {
      doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  return experiment_config_from_json(doc);
}

void cmd_gen(const ExperimentConfig& cfg, const fs::path& out) {
  const Dataset ds = generate(cfg.gen);
  const std::size_t total = ds.scenes.size();
  if (total == 0) throw ValidationError("gen: train_count + test_count is zero");
  const double train_fraction = static_cast<double>(cfg.gen.train_count) / static_cast<double>(total);
  const auto parts = split(total, {train_fraction, 1.0 - train_fraction}, component_seed(cfg, "split"));
  const char* names[] = {"train", "test"};
  for (std::size_t p = 0; p < 2; ++p) {
    std::vector<const GeneratedScene*> scenes;
    for (std::size_t i : parts[p]) scenes.push_back(&ds.scenes[i]);
    write_dataset(out / names[p], scenes, cfg.gen);
  }
}

TrainResult cmd_train(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out, bool trace) {
  const LoadedDataset ds = load_dataset(data);
  if (ds.scenes.empty()) throw ValidationError(data.string() + ": dataset has no images");
  fs::create_directories(out);

  std::string log_text;
  std::string trace_text;
  TrainHooks hooks;
  hooks.on_epoch = [&log_text](const EpochLog& log) { log_text += to_json(log).dump() + "\n"; };
  if (trace) {
    hooks.on_step = [&trace_text](const Scene& scene, const StepResult& r) {
      json rec = to_trace_json(r);
      rec["scene"] = scene.id;
      trace_text += rec.dump() + "\n";
    };
  }
  TrainResult result = train(ds.scenes, cfg.features, cfg.train, hooks);

  const auto bytes = save_checkpoint(result.network, cfg.features, result.observation_dim);
  write_file_bytes(out / "checkpoint.bin", bytes);
  const json sidecar = {
      {"input_dim", result.network.input_dim()},
      {"observation_dim", result.observation_dim},
      {"hidden_sizes", result.network.hidden_sizes()},
      {"num_actions", kNumActions},
      {"action_ordering_version", kActionOrderingVersion},
      {"features", to_json(cfg.features)},
      {"config", to_json(cfg)},
      {"category", ds.scenes.front().category},
      {"train_images", ds.scenes.size()},
  };
  write_text_file(out / "checkpoint.json", sidecar.dump(2) + "\n");
  write_text_file(out / "train_log.jsonl", log_text);
  if (trace) write_text_file(out / "train_trace.jsonl", trace_text);
  return result;
}

std::vector<Trajectory> cmd_run(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& data,
                                const fs::path& out, bool svg) {
  const Checkpoint ckpt = load_checkpoint(read_file_bytes(checkpoint));
  const LoadedDataset ds = load_dataset(data);
  fs::create_directories(out);
  std::vector<Trajectory> trajectories;
  for (const Scene& scene : ds.scenes) {
    if (ckpt.extractor.observation_dim(scene.image.channels) != ckpt.observation_dim) {
      throw ValidationError(scene.id + ": image channels do not match the checkpoint's feature extractor");
    }
    Trajectory traj = run_episode(scene, ckpt.network, ckpt.extractor, cfg.runner);
    write_text_file(out / (scene.id + ".jsonl"), trajectory_to_jsonl(traj));
    if (svg) write_text_file(out / (scene.id + ".svg"), trajectory_to_svg(traj, scene, cfg.env.cross_thickness));
    trajectories.push_back(std::move(traj));
  }
  return trajectories;
}

ManifestTruth read_manifest_truth(const fs::path& manifest, const std::string& category) {
  const fs::path path = fs::is_directory(manifest) ? manifest / "manifest.json" : manifest;
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  ManifestTruth out;
  try {
    const std::string target = category.empty() ? doc.at("spec").at("category").get<std::string>() : category;
    const json& images = doc.at("images");
    for (std::size_t i = 0; i < images.size(); ++i) {
      const json& img = images[i];
      const std::string id = fs::path(img.at("file").get<std::string>()).stem().string();
      auto& truths = out.truths[id];
      out.image_areas[id] = img.at("width").get<double>() * img.at("height").get<double>();
      for (const json& o : img.at("objects")) {
        if (o.at("category").get<std::string>() == target) {
          truths.push_back(Box::from_array(o.at("box").get<std::array<double, 4>>()));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return out;
}

EvaluationReport cmd_eval(const fs::path& trajectories, const fs::path& manifest, DetectionMode mode,
                          const fs::path& out, const ExperimentConfig& cfg) {
  const ManifestTruth gt = read_manifest_truth(manifest);
  std::vector<Trajectory> trajs;
  for (const fs::path& file : jsonl_files(trajectories)) {
    Trajectory t;
    try {
      t = trajectory_from_jsonl(read_text_file(file));
    } catch (const ValidationError& e) {
      throw ValidationError(file.string() + ": " + e.what());
    }
    if (t.regions.empty()) continue;
    if (!gt.truths.count(t.scene_id)) {
      throw ValidationError(file.string() + ": scene '" + t.scene_id + "' is not in the manifest");
    }
    trajs.push_back(std::move(t));
  }
  EvaluationOptions opts;
  opts.mode = mode;
  opts.iou_thresh = cfg.env.match_iou;
  opts.trigger_bonus = cfg.runner.trigger_bonus;
  const EvaluationReport report = evaluate(trajs, gt.truths, gt.image_areas, opts);
  fs::create_directories(out);
  write_text_file(out / "metrics.json", to_json(report).dump(2) + "\n");
  write_text_file(out / "pr_curve.csv", pr_curve_csv(report.curve));
  write_text_file(out / "recall_at_k.csv", recall_at_k_csv(report.recall_curve));
  return report;
}

std::string cmd_inspect(const fs::path& trajectory) {
  const Trajectory t = trajectory_from_jsonl(read_text_file(trajectory));
  std::ostringstream out;
  out << "scene " << t.scene_id << ": " << t.regions.size() << " regions, " << t.restarts.size() << " restarts, "
      << t.ior_marks.size() << " triggers\n";
  char line[256];
  std::snprintf(line, sizeof line, "%5s %5s  %-12s %-31s %9s  %s\n", "step", "since", "action", "box", "max_q", "event");
  out << line;
  std::size_t next_restart = 0;
  for (const AttendedRegion& r : t.regions) {
    const std::string box = "[" + fmt(r.box.x1, 1) + ", " + fmt(r.box.y1, 1) + ", " + fmt(r.box.x2, 1) + ", " +
                            fmt(r.box.y2, 1) + "]";
    std::string event;
    if (next_restart < t.restarts.size() && t.restarts[next_restart].step == r.step) {
      event = "restart:" + std::string(restart_reason_name(t.restarts[next_restart].reason));
      ++next_restart;
    }
    const double max_q = *std::max_element(r.q_values.begin(), r.q_values.end());
    std::snprintf(line, sizeof line, "%5d %5d  %-12s %-31s %9s  %s\n", r.step, r.steps_since_restart,
                  std::string(action_name(r.chosen)).c_str(), box.c_str(), fmt(max_q, 4).c_str(), event.c_str());
    out << line;
  }
  return out.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active object localization with a deep Q-network"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string mode = "tr";
  bool svg = false;
  bool trace = false;
  std::string data;
  std::string checkpoint;
  std::string trajectories;
  std::string manifest;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)");
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--seed", seed, "Master seed, overrides the config")->check(CLI::NonNegativeNumber);
    cmd->add_option("--set", overrides, "Config override key.path=value (repeatable)");
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  common(gen);
  CLI::App* train_cmd = app.add_subcommand("train", "Train a Q-network");
  common(train_cmd);
  train_cmd->add_option("--data", data, "Training dataset directory or manifest")->required();
  train_cmd->add_flag("--trace", trace, "Also write every training step");
  CLI::App* run = app.add_subcommand("run", "Run the greedy search over a dataset");
  common(run);
  run->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  run->add_option("--data", data, "Dataset directory or manifest")->required();
  run->add_flag("--svg", svg, "Write an SVG overlay per scene");
  CLI::App* eval = app.add_subcommand("eval", "Score trajectories against ground truth");
  common(eval);
  eval->add_option("--trajectories", trajectories, "Trajectory directory or file")->required();
  eval->add_option("--manifest", manifest, "Ground-truth manifest")->required();
  eval->add_option("--mode", mode, "Detection mode: tr or aar");
  CLI::App* inspect = app.add_subcommand("inspect", "Print a trajectory as a table");
  inspect->add_option("trajectory", trajectories, "Trajectory file (.jsonl)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (inspect->parsed()) {
      out << cmd_inspect(trajectories);
      return 0;
    }
    if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
    const ExperimentConfig cfg = load_experiment_config(config_path, overrides);
    const fs::path base = cfg.output_dir;
    if (gen->parsed()) {
      const fs::path dest = out_dir.empty() ? base / "data" : fs::path(out_dir);
      cmd_gen(cfg, dest);
      out << "wrote " << (dest / "train").string() << " and " << (dest / "test").string() << "\n";
    } else if (train_cmd->parsed()) {
      const fs::path dest = out_dir.empty() ? base / "model" : fs::path(out_dir);
      const TrainResult r = cmd_train(cfg, data, dest, trace);
      for (const EpochLog& l : r.log) {
        out << "epoch " << l.epoch << " epsilon " << fmt(l.epsilon) << " reward " << fmt(l.mean_reward, 3)
            << " loss " << fmt(l.mean_loss, 4) << " triggers " << l.trigger_tp << "/" << (l.trigger_tp + l.trigger_fp)
            << "\n";
      }
      out << "wrote " << (dest / "checkpoint.bin").string() << "\n";
    } else if (run->parsed()) {
      const fs::path dest = out_dir.empty() ? base / "trajectories" : fs::path(out_dir);
      const auto trajs = cmd_run(cfg, checkpoint, data, dest, svg);
      out << "wrote " << trajs.size() << " trajectories to " << dest.string() << "\n";
    } else if (eval->parsed()) {
      const fs::path dest = out_dir.empty() ? base / "eval" : fs::path(out_dir);
      const EvaluationReport r = cmd_eval(trajectories, manifest, detection_mode_from_name(mode), dest, cfg);
      out << "mode " << detection_mode_name(r.mode) << " AP " << fmt(r.curve.ap, 4) << " recall " << fmt(r.recall, 4)
          << " precision " << fmt(r.precision, 4) << " (" << r.true_positives << "/" << r.num_truths << ")\n";
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace locagent
