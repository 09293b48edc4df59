#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "locagent/environment.hpp"
#include "locagent/evalmetrics.hpp"
#include "locagent/features.hpp"
#include "locagent/runner.hpp"
#include "locagent/scenegen.hpp"
#include "locagent/trainer.hpp"

namespace locagent {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  GenSpec gen;
  FeatureExtractorSpec features;
  EnvConfig env;
  TrainConfig train;  // train.env and train.sgd mirror the top-level sections
  RunnerConfig runner;
  std::string output_dir = "out";
};

// Component seeds derived from the master seed.
std::uint64_t component_seed(const ExperimentConfig& cfg, std::string_view component);

// Sections: seed, gen, features, env, train, sgd, runner, output_dir. Unknown
// keys are rejected with the offending path in the message.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides = {});

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Writes <out>/train and <out>/test, each a manifest plus PPM images.
void cmd_gen(const ExperimentConfig& cfg, const std::filesystem::path& out);

// Writes checkpoint.bin, checkpoint.json and train_log.jsonl under `out`;
// with `trace`, also train_trace.jsonl with every environment step.
TrainResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data,
                      const std::filesystem::path& out, bool trace = false);

// Writes <out>/<scene>.jsonl per scene and <out>/<scene>.svg with `svg`.
std::vector<Trajectory> cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& data, const std::filesystem::path& out,
                                bool svg = false);

// Reads every *.jsonl under `trajectories`; writes metrics.json,
// pr_curve.csv and recall_at_k.csv under `out`.
EvaluationReport cmd_eval(const std::filesystem::path& trajectories, const std::filesystem::path& manifest,
                          DetectionMode mode, const std::filesystem::path& out, const ExperimentConfig& cfg);

// One row per attended region.
std::string cmd_inspect(const std::filesystem::path& trajectory);

// Ground truth and image areas straight from a manifest, without decoding images.
struct ManifestTruth {
  TruthIndex truths;
  std::map<std::string, double> image_areas;
};
ManifestTruth read_manifest_truth(const std::filesystem::path& manifest, const std::string& category = "");

// Full command-line entry point. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace locagent
