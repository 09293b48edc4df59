#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "locagent/cli.hpp"
#include "locagent/errors.hpp"

using namespace locagent;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "locagent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string configs_dir() {
  const char* env = std::getenv("LOCAGENT_CONFIGS");
  return env ? env : "configs";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config overrides and validation") {
  nlohmann::json doc = {{"train", {{"epochs", 3}}}};
  apply_override(doc, "train.epochs=7");
  apply_override(doc, "gen.category=square");
  apply_override(doc, "sgd.learning_rate=0.01");
  CHECK(doc["train"]["epochs"] == 7);
  CHECK(doc["gen"]["category"] == "square");
  CHECK(doc["sgd"]["learning_rate"] == 0.01);
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ValidationError);

  const ExperimentConfig cfg = experiment_config_from_json(doc);
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.gen.category == "square");
  CHECK(cfg.train.sgd.learning_rate == 0.01);

  try {
    experiment_config_from_json({{"gen", {{"colour", 1}}}});
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gen.colour") != std::string::npos);
  }
  CHECK_THROWS_AS(experiment_config_from_json({{"extra", 1}}), ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json({{"train", {{"seed", 4}}}}), ValidationError);
}

TEST_CASE("component seeds are distinct and follow the master seed") {
  ExperimentConfig a;
  a.seed = 1;
  ExperimentConfig b = a;
  b.seed = 2;
  CHECK(component_seed(a, "trainer") != component_seed(a, "scenegen"));
  CHECK(component_seed(a, "trainer") != component_seed(b, "trainer"));
  const ExperimentConfig loaded = experiment_config_from_json({{"seed", 1}});
  CHECK(loaded.train.seed == component_seed(a, "trainer"));
  CHECK(loaded.gen.seed == component_seed(a, "scenegen"));
}

TEST_CASE("smoke pipeline through the command line") {
  const fs::path root = locagent::testing::scratch_dir("cli_smoke");
  const std::string config = configs_dir() + "/smoke.json";
  const std::string set_out = "output_dir=" + root.string();

  const CliResult gen = cli({"gen", "--config", config, "--set", set_out});
  REQUIRE(gen.code == 0);
  CHECK(fs::exists(root / "data/train/manifest.json"));
  CHECK(fs::exists(root / "data/test/manifest.json"));

  const CliResult train =
      cli({"train", "--config", config, "--set", set_out, "--data", (root / "data/train").string(), "--trace"});
  REQUIRE(train.code == 0);
  CHECK(train.out.find("epoch 2") != std::string::npos);
  for (const char* f : {"checkpoint.bin", "checkpoint.json", "train_log.jsonl", "train_trace.jsonl"}) {
    CHECK(fs::exists(root / "model" / f));
  }

  const CliResult run = cli({"run", "--config", config, "--set", set_out, "--checkpoint",
                             (root / "model/checkpoint.bin").string(), "--data", (root / "data/test").string(), "--svg"});
  REQUIRE(run.code == 0);
  CHECK(run.out.find("wrote 8 trajectories") != std::string::npos);
  const fs::path first = root / "trajectories/scene_00000.jsonl";
  const bool have_first = fs::exists(first);
  int jsonl = 0, svgs = 0;
  fs::path any;
  for (const auto& e : fs::directory_iterator(root / "trajectories")) {
    jsonl += e.path().extension() == ".jsonl";
    svgs += e.path().extension() == ".svg";
    if (e.path().extension() == ".jsonl") any = e.path();
  }
  CHECK(jsonl == 8);
  CHECK(svgs == 8);

  for (const char* mode : {"tr", "aar"}) {
    const CliResult ev = cli({"eval", "--config", config, "--set", set_out, "--trajectories",
                              (root / "trajectories").string(), "--manifest",
                              (root / "data/test/manifest.json").string(), "--mode", mode, "--out",
                              (root / ("eval_" + std::string(mode))).string()});
    REQUIRE(ev.code == 0);
    CHECK(ev.out.find(std::string("mode ") + mode) == 0);
    const auto metrics = nlohmann::json::parse(slurp(root / ("eval_" + std::string(mode)) / "metrics.json"));
    CHECK(metrics.contains("ap"));
    CHECK(fs::exists(root / ("eval_" + std::string(mode)) / "pr_curve.csv"));
    CHECK(fs::exists(root / ("eval_" + std::string(mode)) / "recall_at_k.csv"));
  }

  const CliResult ins = cli({"inspect", (have_first ? first : any).string()});
  REQUIRE(ins.code == 0);
  // Summary and column header, then one row per attended region (max_steps is 60 in the smoke config).
  CHECK(std::count(ins.out.begin(), ins.out.end(), '\n') == 62);

  // Same seed, same checkpoint bytes.
  const fs::path again = root / "again";
  REQUIRE(cli({"train", "--config", config, "--set", set_out, "--data", (root / "data/train").string(), "--out",
               again.string()})
              .code == 0);
  CHECK(slurp(again / "checkpoint.bin") == slurp(root / "model/checkpoint.bin"));
  REQUIRE(cli({"train", "--config", config, "--set", set_out, "--seed", "12", "--data",
               (root / "data/train").string(), "--out", (root / "other").string()})
              .code == 0);
  CHECK(slurp(root / "other/checkpoint.bin") != slurp(root / "model/checkpoint.bin"));
}

TEST_CASE("exit codes") {
  const fs::path root = locagent::testing::scratch_dir("cli_codes");
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"train"}).code == 1);
  const CliResult missing = cli({"train", "--data", (root / "nothing").string(), "--out", root.string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") == 0);
  CHECK(cli({"gen", "--config", (root / "absent.json").string()}).code == 1);
  CHECK(cli({"gen", "--set", "gen.width=8", "--out", root.string()}).code == 1);
  CHECK(cli({"inspect", (root / "absent.jsonl").string()}).code == 1);
  CHECK(cli({"--help"}).code == 0);

  const char* bin = std::getenv("LOCAGENT_BIN");
  if (bin != nullptr) {
    const std::string quiet = " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system((std::string(bin) + " --help" + quiet).c_str())) == 0);
    CHECK(WEXITSTATUS(std::system((std::string(bin) + " gen --set gen.width=8 --out " + root.string() + quiet).c_str())) == 1);
  }
}
