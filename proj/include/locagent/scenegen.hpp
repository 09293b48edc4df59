#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "locagent/environment.hpp"
#include "locagent/image.hpp"

namespace locagent {

enum class ShapeKind : std::uint8_t { kDisk, kSquare, kTriangle };

std::string_view shape_name(ShapeKind k);
ShapeKind shape_from_name(std::string_view name);

struct GenSpec {
  int width = 128;
  int height = 128;
  int channels = 3;
  std::string category = "disk";
  int instances_min = 1;
  int instances_max = 2;
  double size_min = 0.15;  // object side as a fraction of min(width, height)
  double size_max = 0.6;
  int distractors_min = 0;
  int distractors_max = 2;
  double noise_amplitude = 12.0;  // uniform additive noise in +-amplitude
  double max_truth_overlap = 0.3;
  std::uint64_t seed = 0;
  int train_count = 400;
  int test_count = 100;
};

void validate(const GenSpec& spec);
nlohmann::json to_json(const GenSpec& spec);
GenSpec gen_spec_from_json(const nlohmann::json& j);

struct ObjectAnnotation {
  std::string category;
  Box box;
};

// Scene pixels with every painted object (targets and distractors).
struct GeneratedScene {
  std::string id;
  Image image;
  std::vector<ObjectAnnotation> objects;
};

struct Dataset {
  std::vector<GeneratedScene> scenes;
  GenSpec spec;
};

// Pixel mask of a shape inside its integer bounding square [x, x+side) x
// [y, y+side), row-major, side x side.
std::vector<std::uint8_t> render_shape_mask(ShapeKind kind, int side);

// Tight pixel bounds [minx, miny, maxx+1, maxy+1] of a shape painted at (x, y).
Box shape_bounds(ShapeKind kind, int x, int y, int side);

// Deterministic in spec.seed; each image uses its own derived seed.
// Throws ValidationError when an object cannot fit or cannot be placed.
Dataset generate(const GenSpec& spec);

// Disjoint, seed-deterministic partition of scene indices; each part keeps
// the original order. Fractions must be non-negative and sum to 1.
std::vector<std::vector<std::size_t>> split(std::size_t count, const std::vector<double>& fractions,
                                            std::uint64_t seed);

Scene to_scene(const GeneratedScene& g, const std::string& category);

// Manifest: {images: [{file, width, height, objects: [{category, box}]}], spec, seed}
nlohmann::json make_manifest(const std::vector<const GeneratedScene*>& scenes, const GenSpec& spec);

// Writes <dir>/<id>.ppm for each scene plus <dir>/manifest.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<const GeneratedScene*>& scenes,
                   const GenSpec& spec);

struct LoadedDataset {
  std::vector<Scene> scenes;
  nlohmann::json manifest;
};

// Loads a manifest (file path or directory containing manifest.json). Truths
// are the objects of `category`; empty means the manifest spec's category.
LoadedDataset load_dataset(const std::filesystem::path& path, const std::string& category = "");

}  // namespace locagent
