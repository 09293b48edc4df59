#include "locagent/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "locagent/errors.hpp"
#include "locagent/rng.hpp"

namespace locagent {
namespace {

constexpr std::array<ShapeKind, 3> kAllShapes = {ShapeKind::kDisk, ShapeKind::kSquare, ShapeKind::kTriangle};
constexpr int kPlacementAttempts = 500;

struct Placement {
  ShapeKind kind;
  int x, y, side;
  std::vector<std::uint8_t> mask;
};

std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", index);
  return buf;
}

int draw_side(const GenSpec& spec, Rng& rng, ShapeKind kind) {
  const int extent = std::min(spec.width, spec.height);
  int side = static_cast<int>(std::lround(rng.uniform(spec.size_min, spec.size_max) * extent));
  side = std::max(side, 4);
  if (kind == ShapeKind::kDisk) side -= side % 2;
  return side;
}

// Mask pixels of `p` would touch (8-neighbourhood) an occupied pixel.
bool collides(const Placement& p, const std::vector<std::uint8_t>& occupied, int width, int height) {
  for (int j = 0; j < p.side; ++j) {
    for (int i = 0; i < p.side; ++i) {
      if (!p.mask[static_cast<std::size_t>(j * p.side + i)]) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = p.x + i + dx;
          const int y = p.y + j + dy;
          if (x < 0 || y < 0 || x >= width || y >= height) continue;
          if (occupied[static_cast<std::size_t>(y * width + x)]) return true;
        }
      }
    }
  }
  return false;
}

void occupy(const Placement& p, std::vector<std::uint8_t>& occupied, int width) {
  for (int j = 0; j < p.side; ++j) {
    for (int i = 0; i < p.side; ++i) {
      if (p.mask[static_cast<std::size_t>(j * p.side + i)]) {
        occupied[static_cast<std::size_t>((p.y + j) * width + p.x + i)] = 1;
      }
    }
  }
}

std::optional<Placement> place(ShapeKind kind, const GenSpec& spec, Rng& rng, std::vector<std::uint8_t>& occupied,
                               const std::vector<Box>& truths, bool is_target) {
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const int side = draw_side(spec, rng, kind);
    if (side > spec.width || side > spec.height) {
      throw ValidationError("scenegen: object side " + std::to_string(side) + " does not fit the image");
    }
    Placement p{kind, static_cast<int>(rng.between(0, spec.width - side)),
                static_cast<int>(rng.between(0, spec.height - side)), side, render_shape_mask(kind, side)};
    if (collides(p, occupied, spec.width, spec.height)) continue;
    if (is_target) {
      const Box b = shape_bounds(kind, p.x, p.y, side);
      const bool too_close = std::any_of(truths.begin(), truths.end(),
                                         [&](const Box& t) { return iou(t, b) > spec.max_truth_overlap; });
      if (too_close) continue;
    }
    occupy(p, occupied, spec.width);
    return p;
  }
  return std::nullopt;
}

GeneratedScene generate_one(const GenSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, scene_id(index)));
  const ShapeKind target = shape_from_name(spec.category);
  std::vector<ShapeKind> others;
  for (ShapeKind k : kAllShapes) {
    if (k != target) others.push_back(k);
  }

  GeneratedScene scene;
  scene.id = scene_id(index);
  scene.image = Image(spec.width, spec.height, spec.channels);

  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height), 0);
  std::vector<Box> truths;
  std::vector<Placement> placed;

  const auto n_targets = rng.between(spec.instances_min, spec.instances_max);
  for (std::int64_t i = 0; i < n_targets; ++i) {
    auto p = place(target, spec, rng, occupied, truths, true);
    if (!p) throw ValidationError("scenegen: could not place target " + std::to_string(i) + " in " + scene.id);
    truths.push_back(shape_bounds(target, p->x, p->y, p->side));
    scene.objects.push_back({spec.category, truths.back()});
    placed.push_back(std::move(*p));
  }
  const auto n_distractors = rng.between(spec.distractors_min, spec.distractors_max);
  for (std::int64_t i = 0; i < n_distractors; ++i) {
    const ShapeKind kind = others[rng.below(others.size())];
    auto p = place(kind, spec, rng, occupied, truths, false);
    if (!p) continue;  // crowded scene; distractors are best effort
    scene.objects.push_back({std::string(shape_name(kind)), shape_bounds(kind, p->x, p->y, p->side)});
    placed.push_back(std::move(*p));
  }

  // Dark background, bright shapes; every category uses the same palette.
  std::vector<double> background(static_cast<std::size_t>(spec.channels));
  for (double& v : background) v = rng.uniform(30.0, 110.0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      for (int c = 0; c < spec.channels; ++c) scene.image.at(x, y, c) = static_cast<std::uint8_t>(background[static_cast<std::size_t>(c)]);
    }
  }
  for (const Placement& p : placed) {
    std::vector<std::uint8_t> color(static_cast<std::size_t>(spec.channels));
    for (auto& v : color) v = static_cast<std::uint8_t>(rng.between(150, 255));
    for (int j = 0; j < p.side; ++j) {
      for (int i = 0; i < p.side; ++i) {
        if (!p.mask[static_cast<std::size_t>(j * p.side + i)]) continue;
        for (int c = 0; c < spec.channels; ++c) scene.image.at(p.x + i, p.y + j, c) = color[static_cast<std::size_t>(c)];
      }
    }
  }
  if (spec.noise_amplitude > 0.0) {
    for (auto& v : scene.image.pixels) {
      const double noisy = v + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
      v = static_cast<std::uint8_t>(std::clamp(std::lround(noisy), 0L, 255L));
    }
  }
  return scene;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

std::string_view shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kDisk:
      return "disk";
    case ShapeKind::kSquare:
      return "square";
    case ShapeKind::kTriangle:
      return "triangle";
  }
  return "disk";
}

ShapeKind shape_from_name(std::string_view name) {
  for (ShapeKind k : kAllShapes) {
    if (shape_name(k) == name) return k;
  }
  throw ValidationError("unknown category '" + std::string(name) + "' (expected disk, square or triangle)");
}

void validate(const GenSpec& spec) {
  if (spec.width < kMinSceneSide || spec.height < kMinSceneSide) throw ValidationError("gen: image must be >= 32x32");
  if (spec.channels != 1 && spec.channels != 3) throw ValidationError("gen.channels must be 1 or 3");
  shape_from_name(spec.category);
  if (spec.instances_min < 0 || spec.instances_max < spec.instances_min) {
    throw ValidationError("gen.instances_min/max must satisfy 0 <= min <= max");
  }
  if (!(spec.size_min > 0.0 && spec.size_max < 1.0 && spec.size_min <= spec.size_max)) {
    throw ValidationError("gen.size_min/max must lie in (0,1) with min <= max");
  }
  if (spec.distractors_min < 0 || spec.distractors_max < spec.distractors_min) {
    throw ValidationError("gen.distractors_min/max must satisfy 0 <= min <= max");
  }
  if (spec.noise_amplitude < 0.0) throw ValidationError("gen.noise_amplitude must be >= 0");
  if (!(spec.max_truth_overlap >= 0.0 && spec.max_truth_overlap <= 1.0)) {
    throw ValidationError("gen.max_truth_overlap must be in [0,1]");
  }
  if (spec.train_count < 0 || spec.test_count < 0) throw ValidationError("gen.train/test counts must be >= 0");
}

nlohmann::json to_json(const GenSpec& spec) {
  return {
      {"width", spec.width},
      {"height", spec.height},
      {"channels", spec.channels},
      {"category", spec.category},
      {"instances_min", spec.instances_min},
      {"instances_max", spec.instances_max},
      {"size_min", spec.size_min},
      {"size_max", spec.size_max},
      {"distractors_min", spec.distractors_min},
      {"distractors_max", spec.distractors_max},
      {"noise_amplitude", spec.noise_amplitude},
      {"max_truth_overlap", spec.max_truth_overlap},
      {"seed", spec.seed},
      {"train_count", spec.train_count},
      {"test_count", spec.test_count},
  };
}

GenSpec gen_spec_from_json(const nlohmann::json& j) {
  GenSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.channels = j.value("channels", s.channels);
    s.category = j.value("category", s.category);
    s.instances_min = j.value("instances_min", s.instances_min);
    s.instances_max = j.value("instances_max", s.instances_max);
    s.size_min = j.value("size_min", s.size_min);
    s.size_max = j.value("size_max", s.size_max);
    s.distractors_min = j.value("distractors_min", s.distractors_min);
    s.distractors_max = j.value("distractors_max", s.distractors_max);
    s.noise_amplitude = j.value("noise_amplitude", s.noise_amplitude);
    s.max_truth_overlap = j.value("max_truth_overlap", s.max_truth_overlap);
    s.seed = j.value("seed", s.seed);
    s.train_count = j.value("train_count", s.train_count);
    s.test_count = j.value("test_count", s.test_count);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("gen: ") + e.what());
  }
  validate(s);
  return s;
}

std::vector<std::uint8_t> render_shape_mask(ShapeKind kind, int side) {
  if (side <= 0) throw ContractError("render_shape_mask: side must be positive");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(side) * static_cast<std::size_t>(side), 0);
  const double s = side;
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      const double x = i + 0.5;
      const double y = j + 0.5;
      bool inside = false;
      switch (kind) {
        case ShapeKind::kDisk: {
          const double r = 0.5 * s;
          inside = (x - r) * (x - r) + (y - r) * (y - r) <= r * r;
          break;
        }
        case ShapeKind::kSquare:
          inside = true;
          break;
        case ShapeKind::kTriangle:
          // Apex at the top centre, base along the bottom edge.
          inside = std::abs(x - 0.5 * s) <= 0.5 * y + 0.5;
          break;
      }
      mask[static_cast<std::size_t>(j * side + i)] = inside ? 1 : 0;
    }
  }
  return mask;
}

Box shape_bounds(ShapeKind kind, int x, int y, int side) {
  const auto mask = render_shape_mask(kind, side);
  int minx = side, miny = side, maxx = -1, maxy = -1;
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      if (!mask[static_cast<std::size_t>(j * side + i)]) continue;
      minx = std::min(minx, i);
      maxx = std::max(maxx, i);
      miny = std::min(miny, j);
      maxy = std::max(maxy, j);
    }
  }
  if (maxx < 0) throw ContractError("shape_bounds: empty shape");
  return {static_cast<double>(x + minx), static_cast<double>(y + miny), static_cast<double>(x + maxx + 1),
          static_cast<double>(y + maxy + 1)};
}

Dataset generate(const GenSpec& spec) {
  validate(spec);
  Dataset ds;
  ds.spec = spec;
  const auto total = static_cast<std::size_t>(spec.train_count) + static_cast<std::size_t>(spec.test_count);
  ds.scenes.reserve(total);
  for (std::size_t i = 0; i < total; ++i) ds.scenes.push_back(generate_one(spec, i));
  return ds;
}

std::vector<std::vector<std::size_t>> split(std::size_t count, const std::vector<double>& fractions,
                                            std::uint64_t seed) {
  if (fractions.empty()) throw ValidationError("split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split: fractions must be in [0,1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split: fractions must sum to 1");

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::vector<std::size_t>> parts;
  double cumulative = 0.0;
  std::size_t start = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    cumulative += fractions[p];
    const std::size_t end =
        p + 1 == fractions.size() ? count : std::min(count, static_cast<std::size_t>(std::llround(cumulative * count)));
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(std::max(start, end)));
    std::sort(part.begin(), part.end());
    parts.push_back(std::move(part));
    start = std::max(start, end);
  }
  return parts;
}

Scene to_scene(const GeneratedScene& g, const std::string& category) {
  Scene s;
  s.id = g.id;
  s.image = g.image;
  s.category = category;
  for (const ObjectAnnotation& o : g.objects) {
    if (o.category == category) s.truths.push_back(o.box);
  }
  return s;
}

nlohmann::json make_manifest(const std::vector<const GeneratedScene*>& scenes, const GenSpec& spec) {
  nlohmann::json images = nlohmann::json::array();
  for (const GeneratedScene* g : scenes) {
    nlohmann::json objects = nlohmann::json::array();
    for (const ObjectAnnotation& o : g->objects) objects.push_back({{"category", o.category}, {"box", o.box.to_array()}});
    images.push_back({{"file", g->id + ".ppm"}, {"width", g->image.width}, {"height", g->image.height}, {"objects", objects}});
  }
  return {{"images", images}, {"spec", to_json(spec)}, {"seed", spec.seed}};
}

void write_dataset(const std::filesystem::path& dir, const std::vector<const GeneratedScene*>& scenes,
                   const GenSpec& spec) {
  std::filesystem::create_directories(dir);
  for (const GeneratedScene* g : scenes) write_ppm(dir / (g->id + ".ppm"), g->image);
  write_text_file(dir / "manifest.json", make_manifest(scenes, spec).dump(2) + "\n");
}

LoadedDataset load_dataset(const std::filesystem::path& path, const std::string& category) {
  const std::filesystem::path manifest_path =
      std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  const std::filesystem::path root = manifest_path.parent_path();
  LoadedDataset out;
  try {
    out.manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  const std::string where = manifest_path.string();
  std::string target = category;
  if (target.empty()) {
    if (!out.manifest.contains("spec")) throw ValidationError(where + ": no category given and no spec in manifest");
    target = field<std::string>(out.manifest.at("spec"), "category", where + ".spec");
  }
  const auto images = field<nlohmann::json>(out.manifest, "images", where);
  if (!images.is_array()) throw ValidationError(where + ".images: expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string at = where + ".images[" + std::to_string(i) + "]";
    const auto& entry = images[i];
    const auto file = field<std::string>(entry, "file", at);
    const int width = field<int>(entry, "width", at);
    const int height = field<int>(entry, "height", at);
    Scene scene;
    scene.id = std::filesystem::path(file).stem().string();
    scene.category = target;
    scene.image = read_ppm(root / file);
    if (scene.image.width != width || scene.image.height != height) {
      throw ValidationError(at + ": width/height disagree with " + file);
    }
    const auto objects = field<nlohmann::json>(entry, "objects", at);
    for (std::size_t k = 0; k < objects.size(); ++k) {
      const std::string oat = at + ".objects[" + std::to_string(k) + "]";
      const auto cat = field<std::string>(objects[k], "category", oat);
      const Box box = Box::from_array(field<std::array<double, 4>>(objects[k], "box", oat));
      if (cat == target) scene.truths.push_back(box);
    }
    try {
      validate_scene(scene);
    } catch (const ValidationError& e) {
      throw ValidationError(at + ": " + e.what());
    }
    out.scenes.push_back(std::move(scene));
  }
  return out;
}

}  // namespace locagent
