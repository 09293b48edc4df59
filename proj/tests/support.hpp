#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "locagent/environment.hpp"
#include "locagent/geometry.hpp"
#include "locagent/rng.hpp"

namespace locagent {

inline std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << "[" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << "]";
}

}  // namespace locagent

namespace locagent::testing {

inline Box random_box(Rng& rng, double w, double h, double min_side = 1.0) {
  const double bw = rng.uniform(min_side, w);
  const double bh = rng.uniform(min_side, h);
  const double x = rng.uniform(0.0, w - bw);
  const double y = rng.uniform(0.0, h - bh);
  return {x, y, x + bw, y + bh};
}

// Integer-aligned box, handy when exact arithmetic matters.
inline Box random_int_box(Rng& rng, int w, int h, int min_side = 1) {
  const auto bw = rng.between(min_side, w);
  const auto bh = rng.between(min_side, h);
  const auto x = rng.between(0, w - bw);
  const auto y = rng.between(0, h - bh);
  return {double(x), double(y), double(x + bw), double(y + bh)};
}

inline Image random_image(Rng& rng, int w, int h, int c) {
  Image img(w, h, c);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline Scene make_scene(int w, int h, std::vector<Box> truths, std::string id = "s") {
  Scene s;
  s.id = std::move(id);
  s.image = Image(w, h, 3, 90);
  s.truths = std::move(truths);
  s.category = "disk";
  return s;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("locagent_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace locagent::testing
