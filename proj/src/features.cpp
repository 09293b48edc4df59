#include "locagent/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "locagent/errors.hpp"
#include "locagent/rng.hpp"

namespace locagent {

std::string_view extractor_kind_name(ExtractorKind k) {
  return k == ExtractorKind::kGridPool ? "grid-pool" : "random-projection";
}

int FeatureExtractorSpec::observation_dim(int channels) const {
  if (kind == ExtractorKind::kRandomProjection) return output_dim;
  return grid_size * grid_size * channels;
}

void validate(const FeatureExtractorSpec& spec) {
  if (spec.grid_size <= 0) throw ValidationError("features.grid_size must be positive");
  if (spec.context_pixels < 0) throw ValidationError("features.context_pixels must be >= 0");
  if (spec.kind == ExtractorKind::kRandomProjection && spec.output_dim <= 0) {
    throw ValidationError("features.output_dim must be positive for random-projection");
  }
}

nlohmann::json to_json(const FeatureExtractorSpec& spec) {
  return {
      {"kind", extractor_kind_name(spec.kind)},
      {"grid_size", spec.grid_size},
      {"context_pixels", spec.context_pixels},
      {"output_dim", spec.output_dim},
      {"projection_seed", spec.projection_seed},
  };
}

FeatureExtractorSpec extractor_spec_from_json(const nlohmann::json& j) {
  FeatureExtractorSpec spec;
  try {
    const std::string kind = j.value("kind", std::string("grid-pool"));
    if (kind == "grid-pool") {
      spec.kind = ExtractorKind::kGridPool;
    } else if (kind == "random-projection") {
      spec.kind = ExtractorKind::kRandomProjection;
    } else {
      throw ValidationError("features.kind: unknown extractor '" + kind + "'");
    }
    spec.grid_size = j.value("grid_size", spec.grid_size);
    spec.context_pixels = j.value("context_pixels", spec.context_pixels);
    spec.output_dim = j.value("output_dim", spec.output_dim);
    spec.projection_seed = j.value("projection_seed", spec.projection_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("features: ") + e.what());
  }
  validate(spec);
  return spec;
}

int HistoryVector::size() const {
  return static_cast<int>(std::count_if(slots_.begin(), slots_.end(), [](std::int8_t s) { return s != kEmpty; }));
}

std::optional<Action> HistoryVector::slot(int i) const {
  const std::int8_t s = slots_.at(static_cast<std::size_t>(i));
  if (s == kEmpty) return std::nullopt;
  return static_cast<Action>(s);
}

std::array<double, kHistoryDim> HistoryVector::encode() const {
  std::array<double, kHistoryDim> out{};
  for (int i = 0; i < kHistoryLength; ++i) {
    const std::int8_t s = slots_[static_cast<std::size_t>(i)];
    if (s != kEmpty) out[static_cast<std::size_t>(i * kNumActions + s)] = 1.0;
  }
  return out;
}

HistoryVector push_history(const HistoryVector& h, Action a) {
  HistoryVector out;
  out.slots_[0] = static_cast<std::int8_t>(to_index(a));
  std::copy(h.slots_.begin(), h.slots_.end() - 1, out.slots_.begin() + 1);
  return out;
}

std::vector<Action> decode_history(std::span<const double> encoded) {
  if (encoded.size() != kHistoryDim) throw ContractError("decode_history: expected 90 entries");
  std::vector<Action> out;
  for (int i = 0; i < kHistoryLength; ++i) {
    int hot = -1;
    for (int a = 0; a < kNumActions; ++a) {
      const double v = encoded[static_cast<std::size_t>(i * kNumActions + a)];
      if (v == 0.0) continue;
      if (v != 1.0 || hot >= 0) throw ContractError("decode_history: slot is not one-hot");
      hot = a;
    }
    if (hot < 0) break;
    out.push_back(static_cast<Action>(hot));
  }
  return out;
}

StateVector assemble_state(std::span<const double> o, const HistoryVector& h, int expected_observation_dim) {
  if (static_cast<int>(o.size()) != expected_observation_dim) {
    throw ContractError("assemble_state: observation has " + std::to_string(o.size()) + " entries, expected " +
                        std::to_string(expected_observation_dim));
  }
  StateVector s;
  s.observation_dim = expected_observation_dim;
  s.values.reserve(o.size() + kHistoryDim);
  s.values.assign(o.begin(), o.end());
  const auto enc = h.encode();
  s.values.insert(s.values.end(), enc.begin(), enc.end());
  return s;
}

std::vector<double> grid_pool(const Image& image, const Box& b, int grid_size, int context_pixels) {
  const double ctx = context_pixels;
  const double rx1 = std::max(0.0, b.x1 - ctx);
  const double ry1 = std::max(0.0, b.y1 - ctx);
  const double rx2 = std::min(static_cast<double>(image.width), b.x2 + ctx);
  const double ry2 = std::min(static_cast<double>(image.height), b.y2 + ctx);
  if (!(rx2 > rx1 && ry2 > ry1)) throw ContractError("extract: region is empty after clipping");

  const int f = grid_size;
  const auto nf = static_cast<std::size_t>(f);
  const double step_x = (rx2 - rx1) / f;
  const double step_y = (ry2 - ry1) / f;

  // Bilinear taps are shared by all channels.
  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [](double origin, double step, int n, int limit) {
    std::vector<Tap> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double src = origin + (i + 0.5) * step - 0.5;
      const double fl = std::floor(src);
      const int lo = static_cast<int>(fl);
      out[static_cast<std::size_t>(i)] = {std::clamp(lo, 0, limit - 1), std::clamp(lo + 1, 0, limit - 1), src - fl};
    }
    return out;
  };
  const auto tx = taps(rx1, step_x, f, image.width);
  const auto ty = taps(ry1, step_y, f, image.height);

  const int channels = image.channels;
  std::vector<double> out(nf * nf * static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    double* plane = out.data() + static_cast<std::size_t>(c) * nf * nf;
    for (std::size_t r = 0; r < nf; ++r) {
      const Tap& vy = ty[r];
      for (std::size_t q = 0; q < nf; ++q) {
        const Tap& vx = tx[q];
        const double top = (1.0 - vx.frac) * image.at(vx.lo, vy.lo, c) + vx.frac * image.at(vx.hi, vy.lo, c);
        const double bottom = (1.0 - vx.frac) * image.at(vx.lo, vy.hi, c) + vx.frac * image.at(vx.hi, vy.hi, c);
        plane[r * nf + q] = (1.0 - vy.frac) * top + vy.frac * bottom;
      }
    }
    const std::size_t n = nf * nf;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += plane[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (plane[i] - mean) * (plane[i] - mean);
    var /= static_cast<double>(n);
    if (var < 1e-12) {
      std::fill(plane, plane + n, 0.0);
    } else {
      const double inv_sd = 1.0 / std::sqrt(var);
      for (std::size_t i = 0; i < n; ++i) plane[i] = (plane[i] - mean) * inv_sd;
    }
  }
  return out;
}

FeatureExtractor::FeatureExtractor(const FeatureExtractorSpec& spec, int channels)
    : spec_(spec), channels_(channels) {
  validate(spec_);
  if (channels_ <= 0) throw ContractError("FeatureExtractor: channels must be positive");
  if (spec_.kind == ExtractorKind::kRandomProjection) {
    const std::size_t in = static_cast<std::size_t>(spec_.grid_size) * static_cast<std::size_t>(spec_.grid_size) *
                           static_cast<std::size_t>(channels_);
    const std::size_t out = static_cast<std::size_t>(spec_.output_dim);
    projection_.resize(out * in);
    Rng rng(spec_.projection_seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : projection_) w = rng.normal() * scale;
  }
}

std::vector<double> FeatureExtractor::extract(const Image& image, const Box& b) const {
  if (image.channels != channels_) throw ContractError("extract: image channel count differs from extractor");
  if (!b.valid()) throw ContractError("extract: invalid box");
  std::vector<double> raster = grid_pool(image, b, spec_.grid_size, spec_.context_pixels);
  if (spec_.kind == ExtractorKind::kGridPool) return raster;

  const std::size_t in = raster.size();
  std::vector<double> out(static_cast<std::size_t>(spec_.output_dim), 0.0);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = projection_.data() + r * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * raster[i];
    out[r] = acc;
  }
  return out;
}

StateVector observe(const FeatureExtractor& extractor, const Image& image, const Box& b, const HistoryVector& h) {
  return assemble_state(extractor.extract(image, b), h, extractor.output_dim());
}

}  // namespace locagent
