#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "locagent/geometry.hpp"
#include "locagent/image.hpp"

namespace locagent {

enum class ExtractorKind : std::uint8_t { kGridPool, kRandomProjection };

std::string_view extractor_kind_name(ExtractorKind k);

struct FeatureExtractorSpec {
  ExtractorKind kind = ExtractorKind::kGridPool;
  int grid_size = 24;
  int context_pixels = 16;
  int output_dim = 0;  // random-projection only
  std::uint64_t projection_seed = 0;

  // Length of o for an image with the given channel count.
  int observation_dim(int channels) const;

  friend bool operator==(const FeatureExtractorSpec&, const FeatureExtractorSpec&) = default;
};

void validate(const FeatureExtractorSpec& spec);
nlohmann::json to_json(const FeatureExtractorSpec& spec);
FeatureExtractorSpec extractor_spec_from_json(const nlohmann::json& j);

inline constexpr int kHistoryLength = 10;
inline constexpr int kHistoryDim = kHistoryLength * kNumActions;

// Last ten actions, most recent first. Encodes to 10 one-hot groups of 9.
class HistoryVector {
 public:
  HistoryVector() { slots_.fill(kEmpty); }

  // Number of filled slots.
  int size() const;
  std::optional<Action> slot(int i) const;
  std::array<double, kHistoryDim> encode() const;

  friend HistoryVector push_history(const HistoryVector& h, Action a);
  friend bool operator==(const HistoryVector&, const HistoryVector&) = default;

 private:
  static constexpr std::int8_t kEmpty = -1;
  std::array<std::int8_t, kHistoryLength> slots_;
};

HistoryVector push_history(const HistoryVector& h, Action a);

// Decodes the 90 history entries back into actions, most recent first.
// Throws ContractError on an invalid encoding.
std::vector<Action> decode_history(std::span<const double> encoded);

// Concatenation [o || h].
struct StateVector {
  std::vector<double> values;
  int observation_dim = 0;

  std::span<const double> observation() const {
    return std::span(values).first(static_cast<std::size_t>(observation_dim));
  }
  std::span<const double> history() const {
    return std::span(values).subspan(static_cast<std::size_t>(observation_dim));
  }
  std::size_t size() const { return values.size(); }
};

// Throws ContractError when o does not have expected_observation_dim entries.
StateVector assemble_state(std::span<const double> o, const HistoryVector& h, int expected_observation_dim);

// Deterministic region descriptor: context expansion, bilinear warp to a
// grid_size x grid_size raster, per-channel standardisation, and an optional
// fixed random projection.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureExtractorSpec& spec, int channels);

  const FeatureExtractorSpec& spec() const { return spec_; }
  int channels() const { return channels_; }
  int output_dim() const { return spec_.observation_dim(channels_); }

  std::vector<double> extract(const Image& image, const Box& b) const;

 private:
  FeatureExtractorSpec spec_;
  int channels_;
  std::vector<double> projection_;  // output_dim x (grid^2 * channels), row-major
};

// Extracts o for the box and appends the encoded history.
StateVector observe(const FeatureExtractor& extractor, const Image& image, const Box& b, const HistoryVector& h);

// Warped, standardised raster (channel-major, then row-major) before any
// projection. Exposed for tests.
std::vector<double> grid_pool(const Image& image, const Box& b, int grid_size, int context_pixels);

}  // namespace locagent
