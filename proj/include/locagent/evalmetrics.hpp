#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "locagent/geometry.hpp"
#include "locagent/runner.hpp"

namespace locagent {

// Ground truth per scene id.
using TruthIndex = std::map<std::string, std::vector<Box>>;

// Descending score; equal scores ordered by (scene id, box) so rankings are
// reproducible.
void rank_detections(std::vector<Detection>& dets);

// Greedy matching over a ranked list: each detection takes the unmatched
// truth of its scene with the highest IoU, provided IoU >= iou_thresh.
// Returns one TP flag per detection.
std::vector<bool> match_detections(const std::vector<Detection>& ranked, const TruthIndex& truths,
                                   double iou_thresh = 0.5);

enum class ApStyle : std::uint8_t { kElevenPoint, kAllPoints };
std::string_view ap_style_name(ApStyle s);
ApStyle ap_style_from_name(std::string_view name);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per ranked detection
  double ap = 0.0;
  ApStyle style = ApStyle::kElevenPoint;
};

std::vector<PrPoint> pr_points(const std::vector<bool>& flags, std::size_t total_truths);

// Throws ContractError when total_truths == 0.
double average_precision(const std::vector<bool>& flags, std::size_t total_truths, ApStyle style);
PrCurve pr_curve(const std::vector<bool>& flags, std::size_t total_truths, ApStyle style);

struct RecallAtK {
  std::size_t k = 0;
  double recall = 0.0;
};

// For each k: fraction of truths covered (IoU >= iou_thresh) by any of the
// top-k regions of their own scene. `regions` need not be sorted.
std::vector<RecallAtK> recall_at_k(const std::vector<Detection>& regions, const TruthIndex& truths,
                                   const std::vector<std::size_t>& ks, double iou_thresh = 0.5);

struct StepsStats {
  std::vector<int> sorted_steps;
  int median = 0;  // lower middle for even counts
  double mean = 0.0;
  std::map<int, std::size_t> histogram;

  // Fraction of detections that needed strictly fewer than n steps.
  double fraction_below(int n) const;
};

// Throws ContractError on empty input.
StepsStats steps_distribution(const std::vector<Detection>& true_positives);

struct SizeBucket {
  std::string name;
  double max_relative_side = 0.0;  // sqrt(area / image area), exclusive upper bound
  std::size_t truths = 0;
  std::size_t found = 0;
};

// Recall split by object size; a truth counts as found when any TP detection
// of its scene overlaps it with IoU >= iou_thresh.
std::vector<SizeBucket> size_bucket_recall(const std::vector<Detection>& ranked, const std::vector<bool>& flags,
                                           const TruthIndex& truths, const std::map<std::string, double>& image_areas,
                                           double iou_thresh = 0.5);

struct EvaluationReport {
  DetectionMode mode = DetectionMode::kTerminalRegions;
  PrCurve curve;
  std::size_t num_truths = 0;
  std::size_t num_detections = 0;
  std::size_t true_positives = 0;
  double recall = 0.0;
  double precision = 0.0;
  std::vector<RecallAtK> recall_curve;
  std::optional<StepsStats> steps;
  std::vector<SizeBucket> size_buckets;
};

struct EvaluationOptions {
  DetectionMode mode = DetectionMode::kTerminalRegions;
  ApStyle style = ApStyle::kElevenPoint;
  double iou_thresh = 0.5;
  double trigger_bonus = 1e6;
  std::vector<std::size_t> ks = {0, 1, 2, 5, 10, 20, 50, 100, 200};
};

// Full evaluation of a set of trajectories against ground truth.
EvaluationReport evaluate(const std::vector<Trajectory>& trajectories, const TruthIndex& truths,
                          const std::map<std::string, double>& image_areas, const EvaluationOptions& opts);

nlohmann::json to_json(const EvaluationReport& report);
std::string pr_curve_csv(const PrCurve& curve);
std::string recall_at_k_csv(const std::vector<RecallAtK>& curve);

}  // namespace locagent
