#include "locagent/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
  return box_less(a.box, b.box);
}

const std::vector<Box>& truths_of(const TruthIndex& truths, const std::string& scene) {
  static const std::vector<Box> kNone;
  const auto it = truths.find(scene);
  return it == truths.end() ? kNone : it->second;
}

}  // namespace

void rank_detections(std::vector<Detection>& dets) { std::stable_sort(dets.begin(), dets.end(), ranks_before); }

std::vector<bool> match_detections(const std::vector<Detection>& ranked, const TruthIndex& truths,
                                   double iou_thresh) {
  std::map<std::string, std::vector<bool>> used;
  std::vector<bool> flags;
  flags.reserve(ranked.size());
  for (const Detection& d : ranked) {
    const auto& gts = truths_of(truths, d.scene_id);
    auto& taken = used[d.scene_id];
    taken.resize(gts.size(), false);
    int best = -1;
    double best_iou = iou_thresh;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (taken[i]) continue;
      const double v = iou(d.box, gts[i]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(i);
        best_iou = v;
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
    flags.push_back(best >= 0);
  }
  return flags;
}

std::string_view ap_style_name(ApStyle s) { return s == ApStyle::kElevenPoint ? "11-point" : "all-points"; }

ApStyle ap_style_from_name(std::string_view name) {
  if (name == "11-point") return ApStyle::kElevenPoint;
  if (name == "all-points") return ApStyle::kAllPoints;
  throw ValidationError("unknown AP style '" + std::string(name) + "'");
}

std::vector<PrPoint> pr_points(const std::vector<bool>& flags, std::size_t total_truths) {
  if (total_truths == 0) throw ContractError("average precision needs at least one ground truth");
  std::vector<PrPoint> pts;
  pts.reserve(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) ++tp;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(total_truths),
                   static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return pts;
}

double average_precision(const std::vector<bool>& flags, std::size_t total_truths, ApStyle style) {
  const auto pts = pr_points(flags, total_truths);
  if (pts.empty()) return 0.0;

  if (style == ApStyle::kElevenPoint) {
    // Running max of precision from the tail, then probe each recall level.
    std::vector<double> best_from(pts.size() + 1, 0.0);
    for (std::size_t i = pts.size(); i-- > 0;) best_from[i] = std::max(best_from[i + 1], pts[i].precision);
    double sum = 0.0;
    std::size_t first = 0;
    for (int level = 0; level <= 10; ++level) {
      const double r = level / 10.0;
      while (first < pts.size() && pts[first].recall < r) ++first;
      sum += best_from[first];
    }
    return sum / 11.0;
  }

  // All points: area under the monotone precision envelope.
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  for (const PrPoint& p : pts) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return ap;
}

PrCurve pr_curve(const std::vector<bool>& flags, std::size_t total_truths, ApStyle style) {
  return {pr_points(flags, total_truths), average_precision(flags, total_truths, style), style};
}

std::vector<RecallAtK> recall_at_k(const std::vector<Detection>& regions, const TruthIndex& truths,
                                   const std::vector<std::size_t>& ks, double iou_thresh) {
  std::map<std::string, std::vector<Detection>> per_scene;
  for (const Detection& d : regions) per_scene[d.scene_id].push_back(d);
  for (auto& [scene, dets] : per_scene) rank_detections(dets);

  std::size_t total = 0;
  for (const auto& [scene, gts] : truths) total += gts.size();

  // Rank at which each truth is first covered; SIZE_MAX when never.
  std::vector<std::size_t> first_cover;
  for (const auto& [scene, gts] : truths) {
    const auto it = per_scene.find(scene);
    for (const Box& g : gts) {
      std::size_t rank = std::numeric_limits<std::size_t>::max();
      if (it != per_scene.end()) {
        for (std::size_t i = 0; i < it->second.size(); ++i) {
          if (iou(it->second[i].box, g) >= iou_thresh) {
            rank = i;
            break;
          }
        }
      }
      first_cover.push_back(rank);
    }
  }

  std::vector<RecallAtK> out;
  for (std::size_t k : ks) {
    const auto covered = std::count_if(first_cover.begin(), first_cover.end(), [k](std::size_t r) { return r < k; });
    out.push_back({k, total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total)});
  }
  return out;
}

double StepsStats::fraction_below(int n) const {
  if (sorted_steps.empty()) return 0.0;
  const auto below = std::lower_bound(sorted_steps.begin(), sorted_steps.end(), n) - sorted_steps.begin();
  return static_cast<double>(below) / static_cast<double>(sorted_steps.size());
}

StepsStats steps_distribution(const std::vector<Detection>& true_positives) {
  if (true_positives.empty()) throw ContractError("steps_distribution: no detections");
  StepsStats s;
  for (const Detection& d : true_positives) s.sorted_steps.push_back(d.steps_to_detection);
  std::sort(s.sorted_steps.begin(), s.sorted_steps.end());
  s.median = s.sorted_steps[(s.sorted_steps.size() - 1) / 2];
  s.mean = std::accumulate(s.sorted_steps.begin(), s.sorted_steps.end(), 0.0) /
           static_cast<double>(s.sorted_steps.size());
  for (int v : s.sorted_steps) ++s.histogram[v];
  return s;
}

std::vector<SizeBucket> size_bucket_recall(const std::vector<Detection>& ranked, const std::vector<bool>& flags,
                                           const TruthIndex& truths, const std::map<std::string, double>& image_areas,
                                           double iou_thresh) {
  std::vector<SizeBucket> buckets = {
      {"small", 0.25, 0, 0},
      {"medium", 0.45, 0, 0},
      {"large", std::numeric_limits<double>::infinity(), 0, 0},
  };
  std::map<std::string, std::vector<const Detection*>> hits;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (flags[i]) hits[ranked[i].scene_id].push_back(&ranked[i]);
  }
  for (const auto& [scene, gts] : truths) {
    const auto area_it = image_areas.find(scene);
    if (area_it == image_areas.end() || area_it->second <= 0.0) continue;
    for (const Box& g : gts) {
      const double rel = std::sqrt(g.area() / area_it->second);
      auto bucket = std::find_if(buckets.begin(), buckets.end(),
                                 [rel](const SizeBucket& b) { return rel < b.max_relative_side; });
      ++bucket->truths;
      const auto& found = hits[scene];
      if (std::any_of(found.begin(), found.end(), [&](const Detection* d) { return iou(d->box, g) >= iou_thresh; })) {
        ++bucket->found;
      }
    }
  }
  return buckets;
}

EvaluationReport evaluate(const std::vector<Trajectory>& trajectories, const TruthIndex& truths,
                          const std::map<std::string, double>& image_areas, const EvaluationOptions& opts) {
  EvaluationReport rep;
  rep.mode = opts.mode;
  for (const auto& [scene, gts] : truths) rep.num_truths += gts.size();
  if (rep.num_truths == 0) throw ValidationError("evaluate: no ground-truth objects");

  std::vector<Detection> dets;
  std::vector<Detection> all_regions;
  for (const Trajectory& t : trajectories) {
    auto d = detections_from_trajectory(t, opts.mode, opts.trigger_bonus);
    dets.insert(dets.end(), d.begin(), d.end());
    auto a = detections_from_trajectory(t, DetectionMode::kAllAttendedRegions, opts.trigger_bonus);
    all_regions.insert(all_regions.end(), a.begin(), a.end());
  }
  rank_detections(dets);
  const auto flags = match_detections(dets, truths, opts.iou_thresh);
  rep.curve = pr_curve(flags, rep.num_truths, opts.style);
  rep.num_detections = dets.size();
  rep.true_positives = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  rep.recall = static_cast<double>(rep.true_positives) / static_cast<double>(rep.num_truths);
  rep.precision = dets.empty() ? 0.0 : static_cast<double>(rep.true_positives) / static_cast<double>(dets.size());
  rep.recall_curve = recall_at_k(all_regions, truths, opts.ks, opts.iou_thresh);

  std::vector<Detection> tps;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (flags[i] && dets[i].triggered) tps.push_back(dets[i]);
  }
  if (!tps.empty()) rep.steps = steps_distribution(tps);
  rep.size_buckets = size_bucket_recall(dets, flags, truths, image_areas, opts.iou_thresh);
  return rep;
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json j = {
      {"mode", detection_mode_name(report.mode)},
      {"ap_style", ap_style_name(report.curve.style)},
      {"ap", report.curve.ap},
      {"num_truths", report.num_truths},
      {"num_detections", report.num_detections},
      {"true_positives", report.true_positives},
      {"recall", report.recall},
      {"precision", report.precision},
  };
  j["recall_at_k"] = nlohmann::json::array();
  for (const RecallAtK& r : report.recall_curve) j["recall_at_k"].push_back({{"k", r.k}, {"recall", r.recall}});
  if (report.steps) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [steps, count] : report.steps->histogram) hist[std::to_string(steps)] = count;
    j["steps_to_detection"] = {
        {"count", report.steps->sorted_steps.size()},
        {"median", report.steps->median},
        {"mean", report.steps->mean},
        {"fraction_below_50", report.steps->fraction_below(50)},
        {"histogram", hist},
    };
  } else {
    j["steps_to_detection"] = nullptr;
  }
  j["size_buckets"] = nlohmann::json::array();
  for (const SizeBucket& b : report.size_buckets) {
    j["size_buckets"].push_back({{"bucket", b.name},
                                 {"truths", b.truths},
                                 {"found", b.found},
                                 {"recall", b.truths ? static_cast<double>(b.found) / b.truths : 0.0}});
  }
  return j;
}

std::string pr_curve_csv(const PrCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,recall,precision\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    out << (i + 1) << ',' << curve.points[i].recall << ',' << curve.points[i].precision << '\n';
  }
  return out.str();
}

std::string recall_at_k_csv(const std::vector<RecallAtK>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "k,recall\n";
  for (const RecallAtK& r : curve) out << r.k << ',' << r.recall << '\n';
  return out.str();
}

}  // namespace locagent
