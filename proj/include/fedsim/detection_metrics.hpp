#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedsim/errors.hpp"

namespace fedsim::detection {

// Axis-aligned box in pixel coordinates; requires x_min < x_max, y_min < y_max.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }

  void validate() const {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max))
      throw ValidationError("box has a non-finite coordinate");
    if (!(x_min < x_max) || !(y_min < y_max))
      throw ValidationError("box has zero or negative extent");
  }

  bool operator==(const Box&) const = default;
};

struct DetectionRecord {
  std::string image_id;
  Box box;
  double confidence = 0.0;
  int class_id = 0;
};

struct GroundTruthBox {
  std::string image_id;
  Box box;
  int class_id = 0;
};

inline double iou(const Box& a, const Box& b) {
  a.validate();
  b.validate();
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct MatchResult {
  // Indexed like the input detections.
  std::vector<bool> true_positive;
  std::vector<int> matched_gt;  // index into the ground truths, or -1
  std::size_t unmatched_gt = 0;

  std::size_t tp_count() const {
    return static_cast<std::size_t>(std::count(true_positive.begin(), true_positive.end(), true));
  }
};

namespace detail {

inline void validate_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("IoU threshold must lie in [0, 1]");
}

inline void validate(const DetectionRecord& d) {
  d.box.validate();
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
    throw ValidationError("detection confidence outside [0, 1] for image '" + d.image_id + "'");
}

// Detection indices in descending confidence; equal confidences keep input order.
inline std::vector<std::size_t> rank_by_confidence(const std::vector<DetectionRecord>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

}  // namespace detail

// Greedy matching. Within each (image, class) group, detections are visited
// in descending confidence; each takes the unmatched ground truth with the
// highest IoU (lowest index on ties) if that IoU reaches the threshold.
inline MatchResult match_detections(const std::vector<DetectionRecord>& dets,
                                    const std::vector<GroundTruthBox>& gts,
                                    double iou_threshold = 0.5) {
  detail::validate_threshold(iou_threshold);
  for (const auto& d : dets) detail::validate(d);
  for (const auto& g : gts) g.box.validate();

  std::map<std::pair<std::string, int>, std::vector<std::size_t>> gt_groups;
  for (std::size_t j = 0; j < gts.size(); ++j)
    gt_groups[{gts[j].image_id, gts[j].class_id}].push_back(j);

  MatchResult out;
  out.true_positive.assign(dets.size(), false);
  out.matched_gt.assign(dets.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (auto i : detail::rank_by_confidence(dets)) {
    auto it = gt_groups.find({dets[i].image_id, dets[i].class_id});
    if (it == gt_groups.end()) continue;
    double best = -1.0;
    int best_j = -1;
    for (auto j : it->second) {
      if (taken[j]) continue;
      const double v = iou(dets[i].box, gts[j].box);
      if (v > best) {
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best >= iou_threshold) {
      taken[static_cast<std::size_t>(best_j)] = true;
      out.true_positive[i] = true;
      out.matched_gt[i] = best_j;
    }
  }
  out.unmatched_gt = static_cast<std::size_t>(std::count(taken.begin(), taken.end(), false));
  return out;
}

enum class Interpolation { all_point, eleven_point };

struct PrPoint {
  double confidence;
  double precision;
  double recall;
};

struct ApResult {
  double precision = 0.0;  // over all detections; 0 when there are none
  double recall = 0.0;
  double ap = 0.0;
  std::vector<PrPoint> curve;  // one point per detection, in rank order
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

// Precision, recall and average precision, treating every record as one
// class for ranking purposes (matching still respects class_id). AP is the
// area under the monotone precision envelope of the ranked PR curve.
inline ApResult precision_recall_ap(const std::vector<DetectionRecord>& dets,
                                    const std::vector<GroundTruthBox>& gts,
                                    double iou_threshold = 0.5,
                                    Interpolation interp = Interpolation::all_point) {
  if (gts.empty()) throw UndefinedMetricError("recall and AP need at least one ground truth");
  const auto match = match_detections(dets, gts, iou_threshold);

  ApResult r;
  r.num_gt = gts.size();
  r.num_det = dets.size();
  const double n_gt = static_cast<double>(gts.size());
  std::size_t tp = 0, seen = 0;
  for (auto i : detail::rank_by_confidence(dets)) {
    ++seen;
    if (match.true_positive[i]) ++tp;
    r.curve.push_back({dets[i].confidence,
                       static_cast<double>(tp) / static_cast<double>(seen),
                       static_cast<double>(tp) / n_gt});
  }
  r.tp = tp;
  r.fp = dets.size() - tp;
  r.recall = static_cast<double>(tp) / n_gt;
  r.precision = dets.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(dets.size());

  if (r.curve.empty()) return r;
  std::vector<double> envelope(r.curve.size());
  double running = 0.0;
  for (std::size_t k = r.curve.size(); k-- > 0;) {
    running = std::max(running, r.curve[k].precision);
    envelope[k] = running;
  }
  if (interp == Interpolation::all_point) {
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < r.curve.size(); ++k) {
      r.ap += (r.curve[k].recall - prev_recall) * envelope[k];
      prev_recall = r.curve[k].recall;
    }
  } else {
    for (int step = 0; step <= 10; ++step) {
      const double level = step / 10.0;
      double p = 0.0;
      for (std::size_t k = 0; k < r.curve.size(); ++k)
        if (r.curve[k].recall >= level) {
          p = envelope[k];
          break;
        }
      r.ap += p / 11.0;
    }
  }
  r.ap = std::clamp(r.ap, 0.0, 1.0);
  return r;
}

struct DetectionReport {
  double iou_threshold = 0.5;
  std::map<int, ApResult> per_class;  // classes with at least one ground truth
  double map = 0.0;                   // mean of per-class AP
  double precision = 0.0;
  double recall = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::size_t tp = 0;
};

// Per-class AP and their mean. Detections of classes without ground truth
// count against overall precision but do not enter the mean.
inline DetectionReport evaluate_detections(const std::vector<DetectionRecord>& dets,
                                           const std::vector<GroundTruthBox>& gts,
                                           double iou_threshold = 0.5,
                                           Interpolation interp = Interpolation::all_point) {
  if (gts.empty()) throw UndefinedMetricError("no ground truths to evaluate against");
  DetectionReport rep;
  rep.iou_threshold = iou_threshold;
  rep.num_gt = gts.size();
  rep.num_det = dets.size();

  std::map<int, std::vector<GroundTruthBox>> gt_by_class;
  std::map<int, std::vector<DetectionRecord>> det_by_class;
  for (const auto& g : gts) gt_by_class[g.class_id].push_back(g);
  for (const auto& d : dets) det_by_class[d.class_id].push_back(d);

  // Validates every record, including classes that never reach the per-class loop.
  rep.tp = match_detections(dets, gts, iou_threshold).tp_count();

  double sum_ap = 0.0;
  for (const auto& [cls, class_gts] : gt_by_class) {
    auto res = precision_recall_ap(det_by_class[cls], class_gts, iou_threshold, interp);
    sum_ap += res.ap;
    rep.per_class.emplace(cls, std::move(res));
  }
  rep.map = sum_ap / static_cast<double>(rep.per_class.size());
  rep.recall = static_cast<double>(rep.tp) / static_cast<double>(rep.num_gt);
  rep.precision =
      dets.empty() ? 0.0 : static_cast<double>(rep.tp) / static_cast<double>(rep.num_det);
  return rep;
}

// --- text formats -----------------------------------------------------------
//
// Ground truth:  image_id class_id x_min y_min x_max y_max
// Detections:    image_id class_id confidence x_min y_min x_max y_max
//
// Whitespace separated, one record per line. Blank lines and lines starting
// with '#' are skipped.

namespace detail {

template <typename Fn>
void for_each_record_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      std::istringstream row(line);
      fn(row);
      std::string extra;
      if (row >> extra) throw ValidationError("unexpected trailing field '" + extra + "'");
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline double read_number(std::istringstream& row, const char* what) {
  std::string tok;
  if (!(row >> tok)) throw ValidationError(std::string("missing ") + what);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != tok.size()) throw ValidationError(std::string("bad ") + what + " '" + tok + "'");
  return v;
}

inline int read_class(std::istringstream& row) {
  const double v = read_number(row, "class_id");
  if (v != std::floor(v) || v < 0 || v > 1e9) throw ValidationError("class_id must be a nonnegative integer");
  return static_cast<int>(v);
}

inline Box read_box(std::istringstream& row) {
  Box b;
  b.x_min = read_number(row, "x_min");
  b.y_min = read_number(row, "y_min");
  b.x_max = read_number(row, "x_max");
  b.y_max = read_number(row, "y_max");
  b.validate();
  return b;
}

}  // namespace detail

inline std::vector<GroundTruthBox> parse_ground_truth(const std::string& text) {
  std::vector<GroundTruthBox> out;
  detail::for_each_record_line(text, [&](std::istringstream& row) {
    GroundTruthBox g;
    if (!(row >> g.image_id)) throw ValidationError("missing image_id");
    g.class_id = detail::read_class(row);
    g.box = detail::read_box(row);
    out.push_back(std::move(g));
  });
  return out;
}

inline std::vector<DetectionRecord> parse_detections(const std::string& text) {
  std::vector<DetectionRecord> out;
  detail::for_each_record_line(text, [&](std::istringstream& row) {
    DetectionRecord d;
    if (!(row >> d.image_id)) throw ValidationError("missing image_id");
    d.class_id = detail::read_class(row);
    d.confidence = detail::read_number(row, "confidence");
    d.box = detail::read_box(row);
    detail::validate(d);
    out.push_back(std::move(d));
  });
  return out;
}

// JSON report. "ap"/"map" are at the requested threshold, "ap50"/"map50" at
// IoU 0.5; with one class ap == map.
inline nlohmann::json report_to_json(const DetectionReport& at_threshold,
                                     const DetectionReport& at_half) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& [cls, r] : at_threshold.per_class)
    classes.push_back({{"class_id", cls},
                       {"num_ground_truths", r.num_gt},
                       {"num_detections", r.num_det},
                       {"true_positives", r.tp},
                       {"false_positives", r.fp},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"ap", r.ap},
                       {"ap50", at_half.per_class.at(cls).ap}});
  return {{"iou_threshold", at_threshold.iou_threshold},
          {"num_ground_truths", at_threshold.num_gt},
          {"num_detections", at_threshold.num_det},
          {"true_positives", at_threshold.tp},
          {"false_positives", at_threshold.num_det - at_threshold.tp},
          {"precision", at_threshold.precision},
          {"recall", at_threshold.recall},
          {"ap", at_threshold.map},
          {"map", at_threshold.map},
          {"ap50", at_half.map},
          {"map50", at_half.map},
          {"per_class", classes}};
}

}  // namespace fedsim::detection
