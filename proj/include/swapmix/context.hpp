#pragma once

// Detection-to-annotation matching and the relevant/context split.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "swapmix/domain.hpp"

namespace swapmix {

inline constexpr double kDefaultIouThreshold = 0.5;

struct MatchScore {
  std::string object_id;
  std::size_t detection_index;
  double iou;
};

struct MatchTable {
  std::string image_id;
  std::map<std::string, std::size_t> object_to_detection;
  std::map<std::size_t, std::string> detection_to_object;
  std::vector<MatchScore> scores;  // every pair with positive IoU

  std::optional<std::size_t> detection_of(const std::string& object_id) const {
    auto it = object_to_detection.find(object_id);
    if (it == object_to_detection.end()) return std::nullopt;
    return it->second;
  }
  const std::string* object_of(std::size_t detection_index) const {
    auto it = detection_to_object.find(detection_index);
    return it == detection_to_object.end() ? nullptr : &it->second;
  }
};

/// Greedy one-to-one matching in descending IoU order. Ties go to the lower
/// object_id, then the lower detection index. Pairs under the threshold stay
/// unmatched.
inline MatchTable match_detections(const SceneGraph& g, const std::vector<DetectedObject>& dets,
                                   double iou_threshold = kDefaultIouThreshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "iou threshold must lie in (0, 1]");
  MatchTable mt;
  mt.image_id = g.image_id;
  for (const auto& o : g.objects)
    for (const auto& d : dets) {
      const double v = iou(o.bbox, d.bbox);
      if (v > 0) mt.scores.push_back({o.object_id, d.detection_index, v});
    }
  std::vector<const MatchScore*> order;
  for (const auto& s : mt.scores) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const MatchScore* a, const MatchScore* b) {
    if (a->iou != b->iou) return a->iou > b->iou;
    return std::tie(a->object_id, a->detection_index) < std::tie(b->object_id, b->detection_index);
  });
  for (const MatchScore* s : order) {
    if (s->iou < iou_threshold) break;
    if (mt.object_to_detection.contains(s->object_id) ||
        mt.detection_to_object.contains(s->detection_index))
      continue;
    mt.object_to_detection[s->object_id] = s->detection_index;
    mt.detection_to_object[s->detection_index] = s->object_id;
  }
  return mt;
}

/// Ground-truth boxes as detections, row i = object i. Used for perfect-sight
/// features, where rows are annotations rather than detector outputs.
inline std::vector<DetectedObject> detections_from_annotations(const SceneGraph& g) {
  std::vector<DetectedObject> out;
  for (std::size_t i = 0; i < g.objects.size(); ++i)
    out.push_back({i, g.objects[i].bbox, g.objects[i].class_label});
  return out;
}

enum class ContextDefinition { paper, strict };

inline std::string_view to_string(ContextDefinition c) {
  return c == ContextDefinition::paper ? "paper" : "strict";
}

/// Every argument string of every step, verbatim.
inline std::set<std::string> program_vocabulary(const Question& q) {
  std::set<std::string> out;
  for (const auto& s : q.program) out.insert(s.arguments.begin(), s.arguments.end());
  return out;
}

/// Splits the n detection rows of q's image into relevant and context rows.
///
/// paper:  relevant = objects selected by any reasoning step, mapped through
///         the match table. Everything else, matched or not, is context.
/// strict: additionally relevant are matched objects whose class or any
///         attribute is named verbatim in a step argument.
inline ContextSet identify_context(const Question& q, const SceneGraph& g, const MatchTable& mt,
                                   std::size_t n, ContextDefinition mode) {
  if (mt.image_id != q.image_id || g.image_id != q.image_id)
    throw Error(ErrorKind::ImageMismatch,
                "question " + q.question_id + " is on image " + q.image_id +
                    ", match table is for " + mt.image_id);
  std::set<std::size_t> relevant;
  for (const auto& step : q.program)
    for (const auto& id : step.selected_object_ids)
      if (auto d = mt.detection_of(id)) relevant.insert(*d);
  if (mode == ContextDefinition::strict) {
    const auto vocab = program_vocabulary(q);
    for (const auto& o : g.objects) {
      auto d = mt.detection_of(o.object_id);
      if (!d) continue;
      bool named = vocab.contains(o.class_label);
      for (const auto& a : o.attributes) named = named || vocab.contains(a);
      if (named) relevant.insert(*d);
    }
  }
  ContextSet ctx;
  ctx.question_id = q.question_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant.contains(i))
      ctx.relevant_indices.push_back(i);
    else
      ctx.context_indices.push_back(i);
  }
  return ctx;
}

}  // namespace swapmix
