#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swapmix/context.hpp"
#include "swapmix/domain.hpp"
#include "swapmix/smfx.hpp"

namespace swapmix {

/// class label -> every (image_id, object_id) of that class, sorted.
using ClassIndex = std::map<std::string, std::vector<ObjectRef>>;

struct DatasetBundle {
  std::map<std::string, SceneGraph> scene_graphs;
  std::vector<Question> questions;
  std::map<std::string, FeatureFile> features;
  std::map<std::string, MatchTable> matches;

  ClassIndex class_index;
  std::map<std::string, std::vector<AttributeSet>> attribute_index;
  // Subset of class_index whose objects own a feature row; set when donors
  // must come from loaded feature files.
  std::optional<ClassIndex> donor_index;

  const ClassIndex& donors() const { return donor_index ? *donor_index : class_index; }

  const SceneGraph& graph(const std::string& image_id) const {
    auto it = scene_graphs.find(image_id);
    if (it == scene_graphs.end())
      throw Error(ErrorKind::MalformedInput, "unknown image " + image_id);
    return it->second;
  }

  const ObjectAnnotation* object(const ObjectRef& ref) const {
    auto it = scene_graphs.find(ref.image_id);
    return it == scene_graphs.end() ? nullptr : it->second.find(ref.object_id);
  }

  std::set<std::string> class_vocabulary() const {
    std::set<std::string> out;
    for (const auto& [label, refs] : donors())
      if (!refs.empty()) out.insert(label);
    return out;
  }

  std::set<std::string> attribute_vocabulary() const {
    std::set<std::string> out;
    for (const auto& [label, sets] : attribute_index)
      for (const auto& s : sets) out.insert(s.begin(), s.end());
    return out;
  }
};

/// Populates class_index and attribute_index. Orderings are canonical: refs
/// sorted by (image_id, object_id), attribute sets in lexicographic order.
inline DatasetBundle build_indices(DatasetBundle bundle) {
  bundle.class_index.clear();
  bundle.attribute_index.clear();
  std::map<std::string, std::set<AttributeSet>> attrs;
  for (const auto& [image_id, g] : bundle.scene_graphs)
    for (const auto& o : g.objects) {
      bundle.class_index[o.class_label].push_back({image_id, o.object_id});
      attrs[o.class_label].insert(o.attributes);
    }
  for (auto& [label, refs] : bundle.class_index) std::sort(refs.begin(), refs.end());
  for (auto& [label, sets] : attrs)
    bundle.attribute_index[label] = std::vector<AttributeSet>(sets.begin(), sets.end());
  return bundle;
}

/// Matches every loaded feature file against its scene graph.
inline void match_all(DatasetBundle& bundle, double iou_threshold) {
  bundle.matches.clear();
  for (const auto& [image_id, ff] : bundle.features) {
    auto it = bundle.scene_graphs.find(image_id);
    if (it == bundle.scene_graphs.end()) continue;
    bundle.matches.emplace(image_id, match_detections(it->second, ff.detections, iou_threshold));
  }
}

/// Restricts donor sampling to objects with a matched feature row.
inline void restrict_donors_to_features(DatasetBundle& bundle) {
  ClassIndex idx;
  for (const auto& [label, refs] : bundle.class_index)
    for (const auto& r : refs) {
      auto mt = bundle.matches.find(r.image_id);
      if (mt != bundle.matches.end() && mt->second.detection_of(r.object_id))
        idx[label].push_back(r);
    }
  bundle.donor_index = std::move(idx);
}

}  // namespace swapmix
