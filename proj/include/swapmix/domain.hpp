#pragma once

// Core value types shared by every stage of the toolkit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swapmix/error.hpp"

namespace swapmix {

/// Axis-aligned box in pixel coordinates.
struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2;
  }
  double area() const { return (x2 - x1) * (y2 - y1); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

using AttributeSet = std::set<std::string>;

struct ObjectAnnotation {
  std::string object_id;
  std::string class_label;
  AttributeSet attributes;
  BoundingBox bbox;

  friend bool operator==(const ObjectAnnotation&, const ObjectAnnotation&) = default;
};

struct Relation {
  std::string subject_id;
  std::string predicate;
  std::string object_id;

  friend bool operator==(const Relation&, const Relation&) = default;
};

struct SceneGraph {
  std::string image_id;
  double width = 0;
  double height = 0;
  std::vector<ObjectAnnotation> objects;  // sorted by object_id after parsing
  std::vector<Relation> relations;

  const ObjectAnnotation* find(std::string_view object_id) const {
    for (const auto& o : objects)
      if (o.object_id == object_id) return &o;
    return nullptr;
  }

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

/// Lists every invariant violation of `g`; empty means well-formed.
inline std::vector<std::string> validate_scene_graph(const SceneGraph& g) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& o : g.objects) {
    if (o.object_id.empty()) out.push_back("empty object_id");
    if (!seen.insert(o.object_id).second)
      out.push_back("duplicate object_id: " + o.object_id);
    if (o.class_label.empty()) out.push_back("empty class_label: " + o.object_id);
    if (!o.bbox.valid()) out.push_back("invalid bbox: " + o.object_id);
  }
  for (const auto& r : g.relations) {
    if (!seen.contains(r.subject_id))
      out.push_back("dangling relation endpoint: " + r.subject_id);
    if (!seen.contains(r.object_id))
      out.push_back("dangling relation endpoint: " + r.object_id);
  }
  return out;
}

enum class Operation {
  select,
  filter,
  relate,
  query,
  verify,
  exist,
  choose,
  logical_and,
  logical_or,
  unsupported,  // parsed but not interpretable (e.g. "same", "common")
};

inline std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::select: return "select";
    case Operation::filter: return "filter";
    case Operation::relate: return "relate";
    case Operation::query: return "query";
    case Operation::verify: return "verify";
    case Operation::exist: return "exist";
    case Operation::choose: return "choose";
    case Operation::logical_and: return "and";
    case Operation::logical_or: return "or";
    case Operation::unsupported: return "unsupported";
  }
  return "unsupported";
}

/// Maps a GQA operation name ("filter color", "verify material", "and") to
/// its core operation; the first word decides.
inline Operation parse_operation(std::string_view name) {
  const auto sp = name.find(' ');
  const std::string_view head = name.substr(0, sp);
  if (head == "select") return Operation::select;
  if (head == "filter") return Operation::filter;
  if (head == "relate") return Operation::relate;
  if (head == "query") return Operation::query;
  if (head == "verify") return Operation::verify;
  if (head == "exist") return Operation::exist;
  if (head == "choose") return Operation::choose;
  if (head == "and") return Operation::logical_and;
  if (head == "or") return Operation::logical_or;
  return Operation::unsupported;
}

/// Operations whose result is an answer string rather than an object set.
inline bool produces_answer(Operation op) {
  switch (op) {
    case Operation::query:
    case Operation::verify:
    case Operation::exist:
    case Operation::choose:
    case Operation::logical_and:
    case Operation::logical_or:
    case Operation::unsupported:
      return true;
    default:
      return false;
  }
}

struct ReasoningStep {
  int step_index = 0;
  Operation operation = Operation::select;
  std::string op_name;  // verbatim GQA name, e.g. "filter color"
  std::vector<std::string> arguments;
  std::vector<int> dependencies;
  std::vector<std::string> selected_object_ids;

  friend bool operator==(const ReasoningStep&, const ReasoningStep&) = default;
};

struct Question {
  std::string question_id;
  std::string image_id;
  std::string text;
  std::string gt_answer;
  std::vector<ReasoningStep> program;

  friend bool operator==(const Question&, const Question&) = default;
};

struct DetectedObject {
  std::size_t detection_index = 0;
  BoundingBox bbox;
  std::optional<std::string> predicted_class;

  friend bool operator==(const DetectedObject&, const DetectedObject&) = default;
};

/// Dense n x d matrix of finite 32-bit floats, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows_ < 1 || cols_ < 1)
      throw Error(ErrorKind::InvariantViolation, "feature matrix needs n >= 1 and d >= 1");
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorKind::DimensionMismatch,
                  "feature matrix data has " + std::to_string(data_.size()) +
                      " entries, expected " + std::to_string(rows_ * cols_));
    for (float v : data_)
      if (!std::isfinite(v))
        throw Error(ErrorKind::InvariantViolation, "feature matrix entry is not finite");
  }

  static FeatureMatrix from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw Error(ErrorKind::InvariantViolation, "feature matrix needs n >= 1");
    const std::size_t d = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw Error(ErrorKind::DimensionMismatch, "ragged feature rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return FeatureMatrix(rows.size(), d, std::move(data));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  float at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<float>& data() const { return data_; }

  /// Bitwise equality (distinguishes -0.0 from +0.0).
  bool bitwise_equal(const FeatureMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(float)) == 0;
  }

  std::vector<float> mean_row() const {
    std::vector<double> acc(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) acc[j] += data_[i * cols_ + j];
    std::vector<float> out(cols_);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = static_cast<float>(acc[j] / rows_);
    return out;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> data_;
};

/// Per-question split of feature rows into relevant and context rows.
struct ContextSet {
  std::string question_id;
  std::vector<std::size_t> relevant_indices;
  std::vector<std::size_t> context_indices;

  friend bool operator==(const ContextSet&, const ContextSet&) = default;
};

/// (image_id, object_id) reference into the dataset.
struct ObjectRef {
  std::string image_id;
  std::string object_id;

  bool empty() const { return image_id.empty() && object_id.empty(); }
  friend auto operator<=>(const ObjectRef&, const ObjectRef&) = default;
  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

}  // namespace swapmix
