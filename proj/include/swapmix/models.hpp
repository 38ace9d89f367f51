#pragma once

// Answering models: the model interface, a symbolic program executor that
// answers from annotations (perfect sight), and a deliberately
// context-sensitive nearest-neighbour baseline over mean features.

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "swapmix/context.hpp"
#include "swapmix/domain.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

/// Logged answer for a model failure; never equals a ground-truth answer.
inline const std::string kFailedAnswer = "\xE2\x9F\x82";  // U+27C2

/// Lowercase, trim, collapse internal whitespace.
inline std::string normalize_answer(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

struct AnswerLogEntry {
  std::string question_id;
  int pert_id = 0;
  std::string answer;

  friend bool operator==(const AnswerLogEntry&, const AnswerLogEntry&) = default;
};

// ------------------------------------------------------------ symbolic model

/// Attribute categories used by query/choose ("what color ...").
inline const std::map<std::string, std::set<std::string>>& attribute_categories() {
  static const std::map<std::string, std::set<std::string>> cats = {
      {"color",
       {"white", "black", "red", "blue", "green", "yellow", "orange", "brown", "gray", "grey", "pink", "purple",
        "silver", "tan", "gold", "beige", "dark", "light blue", "dark brown", "maroon", "cream colored"}},
      {"material", {"wooden", "metal", "plastic", "glass", "concrete", "brick", "leather", "stone", "wood", "steel"}},
      {"size", {"large", "small", "big", "little", "tiny", "huge", "giant"}},
      {"height", {"tall", "short"}},
      {"shape", {"round", "square", "rectangular", "triangular"}},
      {"pose", {"standing", "sitting", "walking", "lying"}},
  };
  return cats;
}

/// An annotation-level edit that mirrors a feature swap: the object takes a
/// new class and attribute set. Without an object id the edit injects a new
/// object (a swap on a detection with no ground-truth counterpart).
struct AnnotationEdit {
  std::optional<std::string> object_id;
  BoundingBox bbox;
  std::string new_class;
  AttributeSet new_attributes;
};

namespace detail {

using StepValue = std::variant<std::vector<const ObjectAnnotation*>, std::string>;

inline const std::vector<const ObjectAnnotation*>& as_objects(const StepValue& v, const ReasoningStep& s) {
  if (auto* p = std::get_if<std::vector<const ObjectAnnotation*>>(&v)) return *p;
  throw Error(ErrorKind::MalformedInput,
              "step " + std::to_string(s.step_index) + " expects an object set from its dependency");
}

inline const std::string& as_answer(const StepValue& v, const ReasoningStep& s) {
  if (auto* p = std::get_if<std::string>(&v)) return *p;
  throw Error(ErrorKind::MalformedInput,
              "step " + std::to_string(s.step_index) + " expects a yes/no answer from its dependency");
}

inline const ObjectAnnotation& single(const std::vector<const ObjectAnnotation*>& objs, const ReasoningStep& s) {
  if (objs.size() != 1)
    throw Error(ErrorKind::AmbiguousSelection, std::string(to_string(s.operation)) + " over " +
                                                   std::to_string(objs.size()) + " objects at step " +
                                                   std::to_string(s.step_index));
  return *objs.front();
}

inline std::string_view op_suffix(const ReasoningStep& s) {
  const auto sp = s.op_name.find(' ');
  return sp == std::string::npos ? std::string_view{} : std::string_view(s.op_name).substr(sp + 1);
}

inline bool class_matches(const std::string& pattern, const ObjectAnnotation& o) {
  return pattern == "_" || pattern == o.class_label;
}

inline std::string query_property(const ObjectAnnotation& o, const std::string& category, const ReasoningStep& s) {
  if (category == "name") return o.class_label;
  std::vector<std::string> hits;
  auto cat = attribute_categories().find(category);
  if (cat != attribute_categories().end()) {
    for (const auto& a : o.attributes)
      if (cat->second.contains(a)) hits.push_back(a);
  } else if (o.attributes.size() == 1) {
    hits.push_back(*o.attributes.begin());
  }
  if (hits.size() != 1)
    throw Error(ErrorKind::AmbiguousSelection, "object " + o.object_id + " has " + std::to_string(hits.size()) +
                                                   " values for '" + category + "' at step " +
                                                   std::to_string(s.step_index));
  return hits.front();
}

inline StepValue run_step(const ReasoningStep& s, const std::vector<StepValue>& done, const SceneGraph& g) {
  auto dep = [&](std::size_t i) -> const StepValue& {
    if (i >= s.dependencies.size())
      throw Error(ErrorKind::MalformedInput, "step " + std::to_string(s.step_index) + " lacks a dependency");
    return done.at(static_cast<std::size_t>(s.dependencies[i]));
  };
  auto arg = [&](std::size_t i) -> const std::string& {
    if (i >= s.arguments.size())
      throw Error(ErrorKind::MalformedInput, "step " + std::to_string(s.step_index) + " lacks an argument");
    return s.arguments[i];
  };
  const std::string_view suffix = op_suffix(s);
  switch (s.operation) {
    case Operation::select: {
      std::vector<const ObjectAnnotation*> out;
      for (const auto& o : g.objects)
        if (class_matches(arg(0), o)) out.push_back(&o);
      return out;
    }
    case Operation::filter: {
      if (s.arguments.size() != 1) throw Error(ErrorKind::UnsupportedOperation, "filter '" + s.op_name + "'");
      std::string attr = arg(0);
      bool negate = false;
      if (attr.starts_with("not(") && attr.ends_with(")")) {
        negate = true;
        attr = attr.substr(4, attr.size() - 5);
      }
      std::vector<const ObjectAnnotation*> out;
      for (const auto* o : as_objects(dep(0), s))
        if (o->attributes.contains(attr) != negate) out.push_back(o);
      return out;
    }
    case Operation::relate: {
      if (s.arguments.size() != 3) throw Error(ErrorKind::UnsupportedOperation, "relate arguments");
      const std::string& target = arg(0);
      const std::string& predicate = arg(1);
      const std::string& direction = arg(2);
      if (direction != "s" && direction != "o")
        throw Error(ErrorKind::UnsupportedOperation, "relate direction '" + direction + "'");
      std::set<std::string> anchors;
      for (const auto* o : as_objects(dep(0), s)) anchors.insert(o->object_id);
      std::set<std::string> hits;
      for (const auto& r : g.relations) {
        if (r.predicate != predicate) continue;
        // "s": the new object is the subject (new -pred-> anchor).
        if (direction == "s" && anchors.contains(r.object_id)) hits.insert(r.subject_id);
        if (direction == "o" && anchors.contains(r.subject_id)) hits.insert(r.object_id);
      }
      std::vector<const ObjectAnnotation*> out;
      for (const auto& o : g.objects)
        if (hits.contains(o.object_id) && class_matches(target, o)) out.push_back(&o);
      return out;
    }
    case Operation::query:
      return query_property(single(as_objects(dep(0), s), s), arg(0), s);
    case Operation::verify: {
      if (s.arguments.size() != 1 || suffix == "rel")
        throw Error(ErrorKind::UnsupportedOperation, "verify '" + s.op_name + "'");
      const auto& o = single(as_objects(dep(0), s), s);
      return std::string(o.attributes.contains(arg(0)) || o.class_label == arg(0) ? "yes" : "no");
    }
    case Operation::exist:
      return std::string(as_objects(dep(0), s).empty() ? "no" : "yes");
    case Operation::choose: {
      if (s.arguments.size() != 2 || suffix == "rel")
        throw Error(ErrorKind::UnsupportedOperation, "choose '" + s.op_name + "'");
      const auto& o = single(as_objects(dep(0), s), s);
      auto has = [&](const std::string& v) { return o.class_label == v || o.attributes.contains(v); };
      const bool a = has(arg(0)), b = has(arg(1));
      if (a == b)
        throw Error(ErrorKind::AmbiguousSelection, "object " + o.object_id + " matches " +
                                                       (a ? "both" : "neither") + " choices at step " +
                                                       std::to_string(s.step_index));
      return a ? arg(0) : arg(1);
    }
    case Operation::logical_and:
    case Operation::logical_or: {
      const bool l = as_answer(dep(0), s) == "yes";
      const bool r = as_answer(dep(1), s) == "yes";
      const bool v = s.operation == Operation::logical_and ? (l && r) : (l || r);
      return std::string(v ? "yes" : "no");
    }
    case Operation::unsupported:
      break;
  }
  throw Error(ErrorKind::UnsupportedOperation, "operation '" + s.op_name + "'");
}

/// Every object set produced by the select/filter/relate steps, per step.
inline std::vector<StepValue> run_program(const std::vector<ReasoningStep>& program, const SceneGraph& g) {
  std::vector<StepValue> done;
  done.reserve(program.size());
  for (const auto& s : program) done.push_back(run_step(s, done, g));
  return done;
}

}  // namespace detail

/// Interprets the reasoning program literally on the scene graph.
inline std::string symbolic_execute(const std::vector<ReasoningStep>& program, const SceneGraph& g) {
  if (program.empty()) throw Error(ErrorKind::MalformedInput, "empty program");
  auto values = detail::run_program(program, g);
  return normalize_answer(detail::as_answer(values.back(), program.back()));
}

/// Object ids selected after each step (empty for answer-producing steps
/// other than those reading one set).
inline std::vector<std::vector<std::string>> symbolic_selections(const std::vector<ReasoningStep>& program,
                                                                 const SceneGraph& g) {
  auto values = detail::run_program(program, g);
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < program.size(); ++i) {
    std::vector<std::string> ids;
    const auto* objs = std::get_if<std::vector<const ObjectAnnotation*>>(&values[i]);
    if (!objs && !program[i].dependencies.empty())
      objs = std::get_if<std::vector<const ObjectAnnotation*>>(&values[static_cast<std::size_t>(program[i].dependencies[0])]);
    if (objs && program[i].operation != Operation::logical_and && program[i].operation != Operation::logical_or)
      for (const auto* o : *objs) ids.push_back(o->object_id);
    out.push_back(std::move(ids));
  }
  return out;
}

inline SceneGraph apply_edits(SceneGraph g, const std::vector<AnnotationEdit>& edits) {
  int injected = 0;
  for (const auto& e : edits) {
    if (e.object_id) {
      auto it = std::find_if(g.objects.begin(), g.objects.end(),
                             [&](const ObjectAnnotation& o) { return o.object_id == *e.object_id; });
      if (it == g.objects.end())
        throw Error(ErrorKind::InvalidArgument, "edit references unknown object " + *e.object_id);
      it->class_label = e.new_class;
      it->attributes = e.new_attributes;
    } else {
      g.objects.push_back({"__swap_" + std::to_string(injected++), e.new_class, e.new_attributes, e.bbox});
    }
  }
  return g;
}

inline std::string symbolic_execute_on_swapped(const std::vector<ReasoningStep>& program, const SceneGraph& g,
                                               const std::vector<AnnotationEdit>& edits) {
  return symbolic_execute(program, apply_edits(g, edits));
}

/// The annotation-level counterpart of a feature swap on row
/// c.source_detection_index.
inline AnnotationEdit edit_for_swap(const SwapCandidate& c, const MatchTable& mt, const std::vector<DetectedObject>& dets) {
  AnnotationEdit e;
  if (const std::string* id = mt.object_of(c.source_detection_index)) e.object_id = *id;
  if (c.source_detection_index < dets.size()) e.bbox = dets[c.source_detection_index].bbox;
  e.new_class = c.donor_class;
  e.new_attributes = c.donor_attributes;
  return e;
}

// -------------------------------------------------------------- model API

/// Everything a model may look at for one (question, perturbation) pair.
/// `swap` is null for the unperturbed input.
struct ModelInput {
  const FeatureMatrix& features;
  const std::vector<DetectedObject>& detections;
  const Question& question;
  const SceneGraph& graph;
  const MatchTable& matches;
  const SwapCandidate* swap = nullptr;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  virtual std::string answer(const ModelInput& in) const = 0;
};

/// Normalized answer, or kFailedAnswer if the model throws.
inline std::string model_answer(const Model& model, const ModelInput& in) {
  try {
    return normalize_answer(model.answer(in));
  } catch (const std::exception&) {
    return kFailedAnswer;
  }
}

/// Answers from the annotations, with the swap mirrored as an annotation edit.
class SymbolicModel : public Model {
 public:
  std::string name() const override { return "symbolic"; }
  std::string answer(const ModelInput& in) const override {
    if (!in.swap) return symbolic_execute(in.question.program, in.graph);
    return symbolic_execute_on_swapped(in.question.program, in.graph,
                                       {edit_for_swap(*in.swap, in.matches, in.detections)});
  }
};

/// Question key used by the baseline: final operation name plus arguments.
inline std::string question_key(const Question& q) {
  const auto& s = q.program.back();
  std::string key = s.op_name;
  for (const auto& a : s.arguments) key += "|" + a;
  return key;
}

/// Memorizes (question key, mean feature, answer) triples and answers with
/// the cosine-nearest stored example that shares the key. Because it looks
/// at the mean of every row, swapping any single row can move its answer.
class BaselineModel : public Model {
 public:
  struct Example {
    std::string key;
    std::vector<float> mean_feature;
    std::string answer;
  };

  void add_example(const Question& q, const FeatureMatrix& v) {
    examples_.push_back({question_key(q), v.mean_row(), normalize_answer(q.gt_answer)});
    ++answer_counts_[examples_.back().answer];
  }

  const std::vector<Example>& examples() const { return examples_; }

  /// Most frequent training answer; ties lexicographic.
  std::string majority_answer() const {
    std::string best;
    std::size_t n = 0;
    for (const auto& [a, c] : answer_counts_)
      if (c > n) best = a, n = c;
    return best;
  }

  std::string answer_for(const Question& q, const FeatureMatrix& v) const {
    const std::string key = question_key(q);
    const auto mean = v.mean_row();
    const Example* best = nullptr;
    double best_sim = -2.0;
    for (const auto& e : examples_) {
      if (e.key != key) continue;
      const double s = cosine(mean, e.mean_feature);
      if (s > best_sim) best_sim = s, best = &e;  // first example wins ties
    }
    return best ? best->answer : majority_answer();
  }

  std::string name() const override { return "baseline"; }
  std::string answer(const ModelInput& in) const override { return answer_for(in.question, in.features); }

 private:
  std::vector<Example> examples_;
  std::map<std::string, std::size_t> answer_counts_;
};

}  // namespace swapmix
