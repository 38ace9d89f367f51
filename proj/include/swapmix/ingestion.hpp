#pragma once

// Readers and writers for GQA-shaped scene graphs and questions.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "swapmix/bundle.hpp"
#include "swapmix/domain.hpp"
#include "swapmix/io.hpp"
#include "swapmix/smfx.hpp"

namespace swapmix {

using json = nlohmann::json;

namespace detail {

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedInput, what + ": " + e.what());
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(ErrorKind::MalformedInput, where + ": missing field \"" + key + "\"");
  return obj.at(key);
}

inline double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number())
    throw Error(ErrorKind::MalformedInput, where + ": field \"" + key + "\" is not a number");
  return v.get<double>();
}

inline std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string())
    throw Error(ErrorKind::MalformedInput, where + ": field \"" + key + "\" is not a string");
  return v.get<std::string>();
}

inline json number_json(double v) {
  if (std::floor(v) == v && std::abs(v) < 9e15) return json(static_cast<std::int64_t>(v));
  return json(v);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- scene graphs

inline SceneGraph scene_graph_from_json(const std::string& image_id, const json& j) {
  const std::string where = "image " + image_id;
  SceneGraph g;
  g.image_id = image_id;
  g.width = j.contains("width") ? detail::require_number(j, "width", where) : 0.0;
  g.height = j.contains("height") ? detail::require_number(j, "height", where) : 0.0;
  const json& objects = detail::require(j, "objects", where);
  if (!objects.is_object())
    throw Error(ErrorKind::MalformedInput, where + ": \"objects\" must be an object keyed by id");
  for (const auto& [oid, o] : objects.items()) {
    const std::string ow = where + " object " + oid;
    ObjectAnnotation a;
    a.object_id = oid;
    a.class_label = detail::require_string(o, "name", ow);
    if (o.contains("attributes")) {
      if (!o.at("attributes").is_array())
        throw Error(ErrorKind::MalformedInput, ow + ": \"attributes\" must be an array");
      for (const auto& attr : o.at("attributes")) a.attributes.insert(attr.get<std::string>());
    }
    const double x = detail::require_number(o, "x", ow);
    const double y = detail::require_number(o, "y", ow);
    const double w = detail::require_number(o, "w", ow);
    const double h = detail::require_number(o, "h", ow);
    a.bbox = {x, y, x + w, y + h};
    g.objects.push_back(std::move(a));
    if (o.contains("relations")) {
      for (const auto& r : o.at("relations"))
        g.relations.push_back({oid, detail::require_string(r, "name", ow + " relation"),
                               detail::require_string(r, "object", ow + " relation")});
    }
  }
  std::sort(g.objects.begin(), g.objects.end(),
            [](const auto& a, const auto& b) { return a.object_id < b.object_id; });
  if (auto v = validate_scene_graph(g); !v.empty())
    throw Error(ErrorKind::InvariantViolation, where + ": " + v.front(), v);
  return g;
}

inline std::map<std::string, SceneGraph> parse_scene_graphs_text(const std::string& text) {
  const json root = detail::parse_json_text(text, "scene graphs");
  if (!root.is_object())
    throw Error(ErrorKind::MalformedInput, "scene graphs: top level must be an object");
  std::map<std::string, SceneGraph> out;
  for (const auto& [image_id, g] : root.items())
    out.emplace(image_id, scene_graph_from_json(image_id, g));
  return out;
}

inline std::map<std::string, SceneGraph> parse_scene_graphs(const std::filesystem::path& path) {
  return parse_scene_graphs_text(read_file(path));
}

inline json scene_graph_to_json(const SceneGraph& g) {
  json objects = json::object();
  for (const auto& o : g.objects) {
    json rels = json::array();
    for (const auto& r : g.relations)
      if (r.subject_id == o.object_id) rels.push_back({{"name", r.predicate}, {"object", r.object_id}});
    objects[o.object_id] = {
        {"name", o.class_label},
        {"attributes", json(std::vector<std::string>(o.attributes.begin(), o.attributes.end()))},
        {"x", detail::number_json(o.bbox.x1)},
        {"y", detail::number_json(o.bbox.y1)},
        {"w", detail::number_json(o.bbox.x2 - o.bbox.x1)},
        {"h", detail::number_json(o.bbox.y2 - o.bbox.y1)},
        {"relations", rels}};
  }
  return {{"width", detail::number_json(g.width)},
          {"height", detail::number_json(g.height)},
          {"objects", objects}};
}

inline std::string serialize_scene_graphs(const std::map<std::string, SceneGraph>& graphs) {
  json root = json::object();
  for (const auto& [id, g] : graphs) root[id] = scene_graph_to_json(g);
  return root.dump(1) + "\n";
}

// ------------------------------------------------------------------ questions

namespace detail {

// Splits "tree (123,456)" into ("tree", {"123", "456"}).
inline std::pair<std::string, std::vector<std::string>> split_argument_ids(const std::string& arg) {
  const auto open = arg.rfind(" (");
  if (open == std::string::npos || arg.empty() || arg.back() != ')') return {trim(arg), {}};
  std::vector<std::string> ids;
  for (auto& id : split(std::string_view(arg).substr(open + 2, arg.size() - open - 3), ','))
    if (!id.empty() && id != "-" && id != "_") ids.push_back(id);
  return {trim(arg.substr(0, open)), ids};
}

inline std::vector<std::string> split_step_arguments(Operation op, const std::string& rest) {
  switch (op) {
    case Operation::select:
      return {rest};
    case Operation::choose:
      return split(rest, '|');
    case Operation::exist:
    case Operation::logical_and:
    case Operation::logical_or:
      if (rest.empty() || rest == "?") return {};
      return {rest};
    default:
      if (rest.empty()) return {};
      return split(rest, ',');
  }
}

inline std::string join_step_arguments(const ReasoningStep& s) {
  switch (s.operation) {
    case Operation::choose:
      return join(s.arguments, "|");
    case Operation::exist:
      return s.arguments.empty() ? "?" : join(s.arguments, ",");
    default:
      return join(s.arguments, ",");
  }
}

}  // namespace detail

inline Question question_from_json(const std::string& qid, const json& j) {
  const std::string where = "question " + qid;
  Question q;
  q.question_id = qid;
  q.text = detail::require_string(j, "question", where);
  q.gt_answer = detail::require_string(j, "answer", where);
  q.image_id = detail::require_string(j, "imageId", where);
  const json& sem = detail::require(j, "semantic", where);
  if (!sem.is_array()) throw Error(ErrorKind::MalformedInput, where + ": \"semantic\" must be an array");
  if (sem.empty()) throw Error(ErrorKind::MalformedInput, where + ": empty program");
  for (std::size_t i = 0; i < sem.size(); ++i) {
    const std::string sw = where + " step " + std::to_string(i);
    const json& s = sem[i];
    ReasoningStep step;
    step.step_index = static_cast<int>(i);
    step.op_name = detail::require_string(s, "operation", sw);
    step.operation = parse_operation(step.op_name);
    const std::string raw = s.contains("argument") ? detail::require_string(s, "argument", sw) : "";
    auto [rest, ids] = detail::split_argument_ids(raw);
    step.arguments = detail::split_step_arguments(step.operation, rest);
    if (s.contains("selected")) {
      step.selected_object_ids = s.at("selected").get<std::vector<std::string>>();
    } else {
      step.selected_object_ids = std::move(ids);
    }
    if (s.contains("dependencies")) {
      for (const auto& d : s.at("dependencies")) {
        if (!d.is_number_integer())
          throw Error(ErrorKind::MalformedInput, sw + ": dependency is not an integer");
        const int dep = d.get<int>();
        if (dep < 0 || dep >= static_cast<int>(i))
          throw Error(ErrorKind::DanglingDependency,
                      sw + " depends on step " + std::to_string(dep));
        step.dependencies.push_back(dep);
      }
    }
    q.program.push_back(std::move(step));
  }
  if (!produces_answer(q.program.back().operation))
    throw Error(ErrorKind::MalformedInput,
                where + ": final step \"" + q.program.back().op_name + "\" produces no answer");
  return q;
}

/// Questions in question_id order.
inline std::vector<Question> parse_questions_text(const std::string& text) {
  const json root = detail::parse_json_text(text, "questions");
  if (!root.is_object())
    throw Error(ErrorKind::MalformedInput, "questions: top level must be an object");
  std::vector<Question> out;
  for (const auto& [qid, q] : root.items()) out.push_back(question_from_json(qid, q));
  return out;
}

inline std::vector<Question> parse_questions(const std::filesystem::path& path) {
  return parse_questions_text(read_file(path));
}

inline json question_to_json(const Question& q) {
  json sem = json::array();
  for (const auto& s : q.program)
    sem.push_back({{"operation", s.op_name},
                   {"argument", detail::join_step_arguments(s)},
                   {"dependencies", s.dependencies},
                   {"selected", s.selected_object_ids}});
  return {{"question", q.text}, {"answer", q.gt_answer}, {"imageId", q.image_id}, {"semantic", sem}};
}

inline std::string serialize_questions(const std::vector<Question>& questions) {
  json root = json::object();
  for (const auto& q : questions) root[q.question_id] = question_to_json(q);
  return root.dump(1) + "\n";
}

// --------------------------------------------------------------------- bundle

/// Cross-file checks: question images exist and selections name real objects.
inline std::vector<std::string> validate_questions(const std::vector<Question>& questions,
                                                   const std::map<std::string, SceneGraph>& graphs) {
  std::vector<std::string> out;
  for (const auto& q : questions) {
    auto it = graphs.find(q.image_id);
    if (it == graphs.end()) {
      out.push_back("question " + q.question_id + ": unknown image " + q.image_id);
      continue;
    }
    for (const auto& s : q.program)
      for (const auto& id : s.selected_object_ids)
        if (!it->second.find(id))
          out.push_back("question " + q.question_id + " step " + std::to_string(s.step_index) +
                        ": unknown object " + id);
  }
  return out;
}

inline DatasetBundle load_bundle(const std::filesystem::path& scene_graphs,
                                 const std::filesystem::path& questions) {
  DatasetBundle b;
  b.scene_graphs = parse_scene_graphs(scene_graphs);
  b.questions = parse_questions(questions);
  if (auto v = validate_questions(b.questions, b.scene_graphs); !v.empty())
    throw Error(ErrorKind::InvariantViolation, v.front(), v);
  return build_indices(std::move(b));
}

/// Loads `{image_id}.smfx` for every scene graph that has one in `dir`.
inline void load_feature_dir(DatasetBundle& bundle, const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorKind::IoError, "feature directory " + dir.string() + " does not exist");
  for (const auto& [image_id, g] : bundle.scene_graphs) {
    const auto path = dir / (image_id + ".smfx");
    if (std::filesystem::exists(path)) bundle.features.emplace(image_id, read_feature_file(path));
  }
}

}  // namespace swapmix
