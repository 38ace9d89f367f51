#pragma once

// Seeded synthetic GQA-shaped datasets for tests, demos and benchmarks.
//
// Images are 640x480 with objects on a 4x3 grid of 160px cells, so ground
// truth boxes never overlap and jittered detections match their object with
// IoU well above 0.7. Answers and selected ids come from running the
// symbolic executor on the generated program, so every question is
// answerable from its scene graph.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "swapmix/bundle.hpp"
#include "swapmix/context.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/ingestion.hpp"
#include "swapmix/io.hpp"
#include "swapmix/models.hpp"
#include "swapmix/random.hpp"
#include "swapmix/smfx.hpp"

namespace swapmix {

struct FixtureOptions {
  std::uint64_t seed = 7;
  int images = 24;
  int min_objects = 5;
  int max_objects = 8;
  int questions_per_image = 6;
  std::size_t embedding_dim = 16;
  std::size_t feature_dim = 32;
  bool clustered_features = true;  // false: iid uniform rows
  double extra_detection_rate = 0.25;  // background detection with no object
  double jitter = 3.0;
};

struct Fixture {
  EmbeddingTable table{1};
  std::map<std::string, SceneGraph> graphs;
  std::vector<Question> questions;
  std::map<std::string, FeatureFile> features;

  /// Indexed bundle with features loaded and matched.
  DatasetBundle bundle(double iou_threshold = kDefaultIouThreshold) const {
    DatasetBundle b;
    b.scene_graphs = graphs;
    b.questions = questions;
    b = build_indices(std::move(b));
    b.features = features;
    match_all(b, iou_threshold);
    restrict_donors_to_features(b);
    return b;
  }
};

namespace fixture_detail {

inline const std::vector<std::vector<std::string>>& class_clusters() {
  static const std::vector<std::vector<std::string>> c = {
      {"car", "truck", "bus", "taxi", "motorcycle", "van"},
      {"tree", "bush", "plant", "flower"},
      {"chair", "table", "bench", "desk", "sofa"},
      {"man", "woman", "dog", "cat", "horse"},
      {"statue", "camera", "lamp", "sign", "pole"},
  };
  return c;
}

inline const std::vector<std::string>& colors() {
  static const std::vector<std::string> v = {"white", "black", "red",   "blue",  "green",
                                             "yellow", "silver", "tan", "brown", "gray"};
  return v;
}
inline const std::vector<std::string>& materials() {
  static const std::vector<std::string> v = {"wooden", "metal", "plastic", "glass"};
  return v;
}
inline const std::vector<std::string>& sizes() {
  static const std::vector<std::string> v = {"large", "small"};
  return v;
}

inline double gauss(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::vector<float> gauss_vector(Rng& rng, std::size_t d, double scale) {
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(scale * gauss(rng));
  return v;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

inline EmbeddingTable make_table(Rng& rng, std::size_t e) {
  EmbeddingTable t(e);
  auto add_cluster = [&](const std::vector<std::string>& words) {
    const auto center = gauss_vector(rng, e, 1.0);
    for (const auto& w : words) {
      auto v = gauss_vector(rng, e, 0.35);
      for (std::size_t i = 0; i < e; ++i) v[i] += center[i];
      t.insert(w, std::move(v));
    }
  };
  for (const auto& c : class_clusters()) add_cluster(c);
  add_cluster(colors());
  add_cluster(materials());
  add_cluster(sizes());
  return t;
}

inline std::vector<std::string> all_classes() {
  std::vector<std::string> out;
  for (const auto& c : class_clusters()) out.insert(out.end(), c.begin(), c.end());
  return out;
}

inline std::string color_of(const ObjectAnnotation& o) {
  for (const auto& a : o.attributes)
    if (std::find(colors().begin(), colors().end(), a) != colors().end()) return a;
  return {};
}

inline ReasoningStep step(std::string op, std::vector<std::string> args, std::vector<int> deps) {
  ReasoningStep s;
  s.op_name = std::move(op);
  s.operation = parse_operation(s.op_name);
  s.arguments = std::move(args);
  s.dependencies = std::move(deps);
  return s;
}

/// One templated question on g, or nullopt if the draw is not answerable.
inline std::optional<Question> draw_question(Rng& rng, int tmpl, const SceneGraph& g) {
  const auto& o = pick(rng, g.objects);
  const std::string c = o.class_label;
  const std::string col = color_of(o);
  const auto classes = all_classes();
  std::vector<ReasoningStep> p;
  std::string text;
  switch (tmpl) {
    case 0:
      p = {step("select", {c}, {}), step("query", {"color"}, {0})};
      text = "What color is the " + c + "?";
      break;
    case 1: {
      if (g.relations.empty()) return std::nullopt;
      const auto& r = pick(rng, g.relations);
      const auto* subj = g.find(r.subject_id);
      const auto* obj = g.find(r.object_id);
      p = {step("select", {obj->class_label}, {}),
           step("relate", {subj->class_label, r.predicate, "s"}, {0}),
           step("query", {"color"}, {1})};
      text = "What color is the " + subj->class_label + " " + r.predicate + " the " + obj->class_label + "?";
      break;
    }
    case 2: {
      const std::string x = rng.bernoulli(0.5) ? c : pick(rng, classes);
      p = {step("select", {x}, {}), step("exist", {}, {0})};
      text = "Is there a " + x + "?";
      break;
    }
    case 3: {
      const std::string x = rng.bernoulli(0.5) ? col : pick(rng, colors());
      p = {step("select", {c}, {}), step("filter color", {x}, {0}), step("exist", {}, {1})};
      text = "Is there a " + x + " " + c + "?";
      break;
    }
    case 4: {
      const std::string x = rng.bernoulli(0.5) ? col : pick(rng, colors());
      p = {step("select", {c}, {}), step("verify color", {x}, {0})};
      text = "Is the " + c + " " + x + "?";
      break;
    }
    case 5: {
      std::string other = pick(rng, colors());
      if (other == col) return std::nullopt;
      std::vector<std::string> opts = {col, other};
      if (rng.bernoulli(0.5)) std::swap(opts[0], opts[1]);
      p = {step("select", {c}, {}), step("choose color", opts, {0})};
      text = "Is the " + c + " " + opts[0] + " or " + opts[1] + "?";
      break;
    }
    case 6:
    case 7: {
      const std::string b = rng.bernoulli(0.5) ? pick(rng, g.objects).class_label : pick(rng, classes);
      const bool is_and = tmpl == 6;
      p = {step("select", {c}, {}), step("exist", {}, {0}), step("select", {b}, {}), step("exist", {}, {2}),
           step(is_and ? "and" : "or", {}, {1, 3})};
      text = std::string(is_and ? "Are there both " : "Is there either ") + "a " + c + (is_and ? " and " : " or ") +
             "a " + b + "?";
      break;
    }
    case 8: {
      const std::string x = rng.bernoulli(0.5) ? col : pick(rng, colors());
      p = {step("select", {c}, {}), step("filter color", {"not(" + x + ")"}, {0}), step("exist", {}, {1})};
      text = "Is there a " + c + " that is not " + x + "?";
      break;
    }
    default: {
      const std::string cat = rng.bernoulli(0.5) ? "material" : "size";
      p = {step("select", {c}, {}), step("filter color", {col}, {0}), step("query", {cat}, {1})};
      text = "What " + cat + " is the " + col + " " + c + "?";
      break;
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i].step_index = static_cast<int>(i);
  Question q;
  q.image_id = g.image_id;
  q.text = text;
  q.program = std::move(p);
  try {
    q.gt_answer = symbolic_execute(q.program, g);
    const auto sel = symbolic_selections(q.program, g);
    for (std::size_t i = 0; i < q.program.size(); ++i) q.program[i].selected_object_ids = sel[i];
  } catch (const Error&) {
    return std::nullopt;
  }
  return q;
}

inline constexpr int kTemplates = 10;

}  // namespace fixture_detail

inline Fixture make_fixture(const FixtureOptions& opt = {}) {
  using namespace fixture_detail;
  if (opt.images < 1 || opt.min_objects < 2 || opt.max_objects > 12 || opt.min_objects > opt.max_objects)
    throw Error(ErrorKind::InvalidArgument, "fixture needs images >= 1 and 2 <= min_objects <= max_objects <= 12");
  Rng rng(derive_seed(opt.seed, {"fixture"}));
  Fixture f;
  f.table = make_table(rng, opt.embedding_dim);

  const auto classes = all_classes();
  std::vector<std::string> class_cycle = classes;  // every class appears at least once
  for (std::size_t i = class_cycle.size(); i > 1; --i) std::swap(class_cycle[i - 1], class_cycle[rng.below(i)]);
  std::size_t placed = 0;
  int next_object = 1000;

  std::map<std::string, std::vector<float>> class_feature;
  for (const auto& c : classes) class_feature[c] = gauss_vector(rng, opt.feature_dim, 1.0);
  std::map<std::string, std::vector<float>> color_feature;
  for (const auto& c : colors()) color_feature[c] = gauss_vector(rng, opt.feature_dim, 0.5);

  for (int img = 0; img < opt.images; ++img) {
    char id[16];
    std::snprintf(id, sizeof(id), "img%03d", img);
    SceneGraph g;
    g.image_id = id;
    g.width = 640;
    g.height = 480;
    std::vector<int> cells(12);
    for (int i = 0; i < 12; ++i) cells[i] = i;
    for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng.below(i)]);
    const int n = opt.min_objects + static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.max_objects - opt.min_objects + 1)));
    auto cell_box = [&](int cell) {
      const double x = (cell % 4) * 160.0 + 10 + static_cast<double>(rng.below(21));
      const double y = (cell / 4) * 160.0 + 10 + static_cast<double>(rng.below(21));
      const double w = 100 + static_cast<double>(rng.below(31));
      const double h = 100 + static_cast<double>(rng.below(31));
      return BoundingBox{x, y, x + w, y + h};
    };
    for (int i = 0; i < n; ++i) {
      ObjectAnnotation o;
      o.object_id = std::to_string(next_object++);
      o.class_label = placed < class_cycle.size() ? class_cycle[placed] : pick(rng, classes);
      ++placed;
      o.attributes.insert(pick(rng, colors()));
      if (rng.bernoulli(0.5)) o.attributes.insert(pick(rng, materials()));
      if (rng.bernoulli(0.5)) o.attributes.insert(pick(rng, sizes()));
      o.bbox = cell_box(cells[static_cast<std::size_t>(i)]);
      g.objects.push_back(std::move(o));
    }
    std::sort(g.objects.begin(), g.objects.end(),
              [](const ObjectAnnotation& a, const ObjectAnnotation& b) { return a.object_id < b.object_id; });
    for (std::size_t a = 0; a < g.objects.size(); ++a)
      for (std::size_t b = 0; b < g.objects.size(); ++b) {
        if (a == b || !rng.bernoulli(0.2)) continue;
        const auto& A = g.objects[a].bbox;
        const auto& B = g.objects[b].bbox;
        std::string pred = A.x2 <= B.x1 ? "to the left of"
                           : A.x1 >= B.x2 ? "to the right of"
                           : A.y2 <= B.y1 ? "above"
                                          : "below";
        g.relations.push_back({g.objects[a].object_id, pred, g.objects[b].object_id});
      }

    // Detections: jittered object boxes in shuffled order, plus maybe one
    // background box in a free cell.
    std::vector<std::pair<BoundingBox, const ObjectAnnotation*>> dets;
    for (const auto& o : g.objects) {
      auto j = [&] { return (rng.uniform() * 2 - 1) * opt.jitter; };
      dets.push_back({BoundingBox{o.bbox.x1 + j(), o.bbox.y1 + j(), o.bbox.x2 + j(), o.bbox.y2 + j()}, &o});
    }
    if (rng.bernoulli(opt.extra_detection_rate)) dets.push_back({cell_box(cells[static_cast<std::size_t>(n)]), nullptr});
    for (std::size_t i = dets.size(); i > 1; --i) std::swap(dets[i - 1], dets[rng.below(i)]);
    std::vector<float> data;
    std::vector<BoundingBox> boxes;
    for (const auto& [box, o] : dets) {
      std::vector<float> row(opt.feature_dim);
      for (std::size_t k = 0; k < opt.feature_dim; ++k) {
        double v = opt.clustered_features ? 0.2 * gauss(rng) : rng.uniform() * 2 - 1;
        if (opt.clustered_features && o) v += class_feature[o->class_label][k] + color_feature[color_of(*o)][k];
        row[k] = static_cast<float>(v);
      }
      data.insert(data.end(), row.begin(), row.end());
      boxes.push_back(box);
    }
    f.features.emplace(g.image_id, decode_smfx(encode_smfx(FeatureMatrix(dets.size(), opt.feature_dim, std::move(data)), boxes)));
    f.graphs.emplace(g.image_id, std::move(g));
  }

  int qn = 0;
  for (const auto& [image_id, g] : f.graphs) {
    for (int t = 0; t < opt.questions_per_image; ++t) {
      const int base = (qn + t) % kTemplates;
      for (int attempt = 0; attempt < 4 * kTemplates; ++attempt) {
        auto q = draw_question(rng, (base + attempt / 4) % kTemplates, g);
        if (!q) continue;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "q%04d", static_cast<int>(f.questions.size()));
        q->question_id = qid;
        f.questions.push_back(std::move(*q));
        break;
      }
    }
    qn += opt.questions_per_image;
  }
  return f;
}

/// Small iid features with few rows per image: a single context swap moves
/// the mean feature far enough to change a nearest-neighbour answer.
inline FixtureOptions adversarial_fixture_options(std::uint64_t seed = 11) {
  FixtureOptions o;
  o.seed = seed;
  o.images = 30;
  o.min_objects = 3;
  o.max_objects = 4;
  o.questions_per_image = 4;
  o.feature_dim = 4;
  o.clustered_features = false;
  o.extra_detection_rate = 0.0;
  return o;
}

/// Writes scene_graphs.json, questions.json, embeddings.txt and
/// features/{image_id}.smfx under dir.
inline void write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  write_file_atomic(dir / "scene_graphs.json", serialize_scene_graphs(f.graphs));
  write_file_atomic(dir / "questions.json", serialize_questions(f.questions));
  write_file_atomic(dir / "embeddings.txt", serialize_embeddings(f.table));
  for (const auto& [image_id, ff] : f.features)
    write_feature_file(dir / "features" / (image_id + ".smfx"), ff.features, ff.boxes());
}

}  // namespace swapmix
