#pragma once

// Swap candidate selection: k class swaps and up to k attribute swaps for
// every context object of a question.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "swapmix/bundle.hpp"
#include "swapmix/context.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/random.hpp"

namespace swapmix {

inline constexpr int kDefaultK = 10;
inline constexpr double kDefaultSimilarityThreshold = 0.5;

enum class SwapKind { class_swap, attribute_swap };

inline std::string_view to_string(SwapKind k) {
  return k == SwapKind::class_swap ? "class" : "attribute";
}

inline SwapKind parse_swap_kind(std::string_view s) {
  if (s == "class") return SwapKind::class_swap;
  if (s == "attribute") return SwapKind::attribute_swap;
  throw Error(ErrorKind::MalformedInput, "unknown swap kind '" + std::string(s) + "'");
}

/// One replacement for one context row. For perfect-sight attribute swaps
/// the donor reference is empty and donor_attributes holds the edited set.
struct SwapCandidate {
  SwapKind kind = SwapKind::class_swap;
  std::size_t source_detection_index = 0;
  ObjectRef donor;
  std::string donor_class;
  AttributeSet donor_attributes;
  bool padded = false;

  friend bool operator==(const SwapCandidate&, const SwapCandidate&) = default;
};

struct PlannedSwap {
  std::string question_id;
  int pert_id = 0;  // 1-based; 0 is the unperturbed input
  SwapCandidate candidate;

  friend bool operator==(const PlannedSwap&, const PlannedSwap&) = default;
};

struct ObjectSwaps {
  std::size_t detection_index = 0;
  std::optional<std::string> source_object_id;
  std::vector<SwapCandidate> class_swaps;
  std::vector<SwapCandidate> attribute_swaps;
};

struct SwapPlan {
  std::string question_id;
  int k = kDefaultK;
  std::uint64_t seed = 0;
  std::vector<ObjectSwaps> objects;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& o : objects) n += o.class_swaps.size() + o.attribute_swaps.size();
    return n;
  }

  /// Plan order: context objects in row order; per object the class swaps
  /// then the attribute swaps. pert_id counts from 1.
  std::vector<PlannedSwap> flatten() const {
    std::vector<PlannedSwap> out;
    int pert = 1;
    for (const auto& o : objects) {
      for (const auto& c : o.class_swaps) out.push_back({question_id, pert++, c});
      for (const auto& c : o.attribute_swaps) out.push_back({question_id, pert++, c});
    }
    return out;
  }
};

struct ClassCandidate {
  std::string label;
  std::optional<double> similarity;  // unset for padded entries
  bool padded = false;
};

namespace detail {

struct Ranked {
  std::string label;
  double sim;
};

// Descending similarity, ties lexicographic; entries under threshold dropped.
inline std::vector<Ranked> rank_by_similarity(const std::vector<float>& query,
                                              const std::set<std::string>& pool,
                                              const EmbeddingTable& table, double threshold,
                                              bool allow_fallback) {
  std::vector<Ranked> ranked;
  for (const auto& c : pool) {
    std::vector<float> v;
    try {
      v = table.lookup(c, allow_fallback);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UnknownLabel) continue;
      throw;
    }
    const double s = cosine(query, v);
    if (s >= threshold) ranked.push_back({c, s});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.label < b.label;
  });
  return ranked;
}

}  // namespace detail

/// The k classes most similar to `label`, above `threshold`, then padded to
/// exactly k with distinct random classes. `exclude` removes classes from
/// both the ranking and the padding pool. Returns fewer than k only when the
/// vocabulary itself is too small.
inline std::vector<ClassCandidate> class_candidates(const std::string& label,
                                                    const EmbeddingTable& table,
                                                    const std::set<std::string>& all_classes,
                                                    int k, double threshold, Rng& rng,
                                                    const std::set<std::string>& exclude = {},
                                                    bool allow_fallback = true) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  const auto query = table.lookup(label, allow_fallback);
  std::set<std::string> pool;
  for (const auto& c : all_classes)
    if (c != label && !exclude.contains(c)) pool.insert(c);
  auto ranked = detail::rank_by_similarity(query, pool, table, threshold, allow_fallback);
  std::vector<ClassCandidate> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < static_cast<std::size_t>(k); ++i) {
    out.push_back({ranked[i].label, ranked[i].sim, false});
    pool.erase(ranked[i].label);
  }
  if (out.size() < static_cast<std::size_t>(k)) {
    const std::vector<std::string> rest(pool.begin(), pool.end());
    for (std::size_t i : rng.sample_indices(rest.size(), k - out.size()))
      out.push_back({rest[i], std::nullopt, true});
  }
  return out;
}

/// Up to k same-class donors whose attribute set differs from the source's,
/// sampled without replacement. Returns all of them when fewer than k exist.
inline std::vector<ObjectRef> attribute_candidates(const ObjectAnnotation& source,
                                                   const DatasetBundle& bundle, int k,
                                                   std::uint64_t seed) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  std::vector<ObjectRef> pool;
  if (auto it = bundle.donors().find(source.class_label); it != bundle.donors().end())
    for (const auto& ref : it->second) {
      const ObjectAnnotation* o = bundle.object(ref);
      if (o && o->attributes != source.attributes) pool.push_back(ref);
    }
  Rng rng(seed);
  std::vector<ObjectRef> out;
  for (std::size_t i : rng.sample_indices(pool.size(), static_cast<std::size_t>(k)))
    out.push_back(pool[i]);
  return out;
}

/// Perfect-sight attribute substitutions: the top-k attributes most similar
/// to the source's canonical (lexicographically smallest) attribute.
inline std::vector<std::string> attribute_candidates_perfect(const ObjectAnnotation& source,
                                                             const EmbeddingTable& table,
                                                             const std::set<std::string>& all_attributes,
                                                             int k, double threshold,
                                                             bool allow_fallback = true) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (source.attributes.empty()) return {};
  const std::string& canonical = *source.attributes.begin();
  std::set<std::string> pool(all_attributes);
  pool.erase(canonical);
  const auto ranked = detail::rank_by_similarity(table.lookup(canonical, allow_fallback), pool,
                                                 table, threshold, allow_fallback);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < static_cast<std::size_t>(k); ++i)
    out.push_back(ranked[i].label);
  return out;
}

inline AttributeSet replace_canonical_attribute(const AttributeSet& attrs, const std::string& with) {
  AttributeSet out(attrs);
  if (!out.empty()) out.erase(out.begin());
  out.insert(with);
  return out;
}

struct PlanOptions {
  int k = kDefaultK;
  double threshold = kDefaultSimilarityThreshold;
  std::uint64_t seed = 0;
  // Attribute swaps edit the annotation (perfect sight) instead of
  // borrowing a real same-class object.
  bool perfect_attributes = false;
  // Strict context also bars donor classes named by the question program.
  ContextDefinition context_def = ContextDefinition::paper;
  bool allow_fallback = true;
};

/// Key of a context row for seed derivation: the matched object id, or
/// "#<row>" for a detection without ground truth.
inline std::string source_key(const MatchTable& mt, std::size_t row) {
  if (const std::string* id = mt.object_of(row)) return *id;
  return "#" + std::to_string(row);
}

/// The class and attributes SwapMix treats as the source of row `row`.
/// Unmatched rows use the detector's predicted class (if any) and no
/// attributes.
inline std::optional<ObjectAnnotation> source_annotation(const DatasetBundle& bundle,
                                                         const std::string& image_id,
                                                         std::size_t row) {
  const SceneGraph& g = bundle.graph(image_id);
  auto mt = bundle.matches.find(image_id);
  if (mt != bundle.matches.end())
    if (const std::string* id = mt->second.object_of(row))
      if (const ObjectAnnotation* o = g.find(*id)) return *o;
  auto ff = bundle.features.find(image_id);
  if (ff != bundle.features.end() && row < ff->second.detections.size()) {
    const auto& det = ff->second.detections[row];
    if (det.predicted_class) return ObjectAnnotation{"#" + std::to_string(row), *det.predicted_class, {}, det.bbox};
  }
  return std::nullopt;
}

inline SwapPlan build_swap_plan(const Question& q, const ContextSet& ctx, const DatasetBundle& bundle,
                                const EmbeddingTable& table, const PlanOptions& opt) {
  if (ctx.question_id != q.question_id)
    throw Error(ErrorKind::InvalidArgument, "context set belongs to " + ctx.question_id);
  auto mt_it = bundle.matches.find(q.image_id);
  if (mt_it == bundle.matches.end())
    throw Error(ErrorKind::MalformedInput, "no features matched for image " + q.image_id);
  const MatchTable& mt = mt_it->second;

  SwapPlan plan;
  plan.question_id = q.question_id;
  plan.k = opt.k;
  plan.seed = opt.seed;
  const std::set<std::string> exclude =
      opt.context_def == ContextDefinition::strict ? program_vocabulary(q) : std::set<std::string>{};
  const auto all_classes = bundle.class_vocabulary();
  const auto all_attributes = opt.perfect_attributes ? bundle.attribute_vocabulary() : std::set<std::string>{};

  for (std::size_t row : ctx.context_indices) {
    ObjectSwaps swaps;
    swaps.detection_index = row;
    if (const std::string* id = mt.object_of(row)) swaps.source_object_id = *id;
    const auto source = source_annotation(bundle, q.image_id, row);
    if (source) {
      const std::string key = source_key(mt, row);
      Rng class_rng(derive_seed(opt.seed, {q.question_id, key, "class"}));
      for (auto& cand : class_candidates(source->class_label, table, all_classes, opt.k,
                                         opt.threshold, class_rng, exclude, opt.allow_fallback)) {
        const auto& refs = bundle.donors().at(cand.label);
        const ObjectRef& donor = refs[class_rng.below(refs.size())];
        swaps.class_swaps.push_back({SwapKind::class_swap, row, donor, cand.label,
                                     bundle.object(donor)->attributes, cand.padded});
      }
      if (opt.perfect_attributes) {
        for (auto& a : attribute_candidates_perfect(*source, table, all_attributes, opt.k,
                                                    opt.threshold, opt.allow_fallback))
          swaps.attribute_swaps.push_back({SwapKind::attribute_swap, row, {}, source->class_label,
                                           replace_canonical_attribute(source->attributes, a), false});
      } else {
        const auto attr_seed = derive_seed(opt.seed, {q.question_id, key, "attribute"});
        for (auto& donor : attribute_candidates(*source, bundle, opt.k, attr_seed))
          swaps.attribute_swaps.push_back({SwapKind::attribute_swap, row, donor, source->class_label,
                                           bundle.object(donor)->attributes, false});
      }
    }
    plan.objects.push_back(std::move(swaps));
  }
  return plan;
}

// ------------------------------------------------------------- serialization

inline nlohmann::json planned_swap_to_json(const PlannedSwap& p) {
  const auto& c = p.candidate;
  return {{"question_id", p.question_id},
          {"pert_id", p.pert_id},
          {"detection_index", c.source_detection_index},
          {"kind", to_string(c.kind)},
          {"donor_image", c.donor.image_id},
          {"donor_object", c.donor.object_id},
          {"donor_class", c.donor_class},
          {"donor_attributes", std::vector<std::string>(c.donor_attributes.begin(), c.donor_attributes.end())},
          {"padded", c.padded}};
}

inline PlannedSwap planned_swap_from_json(const nlohmann::json& j) {
  try {
    PlannedSwap p;
    p.question_id = j.at("question_id").get<std::string>();
    p.pert_id = j.at("pert_id").get<int>();
    auto& c = p.candidate;
    c.source_detection_index = j.at("detection_index").get<std::size_t>();
    c.kind = parse_swap_kind(j.at("kind").get<std::string>());
    c.donor = {j.at("donor_image").get<std::string>(), j.at("donor_object").get<std::string>()};
    c.donor_class = j.at("donor_class").get<std::string>();
    for (const auto& a : j.at("donor_attributes")) c.donor_attributes.insert(a.get<std::string>());
    c.padded = j.at("padded").get<bool>();
    if (p.pert_id < 1) throw Error(ErrorKind::MalformedInput, "pert_id must be >= 1");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("plan line: ") + e.what());
  }
}

/// JSON Lines, one candidate per line, keys sorted.
inline std::string plans_to_jsonl(const std::vector<SwapPlan>& plans) {
  std::string out;
  for (const auto& plan : plans)
    for (const auto& p : plan.flatten()) out += planned_swap_to_json(p).dump() + "\n";
  return out;
}

/// question_id -> planned swaps in pert_id order.
using PlanTable = std::map<std::string, std::vector<PlannedSwap>>;

inline PlanTable flatten_plans(const std::vector<SwapPlan>& plans) {
  PlanTable out;
  for (const auto& plan : plans) out[plan.question_id] = plan.flatten();
  return out;
}

inline PlanTable parse_plans_jsonl(const std::string& text) {
  PlanTable out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::MalformedInput, std::string("plan line: ") + e.what());
    }
    auto p = planned_swap_from_json(j);
    out[p.question_id].push_back(std::move(p));
  }
  for (auto& [qid, swaps] : out)
    std::sort(swaps.begin(), swaps.end(),
              [](const PlannedSwap& a, const PlannedSwap& b) { return a.pert_id < b.pert_id; });
  return out;
}

}  // namespace swapmix
