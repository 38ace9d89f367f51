#pragma once

// Training-time augmentation: every context object is swapped with
// probability p_swap; a swap is a class swap with probability p_class and an
// attribute swap otherwise. Several objects may change at once.

#include <string>
#include <vector>

#include "swapmix/perturb.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

struct AugmentConfig {
  double p_swap = 0.5;
  double p_class = 0.5;
  int k = kDefaultK;  // size of the class pool a class swap draws from
  double threshold = kDefaultSimilarityThreshold;
  std::uint64_t seed = 0;
  int epoch = 0;
  bool perfect_attributes = false;
  ContextDefinition context_def = ContextDefinition::paper;
  bool allow_fallback = true;

  void validate() const {
    if (!(p_swap >= 0 && p_swap <= 1) || !(p_class >= 0 && p_class <= 1))
      throw Error(ErrorKind::InvalidArgument, "augmentation probabilities must lie in [0, 1]");
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  }
};

struct AugmentDecision {
  bool swap = false;
  bool class_swap = false;
};

/// The two Bernoulli draws for one (epoch, question, object).
inline AugmentDecision draw_augment_decision(const AugmentConfig& cfg, const std::string& question_id,
                                             const std::string& object_key) {
  Rng rng(derive_seed(cfg.seed, {"augment", std::to_string(cfg.epoch), question_id, object_key, "decision"}));
  AugmentDecision d;
  d.swap = rng.bernoulli(cfg.p_swap);
  const bool cls = rng.bernoulli(cfg.p_class);
  d.class_swap = d.swap && cls;
  return d;
}

struct AugmentResult {
  FeatureMatrix features;
  std::vector<SwapCandidate> applied;
};

inline AugmentResult augment_features(const FeatureMatrix& v, const ContextSet& ctx, const Question& q,
                                      const DatasetBundle& bundle, const EmbeddingTable& table,
                                      const AugmentConfig& cfg, const DonorFeatures& donors) {
  cfg.validate();
  if (ctx.question_id != q.question_id)
    throw Error(ErrorKind::InvalidArgument, "context set belongs to " + ctx.question_id);
  const MatchTable& mt = bundle.matches.at(q.image_id);
  const std::set<std::string> exclude =
      cfg.context_def == ContextDefinition::strict ? program_vocabulary(q) : std::set<std::string>{};
  const auto all_classes = bundle.class_vocabulary();

  std::vector<float> data = v.data();
  std::vector<SwapCandidate> applied;
  for (std::size_t row : ctx.context_indices) {
    if (row >= v.rows()) throw Error(ErrorKind::IndexOutOfRange, "context row " + std::to_string(row));
    const std::string key = source_key(mt, row);
    const AugmentDecision d = draw_augment_decision(cfg, q.question_id, key);
    if (!d.swap) continue;
    const auto source = source_annotation(bundle, q.image_id, row);
    if (!source) continue;
    Rng rng(derive_seed(cfg.seed, {"augment", std::to_string(cfg.epoch), q.question_id, key, "select"}));
    std::optional<SwapCandidate> cand;
    if (d.class_swap) {
      auto pool = class_candidates(source->class_label, table, all_classes, cfg.k, cfg.threshold, rng, exclude,
                                   cfg.allow_fallback);
      if (!pool.empty()) {
        const auto& pick = pool[rng.below(pool.size())];
        const auto& refs = bundle.donors().at(pick.label);
        const ObjectRef& donor = refs[rng.below(refs.size())];
        cand = SwapCandidate{SwapKind::class_swap, row, donor, pick.label, bundle.object(donor)->attributes, pick.padded};
      }
    } else if (cfg.perfect_attributes) {
      const auto pool = attribute_candidates_perfect(*source, table, bundle.attribute_vocabulary(), cfg.k,
                                                     cfg.threshold, cfg.allow_fallback);
      if (!pool.empty())
        cand = SwapCandidate{SwapKind::attribute_swap, row, {}, source->class_label,
                             replace_canonical_attribute(source->attributes, pool[rng.below(pool.size())]), false};
    } else {
      const auto pool = attribute_candidates(*source, bundle, 1, rng.next());
      if (!pool.empty())
        cand = SwapCandidate{SwapKind::attribute_swap, row, pool.front(), source->class_label,
                             bundle.object(pool.front())->attributes, false};
    }
    if (!cand) continue;
    auto feat = donors.feature_for(*cand, q.image_id);
    if (!feat || feat->size() != v.cols()) continue;
    std::copy(feat->begin(), feat->end(), data.begin() + static_cast<std::ptrdiff_t>(row * v.cols()));
    applied.push_back(std::move(*cand));
  }
  return {FeatureMatrix(v.rows(), v.cols(), std::move(data)), std::move(applied)};
}

}  // namespace swapmix
