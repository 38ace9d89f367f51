#include <gtest/gtest.h>

#include "support.hpp"
#include "swapmix/augment.hpp"
#include "swapmix/fixtures.hpp"

using namespace swapmix;
using swapmix::test::error_kind;

namespace {

struct AugmentEnv {
  Fixture fx = make_fixture();
  DatasetBundle bundle = fx.bundle();
  DetectorDonors donors{bundle};

  ContextSet context(const Question& q, ContextDefinition def = ContextDefinition::paper) const {
    const auto& ff = bundle.features.at(q.image_id);
    return identify_context(q, bundle.graph(q.image_id), bundle.matches.at(q.image_id), ff.features.rows(), def);
  }
  AugmentResult run(const Question& q, const AugmentConfig& cfg,
                    ContextDefinition def = ContextDefinition::paper) const {
    return augment_features(bundle.features.at(q.image_id).features, context(q, def), q, bundle, fx.table, cfg,
                            donors);
  }
};

bool row_equal(const FeatureMatrix& a, const FeatureMatrix& b, std::size_t r) {
  const auto d = a.cols();
  return std::equal(a.data().begin() + static_cast<std::ptrdiff_t>(r * d),
                    a.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * d),
                    b.data().begin() + static_cast<std::ptrdiff_t>(r * d));
}

}  // namespace

TEST(Augment, ZeroSwapProbabilityIsIdentity) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.p_swap = 0;
  for (const auto& q : env.bundle.questions) {
    const auto r = env.run(q, cfg);
    EXPECT_TRUE(r.features.bitwise_equal(env.bundle.features.at(q.image_id).features)) << q.question_id;
    EXPECT_TRUE(r.applied.empty());
  }
}

TEST(Augment, FullSwapProbabilityChangesEveryMatchedContextRow) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.p_swap = 1;
  cfg.p_class = 1;
  std::size_t checked = 0;
  for (const auto& q : env.bundle.questions) {
    const auto ctx = env.context(q);
    const auto& v = env.bundle.features.at(q.image_id).features;
    const auto& mt = env.bundle.matches.at(q.image_id);
    const auto r = env.run(q, cfg);
    std::set<std::size_t> expected;
    for (auto row : ctx.context_indices)
      if (mt.object_of(row)) expected.insert(row);
    ASSERT_EQ(r.applied.size(), expected.size()) << q.question_id;
    std::set<std::size_t> changed;
    for (std::size_t row = 0; row < v.rows(); ++row)
      if (!row_equal(v, r.features, row)) changed.insert(row);
    EXPECT_EQ(changed, expected) << q.question_id;
    for (const auto& c : r.applied) {
      EXPECT_EQ(c.kind, SwapKind::class_swap);
      EXPECT_NE(c.donor_class, source_annotation(env.bundle, q.image_id, c.source_detection_index)->class_label);
    }
    checked += expected.size();
  }
  EXPECT_GT(checked, 100u);
}

TEST(Augment, AttributeOnlySwapsKeepClass) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.p_swap = 1;
  cfg.p_class = 0;
  std::size_t n = 0;
  for (const auto& q : env.bundle.questions) {
    for (const auto& c : env.run(q, cfg).applied) {
      const auto src = source_annotation(env.bundle, q.image_id, c.source_detection_index);
      EXPECT_EQ(c.kind, SwapKind::attribute_swap);
      EXPECT_EQ(c.donor_class, src->class_label);
      EXPECT_NE(c.donor_attributes, src->attributes);
      ++n;
    }
  }
  EXPECT_GT(n, 0u);
}

TEST(Augment, StrictModeNeverDrawsProgramClasses) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.p_swap = 1;
  cfg.p_class = 1;
  cfg.context_def = ContextDefinition::strict;
  for (const auto& q : env.bundle.questions) {
    const auto vocab = program_vocabulary(q);
    for (const auto& c : env.run(q, cfg, ContextDefinition::strict).applied)
      EXPECT_FALSE(vocab.contains(c.donor_class)) << q.question_id << " " << c.donor_class;
  }
}

TEST(Augment, DecisionStatisticsMatchProbabilities) {
  AugmentConfig cfg;
  cfg.seed = 123;
  int swaps = 0, classes = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_augment_decision(cfg, "q" + std::to_string(i / 10), std::to_string(i % 10));
    swaps += d.swap;
    classes += d.class_swap;
  }
  EXPECT_NEAR(swaps / double(n), 0.5, 0.02);
  EXPECT_NEAR(classes / double(swaps), 0.5, 0.03);
}

TEST(Augment, DeterministicPerEpoch) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.seed = 5;
  const auto& q = env.bundle.questions.front();
  const auto a = env.run(q, cfg);
  const auto b = env.run(q, cfg);
  EXPECT_TRUE(a.features.bitwise_equal(b.features));
  EXPECT_EQ(a.applied, b.applied);

  int differing = 0;
  for (int i = 0; i < 200; ++i) {
    AugmentConfig e0 = cfg, e1 = cfg;
    e1.epoch = 1;
    const auto key = std::to_string(i);
    const auto d0 = draw_augment_decision(e0, "q", key);
    const auto d1 = draw_augment_decision(e1, "q", key);
    differing += d0.swap != d1.swap || d0.class_swap != d1.class_swap;
  }
  EXPECT_GT(differing, 50);
}

TEST(Augment, RejectsBadProbabilities) {
  AugmentEnv env;
  AugmentConfig cfg;
  cfg.p_swap = 1.5;
  EXPECT_EQ(error_kind([&] { env.run(env.bundle.questions.front(), cfg); }), ErrorKind::InvalidArgument);
  cfg.p_swap = 0.5;
  cfg.p_class = -0.1;
  EXPECT_EQ(error_kind([&] { env.run(env.bundle.questions.front(), cfg); }), ErrorKind::InvalidArgument);
}
