#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "swapmix/perturb.hpp"

using namespace swapmix;
using swapmix::test::error_kind;

namespace {

FeatureMatrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<float> v(n * d);
  for (auto& x : v) x = static_cast<float>(rng.uniform() * 20 - 10);
  return FeatureMatrix(n, d, v);
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Two images: "a" with five objects (rows follow object order), "b" with
// one bus that has no feature file.
DatasetBundle two_image_bundle() {
  DatasetBundle b;
  SceneGraph a;
  a.image_id = "a";
  a.width = a.height = 100;
  for (int i = 0; i < 5; ++i)
    a.objects.push_back({std::to_string(i), i < 3 ? "bus" : "car", {i == 0 ? "red" : "blue"}, {i * 10.0, 0, i * 10.0 + 5, 5}});
  SceneGraph g2;
  g2.image_id = "b";
  g2.objects.push_back({"9", "bus", {"green"}, {0, 0, 5, 5}});
  b.scene_graphs = {{"a", a}, {"b", g2}};
  b = build_indices(std::move(b));
  std::vector<float> data;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) data.push_back(static_cast<float>(i * 10 + j));
  b.features.emplace("a", FeatureFile{FeatureMatrix(5, 3, data), detections_from_annotations(a)});
  match_all(b, 0.5);
  return b;
}

std::vector<PlannedSwap> seven_swaps(bool one_unmatched) {
  std::vector<PlannedSwap> out;
  for (int p = 1; p <= 7; ++p) {
    SwapCandidate c;
    c.kind = p <= 4 ? SwapKind::class_swap : SwapKind::attribute_swap;
    c.source_detection_index = static_cast<std::size_t>(p % 2);
    c.donor = {"a", std::to_string(2 + p % 3)};
    c.donor_class = "x";
    if (one_unmatched && p == 5) c.donor = {"b", "9"};
    out.push_back({"q", p, c});
  }
  return out;
}

}  // namespace

TEST(ApplySwap, ReplacesOneRow) {
  const auto v = FeatureMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<float> donor{9, 9};
  const auto out = apply_swap(v, 1, donor);
  EXPECT_TRUE(out.bitwise_equal(FeatureMatrix::from_rows({{1, 2}, {9, 9}, {5, 6}})));
}

TEST(ApplySwap, OwnRowIsIdentity) {
  Rng rng(1);
  const auto v = random_matrix(rng, 4, 5);
  for (std::size_t j = 0; j < 4; ++j) {
    auto r = v.row(j);
    EXPECT_TRUE(apply_swap(v, j, std::vector<float>(r.begin(), r.end())).bitwise_equal(v));
  }
}

TEST(ApplySwap, HadamardFormEqualsDirectReplacement) {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_matrix(rng, 6, 4);
    const std::size_t j = rng.below(6);
    std::vector<float> donor(4);
    for (auto& x : donor) x = static_cast<float>(rng.uniform() * 20 - 10);
    const auto out = apply_swap(v, j, donor);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_TRUE(same_bits(out.at(i, c), i == j ? donor[c] : v.at(i, c)));
  }
}

TEST(ApplySwap, Errors) {
  const auto v = FeatureMatrix::from_rows({{1, 2}});
  EXPECT_EQ(error_kind([&] { apply_swap(v, 1, std::vector<float>{1, 2}); }), ErrorKind::IndexOutOfRange);
  EXPECT_EQ(error_kind([&] { apply_swap(v, 0, std::vector<float>{1}); }), ErrorKind::DimensionMismatch);
}

TEST(EnumeratePerturbations, OneMatrixPerSwapEachDifferingInOneRow) {
  const auto b = two_image_bundle();
  const DetectorDonors donors(b);
  const auto& v = b.features.at("a").features;
  const auto plan = seven_swaps(false);
  const auto out = materialize_perturbations(v, "a", plan, donors);
  ASSERT_EQ(out.size(), 7u);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& rec = out[k].record;
    EXPECT_EQ(rec.pert_id, plan[k].pert_id);
    const std::size_t donor_row = *b.matches.at("a").detection_of(plan[k].candidate.donor.object_id);
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t c = 0; c < v.cols(); ++c)
        EXPECT_EQ(out[k].features.at(i, c), i == rec.detection_index ? v.at(donor_row, c) : v.at(i, c));
  }
}

TEST(EnumeratePerturbations, EmptyPlanEmitsNothing) {
  const auto b = two_image_bundle();
  int calls = 0;
  enumerate_perturbations(b.features.at("a").features, "a", {}, DetectorDonors(b),
                          [&](const PerturbationRecord&, const FeatureMatrix&) { ++calls; });
  EXPECT_EQ(calls, 0);
}

TEST(EnumeratePerturbations, UnmatchedDonorIsSkipped) {
  const auto b = two_image_bundle();
  std::vector<PerturbationSkip> skipped;
  const auto out = materialize_perturbations(b.features.at("a").features, "a", seven_swaps(true), DetectorDonors(b),
                                             &skipped);
  EXPECT_EQ(out.size(), 6u);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].pert_id, 5);
  EXPECT_EQ(skipped[0].reason.rfind("DonorUnmatched", 0), 0u);
}

TEST(PerfectSightDonors, EncodeDonorAnnotationAtSourceBox) {
  auto b = two_image_bundle();
  EmbeddingTable t(3);
  t.insert("bus", {1, 0, 0});
  t.insert("car", {0, 1, 0});
  t.insert("red", {0, 0, 1});
  const Encoder enc(EncoderConfig{}, t);
  const PerfectSightDonors donors(b, enc);
  SwapCandidate c{SwapKind::class_swap, 3, {"a", "0"}, "bus", {"red"}, false};
  const auto& src = b.scene_graphs.at("a").objects[3];
  EXPECT_EQ(*donors.feature_for(c, "a"), enc.encode("bus", {"red"}, src.bbox, 100, 100));
}
