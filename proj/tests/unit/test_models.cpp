#include <gtest/gtest.h>

#include "support.hpp"
#include "swapmix/fixtures.hpp"
#include "swapmix/models.hpp"

using namespace swapmix;
using swapmix::test::error_kind;

namespace {

ReasoningStep step(int i, const std::string& op, std::vector<std::string> args, std::vector<int> deps) {
  return {i, parse_operation(op), op, std::move(args), std::move(deps), {}};
}

SceneGraph park() {
  SceneGraph g;
  g.image_id = "park";
  g.width = g.height = 100;
  g.objects = {{"1", "tree", {"green", "tall"}, {0, 0, 10, 30}},
               {"2", "statue", {"white", "stone"}, {20, 0, 30, 20}},
               {"3", "bus", {"red", "large"}, {40, 0, 80, 20}},
               {"4", "camera", {"silver", "small"}, {85, 0, 90, 5}},
               {"5", "bench", {"brown", "wooden"}, {0, 50, 20, 60}}};
  g.relations = {{"2", "in front of", "1"}, {"5", "near", "2"}};
  return g;
}

std::vector<ReasoningStep> statue_color() {
  return {step(0, "select", {"tree"}, {}), step(1, "relate", {"statue", "in front of", "s"}, {0}),
          step(2, "query", {"color"}, {1})};
}

std::vector<ReasoningStep> exist_car() { return {step(0, "select", {"car"}, {}), step(1, "exist", {}, {0})}; }

class Throwing : public Model {
 public:
  std::string name() const override { return "throwing"; }
  std::string answer(const ModelInput&) const override { throw Error(ErrorKind::MalformedInput, "boom"); }
};

}  // namespace

TEST(NormalizeAnswer, LowercaseTrimCollapse) {
  EXPECT_EQ(normalize_answer("  Light   Blue \n"), "light blue");
  EXPECT_EQ(normalize_answer("YES"), "yes");
  EXPECT_EQ(normalize_answer(""), "");
}

TEST(SymbolicExecute, StatueInFrontOfTreesIsWhite) { EXPECT_EQ(symbolic_execute(statue_color(), park()), "white"); }

TEST(SymbolicExecute, ExistCarWithoutCarIsNo) { EXPECT_EQ(symbolic_execute(exist_car(), park()), "no"); }

TEST(SymbolicExecute, ChooseSilverOrTan) {
  const std::vector<ReasoningStep> p{step(0, "select", {"camera"}, {}), step(1, "choose color", {"silver", "tan"}, {0})};
  EXPECT_EQ(symbolic_execute(p, park()), "silver");
  const std::vector<ReasoningStep> q{step(0, "select", {"camera"}, {}), step(1, "choose color", {"tan", "silver"}, {0})};
  EXPECT_EQ(symbolic_execute(q, park()), "silver");
}

TEST(SymbolicExecute, FilterVerifyQueryAndLogic) {
  const auto g = park();
  EXPECT_EQ(symbolic_execute({step(0, "select", {"bus"}, {}), step(1, "filter color", {"red"}, {0}),
                              step(2, "exist", {}, {1})},
                             g),
            "yes");
  EXPECT_EQ(symbolic_execute({step(0, "select", {"bus"}, {}), step(1, "filter color", {"not(red)"}, {0}),
                              step(2, "exist", {}, {1})},
                             g),
            "no");
  EXPECT_EQ(symbolic_execute({step(0, "select", {"bench"}, {}), step(1, "verify color", {"brown"}, {0})}, g), "yes");
  EXPECT_EQ(symbolic_execute({step(0, "select", {"bench"}, {}), step(1, "query", {"material"}, {0})}, g), "wooden");
  EXPECT_EQ(symbolic_execute({step(0, "select", {"bench"}, {}), step(1, "query", {"name"}, {0})}, g), "bench");
  // "o": the new object is the relation's object (statue -in front of-> tree).
  EXPECT_EQ(symbolic_execute({step(0, "select", {"statue"}, {}), step(1, "relate", {"tree", "in front of", "o"}, {0}),
                              step(2, "query", {"height"}, {1})},
                             g),
            "tall");
  const std::vector<ReasoningStep> both{step(0, "select", {"bus"}, {}), step(1, "exist", {}, {0}),
                                        step(2, "select", {"car"}, {}), step(3, "exist", {}, {2}),
                                        step(4, "and", {}, {1, 3})};
  EXPECT_EQ(symbolic_execute(both, g), "no");
  auto either = both;
  either[4] = step(4, "or", {}, {1, 3});
  EXPECT_EQ(symbolic_execute(either, g), "yes");
}

TEST(SymbolicExecute, Errors) {
  auto g = park();
  g.objects.push_back({"6", "tree", {"green"}, {0, 70, 10, 90}});
  EXPECT_EQ(error_kind([&] { symbolic_execute({step(0, "select", {"tree"}, {}), step(1, "query", {"color"}, {0})}, g); }),
            ErrorKind::AmbiguousSelection);
  EXPECT_EQ(error_kind([&] { symbolic_execute({step(0, "select", {"tree"}, {}), step(1, "same color", {}, {0})}, g); }),
            ErrorKind::UnsupportedOperation);
  EXPECT_EQ(error_kind([&] {
              symbolic_execute({step(0, "select", {"bus"}, {}), step(1, "choose color", {"red", "large"}, {0})}, g);
            }),
            ErrorKind::AmbiguousSelection);
  EXPECT_EQ(error_kind([] { symbolic_execute({}, park()); }), ErrorKind::MalformedInput);
}

TEST(SymbolicSelections, PerStepObjectIds) {
  const auto sel = symbolic_selections(statue_color(), park());
  EXPECT_EQ(sel, (std::vector<std::vector<std::string>>{{"1"}, {"2"}, {"2"}}));
}

TEST(SymbolicSwapped, ContextSwapLeavesAnswerUnchanged) {
  // The bench is context for the statue question; make it a red car.
  const AnnotationEdit e{std::string("5"), {}, "car", {"red"}};
  EXPECT_EQ(symbolic_execute_on_swapped(statue_color(), park(), {e}), "white");
}

TEST(SymbolicSwapped, BusSwappedToCarFlipsExistence) {
  const AnnotationEdit e{std::string("3"), {}, "car", {"red"}};
  EXPECT_EQ(symbolic_execute_on_swapped(exist_car(), park(), {e}), "yes");
}

TEST(SymbolicSwapped, RelevantAttributeSwapChangesQueriedColor) {
  const AnnotationEdit e{std::string("2"), {}, "statue", {"black", "stone"}};
  EXPECT_EQ(symbolic_execute_on_swapped(statue_color(), park(), {e}), "black");
}

TEST(SymbolicSwapped, UnmatchedRowInjectsAnObject) {
  const AnnotationEdit e{std::nullopt, {50, 50, 60, 60}, "car", {"blue"}};
  EXPECT_EQ(symbolic_execute_on_swapped(exist_car(), park(), {e}), "yes");
  const AnnotationEdit bad{std::string("77"), {}, "car", {}};
  EXPECT_EQ(error_kind([&] { apply_edits(park(), {bad}); }), ErrorKind::InvalidArgument);
}

TEST(EditForSwap, MirrorsTheCandidate) {
  const auto g = park();
  const auto dets = detections_from_annotations(g);
  const auto mt = match_detections(g, dets);
  const SwapCandidate c{SwapKind::class_swap, 2, {"x", "9"}, "car", {"blue"}, false};
  const auto e = edit_for_swap(c, mt, dets);
  EXPECT_EQ(e.object_id, std::optional<std::string>("3"));
  EXPECT_EQ(e.new_class, "car");
  EXPECT_EQ(e.new_attributes, AttributeSet{"blue"});
}

TEST(ModelAnswer, FailureIsLoggedAsBottom) {
  const auto g = park();
  const auto dets = detections_from_annotations(g);
  const auto mt = match_detections(g, dets);
  const auto v = FeatureMatrix::from_rows({{1}, {2}, {3}, {4}, {5}});
  Question q{"q", "park", "?", "white", statue_color()};
  EXPECT_EQ(model_answer(Throwing{}, {v, dets, q, g, mt, nullptr}), kFailedAnswer);
  EXPECT_EQ(model_answer(SymbolicModel{}, {v, dets, q, g, mt, nullptr}), "white");
  q.program = {step(0, "select", {"tree"}, {}), step(1, "same color", {}, {0})};
  EXPECT_EQ(model_answer(SymbolicModel{}, {v, dets, q, g, mt, nullptr}), kFailedAnswer);
}

TEST(SymbolicModel, ReproducesEveryFixtureAnswer) {
  const auto fx = make_fixture();
  for (const auto& q : fx.questions) EXPECT_EQ(symbolic_execute(q.program, fx.graphs.at(q.image_id)), q.gt_answer);
}

namespace {

Question keyed(const std::string& id, const std::string& answer, const std::string& color = "color") {
  return {id, "img", "?", answer, {step(0, "select", {"car"}, {}), step(1, "query", {color}, {0})}};
}

}  // namespace

TEST(BaselineModel, IdenticalFeaturesReturnStoredAnswer) {
  BaselineModel m;
  m.add_example(keyed("a", "red"), FeatureMatrix::from_rows({{1, 0}, {1, 0}}));
  m.add_example(keyed("b", "blue"), FeatureMatrix::from_rows({{0, 1}, {0, 1}}));
  EXPECT_EQ(m.answer_for(keyed("x", "?"), FeatureMatrix::from_rows({{0, 1}, {0, 1}})), "blue");
  EXPECT_EQ(m.answer_for(keyed("x", "?"), FeatureMatrix::from_rows({{1, 0}, {1, 0}})), "red");
}

TEST(BaselineModel, MeanShiftPastMidpointFlipsAnswer) {
  // Stored means (1, 0) -> red and (0, 1) -> blue; the bisector is x = y.
  BaselineModel m;
  m.add_example(keyed("a", "red"), FeatureMatrix::from_rows({{1, 0}}));
  m.add_example(keyed("b", "blue"), FeatureMatrix::from_rows({{0, 1}}));
  const auto v = FeatureMatrix::from_rows({{1, 0}, {1, 0.2f}});  // mean (1, 0.1): red
  EXPECT_EQ(m.answer_for(keyed("x", "?"), v), "red");
  const auto swapped = FeatureMatrix::from_rows({{1, 0}, {0, 3}});  // mean (0.5, 1.5): blue
  EXPECT_EQ(m.answer_for(keyed("x", "?"), swapped), "blue");
}

TEST(BaselineModel, UnseenKeyFallsBackToMajority) {
  BaselineModel m;
  m.add_example(keyed("a", "red"), FeatureMatrix::from_rows({{1, 0}}));
  m.add_example(keyed("b", "blue"), FeatureMatrix::from_rows({{0, 1}}));
  m.add_example(keyed("c", "blue"), FeatureMatrix::from_rows({{0, 2}}));
  EXPECT_EQ(m.answer_for(keyed("x", "?", "material"), FeatureMatrix::from_rows({{1, 0}})), "blue");
}

TEST(BaselineModel, FixtureMajorityByHandCount) {
  const auto fx = make_fixture();
  BaselineModel m;
  std::map<std::string, int> counts;
  for (const auto& q : fx.questions) {
    m.add_example(q, fx.features.at(q.image_id).features);
    ++counts[q.gt_answer];
  }
  std::string best;
  int n = -1;
  for (const auto& [a, c] : counts)
    if (c > n) best = a, n = c;
  EXPECT_EQ(m.majority_answer(), best);
  Question unseen = keyed("x", "?", "never-seen-category");
  EXPECT_EQ(m.answer_for(unseen, fx.features.begin()->second.features), best);
  EXPECT_EQ(question_key(fx.questions[0]), fx.questions[0].program.back().op_name +
                                              (fx.questions[0].program.back().arguments.empty() ? "" : "|" +
                                               fx.questions[0].program.back().arguments[0]));
}
