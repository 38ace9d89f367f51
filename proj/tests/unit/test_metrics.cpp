#include <gtest/gtest.h>

#include "support.hpp"
#include "swapmix/metrics.hpp"

using namespace swapmix;
using swapmix::test::error_kind;

namespace {

Question q(const std::string& id, const std::string& gt) { return {id, "img", "?", gt, {}}; }

PlannedSwap swap(const std::string& qid, int pert, SwapKind kind = SwapKind::class_swap) {
  PlannedSwap p;
  p.question_id = qid;
  p.pert_id = pert;
  p.candidate.kind = kind;
  return p;
}

// q1, q2 correct and stable; q3 correct but flipped by pert 2; q4 wrong.
struct FourQuestions {
  std::vector<Question> questions{q("q1", "yes"), q("q2", "red"), q("q3", "no"), q("q4", "blue")};
  PlanTable plans{{"q1", {swap("q1", 1), swap("q1", 2)}},
                  {"q2", {swap("q2", 1)}},
                  {"q3", {swap("q3", 1), swap("q3", 2, SwapKind::attribute_swap)}},
                  {"q4", {swap("q4", 1)}}};
  std::vector<AnswerLogEntry> logs{{"q1", 0, "yes"}, {"q1", 1, "yes"}, {"q1", 2, "yes"}, {"q2", 0, "red"},
                                   {"q2", 1, "red"}, {"q3", 0, "no"},  {"q3", 1, "no"},  {"q3", 2, "yes"},
                                   {"q4", 0, "red"}, {"q4", 1, "red"}};
};

}  // namespace

TEST(Percent, HalfEvenRounding) {
  EXPECT_EQ(Percent::of(3, 4).str(), "75.00");
  EXPECT_EQ(Percent::of(1, 3).str(), "33.33");
  EXPECT_EQ(Percent::of(2, 3).str(), "66.67");
  EXPECT_EQ(Percent::of(1, 20000).str(), "0.00");  // 0.005 -> even 0.00
  EXPECT_EQ(Percent::of(3, 20000).str(), "0.02");  // 0.015 -> even 0.02
  EXPECT_EQ(Percent::of(5, 20000).str(), "0.02");  // 0.025 -> even 0.02
  EXPECT_EQ(Percent::of(0, 0).str(), "0.00");
  EXPECT_EQ(Percent::of(7, 7).str(), "100.00");
  EXPECT_DOUBLE_EQ(Percent::of(1, 8).value(), 12.5);
}

TEST(ComputeReport, FourQuestionExample) {
  FourQuestions f;
  const auto r = compute_report(f.questions, f.logs, f.plans);
  EXPECT_EQ(r.accuracy().str(), "75.00");
  EXPECT_EQ(r.context_reliance().str(), "33.33");
  EXPECT_EQ(r.effective_accuracy().str(), "50.00");
  EXPECT_EQ(r.class_reliance().str(), "0.00");
  EXPECT_EQ(r.attr_reliance().str(), "33.33");
  EXPECT_EQ(r.perturbations, 6u);
  EXPECT_EQ(r.per_question[2].changed_by, std::vector<int>{2});
  EXPECT_LE(identity_residual(r.accuracy_exact(), r.reliance_exact(), r.effective_exact()), 1e-9);
}

TEST(ComputeReport, StableAnswersGiveZeroReliance) {
  FourQuestions f;
  f.logs[7].answer = "no";
  const auto r = compute_report(f.questions, f.logs, f.plans);
  EXPECT_EQ(r.context_reliance().str(), "0.00");
  EXPECT_EQ(r.effective_accuracy(), r.accuracy());
}

TEST(ComputeReport, WrongQuestionThatChangesIsNotReliant) {
  FourQuestions f;
  f.logs[9].answer = "green";
  const auto r = compute_report(f.questions, f.logs, f.plans);
  EXPECT_EQ(r.reliant, 1u);
  EXPECT_EQ(r.per_question[3].changed_by, std::vector<int>{1});
}

TEST(ComputeReport, MissingPairIsIncompleteLog) {
  FourQuestions f;
  f.logs.erase(f.logs.begin() + 7);
  try {
    compute_report(f.questions, f.logs, f.plans);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteLog);
    EXPECT_EQ(e.details(), std::vector<std::string>{"missing (q3,2)"});
  }
}

TEST(ComputeReport, ConflictingDuplicateIsIncompleteLog) {
  FourQuestions f;
  f.logs.push_back({"q1", 1, "no"});
  f.logs.push_back({"q2", 1, "red"});  // consistent duplicate is fine
  try {
    compute_report(f.questions, f.logs, f.plans);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteLog);
    EXPECT_EQ(e.details(), std::vector<std::string>{"conflict (q1,1)"});
  }
}

TEST(ComputeReport, ExcludedQuestionsAreSkipped) {
  FourQuestions f;
  f.logs.erase(f.logs.begin() + 8, f.logs.end());
  const auto r = compute_report(f.questions, f.logs, f.plans, {{"q4", "unsupported operation: same"}}, "m");
  EXPECT_EQ(r.n, 3u);
  EXPECT_EQ(r.n_total, 4u);
  EXPECT_EQ(r.accuracy().str(), "100.00");
  EXPECT_EQ(r.excluded.size(), 1u);
}

TEST(ComputeReport, PropertyMoreFlipsNeverLowerReliance) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    std::vector<Question> qs;
    PlanTable plans;
    std::vector<AnswerLogEntry> logs;
    for (int i = 0; i < 6; ++i) {
      const std::string id = "q" + std::to_string(i);
      qs.push_back(q(id, "a"));
      logs.push_back({id, 0, rng.bernoulli(0.7) ? "a" : "b"});
      for (int p = 1; p <= 3; ++p) {
        plans[id].push_back(swap(id, p));
        logs.push_back({id, p, logs[logs.size() - static_cast<std::size_t>(p)].answer});
      }
    }
    const auto before = compute_report(qs, logs, plans);
    auto flipped = logs;
    flipped[rng.below(flipped.size())].answer = "z";
    // pert 0 flips change accuracy; only compare when accuracy is unchanged.
    const auto after = compute_report(qs, flipped, plans);
    if (after.correct != before.correct) continue;
    EXPECT_GE(after.reliant, before.reliant);
    EXPECT_LE(after.effective, before.effective);
  }
}

TEST(ReportIdentity, PublishedRowsSatisfyTheIdentity) {
  EXPECT_LE(identity_residual(70.55, 45.05, 38.77), 0.01);
  EXPECT_LE(identity_residual(83.78, 10.10, 75.32), 0.01);
}

TEST(EmitReport, JsonIsCanonicalAndStable) {
  FourQuestions f;
  const auto r = compute_report(f.questions, f.logs, f.plans, {}, "symbolic");
  const auto a = report_to_json(r);
  EXPECT_EQ(a, report_to_json(compute_report(f.questions, f.logs, f.plans, {}, "symbolic")));
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j.at("schema"), 1);
  EXPECT_EQ(j.at("context_reliance").get<double>(), 33.33);
  std::size_t last = 0;
  for (const auto& [key, value] : j.items()) {  // nlohmann iterates keys in sorted order
    const auto at = a.find("\n  \"" + key + "\":");
    ASSERT_NE(at, std::string::npos) << key;
    EXPECT_GT(at, last) << key;
    last = at;
  }
  EXPECT_NE(a.find("\"accuracy\": 75.00"), std::string::npos);
}

TEST(EmitReport, CsvRoundTrip) {
  FourQuestions f;
  const auto r = compute_report(f.questions, f.logs, f.plans, {}, "baseline");
  const auto s = parse_report_csv(report_to_csv(r));
  EXPECT_EQ(s.model, "baseline");
  EXPECT_EQ(s.n, r.n);
  EXPECT_EQ(s.correct, r.correct);
  EXPECT_EQ(s.perturbations, r.perturbations);
  EXPECT_DOUBLE_EQ(s.accuracy, r.accuracy().value());
  EXPECT_DOUBLE_EQ(s.context_reliance, r.context_reliance().value());
  EXPECT_DOUBLE_EQ(s.effective_accuracy, r.effective_accuracy().value());
  EXPECT_DOUBLE_EQ(s.attr_reliance, r.attr_reliance().value());
  EXPECT_EQ(error_kind([] { parse_report_csv("x\n"); }), ErrorKind::MalformedInput);
}

TEST(EmitReport, TextHasTableColumns) {
  FourQuestions f;
  const auto text = report_to_text(compute_report(f.questions, f.logs, f.plans));
  for (const char* col : {"Acc.", "Context Reliance", "Effective Acc.", "Class Reliance", "Attr Reliance"})
    EXPECT_NE(text.find(col), std::string::npos) << col;
  EXPECT_NE(text.find("33.33"), std::string::npos);
}

TEST(AnswerLog, JsonlRoundTripNormalizes) {
  const std::vector<AnswerLogEntry> logs{{"q1", 0, "yes"}, {"q1", 1, kFailedAnswer}};
  EXPECT_EQ(parse_answers_jsonl(answers_to_jsonl(logs)), logs);
  EXPECT_EQ(parse_answers_jsonl("{\"question_id\":\"q\",\"pert_id\":0,\"answer\":\"  YES \"}\n")[0].answer, "yes");
  EXPECT_EQ(error_kind([] { parse_answers_jsonl("{\"question_id\":\"q\"}\n"); }), ErrorKind::MalformedInput);
}
