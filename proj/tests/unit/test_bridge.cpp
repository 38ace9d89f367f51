#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "swapmix/swapmix.hpp"

using namespace swapmix;
using swapmix::test::TempDir;

namespace {

RunConfig fixture_config(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.scene_graphs = (dir / "scene_graphs.json").string();
  cfg.questions = (dir / "questions.json").string();
  cfg.features = (dir / "features").string();
  cfg.embeddings = (dir / "embeddings.txt").string();
  cfg.seed = 3;
  cfg.k = 3;
  return cfg;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

// Stand-in external model: answers every exported feature file with the
// symbolic answer to its question, ignoring the features.
void echo_model(const std::filesystem::path& job, const std::map<std::string, std::string>& gt) {
  std::string out;
  for (const auto& entry : std::filesystem::directory_iterator(job / "features")) {
    const auto stem = entry.path().stem().string();  // qid.pert
    const auto dot = stem.rfind('.');
    const auto qid = stem.substr(0, dot);
    out += nlohmann::json{{"question_id", qid}, {"pert_id", std::stoi(stem.substr(dot + 1))}, {"answer", gt.at(qid)}}
               .dump() +
           "\n";
  }
  std::ofstream(job / "answers.jsonl") << out;
}

struct BridgeEnv {
  TempDir tmp{"bridge"};
  std::unique_ptr<PreparedRun> run;
  PlanTable plans;
  std::filesystem::path job;
  std::map<std::string, std::string> gt;

  BridgeEnv() {
    FixtureOptions opt;
    opt.images = 4;
    write_fixture(make_fixture(opt), tmp.path());
    run = prepare_run(fixture_config(tmp.path()));
    plans = flatten_plans(plan_run(*run));
    job = tmp / "job";
    bridge_export(job, run->evaluated, plans, run->bundle, *run->donors);
    for (const auto& q : run->evaluated) gt[q.question_id] = q.gt_answer;
  }
};

}  // namespace

TEST(Bridge, ExportLayout) {
  BridgeEnv env;
  const auto qs = read_jsonl(env.job / "questions.jsonl");
  ASSERT_EQ(qs.size(), env.run->evaluated.size());
  EXPECT_EQ(qs[0].at("question_id"), env.run->evaluated[0].question_id);
  EXPECT_EQ(qs[0].at("image_id"), env.run->evaluated[0].image_id);
  EXPECT_EQ(qs[0].at("question"), env.run->evaluated[0].text);

  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(env.job / "features")) ++files;
  const auto exported = parse_plans_jsonl(read_file(env.job / "plans.jsonl"));
  std::size_t perts = 0;
  for (const auto& [qid, v] : exported) perts += v.size();
  EXPECT_EQ(files, env.run->evaluated.size() + perts);
  EXPECT_EQ(exported, env.plans);  // fixture donors all have features
}

TEST(Bridge, FeatureFilesHoldTheSwappedMatrices) {
  BridgeEnv env;
  const auto& q = env.run->evaluated.front();
  const auto& v = env.run->bundle.features.at(q.image_id).features;
  const auto pert0 = read_feature_file(bridge_feature_path(env.job / "features", q.question_id, 0));
  EXPECT_TRUE(pert0.features.bitwise_equal(v));
  for (const auto& p : env.plans.at(q.question_id)) {
    const auto donor = env.run->donors->feature_for(p.candidate, q.image_id);
    ASSERT_TRUE(donor);
    const auto expected = apply_swap(v, p.candidate.source_detection_index, *donor);
    const auto got = read_feature_file(bridge_feature_path(env.job / "features", q.question_id, p.pert_id));
    EXPECT_TRUE(got.features.bitwise_equal(expected)) << p.pert_id;
    EXPECT_EQ(got.boxes(), pert0.boxes());
  }
}

TEST(Bridge, ImportCompleteLog) {
  BridgeEnv env;
  echo_model(env.job, env.gt);
  const auto logs = bridge_import(env.job, read_bridge_question_ids(env.job), env.plans);
  const auto report = compute_report(env.run->bundle.questions, logs, env.plans, env.run->excluded, "bridge");
  EXPECT_EQ(report.accuracy().str(), "100.00");
  EXPECT_EQ(report.context_reliance().str(), "0.00");
}

TEST(Bridge, MissingAnswerIsIncompleteLog) {
  BridgeEnv env;
  const auto& q = env.run->evaluated.front();
  const int pert = env.plans.at(q.question_id).back().pert_id;
  std::filesystem::remove(bridge_feature_path(env.job / "features", q.question_id, pert));
  echo_model(env.job, env.gt);
  try {
    bridge_import(env.job, read_bridge_question_ids(env.job), env.plans);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteLog);
    EXPECT_EQ(e.details(), std::vector<std::string>{"missing (" + q.question_id + "," + std::to_string(pert) + ")"});
  }
}

TEST(Bridge, ConflictingAnswerIsIncompleteLog) {
  BridgeEnv env;
  echo_model(env.job, env.gt);
  const auto& qid = env.run->evaluated.front().question_id;
  std::ofstream(env.job / "answers.jsonl", std::ios::app)
      << nlohmann::json{{"question_id", qid}, {"pert_id", 0}, {"answer", "definitely not"}}.dump() << "\n";
  try {
    bridge_import(env.job, read_bridge_question_ids(env.job), env.plans);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteLog);
    EXPECT_EQ(e.details(), std::vector<std::string>{"conflict (" + qid + ",0)"});
  }
}

TEST(Bridge, NoAnswersFile) {
  BridgeEnv env;
  EXPECT_EQ(swapmix::test::error_kind([&] { bridge_import(env.job, {"q"}, {}); }), ErrorKind::IncompleteLog);
}
