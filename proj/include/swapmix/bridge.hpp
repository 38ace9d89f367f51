#pragma once

// File-based bridge to external models.
//
// Job directory layout:
//   questions.jsonl                  {image_id, question, question_id}
//   plans.jsonl                      one planned swap per line (swapplan schema)
//   features/{qid}.{pert_id}.smfx    pert 0 is the unperturbed input
//   answers.jsonl                    {answer, pert_id, question_id}, written by the model side

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "swapmix/io.hpp"
#include "swapmix/metrics.hpp"
#include "swapmix/perturb.hpp"
#include "swapmix/smfx.hpp"

namespace swapmix {

inline std::filesystem::path bridge_feature_path(const std::filesystem::path& dir, const std::string& question_id,
                                                 int pert_id) {
  return dir / (question_id + "." + std::to_string(pert_id) + ".smfx");
}

/// Writes pert 0 and every emitted perturbation of each question as SMFX.
/// Returns the planned swaps that were actually emitted.
inline PlanTable dump_perturbations(const std::filesystem::path& dir, const std::vector<Question>& questions,
                                    const PlanTable& plans, const DatasetBundle& bundle, const DonorFeatures& donors,
                                    std::vector<PerturbationSkip>* skipped = nullptr) {
  std::filesystem::create_directories(dir);
  PlanTable emitted;
  static const std::vector<PlannedSwap> kNone;
  for (const auto& q : questions) {
    const FeatureFile& ff = bundle.features.at(q.image_id);
    const auto boxes = ff.boxes();
    write_feature_file(bridge_feature_path(dir, q.question_id, 0), ff.features, boxes);
    auto it = plans.find(q.question_id);
    const auto& plan = it == plans.end() ? kNone : it->second;
    auto& kept = emitted[q.question_id];
    std::size_t next = 0;
    enumerate_perturbations(
        ff.features, q.image_id, plan, donors,
        [&](const PerturbationRecord& rec, const FeatureMatrix& m) {
          write_feature_file(bridge_feature_path(dir, q.question_id, rec.pert_id), m, boxes);
          while (next < plan.size() && plan[next].pert_id != rec.pert_id) ++next;
          kept.push_back(plan[next]);
        },
        [&](const PerturbationSkip& s) {
          if (skipped) skipped->push_back(s);
        });
  }
  return emitted;
}

inline std::string plan_table_to_jsonl(const PlanTable& plans) {
  std::string out;
  for (const auto& [qid, swaps] : plans)
    for (const auto& p : swaps) out += planned_swap_to_json(p).dump() + "\n";
  return out;
}

inline void bridge_export(const std::filesystem::path& job_dir, const std::vector<Question>& questions,
                          const PlanTable& plans, const DatasetBundle& bundle, const DonorFeatures& donors,
                          std::vector<PerturbationSkip>* skipped = nullptr) {
  std::filesystem::create_directories(job_dir);
  std::string qlines;
  for (const auto& q : questions)
    qlines += nlohmann::json{{"question_id", q.question_id}, {"image_id", q.image_id}, {"question", q.text}}.dump() +
              "\n";
  const PlanTable emitted = dump_perturbations(job_dir / "features", questions, plans, bundle, donors, skipped);
  write_file_atomic(job_dir / "questions.jsonl", qlines);
  write_file_atomic(job_dir / "plans.jsonl", plan_table_to_jsonl(emitted));
}

/// Reads answers.jsonl and checks there is exactly one answer per expected
/// (question_id, pert_id), pert 0 included.
inline std::vector<AnswerLogEntry> bridge_import(const std::filesystem::path& job_dir,
                                                 const std::vector<std::string>& question_ids, const PlanTable& plans) {
  const auto path = job_dir / "answers.jsonl";
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::IncompleteLog, "no answers.jsonl in " + job_dir.string());
  auto logs = parse_answers_jsonl(read_file(path));
  std::map<std::pair<std::string, int>, std::string> seen;
  std::vector<std::string> problems;
  for (const auto& e : logs) {
    auto [it, inserted] = seen.emplace(std::make_pair(e.question_id, e.pert_id), e.answer);
    if (!inserted && it->second != e.answer)
      problems.push_back("conflict (" + e.question_id + "," + std::to_string(e.pert_id) + ")");
  }
  for (const auto& qid : question_ids) {
    if (!seen.contains({qid, 0})) problems.push_back("missing (" + qid + ",0)");
    if (auto it = plans.find(qid); it != plans.end())
      for (const auto& p : it->second)
        if (!seen.contains({qid, p.pert_id}))
          problems.push_back("missing (" + qid + "," + std::to_string(p.pert_id) + ")");
  }
  if (!problems.empty())
    throw Error(ErrorKind::IncompleteLog,
                std::to_string(problems.size()) + " log problem(s), first: " + problems.front(), problems);
  std::vector<AnswerLogEntry> out;
  for (const auto& [key, answer] : seen) out.push_back({key.first, key.second, answer});
  return out;
}

inline std::vector<std::string> read_bridge_question_ids(const std::filesystem::path& job_dir) {
  std::vector<std::string> ids;
  std::istringstream in(read_file(job_dir / "questions.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      ids.push_back(nlohmann::json::parse(line).at("question_id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedInput, std::string("questions.jsonl: ") + e.what());
    }
  }
  return ids;
}

}  // namespace swapmix
