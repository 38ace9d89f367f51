#pragma once

// Accuracy, context reliance and effective accuracy over answer logs.
//
//   accuracy           = #(answer at pert 0 == gt) / N
//   context reliance   = #(correct at pert 0 and some pert answer differs
//                          from the pert-0 answer) / #(correct at pert 0)
//   effective accuracy = sum q_i / N, q_i = 1 iff every answer, pert 0
//                        included, equals gt
//
// Percentages are rounded to two decimals, half to even, from the exact
// integer ratio.

#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "swapmix/models.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

inline constexpr int kReportSchema = 1;

/// A percentage held as an integer count of hundredths.
struct Percent {
  std::int64_t hundredths = 0;

  /// round_half_even(100 * num / den) to two decimals; 0 when den == 0.
  static Percent of(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return {0};
    const unsigned __int128 scaled = static_cast<unsigned __int128>(num) * 10000u;
    auto q = static_cast<std::uint64_t>(scaled / den);
    const auto r = static_cast<std::uint64_t>(scaled % den);
    const unsigned __int128 twice = static_cast<unsigned __int128>(r) * 2u;
    if (twice > den || (twice == den && (q & 1u))) ++q;
    return {static_cast<std::int64_t>(q)};
  }

  double value() const { return static_cast<double>(hundredths) / 100.0; }

  std::string str() const {
    char buf[32];
    const std::int64_t a = hundredths < 0 ? -hundredths : hundredths;
    std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", hundredths < 0 ? "-" : "", static_cast<long long>(a / 100),
                  static_cast<long long>(a % 100));
    return buf;
  }

  friend auto operator<=>(const Percent&, const Percent&) = default;
};

struct QuestionOutcome {
  std::string question_id;
  bool correct0 = false;
  std::vector<int> changed_by;  // pert_ids whose answer differs from pert 0
  bool changed_by_class = false;
  bool changed_by_attribute = false;
  int q = 0;

  friend bool operator==(const QuestionOutcome&, const QuestionOutcome&) = default;
};

struct Exclusion {
  std::string question_id;
  std::string reason;

  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct RobustnessReport {
  std::string model;
  std::size_t n_total = 0;      // questions including excluded ones
  std::size_t n = 0;            // evaluated questions
  std::size_t correct = 0;      // correct at pert 0
  std::size_t reliant = 0;      // correct and changed by any perturbation
  std::size_t class_reliant = 0;
  std::size_t attr_reliant = 0;
  std::size_t effective = 0;    // sum of q_i
  std::size_t perturbations = 0;
  std::vector<QuestionOutcome> per_question;
  std::vector<Exclusion> excluded;

  Percent accuracy() const { return Percent::of(correct, n); }
  Percent context_reliance() const { return Percent::of(reliant, correct); }
  Percent effective_accuracy() const { return Percent::of(effective, n); }
  Percent class_reliance() const { return Percent::of(class_reliant, correct); }
  Percent attr_reliance() const { return Percent::of(attr_reliant, correct); }

  double accuracy_exact() const { return n ? 100.0 * correct / n : 0.0; }
  double reliance_exact() const { return correct ? 100.0 * reliant / correct : 0.0; }
  double effective_exact() const { return n ? 100.0 * effective / n : 0.0; }
};

/// |effective - accuracy * (1 - reliance / 100)| for two-decimal figures.
inline double identity_residual(double accuracy, double reliance, double effective) {
  const double predicted = accuracy * (1.0 - reliance / 100.0);
  return predicted > effective ? predicted - effective : effective - predicted;
}

/// Builds the report. `plans` gives the expected pert_ids per question;
/// every (question, pert_id) plus pert 0 must appear in `logs`.
inline RobustnessReport compute_report(const std::vector<Question>& questions, const std::vector<AnswerLogEntry>& logs,
                                       const PlanTable& plans, std::vector<Exclusion> excluded = {},
                                       std::string model = {}) {
  std::map<std::pair<std::string, int>, std::string> answers;
  std::vector<std::string> problems;
  for (const auto& e : logs) {
    auto [it, inserted] = answers.emplace(std::make_pair(e.question_id, e.pert_id), e.answer);
    if (!inserted && it->second != e.answer)
      problems.push_back("conflict (" + e.question_id + "," + std::to_string(e.pert_id) + ")");
  }
  std::set<std::string> skip;
  for (const auto& x : excluded) skip.insert(x.question_id);

  RobustnessReport r;
  r.model = std::move(model);
  r.n_total = questions.size();
  static const std::vector<PlannedSwap> kNoPlan;
  for (const auto& q : questions) {
    if (skip.contains(q.question_id)) continue;
    auto pit = plans.find(q.question_id);
    const auto& plan = pit == plans.end() ? kNoPlan : pit->second;
    auto base = answers.find({q.question_id, 0});
    if (base == answers.end()) problems.push_back("missing (" + q.question_id + ",0)");
    for (const auto& p : plan)
      if (!answers.contains({q.question_id, p.pert_id}))
        problems.push_back("missing (" + q.question_id + "," + std::to_string(p.pert_id) + ")");
    if (!problems.empty()) continue;

    QuestionOutcome out;
    out.question_id = q.question_id;
    const std::string gt = normalize_answer(q.gt_answer);
    const std::string& a0 = base->second;
    out.correct0 = a0 == gt;
    bool all_gt = out.correct0;
    for (const auto& p : plan) {
      const std::string& a = answers.at({q.question_id, p.pert_id});
      if (a != gt) all_gt = false;
      if (a != a0) {
        out.changed_by.push_back(p.pert_id);
        if (p.candidate.kind == SwapKind::class_swap)
          out.changed_by_class = true;
        else
          out.changed_by_attribute = true;
      }
    }
    out.q = all_gt ? 1 : 0;
    ++r.n;
    r.perturbations += plan.size();
    if (out.correct0) {
      ++r.correct;
      if (!out.changed_by.empty()) ++r.reliant;
      if (out.changed_by_class) ++r.class_reliant;
      if (out.changed_by_attribute) ++r.attr_reliant;
    }
    r.effective += static_cast<std::size_t>(out.q);
    r.per_question.push_back(std::move(out));
  }
  if (!problems.empty())
    throw Error(ErrorKind::IncompleteLog,
                std::to_string(problems.size()) + " log problem(s), first: " + problems.front(), problems);
  r.excluded = std::move(excluded);
  return r;
}

// ------------------------------------------------------------------- output

namespace detail {
inline std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }
}  // namespace detail

/// Canonical JSON: sorted keys, percentages with exactly two decimals.
inline std::string report_to_json(const RobustnessReport& r) {
  std::ostringstream o;
  o << "{\n";
  o << "  \"accuracy\": " << r.accuracy().str() << ",\n";
  o << "  \"attr_reliance\": " << r.attr_reliance().str() << ",\n";
  o << "  \"class_reliance\": " << r.class_reliance().str() << ",\n";
  o << "  \"context_reliance\": " << r.context_reliance().str() << ",\n";
  o << "  \"correct\": " << r.correct << ",\n";
  o << "  \"effective_accuracy\": " << r.effective_accuracy().str() << ",\n";
  o << "  \"excluded\": [";
  for (std::size_t i = 0; i < r.excluded.size(); ++i)
    o << (i ? ",\n    " : "\n    ") << "{\"question_id\": " << detail::quoted(r.excluded[i].question_id)
      << ", \"reason\": " << detail::quoted(r.excluded[i].reason) << "}";
  o << (r.excluded.empty() ? "],\n" : "\n  ],\n");
  o << "  \"model\": " << detail::quoted(r.model) << ",\n";
  o << "  \"n_evaluated\": " << r.n << ",\n";
  o << "  \"n_total\": " << r.n_total << ",\n";
  o << "  \"per_question\": [";
  for (std::size_t i = 0; i < r.per_question.size(); ++i) {
    const auto& q = r.per_question[i];
    o << (i ? ",\n    " : "\n    ") << "{\"changed_by\": [";
    for (std::size_t j = 0; j < q.changed_by.size(); ++j) o << (j ? ", " : "") << q.changed_by[j];
    o << "], \"correct0\": " << (q.correct0 ? "true" : "false") << ", \"q_i\": " << q.q
      << ", \"question_id\": " << detail::quoted(q.question_id) << "}";
  }
  o << (r.per_question.empty() ? "],\n" : "\n  ],\n");
  o << "  \"perturbations\": " << r.perturbations << ",\n";
  o << "  \"reliant\": " << r.reliant << ",\n";
  o << "  \"schema\": " << kReportSchema << "\n";
  o << "}\n";
  return o.str();
}

/// Table-style text: the accuracy / reliance / effective accuracy block
/// followed by the class / attribute reliance split.
inline std::string report_to_text(const RobustnessReport& r) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "model: %s\n", r.model.empty() ? "-" : r.model.c_str());
  out += line;
  std::snprintf(line, sizeof(line), "questions: %zu evaluated of %zu (%zu excluded), %zu perturbations\n\n", r.n,
                r.n_total, r.excluded.size(), r.perturbations);
  out += line;
  std::snprintf(line, sizeof(line), "%10s | %18s | %16s\n", "Acc.", "Context Reliance", "Effective Acc.");
  out += line;
  std::snprintf(line, sizeof(line), "%10s | %18s | %16s\n\n", r.accuracy().str().c_str(),
                r.context_reliance().str().c_str(), r.effective_accuracy().str().c_str());
  out += line;
  std::snprintf(line, sizeof(line), "%16s | %14s\n", "Class Reliance", "Attr Reliance");
  out += line;
  std::snprintf(line, sizeof(line), "%16s | %14s\n", r.class_reliance().str().c_str(), r.attr_reliance().str().c_str());
  out += line;
  for (const auto& x : r.excluded) out += "excluded " + x.question_id + ": " + x.reason + "\n";
  return out;
}

inline const char* kReportCsvHeader =
    "model,n_total,n_evaluated,correct,perturbations,accuracy,context_reliance,effective_accuracy,class_reliance,"
    "attr_reliance";

inline std::string report_to_csv(const RobustnessReport& r) {
  std::ostringstream o;
  o << kReportCsvHeader << "\n"
    << r.model << "," << r.n_total << "," << r.n << "," << r.correct << "," << r.perturbations << ","
    << r.accuracy().str() << "," << r.context_reliance().str() << "," << r.effective_accuracy().str() << ","
    << r.class_reliance().str() << "," << r.attr_reliance().str() << "\n";
  return o.str();
}

/// Summary fields recovered from the CSV form.
struct ReportSummary {
  std::string model;
  std::size_t n_total = 0, n = 0, correct = 0, perturbations = 0;
  double accuracy = 0, context_reliance = 0, effective_accuracy = 0, class_reliance = 0, attr_reliance = 0;
};

inline ReportSummary parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, row;
  if (!std::getline(in, header) || header != kReportCsvHeader || !std::getline(in, row))
    throw Error(ErrorKind::MalformedInput, "not a report CSV");
  std::vector<std::string> f;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 10) throw Error(ErrorKind::MalformedInput, "report CSV row has " + std::to_string(f.size()) + " fields");
  ReportSummary s;
  try {
    s.model = f[0];
    s.n_total = std::stoull(f[1]);
    s.n = std::stoull(f[2]);
    s.correct = std::stoull(f[3]);
    s.perturbations = std::stoull(f[4]);
    s.accuracy = std::stod(f[5]);
    s.context_reliance = std::stod(f[6]);
    s.effective_accuracy = std::stod(f[7]);
    s.class_reliance = std::stod(f[8]);
    s.attr_reliance = std::stod(f[9]);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::MalformedInput, "report CSV has a non-numeric field");
  }
  return s;
}

// -------------------------------------------------------------- answer logs

inline std::string answers_to_jsonl(const std::vector<AnswerLogEntry>& logs) {
  std::string out;
  for (const auto& e : logs)
    out += nlohmann::json{{"question_id", e.question_id}, {"pert_id", e.pert_id}, {"answer", e.answer}}.dump() + "\n";
  return out;
}

/// Parses answers.jsonl; answers are normalized on the way in.
inline std::vector<AnswerLogEntry> parse_answers_jsonl(const std::string& text) {
  std::vector<AnswerLogEntry> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("question_id").get<std::string>(), j.at("pert_id").get<int>(),
                     normalize_answer(j.at("answer").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedInput, "answers line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace swapmix
