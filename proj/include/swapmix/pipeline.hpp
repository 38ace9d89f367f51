#pragma once

// End-to-end runs: load -> context -> plan -> perturb -> answer -> report.
// The CLI stages call these pieces individually; diagnose() chains them.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "swapmix/augment.hpp"
#include "swapmix/bridge.hpp"
#include "swapmix/context.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/encoder.hpp"
#include "swapmix/ingestion.hpp"
#include "swapmix/metrics.hpp"
#include "swapmix/models.hpp"
#include "swapmix/perturb.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

enum class FeatureMode { frcnn, perfect };
enum class ModelKind { symbolic, baseline, bridge };

inline std::string_view to_string(FeatureMode m) { return m == FeatureMode::frcnn ? "frcnn" : "perfect"; }
inline std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::symbolic: return "symbolic";
    case ModelKind::baseline: return "baseline";
    case ModelKind::bridge: return "bridge";
  }
  return "symbolic";
}

struct RunConfig {
  std::string scene_graphs;
  std::string questions;
  std::string features;  // directory of {image_id}.smfx, frcnn mode only
  std::string embeddings;
  int k = kDefaultK;
  double sim_threshold = kDefaultSimilarityThreshold;
  double iou_threshold = kDefaultIouThreshold;
  std::uint64_t seed = 0;
  FeatureMode mode = FeatureMode::frcnn;
  ContextDefinition context_def = ContextDefinition::paper;
  ModelKind model = ModelKind::symbolic;
  std::string out = "swapmix-out";
  int jobs = 1;
  std::string dump_features;
  double p_swap = 0.5;
  double p_class = 0.5;
  int epoch = 0;

  void validate() const {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "--k must be >= 1");
    if (!(sim_threshold >= -1 && sim_threshold <= 1))
      throw Error(ErrorKind::InvalidArgument, "--sim-threshold must lie in [-1, 1]");
    if (!(iou_threshold > 0 && iou_threshold <= 1))
      throw Error(ErrorKind::InvalidArgument, "--iou-threshold must lie in (0, 1]");
    if (jobs < 1) throw Error(ErrorKind::InvalidArgument, "--jobs must be >= 1");
    if (!(p_swap >= 0 && p_swap <= 1) || !(p_class >= 0 && p_class <= 1))
      throw Error(ErrorKind::InvalidArgument, "--p-swap and --p-class must lie in [0, 1]");
  }

  nlohmann::json to_json() const {
    return {{"scene_graphs", scene_graphs},
            {"questions", questions},
            {"features", features},
            {"embeddings", embeddings},
            {"k", k},
            {"sim_threshold", sim_threshold},
            {"iou_threshold", iou_threshold},
            {"seed", seed},
            {"mode", to_string(mode)},
            {"context_def", to_string(context_def)},
            {"model", to_string(model)},
            {"out", out},
            {"jobs", jobs},
            {"dump_features", dump_features},
            {"p_swap", p_swap},
            {"p_class", p_class},
            {"epoch", epoch}};
  }
};

/// Runs fn(i) for i in [0, n) on `jobs` threads. The first exception is
/// rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < count; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

/// Loaded, matched and context-split dataset for one run. Not movable:
/// the encoder and donor source point into it.
struct PreparedRun {
  RunConfig cfg;
  DatasetBundle bundle;
  EmbeddingTable table;
  std::optional<Encoder> encoder;
  std::unique_ptr<DonorFeatures> donors;
  std::vector<Question> evaluated;
  std::vector<Exclusion> excluded;
  std::map<std::string, ContextSet> contexts;

  PreparedRun() = default;
  PreparedRun(const PreparedRun&) = delete;
  PreparedRun& operator=(const PreparedRun&) = delete;

  PlanOptions plan_options() const {
    PlanOptions o;
    o.k = cfg.k;
    o.threshold = cfg.sim_threshold;
    o.seed = cfg.seed;
    o.perfect_attributes = cfg.mode == FeatureMode::perfect;
    o.context_def = cfg.context_def;
    return o;
  }

  std::vector<std::string> evaluated_ids() const {
    std::vector<std::string> ids;
    for (const auto& q : evaluated) ids.push_back(q.question_id);
    return ids;
  }
};

inline MatchTable identity_matches(const SceneGraph& g) {
  MatchTable mt;
  mt.image_id = g.image_id;
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    mt.object_to_detection[g.objects[i].object_id] = i;
    mt.detection_to_object[i] = g.objects[i].object_id;
    mt.scores.push_back({g.objects[i].object_id, i, 1.0});
  }
  return mt;
}

inline std::unique_ptr<PreparedRun> prepare_run(const RunConfig& cfg) {
  cfg.validate();
  auto run = std::make_unique<PreparedRun>();
  run->cfg = cfg;
  run->bundle = load_bundle(cfg.scene_graphs, cfg.questions);
  run->table = load_embeddings(cfg.embeddings);
  auto& bundle = run->bundle;

  if (cfg.mode == FeatureMode::frcnn) {
    load_feature_dir(bundle, cfg.features);
    match_all(bundle, cfg.iou_threshold);
    restrict_donors_to_features(bundle);
    run->donors = std::make_unique<DetectorDonors>(bundle);
  } else {
    run->encoder.emplace(EncoderConfig::from_run_seed(run->table.dimension(), cfg.seed), run->table);
    for (const auto& [image_id, g] : bundle.scene_graphs) {
      if (g.objects.empty()) continue;
      bundle.features.emplace(image_id, run->encoder->encode_graph(g));
      bundle.matches.emplace(image_id, identity_matches(g));
    }
    run->donors = std::make_unique<PerfectSightDonors>(bundle, *run->encoder);
  }

  for (const auto& q : bundle.questions) {
    auto unsupported = std::find_if(q.program.begin(), q.program.end(),
                                    [](const ReasoningStep& s) { return s.operation == Operation::unsupported; });
    if (unsupported != q.program.end()) {
      run->excluded.push_back({q.question_id, "unsupported operation: " + unsupported->op_name});
      continue;
    }
    auto ff = bundle.features.find(q.image_id);
    if (ff == bundle.features.end()) {
      run->excluded.push_back({q.question_id, "no features for image " + q.image_id});
      continue;
    }
    run->contexts.emplace(q.question_id, identify_context(q, bundle.graph(q.image_id), bundle.matches.at(q.image_id),
                                                          ff->second.features.rows(), cfg.context_def));
    run->evaluated.push_back(q);
  }
  return run;
}

inline std::vector<SwapPlan> plan_run(const PreparedRun& run) {
  std::vector<SwapPlan> plans(run.evaluated.size());
  const PlanOptions opt = run.plan_options();
  parallel_for(run.evaluated.size(), run.cfg.jobs, [&](std::size_t i) {
    const Question& q = run.evaluated[i];
    plans[i] = build_swap_plan(q, run.contexts.at(q.question_id), run.bundle, run.table, opt);
  });
  return plans;
}

inline std::unique_ptr<Model> make_model(const PreparedRun& run, ModelKind kind) {
  if (kind == ModelKind::symbolic) return std::make_unique<SymbolicModel>();
  if (kind == ModelKind::baseline) {
    auto m = std::make_unique<BaselineModel>();
    for (const auto& q : run.evaluated) m->add_example(q, run.bundle.features.at(q.image_id).features);
    return m;
  }
  throw Error(ErrorKind::InvalidArgument, "the bridge model answers out of process");
}

/// Answers pert 0 and every perturbation of every evaluated question.
inline std::vector<AnswerLogEntry> answer_run(const PreparedRun& run, const PlanTable& plans, const Model& model,
                                              std::vector<PerturbationSkip>* skipped = nullptr) {
  std::vector<std::vector<AnswerLogEntry>> per_q(run.evaluated.size());
  std::vector<std::vector<PerturbationSkip>> skips(run.evaluated.size());
  static const std::vector<PlannedSwap> kNone;
  parallel_for(run.evaluated.size(), run.cfg.jobs, [&](std::size_t i) {
    const Question& q = run.evaluated[i];
    const FeatureFile& ff = run.bundle.features.at(q.image_id);
    const SceneGraph& g = run.bundle.graph(q.image_id);
    const MatchTable& mt = run.bundle.matches.at(q.image_id);
    auto& out = per_q[i];
    out.push_back({q.question_id, 0, model_answer(model, {ff.features, ff.detections, q, g, mt, nullptr})});
    auto it = plans.find(q.question_id);
    const auto& plan = it == plans.end() ? kNone : it->second;
    std::size_t next = 0;
    enumerate_perturbations(
        ff.features, q.image_id, plan, *run.donors,
        [&](const PerturbationRecord& rec, const FeatureMatrix& m) {
          while (next < plan.size() && plan[next].pert_id != rec.pert_id) ++next;
          out.push_back({q.question_id, rec.pert_id,
                         model_answer(model, {m, ff.detections, q, g, mt, &plan[next].candidate})});
        },
        [&](const PerturbationSkip& s) { skips[i].push_back(s); });
  });
  std::vector<AnswerLogEntry> logs;
  for (auto& v : per_q) logs.insert(logs.end(), v.begin(), v.end());
  if (skipped)
    for (auto& v : skips) skipped->insert(skipped->end(), v.begin(), v.end());
  return logs;
}

/// Drops planned swaps that cannot be emitted so the report only expects
/// answers for perturbations that exist.
inline PlanTable without_skipped(PlanTable plans, const std::vector<PerturbationSkip>& skipped) {
  for (const auto& s : skipped) {
    auto& v = plans[s.question_id];
    v.erase(std::remove_if(v.begin(), v.end(), [&](const PlannedSwap& p) { return p.pert_id == s.pert_id; }),
            v.end());
  }
  return plans;
}

inline RobustnessReport evaluate_run(const PreparedRun& run, const PlanTable& plans, const Model& model,
                                     std::vector<AnswerLogEntry>* logs_out = nullptr) {
  std::vector<PerturbationSkip> skipped;
  auto logs = answer_run(run, plans, model, &skipped);
  auto report = compute_report(run.bundle.questions, logs, without_skipped(plans, skipped), run.excluded, model.name());
  if (logs_out) *logs_out = std::move(logs);
  return report;
}

struct DiagnoseResult {
  std::vector<SwapPlan> plans;
  std::vector<AnswerLogEntry> logs;
  RobustnessReport report;
};

inline DiagnoseResult diagnose(const PreparedRun& run, const Model& model) {
  DiagnoseResult r;
  r.plans = plan_run(run);
  r.report = evaluate_run(run, flatten_plans(r.plans), model, &r.logs);
  return r;
}

/// Per-question augmentation of the evaluated questions' features.
struct AugmentedQuestion {
  std::string question_id;
  FeatureFile features;
  std::vector<SwapCandidate> applied;
};

inline std::vector<AugmentedQuestion> augment_run(const PreparedRun& run) {
  AugmentConfig cfg;
  cfg.p_swap = run.cfg.p_swap;
  cfg.p_class = run.cfg.p_class;
  cfg.k = run.cfg.k;
  cfg.threshold = run.cfg.sim_threshold;
  cfg.seed = run.cfg.seed;
  cfg.epoch = run.cfg.epoch;
  cfg.perfect_attributes = run.cfg.mode == FeatureMode::perfect;
  cfg.context_def = run.cfg.context_def;
  std::vector<std::optional<AugmentedQuestion>> out(run.evaluated.size());
  parallel_for(run.evaluated.size(), run.cfg.jobs, [&](std::size_t i) {
    const Question& q = run.evaluated[i];
    const FeatureFile& ff = run.bundle.features.at(q.image_id);
    auto res = augment_features(ff.features, run.contexts.at(q.question_id), q, run.bundle, run.table, cfg, *run.donors);
    out[i] = AugmentedQuestion{q.question_id, FeatureFile{std::move(res.features), ff.detections}, std::move(res.applied)};
  });
  std::vector<AugmentedQuestion> result;
  for (auto& o : out) result.push_back(std::move(*o));
  return result;
}

}  // namespace swapmix
