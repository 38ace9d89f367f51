// swapmix: command-line driver.
//
// Exit codes: 0 ok, 1 data error, 2 usage error.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "swapmix/swapmix.hpp"

namespace fs = std::filesystem;
using namespace swapmix;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Extra {
  std::string plans;
  std::string answers;
  bool adversarial = false;
  bool print_config = false;
};

void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

void require_file(const std::string& value, const char* flag) {
  require_flag(value, flag);
  if (!fs::is_regular_file(value)) throw UsageError(std::string(flag) + ": no such file: " + value);
}

void require_inputs(const RunConfig& cfg) {
  require_file(cfg.scene_graphs, "--scene-graphs");
  require_file(cfg.questions, "--questions");
  require_file(cfg.embeddings, "--embeddings");
  if (cfg.mode == FeatureMode::frcnn) {
    require_flag(cfg.features, "--features");
    if (!fs::is_directory(cfg.features)) throw UsageError("--features: no such directory: " + cfg.features);
  }
}

fs::path out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  return cfg.out;
}

void write_reports(const fs::path& dir, const RobustnessReport& r) {
  write_file_atomic(dir / "report.json", report_to_json(r));
  write_file_atomic(dir / "report.txt", report_to_text(r));
  write_file_atomic(dir / "report.csv", report_to_csv(r));
}

std::string plans_path(const RunConfig& cfg, const Extra& x) {
  return x.plans.empty() ? (fs::path(cfg.out) / "plans.jsonl").string() : x.plans;
}

PlanTable load_plans(const RunConfig& cfg, const Extra& x) {
  const auto path = plans_path(cfg, x);
  if (!fs::is_regular_file(path)) throw UsageError("--plans: no such file: " + path);
  return parse_plans_jsonl(read_file(path));
}

int cmd_diagnose(const RunConfig& cfg) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto dir = out_dir(cfg);
  if (cfg.model == ModelKind::bridge) {
    const auto plans = flatten_plans(plan_run(*run));
    const fs::path job = dir / "bridge";
    if (fs::exists(job / "answers.jsonl")) {
      const auto emitted = parse_plans_jsonl(read_file(job / "plans.jsonl"));
      const auto logs = bridge_import(job, run->evaluated_ids(), emitted);
      const auto report = compute_report(run->bundle.questions, logs, emitted, run->excluded, "bridge");
      write_file_atomic(dir / "plans.jsonl", plan_table_to_jsonl(emitted));
      write_file_atomic(dir / "answers.jsonl", answers_to_jsonl(logs));
      write_reports(dir, report);
      std::cout << report_to_text(report);
      return 0;
    }
    bridge_export(job, run->evaluated, plans, run->bundle, *run->donors);
    write_file_atomic(dir / "plans.jsonl", read_file(job / "plans.jsonl"));
    std::cout << "exported bridge job to " << job.string()
              << "; run the external model, then rerun diagnose to import answers.jsonl\n";
    return 0;
  }
  const auto model = make_model(*run, cfg.model);
  const auto result = diagnose(*run, *model);
  write_file_atomic(dir / "plans.jsonl", plans_to_jsonl(result.plans));
  write_file_atomic(dir / "answers.jsonl", answers_to_jsonl(result.logs));
  write_reports(dir, result.report);
  if (!cfg.dump_features.empty())
    dump_perturbations(cfg.dump_features, run->evaluated, flatten_plans(result.plans), run->bundle, *run->donors);
  std::cout << report_to_text(result.report);
  return 0;
}

int cmd_plan(const RunConfig& cfg) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto plans = plan_run(*run);
  write_file_atomic(out_dir(cfg) / "plans.jsonl", plans_to_jsonl(plans));
  std::size_t n = 0;
  for (const auto& p : plans) n += p.size();
  std::cout << "planned " << n << " perturbations for " << plans.size() << " questions\n";
  return 0;
}

int cmd_perturb(const RunConfig& cfg, const Extra& x) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto plans = load_plans(cfg, x);
  const fs::path dir = cfg.dump_features.empty() ? out_dir(cfg) / "features" : fs::path(cfg.dump_features);
  std::vector<PerturbationSkip> skipped;
  const auto emitted = dump_perturbations(dir, run->evaluated, plans, run->bundle, *run->donors, &skipped);
  for (const auto& s : skipped) std::cerr << "skip (" << s.question_id << "," << s.pert_id << "): " << s.reason << "\n";
  std::size_t n = 0;
  for (const auto& [qid, v] : emitted) n += v.size();
  std::cout << "wrote " << n << " perturbed matrices to " << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const Extra& x) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto plans = load_plans(cfg, x);
  const auto dir = out_dir(cfg);
  RobustnessReport report;
  if (!x.answers.empty()) {
    if (!fs::is_regular_file(x.answers)) throw UsageError("--answers: no such file: " + x.answers);
    const auto logs = parse_answers_jsonl(read_file(x.answers));
    report = compute_report(run->bundle.questions, logs, plans, run->excluded, std::string(to_string(cfg.model)));
  } else {
    if (cfg.model == ModelKind::bridge) throw UsageError("--model bridge needs --answers");
    const auto model = make_model(*run, cfg.model);
    std::vector<AnswerLogEntry> logs;
    report = evaluate_run(*run, plans, *model, &logs);
    write_file_atomic(dir / "answers.jsonl", answers_to_jsonl(logs));
  }
  write_reports(dir, report);
  std::cout << report_to_text(report);
  return 0;
}

int cmd_augment(const RunConfig& cfg) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto dir = out_dir(cfg);
  std::string manifest;
  for (const auto& a : augment_run(*run)) {
    write_feature_file(dir / (a.question_id + ".smfx"), a.features.features, a.features.boxes());
    nlohmann::json swaps = nlohmann::json::array();
    for (const auto& c : a.applied)
      swaps.push_back({{"detection_index", c.source_detection_index},
                       {"kind", to_string(c.kind)},
                       {"donor_image", c.donor.image_id},
                       {"donor_object", c.donor.object_id},
                       {"donor_class", c.donor_class},
                       {"donor_attributes", std::vector<std::string>(c.donor_attributes.begin(), c.donor_attributes.end())},
                       {"padded", c.padded}});
    manifest += nlohmann::json{{"question_id", a.question_id}, {"epoch", cfg.epoch}, {"swaps", swaps}}.dump() + "\n";
  }
  write_file_atomic(dir / "manifest.jsonl", manifest);
  std::cout << "augmented " << run->evaluated.size() << " questions into " << dir.string() << "\n";
  return 0;
}

int cmd_export_bridge(const RunConfig& cfg, const Extra& x) {
  require_inputs(cfg);
  auto run = prepare_run(cfg);
  const auto plans = x.plans.empty() ? flatten_plans(plan_run(*run)) : load_plans(cfg, x);
  std::vector<PerturbationSkip> skipped;
  bridge_export(out_dir(cfg), run->evaluated, plans, run->bundle, *run->donors, &skipped);
  for (const auto& s : skipped) std::cerr << "skip (" << s.question_id << "," << s.pert_id << "): " << s.reason << "\n";
  std::cout << "exported " << run->evaluated.size() << " questions to " << cfg.out << "\n";
  return 0;
}

int cmd_import_bridge(const RunConfig& cfg) {
  require_file(cfg.questions, "--questions");
  const fs::path job = cfg.out;
  if (!fs::is_regular_file(job / "questions.jsonl"))
    throw UsageError("--out: " + job.string() + " is not a bridge job directory");
  const auto questions = parse_questions(cfg.questions);
  const auto ids = read_bridge_question_ids(job);
  const auto plans = parse_plans_jsonl(read_file(job / "plans.jsonl"));
  const auto logs = bridge_import(job, ids, plans);
  const std::set<std::string> exported(ids.begin(), ids.end());
  std::vector<Exclusion> excluded;
  for (const auto& q : questions)
    if (!exported.contains(q.question_id)) excluded.push_back({q.question_id, "not in bridge job"});
  const auto report = compute_report(questions, logs, plans, excluded, "bridge");
  write_reports(job, report);
  std::cout << report_to_text(report);
  return 0;
}

int cmd_make_fixture(const RunConfig& cfg, const Extra& x) {
  auto opt = x.adversarial ? adversarial_fixture_options(cfg.seed) : FixtureOptions{};
  opt.seed = cfg.seed;
  write_fixture(make_fixture(opt), cfg.out);
  std::cout << "wrote fixture to " << cfg.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SwapMix context-reliance diagnostics for VQA models"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  RunConfig cfg;
  Extra x;

  const std::map<std::string, FeatureMode> modes{{"frcnn", FeatureMode::frcnn}, {"perfect", FeatureMode::perfect}};
  const std::map<std::string, ContextDefinition> defs{{"paper", ContextDefinition::paper},
                                                      {"strict", ContextDefinition::strict}};
  const std::map<std::string, ModelKind> models{
      {"symbolic", ModelKind::symbolic}, {"baseline", ModelKind::baseline}, {"bridge", ModelKind::bridge}};

  app.add_option("--scene-graphs", cfg.scene_graphs, "GQA scene graph JSON");
  app.add_option("--questions", cfg.questions, "GQA question JSON");
  app.add_option("--features", cfg.features, "directory of {image_id}.smfx detector features");
  app.add_option("--embeddings", cfg.embeddings, "GloVe-format word embeddings");
  app.add_option("--k", cfg.k, "swaps per context object and kind")->capture_default_str();
  app.add_option("--sim-threshold", cfg.sim_threshold, "minimum cosine similarity of a class/attribute candidate")
      ->capture_default_str();
  app.add_option("--iou-threshold", cfg.iou_threshold, "minimum IoU to match a detection")->capture_default_str();
  app.add_option("--seed", cfg.seed, "run seed")->capture_default_str();
  std::string mode = "frcnn", context_def = "paper", model = "symbolic";
  app.add_option("--mode", mode, "frcnn or perfect")->check(CLI::IsMember({"frcnn", "perfect"}))->capture_default_str();
  app.add_option("--context-def", context_def, "paper or strict")
      ->check(CLI::IsMember({"paper", "strict"}))
      ->capture_default_str();
  app.add_option("--model", model, "symbolic, baseline or bridge")
      ->check(CLI::IsMember({"symbolic", "baseline", "bridge"}))
      ->capture_default_str();
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "worker threads")->capture_default_str();
  app.add_option("--dump-features", cfg.dump_features, "write perturbed matrices as {qid}.{pert_id}.smfx here");
  app.add_option("--p-swap", cfg.p_swap, "augmentation: per-object swap probability")->capture_default_str();
  app.add_option("--p-class", cfg.p_class, "augmentation: class-swap probability given a swap")->capture_default_str();
  app.add_option("--epoch", cfg.epoch, "augmentation epoch")->capture_default_str();
  app.add_flag("--print-config", x.print_config, "print the resolved configuration as JSON and exit");

  auto* diagnose_cmd = app.add_subcommand("diagnose", "context, plan, perturb, answer and report in one run");
  auto* plan_cmd = app.add_subcommand("plan", "write plans.jsonl");
  auto* perturb_cmd = app.add_subcommand("perturb", "write perturbed SMFX matrices for a plan");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "report from a plan and an answer log");
  auto* augment_cmd = app.add_subcommand("augment", "write augmented SMFX per question plus manifest.jsonl");
  auto* export_cmd = app.add_subcommand("export-bridge", "write a job directory for an external model");
  auto* import_cmd = app.add_subcommand("import-bridge", "report from a completed bridge job (--out is the job)");
  auto* fixture_cmd = app.add_subcommand("make-fixture", "write a synthetic dataset");
  for (auto* c : {perturb_cmd, evaluate_cmd, export_cmd})
    c->add_option("--plans", x.plans, "plans.jsonl (default: OUT/plans.jsonl)");
  evaluate_cmd->add_option("--answers", x.answers, "answers.jsonl; without it the built-in model answers");
  fixture_cmd->add_flag("--adversarial", x.adversarial, "small iid features for the baseline exhibit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  cfg.mode = modes.at(mode);
  cfg.context_def = defs.at(context_def);
  cfg.model = models.at(model);

  if (x.print_config) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  try {
    if (diagnose_cmd->parsed()) return cmd_diagnose(cfg);
    if (plan_cmd->parsed()) return cmd_plan(cfg);
    if (perturb_cmd->parsed()) return cmd_perturb(cfg, x);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, x);
    if (augment_cmd->parsed()) return cmd_augment(cfg);
    if (export_cmd->parsed()) return cmd_export_bridge(cfg, x);
    if (import_cmd->parsed()) return cmd_import_bridge(cfg);
    if (fixture_cmd->parsed()) return cmd_make_fixture(cfg, x);
    std::cerr << app.help();
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
