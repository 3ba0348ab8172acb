// Copyright 2026 The treerl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "treerl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace treerl {
namespace {

constexpr uint64_t kTagTask = 0xA1;
constexpr uint64_t kTagStep = 0xB2;
constexpr uint64_t kTagEval = 0xC3;

int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string CheckpointPath(const std::string& dir, int step) {
  return dir + "/ckpt_step" + std::to_string(step) + ".bin";
}

void AppendLine(std::ofstream& out, const std::string& line) {
  out << line << '\n';
  out.flush();
}

nlohmann::json HeaderJson(const ExperimentConfig& cfg, uint64_t seed) {
  return nlohmann::json{{"schema", "treerl.metrics.v1"},
                        {"run", cfg.run_name},
                        {"seed", seed},
                        {"scheme", RewardSchemeName(cfg.train.scheme.tag)},
                        {"config_hash", ConfigHash(cfg)}};
}

}  // namespace

std::string SeedDir(const ExperimentConfig& cfg, uint64_t seed) {
  return cfg.output_dir + "/" + cfg.run_name + "/seed" + std::to_string(seed);
}

std::string MetricsPath(const ExperimentConfig& cfg, uint64_t seed) {
  return SeedDir(cfg, seed) + "/metrics.jsonl";
}

double EvalGreedy(const PolicySet& policies, const ExperimentConfig& cfg,
                  uint64_t seed, int step) {
  double total = 0.0;
  for (int n = 0; n < cfg.eval_tasks; ++n) {
    const Task task = GenerateTask(
        MixSeed(seed, kTagEval, static_cast<uint64_t>(step),
                static_cast<uint64_t>(n)),
        cfg.task);
    const int answer =
        GreedyPipelineAnswer(policies, task, cfg.train.lengths);
    total += Evaluate(answer, task);
  }
  return total / cfg.eval_tasks;
}

namespace {

SeedRunResult RunSeedFrom(const ExperimentConfig& cfg, uint64_t seed,
                          PolicySet policies, int start_step,
                          bool append_metrics) {
  ValidateExperimentConfig(cfg);
  const std::string dir = SeedDir(cfg, seed);
  fs::create_directories(dir);

  const std::string metrics_path = MetricsPath(cfg, seed);
  std::ofstream metrics(metrics_path, append_metrics
                                          ? std::ios::app
                                          : std::ios::trunc);
  if (!metrics)
    throw std::runtime_error("runner: cannot open " + metrics_path);

  SeedRunResult result;
  result.seed = seed;
  result.metrics_path = metrics_path;

  if (!append_metrics) {
    AppendLine(metrics, HeaderJson(cfg, seed).dump());
    // Step-0 record: eval of the initial (uniform) policies.
    const double eval0 = EvalGreedy(policies, cfg, seed, 0);
    result.final_eval_reward = eval0;
    nlohmann::json rec{{"step", 0},
                       {"scheme", RewardSchemeName(cfg.train.scheme.tag)},
                       {"eval_reward", eval0},
                       {"ts_ms", NowMs()}};
    AppendLine(metrics, rec.dump());
  }

  for (int step = start_step + 1; step <= cfg.steps; ++step) {
    const Task task = GenerateTask(
        MixSeed(seed, kTagTask, static_cast<uint64_t>(step)), cfg.task);
    StepMetrics sm;
    try {
      policies = TrainStep(policies, task, cfg.train,
                           MixSeed(seed, kTagStep, static_cast<uint64_t>(step)),
                           &sm);
    } catch (const std::runtime_error&) {
      // Numeric failure: persist the last good parameters, then abort.
      SaveCheckpoint(dir + "/ckpt_abort_step" + std::to_string(step) + ".bin",
                     CheckpointData{static_cast<uint64_t>(step - 1),
                                    ConfigHash(cfg),
                                    {policies.builder, policies.summarizer,
                                     policies.responder}});
      throw;
    }

    nlohmann::json rec{
        {"step", step},
        {"scheme", RewardSchemeName(cfg.train.scheme.tag)},
        {"train_reward", sm.mean_leaf_reward},
        {"obj_builder", sm.objective[0]},
        {"obj_summarizer", sm.objective[1]},
        {"obj_responder", sm.objective[2]},
        {"grad_norms", sm.grad_norm},
        {"builder_len_ratio", sm.mean_builder_len_ratio},
        {"ts_ms", NowMs()}};
    const bool eval_now = (step % cfg.eval_cadence == 0) || step == cfg.steps;
    if (eval_now) {
      const double eval_reward = EvalGreedy(policies, cfg, seed, step);
      rec["eval_reward"] = eval_reward;
      result.final_eval_reward = eval_reward;
    }
    AppendLine(metrics, rec.dump());

    const bool checkpoint_now =
        step == cfg.steps || (cfg.checkpoint_cadence > 0 &&
                              step % cfg.checkpoint_cadence == 0);
    if (checkpoint_now) {
      const std::string path = CheckpointPath(dir, step);
      SaveCheckpoint(path,
                     CheckpointData{static_cast<uint64_t>(step),
                                    ConfigHash(cfg),
                                    {policies.builder, policies.summarizer,
                                     policies.responder}});
      result.final_checkpoint_path = path;
    }
  }

  if (cfg.steps == 0) {
    const std::string path = CheckpointPath(dir, 0);
    SaveCheckpoint(path, CheckpointData{0, ConfigHash(cfg),
                                        {policies.builder, policies.summarizer,
                                         policies.responder}});
    result.final_checkpoint_path = path;
  }
  return result;
}

}  // namespace

SeedRunResult RunSeed(const ExperimentConfig& cfg, uint64_t seed) {
  return RunSeedFrom(cfg, seed, MakePolicySet(cfg.task.VocabSize()), 0,
                     /*append_metrics=*/false);
}

SeedRunResult ResumeSeed(const ExperimentConfig& cfg, uint64_t seed,
                         const std::string& checkpoint_path) {
  const CheckpointData ckpt = LoadCheckpoint(checkpoint_path);
  if (ckpt.config_hash != ConfigHash(cfg))
    throw std::invalid_argument(
        "runner: checkpoint config hash does not match the config file");
  if (ckpt.agents.size() != 3)
    throw std::runtime_error("runner: checkpoint must hold three agents");
  PolicySet policies{ckpt.agents[0], ckpt.agents[1], ckpt.agents[2]};
  return RunSeedFrom(cfg, seed, std::move(policies),
                     static_cast<int>(ckpt.step), /*append_metrics=*/true);
}

std::vector<SeedRunResult> RunExperiment(const ExperimentConfig& cfg) {
  std::vector<SeedRunResult> results;
  for (uint64_t seed : cfg.seeds) results.push_back(RunSeed(cfg, seed));
  return results;
}

std::vector<SweepCell> RunSweep(const ExperimentConfig& base,
                                const std::string& axis,
                                const std::vector<std::string>& values) {
  if (values.empty())
    throw std::invalid_argument("sweep: values must be non-empty");
  std::vector<SweepCell> cells;
  for (const std::string& value : values) {
    ExperimentConfig cfg = base;
    if (axis == "scheme") {
      cfg.train.scheme.tag = ParseRewardScheme(value);
    } else if (axis == "G" || axis == "J" || axis == "K") {
      int parsed = 0;
      try {
        parsed = std::stoi(value);
      } catch (const std::exception&) {
        throw std::invalid_argument("sweep: bad integer value '" + value +
                                    "' for axis " + axis);
      }
      if (axis == "G") cfg.train.branching.G = parsed;
      if (axis == "J") cfg.train.branching.J = parsed;
      if (axis == "K") cfg.train.branching.K = parsed;
    } else {
      throw std::invalid_argument("sweep: unknown axis '" + axis +
                                  "' (expected scheme, G, J or K)");
    }
    cfg.run_name = base.run_name + "_" + axis + value;
    ValidateExperimentConfig(cfg);

    std::vector<double> finals;
    for (const SeedRunResult& r : RunExperiment(cfg)) {
      finals.push_back(r.final_eval_reward);
    }
    SweepCell cell;
    cell.axis = axis;
    cell.value = value;
    cell.mean_final_eval = Mean(finals);
    cell.std_final_eval = PopulationStd(finals);
    cell.n_seeds = static_cast<int>(finals.size());
    cells.push_back(cell);
  }

  fs::create_directories(base.output_dir);
  const std::string csv_path =
      base.output_dir + "/" + base.run_name + "_sweep_" + axis + ".csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("sweep: cannot open " + csv_path);
  csv << "axis,value,mean_final_eval,std_final_eval,n_seeds\n";
  for (const SweepCell& cell : cells) {
    csv << cell.axis << ',' << cell.value << ',' << cell.mean_final_eval << ','
        << cell.std_final_eval << ',' << cell.n_seeds << '\n';
  }
  return cells;
}

namespace {

struct ParsedMetrics {
  nlohmann::json header;
  std::vector<nlohmann::json> records;
};

ParsedMetrics ParseMetricsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  ParsedMetrics parsed;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("metrics: corrupt line in " + path);
    if (first) {
      if (!j.contains("schema") || j["schema"] != "treerl.metrics.v1")
        throw std::runtime_error("metrics: missing schema header in " + path);
      parsed.header = std::move(j);
      first = false;
    } else {
      parsed.records.push_back(std::move(j));
    }
  }
  if (first) throw std::runtime_error("metrics: empty file " + path);
  return parsed;
}

}  // namespace

RunSummary SummarizeMetricsFile(const std::string& path) {
  const ParsedMetrics parsed = ParseMetricsFile(path);
  RunSummary summary;
  summary.run = parsed.header.value("run", "");
  summary.seed = parsed.header.value("seed", 0ULL);
  summary.scheme = parsed.header.value("scheme", "");
  for (const nlohmann::json& rec : parsed.records) {
    const int step = rec.value("step", 0);
    summary.last_step = std::max(summary.last_step, step);
    if (rec.contains("eval_reward")) {
      const double eval = rec["eval_reward"].get<double>();
      summary.final_eval = eval;
      if (summary.steps_to_threshold < 0 && eval >= 0.9) {
        summary.steps_to_threshold = step;
      }
    }
  }
  return summary;
}

uint64_t MetricsFileHash(const std::string& path) {
  const ParsedMetrics parsed = ParseMetricsFile(path);
  std::string canonical = parsed.header.dump();
  canonical += '\n';
  for (nlohmann::json rec : parsed.records) {
    rec.erase("ts_ms");
    canonical += rec.dump();
    canonical += '\n';
  }
  return Fnv1a64(canonical);
}

void WriteReport(const std::string& run_dir) {
  std::vector<std::string> metrics_files;
  for (const fs::directory_entry& entry :
       fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.jsonl") {
      metrics_files.push_back(entry.path().string());
    }
  }
  if (metrics_files.empty())
    throw std::runtime_error("report: no metrics.jsonl files under " + run_dir);
  std::sort(metrics_files.begin(), metrics_files.end());

  std::vector<std::string> bad_files;
  std::vector<RunSummary> summaries;
  std::vector<std::pair<RunSummary, ParsedMetrics>> parsed_all;
  for (const std::string& path : metrics_files) {
    try {
      parsed_all.emplace_back(SummarizeMetricsFile(path),
                              ParseMetricsFile(path));
      summaries.push_back(parsed_all.back().first);
    } catch (const std::runtime_error&) {
      bad_files.push_back(path);
    }
  }
  if (!bad_files.empty()) {
    std::string msg = "report: corrupt metrics files:";
    for (const std::string& f : bad_files) msg += " " + f;
    throw std::runtime_error(msg);
  }

  std::ofstream summary_csv(run_dir + "/summary.csv", std::ios::trunc);
  summary_csv << "run,seed,scheme,last_step,final_eval,steps_to_0.9\n";
  for (const RunSummary& s : summaries) {
    summary_csv << s.run << ',' << s.seed << ',' << s.scheme << ','
                << s.last_step << ',' << s.final_eval << ',';
    if (s.steps_to_threshold >= 0) {
      summary_csv << s.steps_to_threshold;
    } else {
      summary_csv << "not_reached";
    }
    summary_csv << '\n';
  }

  std::ofstream curves(run_dir + "/curves.csv", std::ios::trunc);
  curves << "run,seed,step,train_reward,eval_reward\n";
  for (const auto& [summary, parsed] : parsed_all) {
    for (const nlohmann::json& rec : parsed.records) {
      curves << summary.run << ',' << summary.seed << ','
             << rec.value("step", 0) << ',';
      if (rec.contains("train_reward")) {
        curves << rec["train_reward"].get<double>();
      }
      curves << ',';
      if (rec.contains("eval_reward")) {
        curves << rec["eval_reward"].get<double>();
      }
      curves << '\n';
    }
  }

  // Per-run aggregate over seeds.
  std::ofstream md(run_dir + "/report.md", std::ios::trunc);
  md << "# Run report\n\n";
  md << "| run | scheme | seeds | mean final eval | min | max |\n";
  md << "|---|---|---|---|---|---|\n";
  std::vector<std::string> run_names;
  for (const RunSummary& s : summaries) {
    if (std::find(run_names.begin(), run_names.end(), s.run) ==
        run_names.end()) {
      run_names.push_back(s.run);
    }
  }
  for (const std::string& run : run_names) {
    std::vector<double> finals;
    std::string scheme;
    for (const RunSummary& s : summaries) {
      if (s.run == run) {
        finals.push_back(s.final_eval);
        scheme = s.scheme;
      }
    }
    double lo = finals[0], hi = finals[0];
    for (double f : finals) {
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    md << "| " << run << " | " << scheme << " | " << finals.size() << " | "
       << Mean(finals) << " | " << lo << " | " << hi << " |\n";
  }
  md << "\nPer-seed details are in `summary.csv`; reward curves are in "
        "`curves.csv`.\n";
}

namespace {

bool Check(std::ostream& out, const std::string& name, bool ok) {
  out << (ok ? "ok   " : "FAIL ") << name << '\n';
  return ok;
}

}  // namespace

bool VerifyOracles(std::ostream& out) {
  bool all_ok = true;

  // env: generator gold answer vs an independent last-write-wins scan.
  {
    TaskGenConfig cfg;
    bool ok = true;
    for (uint64_t seed = 0; seed < 200 && ok; ++seed) {
      const Task task = GenerateTask(seed, cfg);
      int gold = -1;
      for (const Record& rec : task.history) {
        if (!rec.is_noise && rec.slot == task.query_slot) gold = rec.value;
      }
      ok = gold == task.gold_answer && Evaluate(task.GoldAnswerToken(), task) == 1.0;
      if (ok) {
        const Task again = GenerateTask(seed, cfg);
        ok = TaskToJsonLine(task) == TaskToJsonLine(again);
      }
    }
    all_ok &= Check(out, "env: gold answer scan + determinism", ok);
  }

  // policy: softmax normalization over the vocabulary.
  {
    bool ok = true;
    Rng rng(99);
    for (int trial = 0; trial < 50 && ok; ++trial) {
      PolicyParams params = MakePolicyParams(AgentRole::kResponder, 9);
      AddWeightNoise(&params, rng, 1.0);
      Context ctx{AgentRole::kResponder, {0, 3, 5, 2}};
      double total = 0.0;
      for (int tok = 0; tok < 9; ++tok) {
        total += std::exp(LogProb(params, ctx, {tok})[0]);
      }
      ok = std::abs(total - 1.0) < 1e-10;
    }
    all_ok &= Check(out, "policy: softmax normalization", ok);
  }

  // rollout: node counts and determinism.
  {
    TaskGenConfig tcfg;
    const Task task = GenerateTask(5, tcfg);
    PolicySet policies = MakePolicySet(tcfg.VocabSize());
    Rng rng(123);
    AddWeightNoise(&policies.builder, rng, 0.3);
    AddWeightNoise(&policies.summarizer, rng, 0.3);
    AddWeightNoise(&policies.responder, rng, 0.3);
    OutputLengths lens;
    RolloutTree t1 = SampleRolloutTree(policies, task, {3, 2, 4}, lens, 77);
    RolloutTree t2 = SampleRolloutTree(policies, task, {3, 2, 4}, lens, 77);
    ScoreLeaves(&t1);
    ScoreLeaves(&t2);
    bool ok = t1.builders.size() == 3 && t1.summarizers.size() == 6 &&
              t1.responders.size() == 24 &&
              TreeToJsonLines(t1) == TreeToJsonLines(t2);
    all_ok &= Check(out, "rollout: structure + determinism", ok);

    // credit: tower property at lambda_len = 0.
    const CreditMap credits = AssignCredit(t1, 0.0);
    bool tower = true;
    for (int i = 0; i < 3 && tower; ++i) {
      double q2_mean = 0.0;
      for (int j = 0; j < 2; ++j) q2_mean += credits.q2[t1.SummarizerIndex(i, j)];
      q2_mean /= 2.0;
      tower = std::abs(credits.q1[i] - q2_mean) <= 1e-12;
    }
    all_ok &= Check(out, "credit: tower property", tower);
  }

  // optim: analytic gradient vs central finite differences.
  {
    TaskGenConfig tcfg;
    tcfg.n_slots = 2;
    tcfg.n_values = 2;
    tcfg.history_len = 4;
    tcfg.noise_fraction = 0.25;
    const Task task = GenerateTask(11, tcfg);
    PolicySet policies = MakePolicySet(tcfg.VocabSize());
    Rng rng(321);
    AddWeightNoise(&policies.builder, rng, 0.2);
    AddWeightNoise(&policies.summarizer, rng, 0.2);
    AddWeightNoise(&policies.responder, rng, 0.2);
    OutputLengths lens{6, 4, 1};
    RolloutTree tree = SampleRolloutTree(policies, task, {3, 2, 2}, lens, 3);
    ScoreLeaves(&tree);
    const CreditMap credits = AssignCredit(tree, -1.0);
    Rng sel(7);
    const TrajectoryGroup group = SelectGroup(tree, credits, sel);
    const AdvantageSet adv = NormalizeAdvantages(group, 1e-6);
    AddWeightNoise(&policies.responder, rng, 0.01);  // off-policy point
    const ObjectiveResult res = GrpoObjective(group, adv, policies, 0.2);

    bool ok = true;
    const double h = 1e-5;
    for (int probe = 0; probe < 20 && ok; ++probe) {
      const size_t idx =
          static_cast<size_t>(rng.NextInt(
              static_cast<int>(policies.responder.weights.data.size())));
      PolicySet plus = policies, minus = policies;
      plus.responder.weights.data[idx] += h;
      minus.responder.weights.data[idx] -= h;
      const double fd = (GrpoObjective(group, adv, plus, 0.2).objective[2] -
                         GrpoObjective(group, adv, minus, 0.2).objective[2]) /
                        (2 * h);
      const double an = res.grads.responder.data[idx];
      ok = std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-3});
    }
    all_ok &= Check(out, "optim: finite-difference gradient", ok);
  }

  return all_ok;
}

}  // namespace treerl
