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
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the exit status is the number of failed criteria.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "treerl/runner.hpp"

namespace fs = std::filesystem;

namespace treerl {
namespace {

// Frozen experiment hyperparameters for the slot-recall task. The learning
// rate was tuned once on this task and matches configs/slot_recall.json.
const TaskGenConfig kTask{8, 4, 20, 0.5, 0.2};
const OutputLengths kLens{42, 12, 1};
constexpr double kLearningRate = 0.03;
constexpr int kUpdatesPerRollout = 1;
constexpr int kBudgetSteps = 2000;
constexpr int kEvalTasks = 100;
constexpr int kEvalCadence = 50;
constexpr double kThreshold = 0.9;

PolicySet RandomPolicies(int vocab, uint64_t seed, double scale) {
  PolicySet policies = MakePolicySet(vocab);
  Rng rng(seed);
  AddWeightNoise(&policies.builder, rng, scale);
  AddWeightNoise(&policies.summarizer, rng, scale);
  AddWeightNoise(&policies.responder, rng, scale);
  return policies;
}

TrainConfig BaseTrainConfig(RewardScheme scheme) {
  TrainConfig cfg;
  cfg.branching = {8, 2, 2};
  cfg.lengths = kLens;
  cfg.lambda_len = -1.0;
  cfg.eps_clip = 0.2;
  cfg.learning_rate = kLearningRate;
  cfg.updates_per_rollout = kUpdatesPerRollout;
  cfg.scheme.tag = scheme;
  return cfg;
}

double EvalAt(const PolicySet& policies, const TaskGenConfig& task,
              const OutputLengths& lens, uint64_t seed, int step, int n_tasks) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.train.lengths = lens;
  cfg.eval_tasks = n_tasks;
  return EvalGreedy(policies, cfg, seed, step);
}

struct TrainOutcome {
  double final_eval = 0.0;
  int steps_to_threshold = -1;
};

// Trains one seed on the slot-recall task with the shared seeding layout
// of the experiment runner (task stream tagged 0xA1, steps 0xB2).
TrainOutcome TrainOneSeed(uint64_t seed, const TrainConfig& cfg, int steps,
                          bool stop_at_threshold) {
  PolicySet policies = MakePolicySet(kTask.VocabSize());
  TrainOutcome outcome;
  for (int step = 1; step <= steps; ++step) {
    const Task task =
        GenerateTask(MixSeed(seed, 0xA1, static_cast<uint64_t>(step)), kTask);
    policies = TrainStep(policies, task, cfg,
                         MixSeed(seed, 0xB2, static_cast<uint64_t>(step)),
                         nullptr);
    if (step % kEvalCadence == 0 || step == steps) {
      outcome.final_eval =
          EvalAt(policies, kTask, cfg.lengths, seed, step, kEvalTasks);
      if (outcome.steps_to_threshold < 0 &&
          outcome.final_eval >= kThreshold) {
        outcome.steps_to_threshold = step;
        if (stop_at_threshold) return outcome;
      }
    }
  }
  return outcome;
}

std::vector<double> FinalEvals(const TrainConfig& cfg, int steps,
                               int n_seeds) {
  std::vector<double> finals;
  for (uint64_t seed = 1; seed <= static_cast<uint64_t>(n_seeds); ++seed) {
    finals.push_back(TrainOneSeed(seed, cfg, steps, false).final_eval);
  }
  return finals;
}

// 1. Rollout trees have exactly G*J*K leaves and correct per-node contexts.
bool StructureSuite() {
  TaskGenConfig tcfg{3, 3, 6, 0.3, 0.5};
  OutputLengths lens{10, 5, 1};
  for (int G : {2, 4, 8}) {
    for (int J : {1, 2, 4}) {
      for (int K : {1, 2, 4}) {
        const Task task = GenerateTask(G * 100 + J * 10 + K, tcfg);
        const PolicySet policies =
            RandomPolicies(tcfg.VocabSize(), G + J + K, 0.4);
        const RolloutTree tree =
            SampleRolloutTree(policies, task, {G, J, K}, lens, 7);
        if (static_cast<int>(tree.responders.size()) != G * J * K)
          return false;
        if (tree.history_tokens != SerializeHistory(task)) return false;
        for (int i = 0; i < G; ++i) {
          for (int j = 0; j < J; ++j) {
            const SampledSequence& a1 = tree.builders[i];
            const SampledSequence& a2 =
                tree.summarizers[tree.SummarizerIndex(i, j)];
            if (SummarizerContext(a1).tokens != a1.tokens) return false;
            std::vector<int> expected = {task.QueryToken()};
            expected.insert(expected.end(), a1.tokens.begin(),
                            a1.tokens.end());
            expected.insert(expected.end(), a2.tokens.begin(),
                            a2.tokens.end());
            if (ResponderContext(task, a1, a2).tokens != expected)
              return false;
          }
        }
      }
    }
  }
  return true;
}

// 2. q2 = mean of leaf rewards, q1 (lambda = 0) = mean of q2, over 500
//    random scored trees, within 1e-12.
bool CreditTower() {
  TaskGenConfig tcfg{2, 2, 4, 0.25, 0.5};
  OutputLengths lens{6, 3, 1};
  Rng shape_rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int G = 2 + shape_rng.NextInt(4);
    const int J = 1 + shape_rng.NextInt(4);
    const int K = 1 + shape_rng.NextInt(4);
    const Task task = GenerateTask(trial, tcfg);
    const PolicySet policies =
        RandomPolicies(tcfg.VocabSize(), trial + 900, 0.5);
    RolloutTree tree =
        SampleRolloutTree(policies, task, {G, J, K}, lens, trial);
    ScoreLeaves(&tree);
    const CreditMap credits = AssignCredit(tree, 0.0);
    for (int i = 0; i < G; ++i) {
      double q2_mean = 0.0;
      for (int j = 0; j < J; ++j) {
        double leaf_mean = 0.0;
        for (int k = 0; k < K; ++k)
          leaf_mean += tree.leaf_rewards[tree.LeafIndex(i, j, k)];
        leaf_mean /= K;
        const double q2 = credits.q2[tree.SummarizerIndex(i, j)];
        if (std::abs(q2 - leaf_mean) > 1e-12) return false;
        q2_mean += q2;
      }
      if (std::abs(credits.q1[i] - q2_mean / J) > 1e-12) return false;
    }
  }
  return true;
}

// 3. Exhaustive E[R | a1] on a tiny frozen policy vs the empirical subtree
//    mean with 4096 branches, within 3 standard errors on >= 95 of 100
//    seeds. The environment's smallest vocabulary is 6 (one slot, two
//    values, two flags, end-of-sequence).
bool MonteCarloOracle() {
  const TaskGenConfig tcfg{1, 2, 2, 0.0, 0.5};
  const int V = tcfg.VocabSize();
  const OutputLengths lens{2, 2, 1};
  const int J = 64, K = 64;
  int agree = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Task task = GenerateTask(seed, tcfg);
    const PolicySet policies = RandomPolicies(V, seed + 5000, 0.6);
    RolloutTree tree =
        SampleRolloutTree(policies, task, {1, J, K}, lens, seed + 31);
    ScoreLeaves(&tree);
    double empirical = 0.0;
    for (double r : tree.leaf_rewards) empirical += r;
    empirical /= tree.NumLeaves();

    // Exhaustive enumeration over the fixed a1 of this tree. Sequences
    // are one end-of-sequence token or two arbitrary tokens.
    const SampledSequence& a1 = tree.builders[0];
    const Context summ_ctx = SummarizerContext(a1);
    std::vector<std::vector<int>> a2s;
    a2s.push_back({V - 1});
    for (int t0 = 0; t0 < V - 1; ++t0) {
      for (int t1 = 0; t1 < V; ++t1) a2s.push_back({t0, t1});
    }
    double exact = 0.0, total_p = 0.0;
    std::vector<double> p_a2, r_a2, var_a2;
    for (const std::vector<int>& a2 : a2s) {
      double logp = 0.0;
      for (double lp : LogProb(policies.summarizer, summ_ctx, a2)) logp += lp;
      const double p2 = std::exp(logp);
      SampledSequence a2_seq;
      a2_seq.tokens = a2;
      const Context resp_ctx = ResponderContext(task, a1, a2_seq);
      double mean_r = 0.0, mean_r2 = 0.0;
      for (int t = 0; t < V; ++t) {
        const double p3 =
            std::exp(LogProb(policies.responder, resp_ctx, {t})[0]);
        const double r = Evaluate(t, task);
        mean_r += p3 * r;
        mean_r2 += p3 * r * r;
      }
      exact += p2 * mean_r;
      total_p += p2;
      p_a2.push_back(p2);
      r_a2.push_back(mean_r);
      var_a2.push_back(mean_r2 - mean_r * mean_r);
    }
    if (std::abs(total_p - 1.0) > 1e-9) return false;

    double var_between = 0.0, mean_within = 0.0;
    for (size_t n = 0; n < p_a2.size(); ++n) {
      var_between += p_a2[n] * (r_a2[n] - exact) * (r_a2[n] - exact);
      mean_within += p_a2[n] * var_a2[n];
    }
    const double se =
        std::sqrt(var_between / J + mean_within / (1.0 * J * K));
    if (se == 0.0 ? std::abs(empirical - exact) <= 1e-12
                  : std::abs(empirical - exact) <= 3.0 * se) {
      ++agree;
    }
  }
  return agree >= 95;
}

// 4. Standardized advantages: mean ~ 0, std ~ s/(s + eps); zero-variance
//    groups are all zero.
bool AdvantageNormalization() {
  Rng rng(23);
  const double eps = 1e-6;
  int tested = 0;
  while (tested < 1000) {
    const int G = 2 + rng.NextInt(7);
    TrajectoryGroup group;
    group.trajectories.resize(G);
    group.q1.resize(G);
    group.q2.resize(G);
    group.q3.resize(G);
    for (int i = 0; i < G; ++i) {
      group.q1[i] = 4.0 * rng.NextDouble() - 2.0;
      group.q2[i] = rng.NextDouble();
      group.q3[i] = rng.NextDouble();
    }
    const double s = PopulationStd(group.q1);
    if (s <= 1e-3) continue;
    ++tested;
    const AdvantageSet adv = NormalizeAdvantages(group, eps);
    if (std::abs(Mean(adv.a1)) > 1e-9) return false;
    if (std::abs(PopulationStd(adv.a1) - s / (s + eps)) > 1e-6) return false;
  }
  TrajectoryGroup flat;
  flat.trajectories.resize(3);
  flat.q1 = flat.q2 = flat.q3 = {0.7, 0.7, 0.7};
  const AdvantageSet adv = NormalizeAdvantages(flat, eps);
  for (double a : adv.a1) {
    if (a != 0.0) return false;
  }
  return true;
}

// 5. Analytic surrogate gradient vs central finite differences at 50
//    random off-policy points per agent role; relative error <= 1e-4 with
//    clip-boundary positions excluded.
bool GradientOracle() {
  const double h = 1e-5;
  const double eps_clip = 0.2;
  TaskGenConfig tcfg{3, 3, 8, 0.25, 0.5};
  OutputLengths lens{12, 6, 1};
  int tested = 0;
  for (uint64_t seed = 0; tested < 50 && seed < 150; ++seed) {
    const Task task = GenerateTask(seed + 400, tcfg);
    PolicySet sampling = RandomPolicies(tcfg.VocabSize(), seed + 40, 0.3);
    RolloutTree tree =
        SampleRolloutTree(sampling, task, {4, 2, 2}, lens, seed + 2);
    ScoreLeaves(&tree);
    const CreditMap credits = AssignCredit(tree, -1.0);
    Rng sel(MixSeed(seed, 0xF1ULL));
    const TrajectoryGroup group = SelectGroup(tree, credits, sel);
    const AdvantageSet adv = NormalizeAdvantages(group, 1e-6);

    PolicySet current = sampling;
    Rng rng(MixSeed(seed, 0xABCULL));
    AddWeightNoise(&current.builder, rng, 0.01);
    AddWeightNoise(&current.summarizer, rng, 0.01);
    AddWeightNoise(&current.responder, rng, 0.01);

    // Clip-boundary screen: re-evaluate every ratio and skip the point if
    // one lies within 1e-3 of a kink.
    bool near_kink = false;
    for (const Trajectory& traj : EnumeratePaths(tree)) {
      const std::vector<double> lp = LogProb(
          current.responder,
          ResponderContext(task, traj.builder_action, traj.summarizer_action),
          traj.responder_action.tokens);
      for (size_t t = 0; t < lp.size(); ++t) {
        const double ratio =
            std::exp(lp[t] - traj.responder_action.logprobs_old[t]);
        if (std::abs(ratio - (1.0 - eps_clip)) < 1e-3 ||
            std::abs(ratio - (1.0 + eps_clip)) < 1e-3) {
          near_kink = true;
        }
      }
    }
    if (near_kink) continue;
    ++tested;

    const ObjectiveResult res = GrpoObjective(group, adv, current, eps_clip);
    for (int n = 0; n < 3; ++n) {
      const AgentRole role = static_cast<AgentRole>(n + 1);
      PolicyParams& probe_params = current.ForRole(role);
      const Matrix& analytic = n == 0   ? res.grads.builder
                               : n == 1 ? res.grads.summarizer
                                        : res.grads.responder;
      for (int probe = 0; probe < 8; ++probe) {
        const size_t idx = static_cast<size_t>(
            rng.NextInt(static_cast<int>(probe_params.weights.data.size())));
        const double saved = probe_params.weights.data[idx];
        probe_params.weights.data[idx] = saved + h;
        const double up =
            GrpoObjective(group, adv, current, eps_clip).objective[n];
        probe_params.weights.data[idx] = saved - h;
        const double down =
            GrpoObjective(group, adv, current, eps_clip).objective[n];
        probe_params.weights.data[idx] = saved;
        const double fd = (up - down) / (2 * h);
        const double an = analytic.data[idx];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        if (std::abs(fd - an) / denom > 1e-4) return false;
      }
    }
  }
  return tested == 50;
}

// 6. J=K=1 with zero length penalty: tree_credit and final_only produce
//    bitwise-identical parameter updates.
bool DegenerateEquivalence() {
  TaskGenConfig tcfg{3, 3, 8, 0.25, 0.5};
  const PolicySet start = MakePolicySet(tcfg.VocabSize());
  TrainConfig cfg = BaseTrainConfig(RewardScheme::kTreeCredit);
  cfg.branching = {6, 1, 1};
  cfg.lengths = {12, 6, 1};
  cfg.lambda_len = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Task task = GenerateTask(seed, tcfg);
    cfg.scheme.tag = RewardScheme::kTreeCredit;
    const PolicySet a = TrainStep(start, task, cfg, seed * 13 + 1, nullptr);
    cfg.scheme.tag = RewardScheme::kFinalOnly;
    const PolicySet b = TrainStep(start, task, cfg, seed * 13 + 1, nullptr);
    if (a.builder.weights.data != b.builder.weights.data) return false;
    if (a.summarizer.weights.data != b.summarizer.weights.data) return false;
    if (a.responder.weights.data != b.responder.weights.data) return false;
  }
  return true;
}

// 7. tree_credit reaches greedy eval >= 0.9 within 2000 steps on at least
//    4 of 5 seeds of the slot-recall task.
bool TrainingConvergence() {
  const TrainConfig cfg = BaseTrainConfig(RewardScheme::kTreeCredit);
  int reached = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const TrainOutcome outcome = TrainOneSeed(seed, cfg, kBudgetSteps, true);
    std::printf("  seed %llu: eval %.3f, threshold step %d\n",
                static_cast<unsigned long long>(seed), outcome.final_eval,
                outcome.steps_to_threshold);
    std::fflush(stdout);
    if (outcome.steps_to_threshold >= 0) ++reached;
  }
  return reached >= 4;
}

// 8. At an equal step budget, tree_credit beats final_only and
//    task_specific by >= 0.03 mean final eval over 5 seeds.
bool AblationDirection() {
  const double tree = Mean(
      FinalEvals(BaseTrainConfig(RewardScheme::kTreeCredit), kBudgetSteps, 5));
  const double final_only = Mean(
      FinalEvals(BaseTrainConfig(RewardScheme::kFinalOnly), kBudgetSteps, 5));
  const double task_specific = Mean(FinalEvals(
      BaseTrainConfig(RewardScheme::kTaskSpecific), kBudgetSteps, 5));
  std::printf("  tree_credit %.3f, final_only %.3f, task_specific %.3f\n",
              tree, final_only, task_specific);
  std::fflush(stdout);
  return tree >= final_only + 0.03 && tree >= task_specific + 0.03;
}

struct CellStats {
  double mean = 0.0;
  double std = 0.0;
};

CellStats RunCell(Branching branching, int steps, int n_seeds) {
  TrainConfig cfg = BaseTrainConfig(RewardScheme::kTreeCredit);
  cfg.branching = branching;
  const std::vector<double> finals = FinalEvals(cfg, steps, n_seeds);
  return {Mean(finals), PopulationStd(finals)};
}

// 9. Final reward is non-decreasing (within one pooled std) along K and J,
//    and G=2 underperforms G=8.
bool SensitivityShape() {
  // A short budget keeps the runs away from the task ceiling, where the
  // branching factors no longer change the outcome.
  const int steps = 200;
  const int n_seeds = 5;
  auto NonDecreasing = [](const std::vector<CellStats>& cells) {
    for (size_t n = 1; n < cells.size(); ++n) {
      const double pooled =
          std::sqrt((cells[n - 1].std * cells[n - 1].std +
                     cells[n].std * cells[n].std) /
                    2.0);
      if (cells[n].mean < cells[n - 1].mean - pooled) return false;
    }
    return true;
  };

  std::vector<CellStats> k_cells, j_cells;
  for (int K : {1, 2, 4}) k_cells.push_back(RunCell({8, 2, K}, steps, n_seeds));
  for (int J : {1, 2, 4}) j_cells.push_back(RunCell({8, J, 2}, steps, n_seeds));
  const CellStats g2 = RunCell({2, 2, 2}, steps, n_seeds);
  const CellStats g8 = j_cells[1];  // (8, 2, 2)

  std::printf("  K sweep: %.3f %.3f %.3f | J sweep: %.3f %.3f %.3f | "
              "G2 %.3f vs G8 %.3f\n",
              k_cells[0].mean, k_cells[1].mean, k_cells[2].mean,
              j_cells[0].mean, j_cells[1].mean, j_cells[2].mean, g2.mean,
              g8.mean);
  std::fflush(stdout);
  return NonDecreasing(k_cells) && NonDecreasing(j_cells) &&
         g2.mean < g8.mean;
}

// 10. Metrics-file hash stability and checkpoint resume equivalence.
bool DeterminismAndResume() {
  const std::string root = "acceptance_tmp";
  fs::remove_all(root);
  fs::create_directories(root);

  ExperimentConfig cfg;
  cfg.run_name = "determinism";
  cfg.output_dir = root;
  cfg.seeds = {1};
  cfg.steps = 6;
  cfg.eval_cadence = 2;
  cfg.eval_tasks = 10;
  cfg.checkpoint_cadence = 3;
  cfg.task = TaskGenConfig{2, 2, 4, 0.25, 0.5};
  cfg.train = BaseTrainConfig(RewardScheme::kTreeCredit);
  cfg.train.branching = {2, 1, 1};
  cfg.train.lengths = {6, 3, 1};

  const SeedRunResult first = RunSeed(cfg, 1);
  const uint64_t hash_first = MetricsFileHash(first.metrics_path);
  const SeedRunResult second = RunSeed(cfg, 1);  // overwrites in place
  if (MetricsFileHash(second.metrics_path) != hash_first) return false;
  const CheckpointData full_final =
      LoadCheckpoint(second.final_checkpoint_path);

  // Rewind the metrics file to steps 0..3 and resume from ckpt_step3.
  std::vector<std::string> kept;
  {
    std::ifstream in(second.metrics_path);
    std::string line;
    bool first_line = true;
    while (std::getline(in, line)) {
      if (first_line) {
        kept.push_back(line);
        first_line = false;
        continue;
      }
      if (nlohmann::json::parse(line).value("step", 0) <= 3)
        kept.push_back(line);
    }
  }
  {
    std::ofstream out(second.metrics_path, std::ios::trunc);
    for (const std::string& line : kept) out << line << '\n';
  }
  const SeedRunResult resumed =
      ResumeSeed(cfg, 1, SeedDir(cfg, 1) + "/ckpt_step3.bin");
  if (MetricsFileHash(resumed.metrics_path) != hash_first) return false;
  const CheckpointData resumed_final =
      LoadCheckpoint(resumed.final_checkpoint_path);
  for (size_t a = 0; a < 3; ++a) {
    if (resumed_final.agents[a].weights.data !=
        full_final.agents[a].weights.data) {
      return false;
    }
  }
  fs::remove_all(root);
  return true;
}

}  // namespace
}  // namespace treerl

int main() {
  using Criterion = std::pair<const char*, std::function<bool()>>;
  const std::vector<Criterion> criteria = {
      {"structure suite", treerl::StructureSuite},
      {"credit tower property", treerl::CreditTower},
      {"Monte Carlo oracle", treerl::MonteCarloOracle},
      {"advantage normalization", treerl::AdvantageNormalization},
      {"gradient oracle", treerl::GradientOracle},
      {"degenerate-tree equivalence", treerl::DegenerateEquivalence},
      {"training convergence", treerl::TrainingConvergence},
      {"ablation direction", treerl::AblationDirection},
      {"sensitivity shape", treerl::SensitivityShape},
      {"determinism and resume", treerl::DeterminismAndResume},
  };
  int failures = 0;
  for (size_t n = 0; n < criteria.size(); ++n) {
    bool ok = false;
    try {
      ok = criteria[n].second();
    } catch (const std::exception& e) {
      std::printf("  exception: %s\n", e.what());
    }
    std::printf("criterion %zu (%s): %s\n", n + 1, criteria[n].first,
                ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
