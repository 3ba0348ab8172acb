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

#ifndef TREERL_RUNNER_HPP_
#define TREERL_RUNNER_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "treerl/config.hpp"
#include "treerl/optim.hpp"

namespace treerl {

struct SeedRunResult {
  uint64_t seed = 0;
  double final_eval_reward = 0.0;
  std::string metrics_path;
  std::string final_checkpoint_path;
};

std::string SeedDir(const ExperimentConfig& cfg, uint64_t seed);
std::string MetricsPath(const ExperimentConfig& cfg, uint64_t seed);

// Mean greedy (1,1,1)-pipeline reward over cfg.eval_tasks fresh tasks.
double EvalGreedy(const PolicySet& policies, const ExperimentConfig& cfg,
                  uint64_t seed, int step);

// Trains one seed from step 0 (zero-initialized policies), writing the
// metrics JSON-lines file and periodic checkpoints. On a numeric failure
// the current parameters are checkpointed before the error propagates.
SeedRunResult RunSeed(const ExperimentConfig& cfg, uint64_t seed);

// Continues a checkpointed run to cfg.steps, appending to the existing
// metrics file. The checkpoint's config hash must match cfg.
SeedRunResult ResumeSeed(const ExperimentConfig& cfg, uint64_t seed,
                         const std::string& checkpoint_path);

std::vector<SeedRunResult> RunExperiment(const ExperimentConfig& cfg);

struct SweepCell {
  std::string axis;
  std::string value;
  double mean_final_eval = 0.0;
  double std_final_eval = 0.0;
  int n_seeds = 0;
};

// axis is one of "scheme", "G", "J", "K". Runs one full experiment per
// value and writes <output_dir>/<run_name>_sweep_<axis>.csv. Task seeds
// depend only on (seed, step), so every cell trains on identical tasks.
std::vector<SweepCell> RunSweep(const ExperimentConfig& base,
                                const std::string& axis,
                                const std::vector<std::string>& values);

// Scans run_dir for metrics.jsonl files and writes report.md, summary.csv
// and curves.csv into run_dir. Throws std::runtime_error listing corrupt
// or unreadable metrics files.
void WriteReport(const std::string& run_dir);

// Summary row parsed back out of one metrics file.
struct RunSummary {
  std::string run;
  uint64_t seed = 0;
  std::string scheme;
  double final_eval = 0.0;
  int steps_to_threshold = -1;  // first step with eval >= 0.9; -1 = not reached
  int last_step = 0;
};

RunSummary SummarizeMetricsFile(const std::string& path);

// Hash of the deterministic metrics content (wall-clock fields stripped).
uint64_t MetricsFileHash(const std::string& path);

// Compact oracle suite across all modules; prints one line per check.
bool VerifyOracles(std::ostream& out);

}  // namespace treerl

#endif  // TREERL_RUNNER_HPP_
