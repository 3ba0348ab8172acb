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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treerl/runner.hpp"

namespace {

// Exit codes: 0 success, 1 config error, 2 runtime failure,
// 3 verification failure.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kVerifyError = 3;

int DoRun(const std::string& config_path, const std::string& resume_ckpt,
          uint64_t resume_seed, bool has_resume_seed) {
  const treerl::ExperimentConfig cfg =
      treerl::LoadExperimentConfig(config_path);
  if (!resume_ckpt.empty()) {
    if (!has_resume_seed)
      throw std::invalid_argument("run: --resume requires --seed");
    const treerl::SeedRunResult r =
        treerl::ResumeSeed(cfg, resume_seed, resume_ckpt);
    std::cout << "resumed seed " << r.seed << " final_eval "
              << r.final_eval_reward << " metrics " << r.metrics_path << '\n';
    return kOk;
  }
  for (const treerl::SeedRunResult& r : treerl::RunExperiment(cfg)) {
    std::cout << "seed " << r.seed << " final_eval " << r.final_eval_reward
              << " metrics " << r.metrics_path << '\n';
  }
  return kOk;
}

int DoSweep(const std::string& config_path, const std::string& axis,
            const std::vector<std::string>& values) {
  const treerl::ExperimentConfig cfg =
      treerl::LoadExperimentConfig(config_path);
  for (const treerl::SweepCell& cell : treerl::RunSweep(cfg, axis, values)) {
    std::cout << cell.axis << '=' << cell.value << " mean_final_eval "
              << cell.mean_final_eval << " +- " << cell.std_final_eval << " ("
              << cell.n_seeds << " seeds)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree-structured multi-agent policy optimization runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string resume_ckpt;
  uint64_t resume_seed = 0;
  CLI::App* run = app.add_subcommand("run", "train all configured seeds");
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--resume", resume_ckpt, "checkpoint to resume from");
  CLI::Option* seed_opt =
      run->add_option("--seed", resume_seed, "seed of the resumed run");

  std::string sweep_config;
  std::string axis;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand("sweep", "run one axis sweep");
  sweep->add_option("config", sweep_config, "experiment config (JSON)")
      ->required();
  sweep->add_option("--axis", axis, "one of scheme, G, J, K")->required();
  sweep->add_option("--values", values, "axis values")
      ->required()
      ->delimiter(',');

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "summarize finished runs");
  report->add_option("dir", report_dir, "directory holding metrics files")
      ->required();

  CLI::App* verify =
      app.add_subcommand("verify", "run the module oracle suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return DoRun(config_path, resume_ckpt, resume_seed,
                   seed_opt->count() > 0);
    }
    if (sweep->parsed()) return DoSweep(sweep_config, axis, values);
    if (report->parsed()) {
      treerl::WriteReport(report_dir);
      std::cout << "wrote " << report_dir << "/report.md\n";
      return kOk;
    }
    if (verify->parsed()) {
      return treerl::VerifyOracles(std::cout) ? kOk : kVerifyError;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
