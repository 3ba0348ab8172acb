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

#ifndef TREERL_CONFIG_HPP_
#define TREERL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "treerl/env.hpp"
#include "treerl/optim.hpp"

namespace treerl {

// Full experiment description. The schema is strict: unknown keys are
// rejected and every scientific parameter (branching, tolerances, clip
// range, penalty, learning rate, scheme) must be explicit in the file.
struct ExperimentConfig {
  std::string run_name;
  std::string output_dir;
  std::vector<uint64_t> seeds;
  int steps = 0;
  int eval_cadence = 50;
  int eval_tasks = 100;
  int checkpoint_cadence = 0;  // 0 = checkpoint only at the final step
  TaskGenConfig task;
  TrainConfig train;
};

ExperimentConfig ParseExperimentConfig(const nlohmann::json& j);
ExperimentConfig LoadExperimentConfig(const std::string& path);
nlohmann::json ExperimentConfigToJson(const ExperimentConfig& cfg);

// Throws std::invalid_argument with the offending key in the message.
void ValidateExperimentConfig(const ExperimentConfig& cfg);

// FNV-1a over the canonical JSON dump; ties checkpoints to their config.
uint64_t ConfigHash(const ExperimentConfig& cfg);

uint64_t Fnv1a64(const std::string& bytes);

}  // namespace treerl

#endif  // TREERL_CONFIG_HPP_
