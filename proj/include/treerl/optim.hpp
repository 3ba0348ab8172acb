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

#ifndef TREERL_OPTIM_HPP_
#define TREERL_OPTIM_HPP_

#include <array>
#include <string>

#include "treerl/credit.hpp"
#include "treerl/rollout.hpp"

namespace treerl {

enum class RewardScheme { kTreeCredit, kFinalOnly, kTaskSpecific, kCombined };

const char* RewardSchemeName(RewardScheme scheme);
RewardScheme ParseRewardScheme(const std::string& name);

struct RewardSchemeSpec {
  RewardScheme tag = RewardScheme::kTreeCredit;
  double task_weight = 0.0;  // w in final + w * task
};

struct TrainConfig {
  Branching branching;
  OutputLengths lengths;
  double eps_norm = 1e-6;
  double eps_clip = 0.2;
  double lambda_len = -1.0;
  double learning_rate = 0.05;
  int updates_per_rollout = 1;
  RewardSchemeSpec scheme;
};

// Throws std::invalid_argument on out-of-range values (G >= 2 here; the
// rollout itself also supports the G = 1 deployment mode).
void ValidateTrainConfig(const TrainConfig& cfg);

// One weight-shaped array per agent.
struct GradientSet {
  Matrix builder;
  Matrix summarizer;
  Matrix responder;
};

struct ObjectiveResult {
  std::array<double, 3> objective{};  // builder, summarizer, responder
  GradientSet grads;
};

// Length-normalized clipped surrogate, per agent n:
//   (1/G) sum_i (1/|o_n_i|) sum_t min(rho * A, clip(rho, 1 +- eps) * A)
// with rho the exp of current minus sampling-time log-probabilities.
// The gradient is exact: positions where the clipped branch attains the
// min contribute zero. Throws on non-finite ratios.
ObjectiveResult GrpoObjective(const TrajectoryGroup& group,
                              const AdvantageSet& adv,
                              const PolicySet& policies, double eps_clip);

// Gradient ascent: weights + learning_rate * grad. Inputs untouched.
PolicySet ApplyUpdate(const PolicySet& policies, const GradientSet& grads,
                      double learning_rate);

// Credits of the selected group under the ablation reward schemes.
// final_only broadcasts each trajectory's leaf reward to all agents.
// task_specific uses artifact-defined proxies: builder = fraction of the
// gold-supporting record's three tokens present in a1; summarizer =
// fraction of a1's non-noise slot-value pairs retained in a2, divided by
// the expansion ratio max(1, |a2|/|a1|); responder = leaf reward.
// combined = final + w * task per agent.
struct PerAgentCredits {
  std::vector<double> q1, q2, q3;  // G each
};

PerAgentCredits BaselineCredits(const RewardSchemeSpec& scheme,
                                const RolloutTree& tree,
                                const TrajectoryGroup& group);

struct StepMetrics {
  double mean_leaf_reward = 0.0;
  std::array<double, 3> objective{};  // at the sampling parameters
  std::array<double, 3> grad_norm{};
  double mean_builder_len_ratio = 0.0;
};

// One full training step: tree rollout, scoring, credit assignment (or a
// baseline scheme), group selection, advantage normalization, then
// updates_per_rollout ascent steps against the same sampled group.
PolicySet TrainStep(const PolicySet& policies, const Task& task,
                    const TrainConfig& cfg, uint64_t step_seed,
                    StepMetrics* metrics);

}  // namespace treerl

#endif  // TREERL_OPTIM_HPP_
