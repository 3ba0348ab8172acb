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

#ifndef TREERL_CREDIT_HPP_
#define TREERL_CREDIT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "treerl/rollout.hpp"

namespace treerl {

// Monte Carlo credits over a scored tree:
//   q3[i][j][k] = leaf reward
//   q2[i][j]    = mean_k q3[i][j][k]
//   q1[i]       = mean_{j,k} q3[i][j][k] + lambda_len * |a1_i| / |H|
// lambda_len = -1 (default) penalizes long builder outputs; +1 reproduces
// the additive reading of the same term.
struct CreditMap {
  std::vector<double> q1;  // G
  std::vector<double> q2;  // G*J, same flat layout as the tree
  std::vector<double> q3;  // G*J*K
  double lambda_len = -1.0;
};

CreditMap AssignCredit(const RolloutTree& tree, double lambda_len);

// One trajectory per builder subtree plus the credits of its actions.
struct TrajectoryGroup {
  std::vector<Trajectory> trajectories;            // G
  std::vector<std::pair<int, int>> selected;       // (j_i, k_i) per subtree
  std::vector<double> q1, q2, q3;                  // per-agent credits, G each
  std::vector<int> history_tokens;                 // builder context
  int query_token = 0;
};

// Uniform independent draw of (j_i, k_i) from each subtree.
TrajectoryGroup SelectGroup(const RolloutTree& tree, const CreditMap& credits,
                            Rng& rng);

// Group-standardized credits: (q - mean) / (pop_std + eps).
struct AdvantageSet {
  std::vector<double> a1, a2, a3;  // G each
  double eps_norm = 1e-6;
};

AdvantageSet NormalizeAdvantages(const TrajectoryGroup& group, double eps);

// Helpers shared with oracles and the debug log.
double Mean(const std::vector<double>& xs);
double PopulationStd(const std::vector<double>& xs);

std::string CreditMapToJson(const CreditMap& credits);
std::string AdvantageSetToJson(const AdvantageSet& adv);

}  // namespace treerl

#endif  // TREERL_CREDIT_HPP_
