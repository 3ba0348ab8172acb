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

#include "treerl/credit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace treerl {

double Mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double PopulationStd(const std::vector<double>& xs) {
  const double m = Mean(xs);
  double sq = 0.0;
  for (double x : xs) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(xs.size()));
}

CreditMap AssignCredit(const RolloutTree& tree, double lambda_len) {
  if (!tree.scored)
    throw std::invalid_argument("credit: tree must be scored first");
  if (tree.task.history_token_len <= 0)
    throw std::invalid_argument("credit: zero-length history");

  const int G = tree.branching.G;
  const int J = tree.branching.J;
  const int K = tree.branching.K;
  const double history_len =
      static_cast<double>(tree.task.history_token_len);

  CreditMap credits;
  credits.lambda_len = lambda_len;
  credits.q3 = tree.leaf_rewards;
  credits.q2.resize(G * J);
  credits.q1.resize(G);

  // Fixed summation order (k inner, then j) for bitwise determinism.
  for (int i = 0; i < G; ++i) {
    double subtree_sum = 0.0;
    for (int j = 0; j < J; ++j) {
      double branch_sum = 0.0;
      for (int k = 0; k < K; ++k) {
        branch_sum += tree.leaf_rewards[tree.LeafIndex(i, j, k)];
      }
      credits.q2[tree.SummarizerIndex(i, j)] = branch_sum / K;
      subtree_sum += branch_sum;
    }
    const double length_ratio =
        static_cast<double>(tree.builders[i].Length()) / history_len;
    credits.q1[i] = subtree_sum / (J * K) + lambda_len * length_ratio;
  }
  return credits;
}

TrajectoryGroup SelectGroup(const RolloutTree& tree, const CreditMap& credits,
                            Rng& rng) {
  if (!tree.scored)
    throw std::invalid_argument("credit: tree must be scored first");
  const int G = tree.branching.G;
  if (static_cast<int>(credits.q1.size()) != G ||
      static_cast<int>(credits.q3.size()) != tree.NumLeaves())
    throw std::invalid_argument("credit: credit map does not match tree");

  TrajectoryGroup group;
  group.history_tokens = tree.history_tokens;
  group.query_token = tree.task.QueryToken();
  group.trajectories.reserve(G);
  for (int i = 0; i < G; ++i) {
    const int j = rng.NextInt(tree.branching.J);
    const int k = rng.NextInt(tree.branching.K);
    group.selected.emplace_back(j, k);

    Trajectory traj;
    traj.i = i;
    traj.j = j;
    traj.k = k;
    traj.builder_action = tree.builders[i];
    traj.summarizer_action = tree.summarizers[tree.SummarizerIndex(i, j)];
    traj.responder_action = tree.responders[tree.LeafIndex(i, j, k)];
    group.trajectories.push_back(std::move(traj));

    group.q1.push_back(credits.q1[i]);
    group.q2.push_back(credits.q2[tree.SummarizerIndex(i, j)]);
    group.q3.push_back(credits.q3[tree.LeafIndex(i, j, k)]);
  }
  return group;
}

namespace {

std::vector<double> Standardize(const std::vector<double>& q, double eps) {
  // A zero-variance group carries no comparative signal; return exact
  // zeros rather than the rounding residue of the mean subtraction.
  if (std::equal(q.begin() + 1, q.end(), q.begin()))
    return std::vector<double>(q.size(), 0.0);
  const double m = Mean(q);
  const double s = PopulationStd(q);
  std::vector<double> adv(q.size());
  for (size_t i = 0; i < q.size(); ++i) adv[i] = (q[i] - m) / (s + eps);
  return adv;
}

}  // namespace

AdvantageSet NormalizeAdvantages(const TrajectoryGroup& group, double eps) {
  if (group.trajectories.size() < 2)
    throw std::invalid_argument("credit: group normalization needs G >= 2");
  if (eps <= 0.0) throw std::invalid_argument("credit: eps must be > 0");
  AdvantageSet adv;
  adv.eps_norm = eps;
  adv.a1 = Standardize(group.q1, eps);
  adv.a2 = Standardize(group.q2, eps);
  adv.a3 = Standardize(group.q3, eps);
  return adv;
}

std::string CreditMapToJson(const CreditMap& credits) {
  return nlohmann::json{{"q1", credits.q1},
                        {"q2", credits.q2},
                        {"q3", credits.q3},
                        {"lambda_len", credits.lambda_len}}
      .dump();
}

std::string AdvantageSetToJson(const AdvantageSet& adv) {
  return nlohmann::json{{"a1", adv.a1},
                        {"a2", adv.a2},
                        {"a3", adv.a3},
                        {"eps_norm", adv.eps_norm}}
      .dump();
}

}  // namespace treerl
