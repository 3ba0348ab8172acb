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

#include "treerl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

namespace treerl {

const char* RewardSchemeName(RewardScheme scheme) {
  switch (scheme) {
    case RewardScheme::kTreeCredit:
      return "tree_credit";
    case RewardScheme::kFinalOnly:
      return "final_only";
    case RewardScheme::kTaskSpecific:
      return "task_specific";
    case RewardScheme::kCombined:
      return "combined";
  }
  return "unknown";
}

RewardScheme ParseRewardScheme(const std::string& name) {
  if (name == "tree_credit") return RewardScheme::kTreeCredit;
  if (name == "final_only") return RewardScheme::kFinalOnly;
  if (name == "task_specific") return RewardScheme::kTaskSpecific;
  if (name == "combined") return RewardScheme::kCombined;
  throw std::invalid_argument("optim: unknown reward scheme: " + name);
}

void ValidateTrainConfig(const TrainConfig& cfg) {
  if (cfg.branching.G < 2)
    throw std::invalid_argument("optim: G must be >= 2 for training");
  if (cfg.branching.J < 1 || cfg.branching.K < 1)
    throw std::invalid_argument("optim: J and K must be >= 1");
  if (cfg.eps_norm <= 0.0)
    throw std::invalid_argument("optim: eps_norm must be > 0");
  if (cfg.eps_clip <= 0.0 || cfg.eps_clip >= 1.0)
    throw std::invalid_argument("optim: eps_clip must be in (0, 1)");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("optim: learning_rate must be > 0");
  if (cfg.updates_per_rollout < 1)
    throw std::invalid_argument("optim: updates_per_rollout must be >= 1");
}

namespace {

Context ContextForAgent(AgentRole role, const TrajectoryGroup& group,
                        const Trajectory& traj) {
  switch (role) {
    case AgentRole::kBuilder:
      return Context{AgentRole::kBuilder, group.history_tokens};
    case AgentRole::kSummarizer:
      return Context{AgentRole::kSummarizer, traj.builder_action.tokens};
    case AgentRole::kResponder: {
      Context ctx;
      ctx.role = AgentRole::kResponder;
      ctx.tokens.push_back(group.query_token);
      ctx.tokens.insert(ctx.tokens.end(), traj.builder_action.tokens.begin(),
                        traj.builder_action.tokens.end());
      ctx.tokens.insert(ctx.tokens.end(),
                        traj.summarizer_action.tokens.begin(),
                        traj.summarizer_action.tokens.end());
      return ctx;
    }
  }
  throw std::invalid_argument("optim: unknown agent role");
}

const SampledSequence& ActionForAgent(AgentRole role, const Trajectory& traj) {
  switch (role) {
    case AgentRole::kBuilder:
      return traj.builder_action;
    case AgentRole::kSummarizer:
      return traj.summarizer_action;
    case AgentRole::kResponder:
      return traj.responder_action;
  }
  throw std::invalid_argument("optim: unknown agent role");
}

// Objective and gradient of one agent over the group.
double AgentObjective(AgentRole role, const TrajectoryGroup& group,
                      const std::vector<double>& advantages,
                      const PolicyParams& params, double eps_clip,
                      Matrix* grad) {
  const int group_size = static_cast<int>(group.trajectories.size());
  double objective = 0.0;
  for (int i = 0; i < group_size; ++i) {
    const Trajectory& traj = group.trajectories[i];
    const SampledSequence& action = ActionForAgent(role, traj);
    const Context ctx = ContextForAgent(role, group, traj);
    const double advantage = advantages[i];
    const double scale = 1.0 / (group_size * action.Length());

    const std::vector<double> logp_new = LogProb(params, ctx, action.tokens);
    std::vector<double> grad_coeffs(action.tokens.size(), 0.0);
    for (size_t t = 0; t < action.tokens.size(); ++t) {
      const double ratio = std::exp(logp_new[t] - action.logprobs_old[t]);
      if (!std::isfinite(ratio))
        throw std::runtime_error("optim: non-finite importance ratio");
      const double clipped =
          std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
      const double unclipped_term = ratio * advantage;
      const double clipped_term = clipped * advantage;
      objective += scale * std::min(unclipped_term, clipped_term);
      // min picks the unclipped branch: d(rho * A)/dtheta = A rho dlogp.
      if (unclipped_term <= clipped_term) {
        grad_coeffs[t] = advantage * ratio;
      }
    }
    AccumulateWeightedGradLogProb(params, ctx, action.tokens, grad_coeffs,
                                  scale, grad);
  }
  return objective;
}

constexpr AgentRole kRoles[3] = {AgentRole::kBuilder, AgentRole::kSummarizer,
                                 AgentRole::kResponder};

}  // namespace

ObjectiveResult GrpoObjective(const TrajectoryGroup& group,
                              const AdvantageSet& adv,
                              const PolicySet& policies, double eps_clip) {
  const size_t group_size = group.trajectories.size();
  if (adv.a1.size() != group_size || adv.a2.size() != group_size ||
      adv.a3.size() != group_size)
    throw std::invalid_argument("optim: advantages do not match group");

  ObjectiveResult result;
  result.grads.builder = Matrix(policies.builder.weights.rows,
                                policies.builder.weights.cols);
  result.grads.summarizer = Matrix(policies.summarizer.weights.rows,
                                   policies.summarizer.weights.cols);
  result.grads.responder = Matrix(policies.responder.weights.rows,
                                  policies.responder.weights.cols);

  result.objective[0] = AgentObjective(AgentRole::kBuilder, group, adv.a1,
                                       policies.builder, eps_clip,
                                       &result.grads.builder);
  result.objective[1] = AgentObjective(AgentRole::kSummarizer, group, adv.a2,
                                       policies.summarizer, eps_clip,
                                       &result.grads.summarizer);
  result.objective[2] = AgentObjective(AgentRole::kResponder, group, adv.a3,
                                       policies.responder, eps_clip,
                                       &result.grads.responder);
  return result;
}

namespace {

PolicyParams AscendOne(const PolicyParams& params, const Matrix& grad,
                       double learning_rate) {
  if (!grad.SameShape(params.weights))
    throw std::invalid_argument("optim: gradient shape mismatch");
  PolicyParams next = params;
  for (size_t n = 0; n < next.weights.data.size(); ++n) {
    next.weights.data[n] += learning_rate * grad.data[n];
    if (!std::isfinite(next.weights.data[n]))
      throw std::runtime_error("optim: non-finite parameter after update");
  }
  return next;
}

}  // namespace

PolicySet ApplyUpdate(const PolicySet& policies, const GradientSet& grads,
                      double learning_rate) {
  PolicySet next;
  next.builder = AscendOne(policies.builder, grads.builder, learning_rate);
  next.summarizer =
      AscendOne(policies.summarizer, grads.summarizer, learning_rate);
  next.responder = AscendOne(policies.responder, grads.responder, learning_rate);
  return next;
}

namespace {

// Adjacent (slot-token, value-token) pairs not flagged as noise by the
// token that follows them.
std::set<std::pair<int, int>> FactPairs(const std::vector<int>& tokens,
                                        const TaskGenConfig& cfg) {
  std::set<std::pair<int, int>> pairs;
  const int n = static_cast<int>(tokens.size());
  for (int p = 0; p + 1 < n; ++p) {
    const bool slot_tok = tokens[p] >= 0 && tokens[p] < cfg.n_slots;
    const bool value_tok = tokens[p + 1] >= cfg.n_slots &&
                           tokens[p + 1] < cfg.n_slots + cfg.n_values;
    const bool noisy = p + 2 < n && tokens[p + 2] == cfg.NoiseFlagToken();
    if (slot_tok && value_tok && !noisy) {
      pairs.emplace(tokens[p], tokens[p + 1]);
    }
  }
  return pairs;
}

double BuilderEvidenceCoverage(const RolloutTree& tree,
                               const Trajectory& traj) {
  const Task& task = tree.task;
  // Tokens of the latest non-noise record for the queried slot.
  const int gold_tokens[3] = {task.cfg.SlotToken(task.query_slot),
                              task.cfg.ValueToken(task.gold_answer),
                              task.cfg.FactFlagToken()};
  int present = 0;
  for (int needle : gold_tokens) {
    for (int tok : traj.builder_action.tokens) {
      if (tok == needle) {
        ++present;
        break;
      }
    }
  }
  return present / 3.0;
}

double SummarizerFidelity(const RolloutTree& tree, const Trajectory& traj) {
  const TaskGenConfig& cfg = tree.task.cfg;
  const auto source_pairs = FactPairs(traj.builder_action.tokens, cfg);
  if (source_pairs.empty()) return 1.0;
  const auto kept_pairs = FactPairs(traj.summarizer_action.tokens, cfg);
  int retained = 0;
  for (const auto& pair : source_pairs) {
    if (kept_pairs.count(pair)) ++retained;
  }
  const double coverage =
      static_cast<double>(retained) / static_cast<double>(source_pairs.size());
  const double expansion =
      static_cast<double>(traj.summarizer_action.Length()) /
      std::max(1, traj.builder_action.Length());
  return coverage / std::max(1.0, expansion);
}

}  // namespace

PerAgentCredits BaselineCredits(const RewardSchemeSpec& scheme,
                                const RolloutTree& tree,
                                const TrajectoryGroup& group) {
  if (!tree.scored)
    throw std::invalid_argument("optim: tree must be scored first");
  PerAgentCredits credits;
  for (const Trajectory& traj : group.trajectories) {
    const double leaf =
        tree.leaf_rewards[tree.LeafIndex(traj.i, traj.j, traj.k)];
    switch (scheme.tag) {
      case RewardScheme::kFinalOnly:
        credits.q1.push_back(leaf);
        credits.q2.push_back(leaf);
        credits.q3.push_back(leaf);
        break;
      case RewardScheme::kTaskSpecific:
        credits.q1.push_back(BuilderEvidenceCoverage(tree, traj));
        credits.q2.push_back(SummarizerFidelity(tree, traj));
        credits.q3.push_back(leaf);
        break;
      case RewardScheme::kCombined:
        credits.q1.push_back(leaf + scheme.task_weight *
                                        BuilderEvidenceCoverage(tree, traj));
        credits.q2.push_back(leaf +
                             scheme.task_weight * SummarizerFidelity(tree, traj));
        credits.q3.push_back(leaf + scheme.task_weight * leaf);
        break;
      case RewardScheme::kTreeCredit:
        throw std::invalid_argument(
            "optim: tree_credit is not a baseline scheme");
    }
  }
  return credits;
}

PolicySet TrainStep(const PolicySet& policies, const Task& task,
                    const TrainConfig& cfg, uint64_t step_seed,
                    StepMetrics* metrics) {
  ValidateTrainConfig(cfg);

  RolloutTree tree = SampleRolloutTree(policies, task, cfg.branching,
                                       cfg.lengths,
                                       MixSeed(step_seed, 0x11ULL));
  ScoreLeaves(&tree);

  const CreditMap credit_map = AssignCredit(tree, cfg.lambda_len);
  Rng select_rng(MixSeed(step_seed, 0x22ULL));
  TrajectoryGroup group = SelectGroup(tree, credit_map, select_rng);
  if (cfg.scheme.tag != RewardScheme::kTreeCredit) {
    PerAgentCredits baseline = BaselineCredits(cfg.scheme, tree, group);
    group.q1 = std::move(baseline.q1);
    group.q2 = std::move(baseline.q2);
    group.q3 = std::move(baseline.q3);
  }
  const AdvantageSet adv = NormalizeAdvantages(group, cfg.eps_norm);

  PolicySet current = policies;
  for (int u = 0; u < cfg.updates_per_rollout; ++u) {
    ObjectiveResult result = GrpoObjective(group, adv, current, cfg.eps_clip);
    if (metrics && u == 0) {
      metrics->objective = result.objective;
      for (int n = 0; n < 3; ++n) {
        const Matrix& g = n == 0   ? result.grads.builder
                          : n == 1 ? result.grads.summarizer
                                   : result.grads.responder;
        double sq = 0.0;
        for (double x : g.data) sq += x * x;
        metrics->grad_norm[n] = std::sqrt(sq);
      }
    }
    current = ApplyUpdate(current, result.grads, cfg.learning_rate);
  }

  if (metrics) {
    metrics->mean_leaf_reward = Mean(tree.leaf_rewards);
    double ratio_sum = 0.0;
    for (const SampledSequence& a1 : tree.builders) {
      ratio_sum += static_cast<double>(a1.Length()) / task.history_token_len;
    }
    metrics->mean_builder_len_ratio = ratio_sum / tree.branching.G;
  }
  return current;
}

}  // namespace treerl
