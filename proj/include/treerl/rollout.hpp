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

#ifndef TREERL_ROLLOUT_HPP_
#define TREERL_ROLLOUT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "treerl/env.hpp"
#include "treerl/policy.hpp"

namespace treerl {

// Branching factors of one tree rollout: G builder actions, J summarizer
// branches per builder action, K responder branches per summarizer action.
struct Branching {
  int G = 8;
  int J = 2;
  int K = 2;
};

// Per-role output caps. The builder cap is bounded by the serialized
// history length so the length ratio |a1|/|H| stays in [0, 1].
struct OutputLengths {
  int builder_max_len = 24;
  int summarizer_max_len = 12;
  int responder_max_len = 1;
};

struct PolicySet {
  PolicyParams builder;
  PolicyParams summarizer;
  PolicyParams responder;

  PolicyParams& ForRole(AgentRole role);
  const PolicyParams& ForRole(AgentRole role) const;
};

PolicySet MakePolicySet(int vocab_size);

Context BuilderContext(const Task& task);
Context SummarizerContext(const SampledSequence& builder_action);
Context ResponderContext(const Task& task, const SampledSequence& builder_action,
                         const SampledSequence& summarizer_action);

// The answer a responder output encodes: its first generated token.
int AnswerTokenOf(const SampledSequence& responder_action);

// Full G x J x K rollout, stored flat in lexicographic (i, j, k) order.
struct RolloutTree {
  Task task;
  Branching branching;
  uint64_t root_seed = 0;
  std::vector<int> history_tokens;            // serialized H
  std::vector<SampledSequence> builders;      // G
  std::vector<SampledSequence> summarizers;   // G*J
  std::vector<SampledSequence> responders;    // G*J*K
  std::vector<double> leaf_rewards;           // G*J*K once scored
  bool scored = false;

  int SummarizerIndex(int i, int j) const { return i * branching.J + j; }
  int LeafIndex(int i, int j, int k) const {
    return (i * branching.J + j) * branching.K + k;
  }
  int NumLeaves() const { return branching.G * branching.J * branching.K; }
};

// Samples the tree under the given policies. Child rng streams are
// derived from (root_seed, level, i, j, k), so every branch is
// reproducible independently of evaluation order. G >= 1: the (1, 1, 1)
// tree is the deployment pipeline run through the same code path;
// training-side G >= 2 is enforced by the train config.
RolloutTree SampleRolloutTree(const PolicySet& policies, const Task& task,
                              const Branching& branching,
                              const OutputLengths& lens, uint64_t root_seed);

// Fills leaf_rewards from the exact-match evaluator.
void ScoreLeaves(RolloutTree* tree);

struct Trajectory {
  int i = 0, j = 0, k = 0;
  SampledSequence builder_action;
  SampledSequence summarizer_action;
  SampledSequence responder_action;
};

// All G*J*K root-to-leaf paths in lexicographic (i, j, k) order.
std::vector<Trajectory> EnumeratePaths(const RolloutTree& tree);

// Greedy deployment pipeline: branching (1,1,1), argmax decoding.
// Returns the responder's answer token.
int GreedyPipelineAnswer(const PolicySet& policies, const Task& task,
                         const OutputLengths& lens);

// Debug dump: one JSON object per node, with reward on scored leaves.
std::string TreeToJsonLines(const RolloutTree& tree);

}  // namespace treerl

#endif  // TREERL_ROLLOUT_HPP_
