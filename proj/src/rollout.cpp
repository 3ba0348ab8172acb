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

#include "treerl/rollout.hpp"

#include <stdexcept>

#include "json.hpp"

namespace treerl {
namespace {

// Strength of the relay prior applied to fresh policy sets; weak enough
// that an untrained pipeline still answers mostly at chance.
constexpr double kRelayPriorScale = 3.0;

}  // namespace

PolicyParams& PolicySet::ForRole(AgentRole role) {
  switch (role) {
    case AgentRole::kBuilder:
      return builder;
    case AgentRole::kSummarizer:
      return summarizer;
    case AgentRole::kResponder:
      return responder;
  }
  throw std::invalid_argument("unknown agent role");
}

const PolicyParams& PolicySet::ForRole(AgentRole role) const {
  return const_cast<PolicySet*>(this)->ForRole(role);
}

PolicySet MakePolicySet(int vocab_size) {
  PolicySet policies{MakePolicyParams(AgentRole::kBuilder, vocab_size),
                     MakePolicyParams(AgentRole::kSummarizer, vocab_size),
                     MakePolicyParams(AgentRole::kResponder, vocab_size)};
  InitRelayPrior(&policies.builder, kRelayPriorScale);
  InitRelayPrior(&policies.summarizer, kRelayPriorScale);
  InitRelayPrior(&policies.responder, kRelayPriorScale);
  return policies;
}

Context BuilderContext(const Task& task) {
  return Context{AgentRole::kBuilder, SerializeHistory(task)};
}

Context SummarizerContext(const SampledSequence& builder_action) {
  return Context{AgentRole::kSummarizer, builder_action.tokens};
}

Context ResponderContext(const Task& task,
                         const SampledSequence& builder_action,
                         const SampledSequence& summarizer_action) {
  Context ctx;
  ctx.role = AgentRole::kResponder;
  ctx.tokens.reserve(1 + builder_action.tokens.size() +
                     summarizer_action.tokens.size());
  ctx.tokens.push_back(task.QueryToken());
  ctx.tokens.insert(ctx.tokens.end(), builder_action.tokens.begin(),
                    builder_action.tokens.end());
  ctx.tokens.insert(ctx.tokens.end(), summarizer_action.tokens.begin(),
                    summarizer_action.tokens.end());
  return ctx;
}

int AnswerTokenOf(const SampledSequence& responder_action) {
  if (responder_action.tokens.empty())
    throw std::invalid_argument("rollout: empty responder action");
  return responder_action.tokens[0];
}

namespace {

uint64_t NodeSeed(uint64_t root_seed, int level, int i, int j, int k) {
  return MixSeed(root_seed, static_cast<uint64_t>(level),
                 static_cast<uint64_t>(i), static_cast<uint64_t>(j),
                 static_cast<uint64_t>(k));
}

void ValidateBranching(const Branching& b) {
  if (b.G < 1 || b.J < 1 || b.K < 1)
    throw std::invalid_argument("rollout: branching factors must be >= 1");
}

void ValidateLengths(const OutputLengths& lens, const Task& task) {
  if (lens.builder_max_len < 1 || lens.summarizer_max_len < 1 ||
      lens.responder_max_len < 1)
    throw std::invalid_argument("rollout: output lengths must be >= 1");
  if (lens.builder_max_len > task.history_token_len)
    throw std::invalid_argument(
        "rollout: builder_max_len exceeds the serialized history length");
  if (task.history_token_len <= 0)
    throw std::invalid_argument("rollout: zero-length history");
}

}  // namespace

RolloutTree SampleRolloutTree(const PolicySet& policies, const Task& task,
                              const Branching& branching,
                              const OutputLengths& lens, uint64_t root_seed) {
  ValidateBranching(branching);
  ValidateLengths(lens, task);

  RolloutTree tree;
  tree.task = task;
  tree.branching = branching;
  tree.root_seed = root_seed;
  tree.history_tokens = SerializeHistory(task);
  tree.builders.reserve(branching.G);
  tree.summarizers.reserve(branching.G * branching.J);
  tree.responders.reserve(tree.NumLeaves());

  const Context builder_ctx = BuilderContext(task);
  for (int i = 0; i < branching.G; ++i) {
    Rng rng(NodeSeed(root_seed, 1, i, 0, 0));
    tree.builders.push_back(
        Sample(policies.builder, builder_ctx, rng, lens.builder_max_len));
  }
  for (int i = 0; i < branching.G; ++i) {
    const Context summ_ctx = SummarizerContext(tree.builders[i]);
    for (int j = 0; j < branching.J; ++j) {
      Rng rng(NodeSeed(root_seed, 2, i, j, 0));
      tree.summarizers.push_back(
          Sample(policies.summarizer, summ_ctx, rng, lens.summarizer_max_len));
    }
  }
  for (int i = 0; i < branching.G; ++i) {
    for (int j = 0; j < branching.J; ++j) {
      const Context resp_ctx =
          ResponderContext(task, tree.builders[i],
                           tree.summarizers[tree.SummarizerIndex(i, j)]);
      for (int k = 0; k < branching.K; ++k) {
        Rng rng(NodeSeed(root_seed, 3, i, j, k));
        tree.responders.push_back(
            Sample(policies.responder, resp_ctx, rng, lens.responder_max_len));
      }
    }
  }
  return tree;
}

void ScoreLeaves(RolloutTree* tree) {
  tree->leaf_rewards.resize(tree->NumLeaves());
  for (int n = 0; n < tree->NumLeaves(); ++n) {
    tree->leaf_rewards[n] =
        Evaluate(AnswerTokenOf(tree->responders[n]), tree->task);
  }
  tree->scored = true;
}

std::vector<Trajectory> EnumeratePaths(const RolloutTree& tree) {
  std::vector<Trajectory> paths;
  paths.reserve(tree.NumLeaves());
  for (int i = 0; i < tree.branching.G; ++i) {
    for (int j = 0; j < tree.branching.J; ++j) {
      for (int k = 0; k < tree.branching.K; ++k) {
        Trajectory path;
        path.i = i;
        path.j = j;
        path.k = k;
        path.builder_action = tree.builders[i];
        path.summarizer_action = tree.summarizers[tree.SummarizerIndex(i, j)];
        path.responder_action = tree.responders[tree.LeafIndex(i, j, k)];
        paths.push_back(std::move(path));
      }
    }
  }
  return paths;
}

int GreedyPipelineAnswer(const PolicySet& policies, const Task& task,
                         const OutputLengths& lens) {
  ValidateLengths(lens, task);
  SampledSequence a1, a2;
  a1.tokens = GreedyDecode(policies.builder, BuilderContext(task),
                           lens.builder_max_len);
  a2.tokens = GreedyDecode(policies.summarizer, SummarizerContext(a1),
                           lens.summarizer_max_len);
  const std::vector<int> answer =
      GreedyDecode(policies.responder, ResponderContext(task, a1, a2),
                   lens.responder_max_len);
  SampledSequence a3;
  a3.tokens = answer;
  return AnswerTokenOf(a3);
}

namespace {

nlohmann::json NodeJson(int level, int i, int j, int k,
                        const SampledSequence& seq) {
  return nlohmann::json{{"level", level},
                        {"i", i},
                        {"j", j},
                        {"k", k},
                        {"tokens", seq.tokens},
                        {"logprobs", seq.logprobs_old}};
}

}  // namespace

std::string TreeToJsonLines(const RolloutTree& tree) {
  std::string out;
  for (int i = 0; i < tree.branching.G; ++i) {
    out += NodeJson(1, i, -1, -1, tree.builders[i]).dump();
    out += '\n';
  }
  for (int i = 0; i < tree.branching.G; ++i) {
    for (int j = 0; j < tree.branching.J; ++j) {
      out += NodeJson(2, i, j, -1, tree.summarizers[tree.SummarizerIndex(i, j)])
                 .dump();
      out += '\n';
    }
  }
  for (int i = 0; i < tree.branching.G; ++i) {
    for (int j = 0; j < tree.branching.J; ++j) {
      for (int k = 0; k < tree.branching.K; ++k) {
        nlohmann::json node =
            NodeJson(3, i, j, k, tree.responders[tree.LeafIndex(i, j, k)]);
        if (tree.scored) node["reward"] = tree.leaf_rewards[tree.LeafIndex(i, j, k)];
        out += node.dump();
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace treerl
