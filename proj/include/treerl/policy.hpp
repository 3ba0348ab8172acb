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

#ifndef TREERL_POLICY_HPP_
#define TREERL_POLICY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "treerl/matrix.hpp"
#include "treerl/rng.hpp"

namespace treerl {

enum class AgentRole : int { kBuilder = 1, kSummarizer = 2, kResponder = 3 };

const char* AgentRoleName(AgentRole role);

// Conditioning input of one agent:
//   builder    -> serialized history H
//   summarizer -> builder output a1
//   responder  -> (query token, a1, a2)
struct Context {
  AgentRole role = AgentRole::kBuilder;
  std::vector<int> tokens;
};

// An autoregressively sampled output together with the per-token
// log-probabilities recorded under the sampling-time parameters.
struct SampledSequence {
  std::vector<int> tokens;
  std::vector<double> logprobs_old;

  int Length() const { return static_cast<int>(tokens.size()); }
};

// Linear-softmax policy: next-token logits are features(ctx, prefix) W.
struct PolicyParams {
  AgentRole role = AgentRole::kBuilder;
  int vocab_size = 0;
  Matrix weights;  // feature_dim x vocab_size
};

// Feature vector layout (V = vocab_size):
//   bias (1)
//   context bag-of-token counts (V)
//   one-hot of last generated token, with a begin-of-sequence slot (V + 1)
//   output position bucket (4)
//   bag-of-token counts of the generated prefix (V)
//   context followers of the last generated token (V)
//   fact-flagged context followers of the last generated token (V)
//   context followers of the first context token (V)
//   fact-flagged context followers of the first context token (V)
// "Followers of t" is a one-hot over u of the token following the most
// recent position p with ctx[p] == t; the fact-flagged variant keys on the
// most recent such position whose ctx[p+2] is the fact flag (token
// vocab_size - 3). The recency-based match features are what let a linear
// model read last-write-wins slot-value bindings out of a token stream;
// plain bags of the same stream cannot.
int FeatureDim(int vocab_size);

// Zero-initialized parameters (uniform policy).
PolicyParams MakePolicyParams(AgentRole role, int vocab_size);

// Adds a weak relay prior: positive diagonals on the match features
// (favoring tokens that follow a repeated key) and on the context bag,
// a negative diagonal on the prefix bag (discouraging repeats). Starting
// agents near this copy-and-relay behavior is the artifact's stand-in for
// the pretrained backbones the pipeline assumes; a zero-initialized
// (uniform) pipeline emits memories independent of the history, so no
// agent's gradient carries information and training stalls on a plateau.
void InitRelayPrior(PolicyParams* params, double scale);

// Draws tokens until end-of-sequence (token vocab_size - 1, included in
// the output) or max_len. Throws std::runtime_error on non-finite logits.
SampledSequence Sample(const PolicyParams& params, const Context& ctx,
                       Rng& rng, int max_len);

// Argmax decoding (ties break toward the lowest token id); used for eval.
std::vector<int> GreedyDecode(const PolicyParams& params, const Context& ctx,
                              int max_len);

// Per-token log pi(tokens[t] | ctx, tokens[<t]); matches what Sample
// records when evaluated at the sampling parameters.
std::vector<double> LogProb(const PolicyParams& params, const Context& ctx,
                            const std::vector<int>& tokens);

// Analytic per-position gradient of log pi w.r.t. the weights:
// outer(features_t, onehot(token_t) - probs_t).
std::vector<Matrix> GradLogProb(const PolicyParams& params, const Context& ctx,
                                const std::vector<int>& tokens);

// grad += scale * sum_t coeffs[t] * grad_logprob_t. Shared fast path for
// the policy objective; avoids materializing per-position matrices.
void AccumulateWeightedGradLogProb(const PolicyParams& params,
                                   const Context& ctx,
                                   const std::vector<int>& tokens,
                                   const std::vector<double>& coeffs,
                                   double scale, Matrix* grad);

// Adds independent uniform noise in [-scale, scale] to every weight.
// Used to build random policies in oracles and property tests.
void AddWeightNoise(PolicyParams* params, Rng& rng, double scale);

// Checkpoints: magic, step, config hash, then per agent a header
// {role, feature_dim, vocab_size} and the flat weight array as
// little-endian 64-bit floats.
struct CheckpointData {
  uint64_t step = 0;
  uint64_t config_hash = 0;
  std::vector<PolicyParams> agents;
};

void SaveCheckpoint(const std::string& path, const CheckpointData& ckpt);
CheckpointData LoadCheckpoint(const std::string& path);

}  // namespace treerl

#endif  // TREERL_POLICY_HPP_
