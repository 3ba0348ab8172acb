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

#include "treerl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace treerl {
namespace {

// Feature scales keep count-valued features in a range where zero-init
// softmax policies neither saturate nor stall under plain gradient ascent.
constexpr double kBagScale = 0.1;
constexpr double kPrefixScale = 0.5;
constexpr double kFollowScale = 2.0;

struct FeatureLayout {
  int vocab;
  int bias;
  int bag;
  int last;          // V + 1 entries, index V = begin-of-sequence
  int pos;           // 4 buckets
  int prefix_bag;
  int follow_last;
  int fact_follow_last;
  int follow_first;
  int fact_follow_first;
  int dim;

  explicit FeatureLayout(int v)
      : vocab(v),
        bias(0),
        bag(1),
        last(1 + v),
        pos(2 + 2 * v),
        prefix_bag(6 + 2 * v),
        follow_last(6 + 3 * v),
        fact_follow_last(6 + 4 * v),
        follow_first(6 + 5 * v),
        fact_follow_first(6 + 6 * v),
        dim(6 + 7 * v) {}
};

int PositionBucket(int pos) {
  if (pos == 0) return 0;
  if (pos <= 2) return 1;
  if (pos <= 7) return 2;
  return 3;
}

// Match statistics of one context, computed once per decode.
struct ContextCache {
  FeatureLayout layout;
  std::vector<double> bag;            // V
  std::vector<double> follow;         // V x V, row = key token
  std::vector<double> fact_follow;    // V x V
  int first_token = -1;

  ContextCache(const Context& ctx, int vocab)
      : layout(vocab),
        bag(vocab, 0.0),
        follow(static_cast<size_t>(vocab) * vocab, 0.0),
        fact_follow(static_cast<size_t>(vocab) * vocab, 0.0) {
    const std::vector<int>& t = ctx.tokens;
    const int fact_flag = vocab - 3;
    const int n = static_cast<int>(t.size());
    for (int p = 0; p < n; ++p) {
      if (t[p] < 0 || t[p] >= vocab)
        throw std::invalid_argument("policy: context token out of vocabulary");
      bag[t[p]] += 1.0;
      // Recency semantics: each row holds a one-hot of the follower of the
      // key's most recent qualifying occurrence, so last-write-wins slot
      // updates stay linearly decodable.
      if (p + 1 < n) {
        double* row = &follow[static_cast<size_t>(t[p]) * vocab];
        std::fill(row, row + vocab, 0.0);
        row[t[p + 1]] = 1.0;
        if (p + 2 < n && t[p + 2] == fact_flag) {
          double* frow = &fact_follow[static_cast<size_t>(t[p]) * vocab];
          std::fill(frow, frow + vocab, 0.0);
          frow[t[p + 1]] = 1.0;
        }
      }
    }
    if (n > 0) first_token = t[0];
    // The first-token rows key matches at positions >= 1 only, so a query
    // token that never recurs in the assembled memory yields an all-zero
    // feature instead of its own accidental successor.
    if (first_token >= 0) {
      bool recurs = false;
      for (int p = 1; p < n && !recurs; ++p) recurs = t[p] == first_token;
      if (!recurs) {
        double* row = &follow[static_cast<size_t>(first_token) * vocab];
        std::fill(row, row + vocab, 0.0);
        double* frow = &fact_follow[static_cast<size_t>(first_token) * vocab];
        std::fill(frow, frow + vocab, 0.0);
      }
    }
  }
};

// Incremental decode state: prefix bag plus last emitted token.
struct DecodeState {
  std::vector<double> prefix_bag;
  int last_token = -1;  // -1 = begin of sequence
  int pos = 0;

  explicit DecodeState(int vocab) : prefix_bag(vocab, 0.0) {}

  void Push(int token) {
    prefix_bag[token] += 1.0;
    last_token = token;
    ++pos;
  }
};

std::vector<double> BuildFeatures(const ContextCache& cache,
                                  const DecodeState& state) {
  const FeatureLayout& lt = cache.layout;
  const int v = lt.vocab;
  std::vector<double> f(lt.dim, 0.0);
  f[lt.bias] = 1.0;
  for (int u = 0; u < v; ++u) f[lt.bag + u] = kBagScale * cache.bag[u];
  f[lt.last + (state.last_token < 0 ? v : state.last_token)] = 1.0;
  f[lt.pos + PositionBucket(state.pos)] = 1.0;
  for (int u = 0; u < v; ++u)
    f[lt.prefix_bag + u] = kPrefixScale * state.prefix_bag[u];
  if (state.last_token >= 0) {
    const size_t row = static_cast<size_t>(state.last_token) * v;
    for (int u = 0; u < v; ++u) {
      f[lt.follow_last + u] = kFollowScale * cache.follow[row + u];
      f[lt.fact_follow_last + u] = kFollowScale * cache.fact_follow[row + u];
    }
  }
  if (cache.first_token >= 0) {
    const size_t row = static_cast<size_t>(cache.first_token) * v;
    for (int u = 0; u < v; ++u) {
      f[lt.follow_first + u] = kFollowScale * cache.follow[row + u];
      f[lt.fact_follow_first + u] = kFollowScale * cache.fact_follow[row + u];
    }
  }
  return f;
}

// Returns per-token log-probabilities; probs_out, if given, receives the
// softmax distribution.
std::vector<double> LogSoftmaxLogits(const PolicyParams& params,
                                     const std::vector<double>& f,
                                     std::vector<double>* probs_out) {
  const int v = params.vocab_size;
  std::vector<double> logits(v, 0.0);
  for (int r = 0; r < params.weights.rows; ++r) {
    const double fr = f[r];
    if (fr == 0.0) continue;
    const double* wrow = &params.weights.data[static_cast<size_t>(r) * v];
    for (int c = 0; c < v; ++c) logits[c] += fr * wrow[c];
  }
  double max_logit = logits[0];
  for (int c = 1; c < v; ++c) max_logit = std::max(max_logit, logits[c]);
  if (!std::isfinite(max_logit))
    throw std::runtime_error("policy: non-finite logits (diverged)");
  double sum = 0.0;
  for (int c = 0; c < v; ++c) sum += std::exp(logits[c] - max_logit);
  const double lse = max_logit + std::log(sum);
  std::vector<double> logp(v);
  for (int c = 0; c < v; ++c) logp[c] = std::min(logits[c] - lse, 0.0);
  if (probs_out) {
    probs_out->resize(v);
    for (int c = 0; c < v; ++c) (*probs_out)[c] = std::exp(logp[c]);
  }
  return logp;
}

void CheckParams(const PolicyParams& params, const Context& ctx) {
  if (params.vocab_size < 2)
    throw std::invalid_argument("policy: vocab_size must be >= 2");
  if (params.weights.rows != FeatureDim(params.vocab_size) ||
      params.weights.cols != params.vocab_size)
    throw std::invalid_argument("policy: weight shape mismatch");
  if (ctx.role != params.role)
    throw std::invalid_argument("policy: context role mismatch");
}

}  // namespace

const char* AgentRoleName(AgentRole role) {
  switch (role) {
    case AgentRole::kBuilder:
      return "builder";
    case AgentRole::kSummarizer:
      return "summarizer";
    case AgentRole::kResponder:
      return "responder";
  }
  return "unknown";
}

int FeatureDim(int vocab_size) { return 6 + 7 * vocab_size; }

PolicyParams MakePolicyParams(AgentRole role, int vocab_size) {
  PolicyParams params;
  params.role = role;
  params.vocab_size = vocab_size;
  params.weights = Matrix(FeatureDim(vocab_size), vocab_size);
  return params;
}

SampledSequence Sample(const PolicyParams& params, const Context& ctx,
                       Rng& rng, int max_len) {
  CheckParams(params, ctx);
  if (max_len < 1) throw std::invalid_argument("policy: max_len must be >= 1");
  const ContextCache cache(ctx, params.vocab_size);
  DecodeState state(params.vocab_size);
  const int eos = params.vocab_size - 1;

  SampledSequence out;
  for (int t = 0; t < max_len; ++t) {
    std::vector<double> probs;
    const std::vector<double> logp =
        LogSoftmaxLogits(params, BuildFeatures(cache, state), &probs);
    const double u = rng.NextDouble();
    int token = params.vocab_size - 1;
    double cum = 0.0;
    for (int c = 0; c < params.vocab_size; ++c) {
      cum += probs[c];
      if (u < cum) {
        token = c;
        break;
      }
    }
    out.tokens.push_back(token);
    out.logprobs_old.push_back(logp[token]);
    if (token == eos) break;
    state.Push(token);
  }
  return out;
}

std::vector<int> GreedyDecode(const PolicyParams& params, const Context& ctx,
                              int max_len) {
  CheckParams(params, ctx);
  const ContextCache cache(ctx, params.vocab_size);
  DecodeState state(params.vocab_size);
  const int eos = params.vocab_size - 1;

  std::vector<int> tokens;
  for (int t = 0; t < max_len; ++t) {
    const std::vector<double> logp =
        LogSoftmaxLogits(params, BuildFeatures(cache, state), nullptr);
    int token = 0;
    for (int c = 1; c < params.vocab_size; ++c) {
      if (logp[c] > logp[token]) token = c;
    }
    tokens.push_back(token);
    if (token == eos) break;
    state.Push(token);
  }
  return tokens;
}

std::vector<double> LogProb(const PolicyParams& params, const Context& ctx,
                            const std::vector<int>& tokens) {
  CheckParams(params, ctx);
  const ContextCache cache(ctx, params.vocab_size);
  DecodeState state(params.vocab_size);

  std::vector<double> out;
  out.reserve(tokens.size());
  for (int token : tokens) {
    if (token < 0 || token >= params.vocab_size)
      throw std::invalid_argument("policy: token out of vocabulary");
    const std::vector<double> logp =
        LogSoftmaxLogits(params, BuildFeatures(cache, state), nullptr);
    out.push_back(logp[token]);
    state.Push(token);
  }
  return out;
}

std::vector<Matrix> GradLogProb(const PolicyParams& params, const Context& ctx,
                                const std::vector<int>& tokens) {
  CheckParams(params, ctx);
  const ContextCache cache(ctx, params.vocab_size);
  DecodeState state(params.vocab_size);
  const int v = params.vocab_size;

  std::vector<Matrix> grads;
  grads.reserve(tokens.size());
  for (int token : tokens) {
    const std::vector<double> f = BuildFeatures(cache, state);
    std::vector<double> probs;
    LogSoftmaxLogits(params, f, &probs);
    Matrix g(params.weights.rows, v);
    for (int r = 0; r < g.rows; ++r) {
      if (f[r] == 0.0) continue;
      double* grow = &g.data[static_cast<size_t>(r) * v];
      for (int c = 0; c < v; ++c) {
        grow[c] = f[r] * ((c == token ? 1.0 : 0.0) - probs[c]);
      }
    }
    grads.push_back(std::move(g));
    state.Push(token);
  }
  return grads;
}

void AccumulateWeightedGradLogProb(const PolicyParams& params,
                                   const Context& ctx,
                                   const std::vector<int>& tokens,
                                   const std::vector<double>& coeffs,
                                   double scale, Matrix* grad) {
  CheckParams(params, ctx);
  if (coeffs.size() != tokens.size())
    throw std::invalid_argument("policy: coeffs/tokens length mismatch");
  if (!grad->SameShape(params.weights))
    throw std::invalid_argument("policy: gradient shape mismatch");
  const ContextCache cache(ctx, params.vocab_size);
  DecodeState state(params.vocab_size);
  const int v = params.vocab_size;

  for (size_t t = 0; t < tokens.size(); ++t) {
    const int token = tokens[t];
    const double w = scale * coeffs[t];
    const std::vector<double> f = BuildFeatures(cache, state);
    if (w != 0.0) {
      std::vector<double> probs;
      LogSoftmaxLogits(params, f, &probs);
      for (int r = 0; r < grad->rows; ++r) {
        if (f[r] == 0.0) continue;
        const double wf = w * f[r];
        double* grow = &grad->data[static_cast<size_t>(r) * v];
        for (int c = 0; c < v; ++c) {
          grow[c] += wf * ((c == token ? 1.0 : 0.0) - probs[c]);
        }
      }
    }
    state.Push(token);
  }
}

void InitRelayPrior(PolicyParams* params, double scale) {
  const FeatureLayout lt(params->vocab_size);
  Matrix& w = params->weights;
  // Relay agents keep copying rather than stopping early; pretrained
  // backbones likewise do not truncate their notes after a token or two.
  if (params->role != AgentRole::kResponder)
    w.At(lt.bias, lt.vocab - 1) -= scale;
  for (int u = 0; u < lt.vocab; ++u) {
    switch (params->role) {
      case AgentRole::kBuilder:
      case AgentRole::kSummarizer:
        // Chain-copy prior: continue the context along its own follower
        // links, reproducing recent records; the prefix penalty keeps the
        // chain from cycling over the same few tokens.
        // The fact-flagged follower outweighs the plain one so copied
        // bindings come from fact records, not from noise that happens
        // to reuse the same slot token.
        w.At(lt.follow_last + u, u) += 0.5 * scale;
        w.At(lt.fact_follow_last + u, u) += 1.5 * scale;
        w.At(lt.prefix_bag + u, u) -= 2.0 * scale;
        break;
      case AgentRole::kResponder:
        // Retrieval prior: answer with whatever follows the query token's
        // most recent occurrence in the assembled memory.
        w.At(lt.follow_first + u, u) += scale;
        w.At(lt.fact_follow_first + u, u) += scale;
        break;
    }
  }
}

void AddWeightNoise(PolicyParams* params, Rng& rng, double scale) {
  for (double& w : params->weights.data) {
    w += scale * (2.0 * rng.NextDouble() - 1.0);
  }
}

namespace {

void WriteU64(std::ofstream& out, uint64_t x) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(x >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t ReadU64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return x;
}

void WriteF64(std::ofstream& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  WriteU64(out, bits);
}

double ReadF64(std::ifstream& in) {
  const uint64_t bits = ReadU64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

constexpr uint64_t kCheckpointMagic = 0x31544b434c5254ULL;  // "TRLCKT1"

}  // namespace

void SaveCheckpoint(const std::string& path, const CheckpointData& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  WriteU64(out, kCheckpointMagic);
  WriteU64(out, ckpt.step);
  WriteU64(out, ckpt.config_hash);
  WriteU64(out, ckpt.agents.size());
  for (const PolicyParams& p : ckpt.agents) {
    WriteU64(out, static_cast<uint64_t>(p.role));
    WriteU64(out, static_cast<uint64_t>(p.weights.rows));
    WriteU64(out, static_cast<uint64_t>(p.vocab_size));
    for (double d : p.weights.data) WriteF64(out, d);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

CheckpointData LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  if (ReadU64(in) != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  CheckpointData ckpt;
  ckpt.step = ReadU64(in);
  ckpt.config_hash = ReadU64(in);
  const uint64_t n_agents = ReadU64(in);
  for (uint64_t a = 0; a < n_agents; ++a) {
    PolicyParams p;
    p.role = static_cast<AgentRole>(ReadU64(in));
    const int feature_dim = static_cast<int>(ReadU64(in));
    p.vocab_size = static_cast<int>(ReadU64(in));
    if (feature_dim != FeatureDim(p.vocab_size))
      throw std::runtime_error("checkpoint: feature_dim mismatch in " + path);
    p.weights = Matrix(feature_dim, p.vocab_size);
    for (double& d : p.weights.data) d = ReadF64(in);
    ckpt.agents.push_back(std::move(p));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file: " + path);
  return ckpt;
}

}  // namespace treerl
