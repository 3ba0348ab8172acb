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

#ifndef TREERL_ENV_HPP_
#define TREERL_ENV_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace treerl {

// Token layout of the flat shared vocabulary:
//   [0, n_slots)                      slot tokens
//   [n_slots, n_slots + n_values)     value tokens
//   n_slots + n_values                fact flag
//   n_slots + n_values + 1            noise flag
//   n_slots + n_values + 2            end-of-sequence (policy control token)
// All policies share this vocabulary, so vocab_size = n_slots + n_values + 3.
struct TaskGenConfig {
  int n_slots = 8;
  int n_values = 4;
  int history_len = 20;
  double noise_fraction = 0.5;
  // Probability that a repeated fact record for a slot changes the slot's
  // value (otherwise it re-asserts the current value).
  double update_rate = 0.2;

  int VocabSize() const { return n_slots + n_values + 3; }
  int SlotToken(int slot) const { return slot; }
  int ValueToken(int value) const { return n_slots + value; }
  int FactFlagToken() const { return n_slots + n_values; }
  int NoiseFlagToken() const { return n_slots + n_values + 1; }
  int EosToken() const { return n_slots + n_values + 2; }
};

// Throws std::invalid_argument if the config cannot produce a valid task.
void ValidateTaskGenConfig(const TaskGenConfig& cfg);

// One slot-update event in the interaction history.
struct Record {
  int slot = 0;
  int value = 0;
  int time = 0;
  bool is_noise = false;
};

// A synthetic long-horizon memory task: a history of slot updates, a
// queried slot, and the value of the latest non-noise update to it.
struct Task {
  uint64_t seed = 0;
  TaskGenConfig cfg;
  std::vector<Record> history;
  int query_slot = 0;
  int gold_answer = 0;       // value identifier, not a token
  int history_token_len = 0; // == 3 * history.size()

  int QueryToken() const { return cfg.SlotToken(query_slot); }
  int GoldAnswerToken() const { return cfg.ValueToken(gold_answer); }
};

// Deterministic in (seed, cfg). At least
// ceil(history_len * (1 - noise_fraction)) records are non-noise, and the
// gold answer is the value of the latest non-noise record for query_slot.
Task GenerateTask(uint64_t seed, const TaskGenConfig& cfg);

// Three tokens per record: (slot-token, value-token, noise-flag-token).
std::vector<int> SerializeHistory(const Task& task);

// Inverse of SerializeHistory over the record fields it encodes (time
// indices are positional). Throws on malformed input.
std::vector<Record> DeserializeHistory(const std::vector<int>& tokens,
                                       const TaskGenConfig& cfg);

// Exact-match downstream evaluator: 1.0 iff answer_token is the gold
// answer's value token. Out-of-vocabulary tokens score 0.0.
double Evaluate(int answer_token, const Task& task);

// JSON-lines persistence, one task per line.
std::string TaskToJsonLine(const Task& task);
Task TaskFromJsonLine(const std::string& line);

}  // namespace treerl

#endif  // TREERL_ENV_HPP_
