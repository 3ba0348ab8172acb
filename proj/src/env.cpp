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

#include "treerl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "treerl/rng.hpp"

namespace treerl {

void ValidateTaskGenConfig(const TaskGenConfig& cfg) {
  if (cfg.n_slots < 1) throw std::invalid_argument("task: n_slots must be >= 1");
  if (cfg.n_values < 2) throw std::invalid_argument("task: n_values must be >= 2");
  if (cfg.history_len < 1)
    throw std::invalid_argument("task: history_len must be >= 1");
  if (cfg.noise_fraction < 0.0 || cfg.noise_fraction >= 1.0)
    throw std::invalid_argument("task: noise_fraction must be in [0, 1)");
  if (cfg.update_rate < 0.0 || cfg.update_rate > 1.0)
    throw std::invalid_argument("task: update_rate must be in [0, 1]");
  // noise_fraction < 1 already guarantees at least one non-noise record.
}

Task GenerateTask(uint64_t seed, const TaskGenConfig& cfg) {
  ValidateTaskGenConfig(cfg);
  Rng rng(MixSeed(seed, 0x7a5bULL));

  const int len = cfg.history_len;
  const int n_noise =
      static_cast<int>(std::floor(len * cfg.noise_fraction));

  // Pick which positions are noise with a Fisher-Yates shuffle so the
  // non-noise count is exact, not merely expected.
  std::vector<int> perm(len);
  for (int i = 0; i < len; ++i) perm[i] = i;
  for (int i = len - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.NextInt(i + 1)]);
  }
  std::vector<bool> is_noise(len, false);
  for (int i = 0; i < n_noise; ++i) is_noise[perm[i]] = true;

  Task task;
  task.seed = seed;
  task.cfg = cfg;
  task.history.reserve(len);

  std::vector<int> latest_fact(cfg.n_slots, -1);
  for (int t = 0; t < len; ++t) {
    Record rec;
    rec.time = t;
    rec.is_noise = is_noise[t];
    rec.slot = rng.NextInt(cfg.n_slots);
    if (rec.is_noise) {
      rec.value = rng.NextInt(cfg.n_values);
    } else if (latest_fact[rec.slot] >= 0 &&
               rng.NextDouble() >= cfg.update_rate) {
      rec.value = latest_fact[rec.slot];
    } else {
      rec.value = rng.NextInt(cfg.n_values);
    }
    if (!rec.is_noise) latest_fact[rec.slot] = rec.value;
    task.history.push_back(rec);
  }

  std::vector<int> answered_slots;
  for (int s = 0; s < cfg.n_slots; ++s) {
    if (latest_fact[s] >= 0) answered_slots.push_back(s);
  }
  // noise_fraction < 1 forces at least one fact record.
  task.query_slot = answered_slots[rng.NextInt(
      static_cast<int>(answered_slots.size()))];
  task.gold_answer = latest_fact[task.query_slot];
  task.history_token_len = 3 * len;
  return task;
}

std::vector<int> SerializeHistory(const Task& task) {
  const TaskGenConfig& cfg = task.cfg;
  std::vector<int> tokens;
  tokens.reserve(task.history.size() * 3);
  for (const Record& rec : task.history) {
    tokens.push_back(cfg.SlotToken(rec.slot));
    tokens.push_back(cfg.ValueToken(rec.value));
    tokens.push_back(rec.is_noise ? cfg.NoiseFlagToken()
                                  : cfg.FactFlagToken());
  }
  return tokens;
}

std::vector<Record> DeserializeHistory(const std::vector<int>& tokens,
                                       const TaskGenConfig& cfg) {
  if (tokens.size() % 3 != 0)
    throw std::invalid_argument("history tokens: length not a multiple of 3");
  std::vector<Record> records;
  records.reserve(tokens.size() / 3);
  for (size_t p = 0; p < tokens.size(); p += 3) {
    Record rec;
    rec.time = static_cast<int>(p / 3);
    const int slot_tok = tokens[p];
    const int value_tok = tokens[p + 1];
    const int flag_tok = tokens[p + 2];
    if (slot_tok < 0 || slot_tok >= cfg.n_slots)
      throw std::invalid_argument("history tokens: bad slot token");
    if (value_tok < cfg.n_slots || value_tok >= cfg.n_slots + cfg.n_values)
      throw std::invalid_argument("history tokens: bad value token");
    if (flag_tok != cfg.FactFlagToken() && flag_tok != cfg.NoiseFlagToken())
      throw std::invalid_argument("history tokens: bad flag token");
    rec.slot = slot_tok;
    rec.value = value_tok - cfg.n_slots;
    rec.is_noise = (flag_tok == cfg.NoiseFlagToken());
    records.push_back(rec);
  }
  return records;
}

double Evaluate(int answer_token, const Task& task) {
  return answer_token == task.GoldAnswerToken() ? 1.0 : 0.0;
}

std::string TaskToJsonLine(const Task& task) {
  nlohmann::json j;
  j["seed"] = task.seed;
  j["cfg"] = {{"n_slots", task.cfg.n_slots},
              {"n_values", task.cfg.n_values},
              {"history_len", task.cfg.history_len},
              {"noise_fraction", task.cfg.noise_fraction},
              {"update_rate", task.cfg.update_rate}};
  nlohmann::json records = nlohmann::json::array();
  for (const Record& rec : task.history) {
    records.push_back({{"slot", rec.slot},
                       {"value", rec.value},
                       {"time", rec.time},
                       {"noise", rec.is_noise}});
  }
  j["records"] = std::move(records);
  j["query_slot"] = task.query_slot;
  j["gold_answer"] = task.gold_answer;
  return j.dump();
}

Task TaskFromJsonLine(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  Task task;
  task.seed = j.at("seed").get<uint64_t>();
  const auto& c = j.at("cfg");
  task.cfg.n_slots = c.at("n_slots").get<int>();
  task.cfg.n_values = c.at("n_values").get<int>();
  task.cfg.history_len = c.at("history_len").get<int>();
  task.cfg.noise_fraction = c.at("noise_fraction").get<double>();
  task.cfg.update_rate = c.at("update_rate").get<double>();
  for (const auto& r : j.at("records")) {
    Record rec;
    rec.slot = r.at("slot").get<int>();
    rec.value = r.at("value").get<int>();
    rec.time = r.at("time").get<int>();
    rec.is_noise = r.at("noise").get<bool>();
    task.history.push_back(rec);
  }
  task.query_slot = j.at("query_slot").get<int>();
  task.gold_answer = j.at("gold_answer").get<int>();
  task.history_token_len = static_cast<int>(task.history.size()) * 3;
  return task;
}

}  // namespace treerl
