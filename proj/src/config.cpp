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

#include "treerl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace treerl {
namespace {

void CheckKeys(const nlohmann::json& j, const std::string& where,
               const std::set<std::string>& required,
               const std::set<std::string>& optional = {}) {
  if (!j.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!required.count(key) && !optional.count(key))
      throw std::invalid_argument("config: unknown key '" + where + key + "'");
  }
  for (const std::string& key : required) {
    if (!j.contains(key))
      throw std::invalid_argument("config: missing key '" + where + key + "'");
  }
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const nlohmann::json& j) {
  CheckKeys(j, "",
            {"run_name", "output_dir", "seeds", "steps", "eval_cadence",
             "eval_tasks", "task", "train", "lengths"},
            {"checkpoint_cadence"});
  ExperimentConfig cfg;
  cfg.run_name = j.at("run_name").get<std::string>();
  cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  cfg.steps = j.at("steps").get<int>();
  cfg.eval_cadence = j.at("eval_cadence").get<int>();
  cfg.eval_tasks = j.at("eval_tasks").get<int>();
  cfg.checkpoint_cadence = j.value("checkpoint_cadence", 0);

  const auto& t = j.at("task");
  CheckKeys(t, "task.",
            {"n_slots", "n_values", "history_len", "noise_fraction",
             "update_rate"});
  cfg.task.n_slots = t.at("n_slots").get<int>();
  cfg.task.n_values = t.at("n_values").get<int>();
  cfg.task.history_len = t.at("history_len").get<int>();
  cfg.task.noise_fraction = t.at("noise_fraction").get<double>();
  cfg.task.update_rate = t.at("update_rate").get<double>();

  const auto& tr = j.at("train");
  CheckKeys(tr, "train.",
            {"G", "J", "K", "eps_norm", "eps_clip", "lambda_len",
             "learning_rate", "updates_per_rollout", "reward_scheme",
             "task_weight"});
  cfg.train.branching.G = tr.at("G").get<int>();
  cfg.train.branching.J = tr.at("J").get<int>();
  cfg.train.branching.K = tr.at("K").get<int>();
  cfg.train.eps_norm = tr.at("eps_norm").get<double>();
  cfg.train.eps_clip = tr.at("eps_clip").get<double>();
  cfg.train.lambda_len = tr.at("lambda_len").get<double>();
  cfg.train.learning_rate = tr.at("learning_rate").get<double>();
  cfg.train.updates_per_rollout = tr.at("updates_per_rollout").get<int>();
  cfg.train.scheme.tag =
      ParseRewardScheme(tr.at("reward_scheme").get<std::string>());
  cfg.train.scheme.task_weight = tr.at("task_weight").get<double>();

  const auto& ln = j.at("lengths");
  CheckKeys(ln, "lengths.",
            {"builder_max_len", "summarizer_max_len", "responder_max_len"});
  cfg.train.lengths.builder_max_len = ln.at("builder_max_len").get<int>();
  cfg.train.lengths.summarizer_max_len =
      ln.at("summarizer_max_len").get<int>();
  cfg.train.lengths.responder_max_len = ln.at("responder_max_len").get<int>();

  ValidateExperimentConfig(cfg);
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " +
                                e.what());
  }
  return ParseExperimentConfig(j);
}

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& cfg) {
  return nlohmann::json{
      {"run_name", cfg.run_name},
      {"output_dir", cfg.output_dir},
      {"seeds", cfg.seeds},
      {"steps", cfg.steps},
      {"eval_cadence", cfg.eval_cadence},
      {"eval_tasks", cfg.eval_tasks},
      {"checkpoint_cadence", cfg.checkpoint_cadence},
      {"task",
       {{"n_slots", cfg.task.n_slots},
        {"n_values", cfg.task.n_values},
        {"history_len", cfg.task.history_len},
        {"noise_fraction", cfg.task.noise_fraction},
        {"update_rate", cfg.task.update_rate}}},
      {"train",
       {{"G", cfg.train.branching.G},
        {"J", cfg.train.branching.J},
        {"K", cfg.train.branching.K},
        {"eps_norm", cfg.train.eps_norm},
        {"eps_clip", cfg.train.eps_clip},
        {"lambda_len", cfg.train.lambda_len},
        {"learning_rate", cfg.train.learning_rate},
        {"updates_per_rollout", cfg.train.updates_per_rollout},
        {"reward_scheme", RewardSchemeName(cfg.train.scheme.tag)},
        {"task_weight", cfg.train.scheme.task_weight}}},
      {"lengths",
       {{"builder_max_len", cfg.train.lengths.builder_max_len},
        {"summarizer_max_len", cfg.train.lengths.summarizer_max_len},
        {"responder_max_len", cfg.train.lengths.responder_max_len}}}};
}

void ValidateExperimentConfig(const ExperimentConfig& cfg) {
  if (cfg.run_name.empty())
    throw std::invalid_argument("config: run_name must be non-empty");
  if (cfg.output_dir.empty())
    throw std::invalid_argument("config: output_dir must be non-empty");
  if (cfg.seeds.empty())
    throw std::invalid_argument("config: seeds must be non-empty");
  if (cfg.steps < 0) throw std::invalid_argument("config: steps must be >= 0");
  if (cfg.eval_cadence < 1)
    throw std::invalid_argument("config: eval_cadence must be >= 1");
  if (cfg.eval_tasks < 1)
    throw std::invalid_argument("config: eval_tasks must be >= 1");
  if (cfg.checkpoint_cadence < 0)
    throw std::invalid_argument("config: checkpoint_cadence must be >= 0");
  ValidateTaskGenConfig(cfg.task);
  ValidateTrainConfig(cfg.train);
  if (cfg.train.lengths.builder_max_len > 3 * cfg.task.history_len)
    throw std::invalid_argument(
        "config: lengths.builder_max_len exceeds the serialized history");
}

uint64_t Fnv1a64(const std::string& bytes) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

uint64_t ConfigHash(const ExperimentConfig& cfg) {
  return Fnv1a64(ExperimentConfigToJson(cfg).dump());
}

}  // namespace treerl
