// Copyright 2026  The corrpool authors
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

#ifndef CORRPOOL_CHECKPOINT_HPP_
#define CORRPOOL_CHECKPOINT_HPP_

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "corrpool/model.hpp"
#include "corrpool/records.hpp"

namespace corrpool {

/// Checkpoint container:
///   offset 0:  magic, 8 ASCII bytes "CPCKPT01"
///   offset 8:  header length H as u64 little-endian
///   offset 16: H bytes of JSON (model config, parameter table, train state)
///   offset 16+H: payload, f64 little-endian, in parameter-table order:
///                values, then optimizer moments, then the best-epoch
///                parameter snapshot when present
/// Serialization is canonical: save - load - save reproduces the bytes.

/// Mutable training progress carried by a resumable checkpoint.
struct TrainState {
  nlohmann::json train_config;  // the TrainConfig document, echoed verbatim
  std::size_t epochs_done = 0;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;  // 1-indexed; 0 = no best yet
  double best_metric = 0.0;
  std::vector<Tensor> best_params;       // empty = no snapshot
  std::uint64_t optimizer_steps = 0;
  std::vector<Tensor> moment1, moment2;  // empty for sgd
};

void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const TrainState* train);

struct LoadedCheckpoint {
  Model model;
  std::optional<TrainState> train;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg,
                                    const std::vector<std::string>& class_names);
ModelConfig model_config_from_json(const nlohmann::json& j,
                                   std::vector<std::string>* class_names);

}  // namespace corrpool

#endif  // CORRPOOL_CHECKPOINT_HPP_
