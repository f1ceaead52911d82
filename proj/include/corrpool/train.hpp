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

#ifndef CORRPOOL_TRAIN_HPP_
#define CORRPOOL_TRAIN_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrpool/checkpoint.hpp"
#include "corrpool/manifest.hpp"
#include "corrpool/metrics.hpp"
#include "corrpool/model.hpp"
#include "corrpool/optimizer.hpp"

namespace corrpool {

/// Everything a training run needs beyond the data.  The `model` knobs are
/// carried unresolved ("auto", task defaults) so one config file works for
/// several tasks; resolve_model_config pins them at model creation.
struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double dropout = 0.0;
  PoolingMethod pooling = PoolingMethod::kMean;
  Task task = Task::kSid;
  std::size_t patience = 0;  // 0 disables early stopping

  std::size_t proj_dim = 0;  // 0 = task default
  std::string post_pool_proj = "auto";
  std::size_t post_pool_dim = 256;
  std::vector<TdnnLayerSpec> tdnn;  // empty = default schedule
  std::size_t embed_dim = 512;
  double am_scale = 30.0;
  double am_margin = 0.4;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
void validate_train_config(const TrainConfig& cfg);

/// A manifest loaded into memory.  class_names is the sorted label set;
/// class_ids index into it.
struct Dataset {
  std::vector<std::string> utt_ids;
  std::vector<LayerStack> stacks;
  std::vector<std::string> labels;
  std::vector<std::size_t> class_ids;
  std::vector<std::string> class_names;

  std::size_t size() const { return stacks.size(); }
};

/// Loads every stack of the manifest.  All stacks must agree on L+1 and D.
/// When `class_names` is given (evaluation against a trained model), labels
/// are mapped through it and unknown labels are rejected.
Dataset load_dataset(const Manifest& manifest,
                     const std::vector<std::string>* class_names = nullptr);

struct TrainOutcome {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::size_t plateau_epoch = 0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metric_log;
};

/// Deterministic mini-batch training.  Per-epoch batch order and dropout
/// masks come from streams derived of (seed, epoch), so interrupting after
/// any epoch and resuming from last.ckpt reproduces an uninterrupted run
/// bitwise.  Writes last.ckpt every epoch and best.ckpt + metrics.tsv at
/// the end.  `progress` (may be null) receives one line per epoch.
TrainOutcome run_training(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                          const std::vector<TrialPair>& val_trials,
                          const std::filesystem::path& out_dir,
                          const Tensor* transplanted_logits, std::ostream* progress);

/// Continues a run saved by run_training.  `epochs_override` (0 = keep)
/// raises or lowers the target epoch count.
TrainOutcome resume_training(const std::filesystem::path& last_ckpt, const Dataset& train,
                             const Dataset& val, const std::vector<TrialPair>& val_trials,
                             const std::filesystem::path& out_dir, std::size_t epochs_override,
                             std::ostream* progress);

/// Inference over a dataset with a trained model.

LogitSet evaluate_logits(Model& model, const Dataset& ds);
double classification_accuracy(Model& model, const Dataset& ds);
ScoreSet score_trials(Model& model, const Dataset& ds, const std::vector<TrialPair>& trials);

}  // namespace corrpool

#endif  // CORRPOOL_TRAIN_HPP_
