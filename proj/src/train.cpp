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

#include "corrpool/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <utility>

#include "corrpool/error.hpp"
#include "corrpool/records.hpp"
#include "corrpool/stack_io.hpp"

namespace corrpool {
namespace {

// Stream tags for deriving independent RNG streams from the run seed.
// Order and mask streams are additionally keyed by the epoch number, so a
// resumed run replays the exact shuffles and masks of an uninterrupted one.
constexpr std::uint64_t kInitStream = 0x1217;
constexpr std::uint64_t kOrderStream = 0x08DE;
constexpr std::uint64_t kMaskStream = 0x3A5C;

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw FormatError("train config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

nlohmann::json tdnn_to_json(const std::vector<TdnnLayerSpec>& tdnn) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TdnnLayerSpec& l : tdnn) {
    arr.push_back({{"kernel", l.kernel},
                   {"dilation", l.dilation},
                   {"channels", l.channels},
                   {"activation", activation_name(l.activation)}});
  }
  return arr;
}

std::vector<TdnnLayerSpec> tdnn_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw FormatError("train config: 'tdnn' must be an array");
  std::vector<TdnnLayerSpec> out;
  for (const auto& e : arr) {
    reject_unknown_keys(e, {"kernel", "dilation", "channels", "activation"}, "tdnn layer");
    TdnnLayerSpec l;
    l.kernel = e.at("kernel").get<std::size_t>();
    l.dilation = e.at("dilation").get<std::size_t>();
    l.channels = e.at("channels").get<std::size_t>();
    if (e.contains("activation")) l.activation = parse_activation(e.at("activation"));
    out.push_back(l);
  }
  return out;
}

}  // namespace

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json model = {{"proj_dim", cfg.proj_dim},
                          {"post_pool_proj", cfg.post_pool_proj},
                          {"post_pool_dim", cfg.post_pool_dim},
                          {"embed_dim", cfg.embed_dim},
                          {"tdnn", tdnn_to_json(cfg.tdnn)},
                          {"am_scale", cfg.am_scale},
                          {"am_margin", cfg.am_margin},
                          {"epsilon", cfg.epsilon},
                          {"dropout_after_standardize", cfg.dropout_after_standardize}};
  return {{"seed", cfg.seed},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate},
          {"optimizer", optimizer_name(cfg.optimizer)},
          {"dropout", cfg.dropout},
          {"pooling", pooling_name(cfg.pooling)},
          {"task", task_name(cfg.task)},
          {"patience", cfg.patience},
          {"model", model}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    reject_unknown_keys(j,
                        {"seed", "batch_size", "epochs", "learning_rate", "optimizer", "dropout",
                         "pooling", "task", "patience", "model"},
                        "top level");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j.at("optimizer"));
    if (j.contains("dropout")) cfg.dropout = j.at("dropout").get<double>();
    if (j.contains("pooling")) cfg.pooling = parse_pooling(j.at("pooling"));
    if (j.contains("task")) cfg.task = parse_task(j.at("task"));
    if (j.contains("patience")) cfg.patience = j.at("patience").get<std::size_t>();
    if (j.contains("model")) {
      const nlohmann::json& m = j.at("model");
      reject_unknown_keys(m,
                          {"proj_dim", "post_pool_proj", "post_pool_dim", "embed_dim", "tdnn",
                           "am_scale", "am_margin", "epsilon", "dropout_after_standardize"},
                          "'model'");
      if (m.contains("proj_dim")) cfg.proj_dim = m.at("proj_dim").get<std::size_t>();
      if (m.contains("post_pool_proj")) cfg.post_pool_proj = m.at("post_pool_proj");
      if (m.contains("post_pool_dim")) cfg.post_pool_dim = m.at("post_pool_dim").get<std::size_t>();
      if (m.contains("embed_dim")) cfg.embed_dim = m.at("embed_dim").get<std::size_t>();
      if (m.contains("tdnn")) cfg.tdnn = tdnn_from_json(m.at("tdnn"));
      if (m.contains("am_scale")) cfg.am_scale = m.at("am_scale").get<double>();
      if (m.contains("am_margin")) cfg.am_margin = m.at("am_margin").get<double>();
      if (m.contains("epsilon")) cfg.epsilon = m.at("epsilon").get<double>();
      if (m.contains("dropout_after_standardize")) {
        cfg.dropout_after_standardize = m.at("dropout_after_standardize").get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  validate_train_config(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open train config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("train config '" + path.string() + "': " + e.what());
  }
  return train_config_from_json(j);
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ValueError("train config: batch_size must be positive");
  if (cfg.epochs == 0) throw ValueError("train config: epochs must be positive");
  if (cfg.learning_rate < 0.0) throw ValueError("train config: learning_rate must be >= 0");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
    throw ValueError("train config: dropout must lie in [0, 1)");
  }
  if (cfg.post_pool_proj != "auto" && cfg.post_pool_proj != "on" && cfg.post_pool_proj != "off") {
    throw ValueError("train config: post_pool_proj must be 'auto', 'on', or 'off'");
  }
  if (cfg.post_pool_dim == 0) throw ValueError("train config: post_pool_dim must be positive");
  if (cfg.embed_dim == 0) throw ValueError("train config: embed_dim must be positive");
  if (!(cfg.am_scale > 0.0)) throw ValueError("train config: am_scale must be > 0");
  if (cfg.am_margin < 0.0) throw ValueError("train config: am_margin must be >= 0");
  if (!(cfg.epsilon > 0.0)) throw ValueError("train config: epsilon must be > 0");
}

Dataset load_dataset(const Manifest& manifest, const std::vector<std::string>* class_names) {
  if (manifest.entries.empty()) throw ValueError("load_dataset: manifest has no entries");
  Dataset ds;
  ds.class_names = class_names ? *class_names : manifest.class_names();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) index.emplace(ds.class_names[i], i);

  for (const ManifestEntry& e : manifest.entries) {
    LayerStack stack(read_stack(e.resolved_path));
    if (!ds.stacks.empty()) {
      const LayerStack& first = ds.stacks.front();
      if (stack.layer_count() != first.layer_count() || stack.channels() != first.channels()) {
        throw ShapeError("load_dataset: utterance '" + e.utt_id + "' has stack shape " +
                         stack.layers.shape_string() + " but '" + ds.utt_ids.front() + "' has " +
                         first.layers.shape_string() +
                         " (layer and channel counts must match)");
      }
    }
    auto it = index.find(e.label);
    if (it == index.end()) {
      throw ValueError("load_dataset: label '" + e.label + "' of utterance '" + e.utt_id +
                       "' is not in the model's class set");
    }
    ds.utt_ids.push_back(e.utt_id);
    ds.stacks.push_back(std::move(stack));
    ds.labels.push_back(e.label);
    ds.class_ids.push_back(it->second);
  }
  return ds;
}

LogitSet evaluate_logits(Model& model, const Dataset& ds) {
  if (!model.is_classifier()) {
    throw ValueError("evaluate_logits: model has no classifier head");
  }
  LogitSet out;
  out.ids = ds.utt_ids;
  out.labels = ds.labels;
  out.logits.reserve(ds.size());
  for (const LayerStack& s : ds.stacks) out.logits.push_back(model.logits(s).raw());
  return out;
}

double classification_accuracy(Model& model, const Dataset& ds) {
  LogitSet run = evaluate_logits(model, ds);
  return accuracy(run.logits, ds.class_ids);
}

ScoreSet score_trials(Model& model, const Dataset& ds, const std::vector<TrialPair>& trials) {
  if (trials.empty()) throw ValueError("score_trials: empty trial list");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index.emplace(ds.utt_ids[i], i);
  std::unordered_map<std::size_t, std::vector<double>> cache;
  auto embed = [&](const std::string& utt) {
    auto it = index.find(utt);
    if (it == index.end()) {
      throw ValueError("score_trials: trial references unknown utterance '" + utt + "'");
    }
    auto [slot, fresh] = cache.try_emplace(it->second);
    if (fresh) slot->second = model.embedding(ds.stacks[it->second]).raw();
    return slot->second;  // by value: later inserts may rehash the cache
  };
  ScoreSet out;
  out.reserve(trials.size());
  for (const TrialPair& t : trials) {
    const std::vector<double> a = embed(t.enroll);
    const std::vector<double> b = embed(t.test);
    out.push_back({t.trial_id(), cosine_score(a, b), t.target});
  }
  return out;
}

namespace {

struct MetricConvention {
  const char* name;    // column label for progress lines
  bool higher_better;  // improvement direction
};

MetricConvention metric_convention(const Model& model) {
  if (model.is_classifier()) return {"val_acc", true};
  return {"val_eer", false};
}

double validate_once(Model& model, const Dataset& val, const std::vector<TrialPair>& val_trials) {
  if (model.is_classifier()) return classification_accuracy(model, val);
  return eer(score_trials(model, val, val_trials));
}

void check_datasets(const Model& model, const Dataset& train, const Dataset& val,
                    const std::vector<TrialPair>& val_trials) {
  const ModelConfig& mc = model.config();
  auto check_dims = [&](const Dataset& ds, const char* which) {
    if (ds.size() == 0) throw ValueError(std::string(which) + " dataset is empty");
    const LayerStack& s = ds.stacks.front();
    if (s.layer_count() != mc.layers || s.channels() != mc.input_dim) {
      throw ShapeError(std::string(which) + " dataset stacks are " + s.layers.shape_string() +
                       " but the model expects " + std::to_string(mc.layers) + " layers of " +
                       std::to_string(mc.input_dim) + " channels");
    }
  };
  check_dims(train, "train");
  check_dims(val, "validation");
  if (model.is_classifier()) {
    if (train.class_names != model.class_names() || val.class_names != model.class_names()) {
      throw ValueError("dataset class set does not match the model's class set");
    }
  } else if (val_trials.empty()) {
    throw ValueError("speaker-verification training needs a validation trial list");
  }
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

/// Runs epochs state.epochs_done+1 .. cfg.epochs, updating `state` in place
/// and writing last.ckpt after every epoch.  Shared by fresh and resumed
/// runs; `state` already carries the log and best snapshot of prior epochs.
TrainOutcome train_loop(const TrainConfig& cfg, Model& model, Optimizer& opt, TrainState& state,
                        const Dataset& train, const Dataset& val,
                        const std::vector<TrialPair>& val_trials,
                        const std::filesystem::path& out_dir, std::ostream* progress) {
  check_datasets(model, train, val, val_trials);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path last_path = out_dir / "last.ckpt";
  const std::filesystem::path best_path = out_dir / "best.ckpt";
  const std::filesystem::path log_path = out_dir / "metrics.tsv";
  const MetricConvention metric = metric_convention(model);
  std::vector<Parameter*> params = model.parameters();

  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    SeededRng order_rng(SeededRng::mix(cfg.seed, kOrderStream, epoch));
    SeededRng mask_rng(SeededRng::mix(cfg.seed, kMaskStream, epoch));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++step) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (Parameter* p : params) p->zero_grad();
      try {
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t idx = order[i];
          DropoutMask mask;
          const DropoutMask* mask_ptr = nullptr;
          if (model.wants_dropout_mask()) {
            mask = model.draw_mask(mask_rng);
            mask_ptr = &mask;
          }
          Graph g;
          NodeId loss = model.loss_node(g, train.stacks[idx].layers, train.class_ids[idx],
                                        mask_ptr);
          g.backward_scaled(loss, inv_batch);
          loss_sum += g.scalar_value(loss);
        }
        opt.step();
      } catch (const NumericError& e) {
        throw TrainError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                         ": " + e.what());
      }
    }
    const double train_loss = loss_sum / static_cast<double>(train.size());

    double val_metric = 0.0;
    try {
      val_metric = validate_once(model, val, val_trials);
    } catch (const NumericError& e) {
      throw TrainError("epoch " + std::to_string(epoch) + ", validation: " + e.what());
    }

    state.log.push_back({epoch, train_loss, val_metric});
    state.epochs_done = epoch;
    const bool improved = state.best_epoch == 0 ||
                          (metric.higher_better ? val_metric > state.best_metric
                                                : val_metric < state.best_metric);
    if (improved) {
      state.best_epoch = epoch;
      state.best_metric = val_metric;
      state.best_params.clear();
      for (const Parameter* p : params) state.best_params.push_back(p->value);
    }
    state.optimizer_steps = opt.steps();
    state.moment1 = opt.moment1();
    state.moment2 = opt.moment2();
    save_checkpoint(last_path, model, &state);

    if (progress) {
      (*progress) << "epoch " << epoch << "/" << cfg.epochs << "  train_loss "
                  << format_double(train_loss) << "  " << metric.name << " "
                  << format_percent(val_metric) << (improved ? "  (best)" : "") << "\n";
    }
    if (cfg.patience > 0 && epoch - state.best_epoch >= cfg.patience) {
      if (progress) {
        (*progress) << "early stop: no improvement in " << cfg.patience << " epoch(s) since epoch "
                    << state.best_epoch << "\n";
      }
      break;
    }
  }

  // Final artifacts: the metric log and a standalone best-epoch checkpoint.
  write_metric_log(log_path, state.log);
  std::vector<Tensor> current;
  current.reserve(params.size());
  for (const Parameter* p : params) current.push_back(p->value);
  if (!state.best_params.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = state.best_params[i];
  }
  save_checkpoint(best_path, model, nullptr);
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = current[i];

  TrainOutcome out;
  out.log = state.log;
  out.best_epoch = state.best_epoch;
  out.best_metric = state.best_metric;
  if (cfg.patience > 0 && !state.log.empty()) {
    std::vector<double> metrics;
    metrics.reserve(state.log.size());
    for (const EpochRecord& r : state.log) metrics.push_back(r.val_metric);
    out.plateau_epoch = epochs_to_plateau(metrics, 0.0, cfg.patience, metric.higher_better);
  }
  out.best_checkpoint = best_path;
  out.last_checkpoint = last_path;
  out.metric_log = log_path;
  return out;
}

}  // namespace

TrainOutcome run_training(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                          const std::vector<TrialPair>& val_trials,
                          const std::filesystem::path& out_dir,
                          const Tensor* transplanted_logits, std::ostream* progress) {
  validate_train_config(cfg);
  if (train.size() == 0) throw ValueError("run_training: train dataset is empty");

  ModelConfig mc;
  mc.task = cfg.task;
  mc.pooling = cfg.pooling;
  mc.input_dim = train.stacks.front().channels();
  mc.layers = train.stacks.front().layer_count();
  mc.num_classes = train.class_names.size();
  mc.dropout = cfg.dropout;
  mc.proj_dim = cfg.proj_dim;
  mc.post_pool_dim = cfg.post_pool_dim;
  mc.tdnn = cfg.tdnn;
  mc.embed_dim = cfg.embed_dim;
  mc.am_scale = cfg.am_scale;
  mc.am_margin = cfg.am_margin;
  mc.epsilon = cfg.epsilon;
  mc.dropout_after_standardize = cfg.dropout_after_standardize;
  mc = resolve_model_config(mc, cfg.post_pool_proj);

  SeededRng init_rng(SeededRng::mix(cfg.seed, kInitStream));
  Model model(mc, train.class_names, init_rng);
  if (transplanted_logits) {
    LayerWeights& lw = model.layer_weights();
    if (!transplanted_logits->same_shape(lw.logits.value)) {
      throw ShapeError("transplanted layer weights have shape " +
                       transplanted_logits->shape_string() + " but the model expects " +
                       lw.logits.value.shape_string());
    }
    lw.logits.value = *transplanted_logits;
    lw.freeze();
  }

  OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.learning_rate = cfg.learning_rate;
  Optimizer opt(oc, model.parameters());

  TrainState state;
  state.train_config = train_config_to_json(cfg);
  return train_loop(cfg, model, opt, state, train, val, val_trials, out_dir, progress);
}

TrainOutcome resume_training(const std::filesystem::path& last_ckpt, const Dataset& train,
                             const Dataset& val, const std::vector<TrialPair>& val_trials,
                             const std::filesystem::path& out_dir, std::size_t epochs_override,
                             std::ostream* progress) {
  LoadedCheckpoint loaded = load_checkpoint(last_ckpt);
  if (!loaded.train) {
    throw ValueError("checkpoint '" + last_ckpt.string() +
                     "' carries no training state and cannot be resumed");
  }
  TrainConfig cfg = train_config_from_json(loaded.train->train_config);
  if (epochs_override > 0) {
    cfg.epochs = epochs_override;
    loaded.train->train_config = train_config_to_json(cfg);
  }

  OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.learning_rate = cfg.learning_rate;
  Optimizer opt(oc, loaded.model.parameters());
  opt.restore(loaded.train->optimizer_steps, loaded.train->moment1, loaded.train->moment2);

  return train_loop(cfg, loaded.model, opt, *loaded.train, train, val, val_trials, out_dir,
                    progress);
}

}  // namespace corrpool
