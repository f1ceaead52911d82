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

// Command-line entry point.  Exit codes: 0 success, 1 runtime failure,
// 2 usage error.  Every command echoes its resolved configuration (one JSON
// line, including the seed where one applies) to stderr before executing;
// results go to stdout.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrpool/checkpoint.hpp"
#include "corrpool/error.hpp"
#include "corrpool/gradcheck.hpp"
#include "corrpool/model.hpp"
#include "corrpool/pooling.hpp"
#include "corrpool/records.hpp"
#include "corrpool/stack_io.hpp"
#include "corrpool/synth.hpp"
#include "corrpool/train.hpp"

namespace {

using corrpool::Dataset;
using corrpool::LogitSet;
using corrpool::ScoreSet;

void echo_config(nlohmann::json j, const std::string& command) {
  j["command"] = command;
  std::cerr << "config: " << j.dump() << "\n";
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

// ---------------------------------------------------------------- gen-synth

struct GenSynthArgs {
  std::string spec_path;
  std::string out_dir;
};

int run_gen_synth(const GenSynthArgs& a) {
  corrpool::SynthSpec spec = corrpool::load_synth_spec(a.spec_path);
  nlohmann::json j = corrpool::synth_spec_to_json(spec);
  j["out"] = a.out_dir;
  echo_config(j, "gen-synth");
  corrpool::SynthOutput out = corrpool::generate_synthetic(spec, a.out_dir);
  std::cout << "stacks_written " << out.stacks_written << "\n";
  std::cout << "train_manifest " << out.train_manifest.string() << "\n";
  std::cout << "val_manifest " << out.val_manifest.string() << "\n";
  if (!out.eval_manifest.empty()) {
    std::cout << "eval_manifest " << out.eval_manifest.string() << "\n";
    std::cout << "val_trials " << out.val_trials.string() << "\n";
    std::cout << "eval_trials " << out.eval_trials.string() << "\n";
  }
  return 0;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest;
  std::string val_manifest;
  std::string trials;
  std::string config;
  std::string out_dir;
  std::string resume;
  std::string transfer_layer_weights;
  std::string task;
  std::string pooling;
  std::string optimizer;
  double dropout = 0.0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::size_t patience = 0;
  // which flags were actually given
  bool has_task = false, has_pooling = false, has_optimizer = false, has_dropout = false;
  bool has_lr = false, has_seed = false, has_epochs = false, has_batch = false;
  bool has_patience = false;
};

int run_train(const TrainArgs& a) {
  const bool resuming = !a.resume.empty();
  corrpool::TrainConfig cfg;
  if (!a.config.empty()) cfg = corrpool::load_train_config(a.config);
  if (a.has_task) cfg.task = corrpool::parse_task(a.task);
  if (a.has_pooling) cfg.pooling = corrpool::parse_pooling(a.pooling);
  if (a.has_optimizer) cfg.optimizer = corrpool::parse_optimizer(a.optimizer);
  if (a.has_dropout) cfg.dropout = a.dropout;
  if (a.has_lr) cfg.learning_rate = a.learning_rate;
  if (a.has_seed) cfg.seed = a.seed;
  if (a.has_epochs) cfg.epochs = a.epochs;
  if (a.has_batch) cfg.batch_size = a.batch_size;
  if (a.has_patience) cfg.patience = a.patience;
  corrpool::validate_train_config(cfg);

  corrpool::Manifest train_manifest = corrpool::load_manifest(a.manifest);
  Dataset train = corrpool::load_dataset(train_manifest);
  const bool classifier = cfg.task != corrpool::Task::kSv;
  Dataset val;
  if (a.val_manifest.empty() || a.val_manifest == a.manifest) {
    val = classifier ? corrpool::load_dataset(train_manifest, &train.class_names)
                     : corrpool::load_dataset(train_manifest);
  } else {
    corrpool::Manifest val_manifest = corrpool::load_manifest(a.val_manifest);
    val = classifier ? corrpool::load_dataset(val_manifest, &train.class_names)
                     : corrpool::load_dataset(val_manifest);
  }
  std::vector<corrpool::TrialPair> val_trials;
  if (!a.trials.empty()) val_trials = corrpool::load_trials(a.trials);

  corrpool::TrainOutcome outcome;
  if (resuming) {
    nlohmann::json j = {{"resume", a.resume},
                        {"manifest", a.manifest},
                        {"epochs", a.has_epochs ? nlohmann::json(a.epochs) : nlohmann::json()}};
    echo_config(j, "train");
    outcome = corrpool::resume_training(a.resume, train, val, val_trials, a.out_dir,
                                        a.has_epochs ? a.epochs : 0, &std::cerr);
  } else {
    nlohmann::json j = corrpool::train_config_to_json(cfg);
    j["manifest"] = a.manifest;
    if (!a.val_manifest.empty()) j["val_manifest"] = a.val_manifest;
    if (!a.trials.empty()) j["trials"] = a.trials;
    if (!a.transfer_layer_weights.empty()) {
      j["transfer_layer_weights"] = a.transfer_layer_weights;
    }
    j["out"] = a.out_dir;
    echo_config(j, "train");

    corrpool::Tensor transplanted;
    const corrpool::Tensor* transplanted_ptr = nullptr;
    if (!a.transfer_layer_weights.empty()) {
      corrpool::LoadedCheckpoint donor = corrpool::load_checkpoint(a.transfer_layer_weights);
      transplanted = donor.model.layer_weights().logits.value;
      transplanted_ptr = &transplanted;
    }
    outcome = corrpool::run_training(cfg, train, val, val_trials, a.out_dir, transplanted_ptr,
                                     &std::cerr);
  }

  const char* metric_name = classifier ? "best_val_acc" : "best_val_eer";
  std::cout << "best_epoch " << outcome.best_epoch << "\n";
  std::cout << metric_name << " " << percent(outcome.best_metric) << "\n";
  if (outcome.plateau_epoch > 0) std::cout << "plateau_epoch " << outcome.plateau_epoch << "\n";
  std::cout << "best_checkpoint " << outcome.best_checkpoint.string() << "\n";
  std::cout << "last_checkpoint " << outcome.last_checkpoint.string() << "\n";
  std::cout << "metric_log " << outcome.metric_log.string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string ckpt;
  std::string manifest;
  std::string trials;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  echo_config({{"ckpt", a.ckpt},
               {"manifest", a.manifest},
               {"trials", a.trials},
               {"out", a.out}},
              "evaluate");
  corrpool::LoadedCheckpoint loaded = corrpool::load_checkpoint(a.ckpt);
  corrpool::Model& model = loaded.model;
  corrpool::Manifest manifest = corrpool::load_manifest(a.manifest);

  if (model.is_classifier()) {
    if (!a.trials.empty()) {
      throw corrpool::ValueError("--trials applies only to verification checkpoints");
    }
    Dataset ds = corrpool::load_dataset(manifest, &model.class_names());
    LogitSet run = corrpool::evaluate_logits(model, ds);
    std::cout << "accuracy " << percent(corrpool::accuracy(run.logits, ds.class_ids)) << "\n";
    if (!a.out.empty()) {
      corrpool::write_logits(a.out, run, model.class_names());
      std::cout << "wrote " << a.out << "\n";
    }
  } else {
    if (a.trials.empty()) {
      throw corrpool::ValueError("verification checkpoints need --trials");
    }
    Dataset ds = corrpool::load_dataset(manifest);
    std::vector<corrpool::TrialPair> trials = corrpool::load_trials(a.trials);
    ScoreSet scores = corrpool::score_trials(model, ds, trials);
    std::cout << "eer " << percent(corrpool::eer(scores)) << "\n";
    if (!a.out.empty()) {
      corrpool::write_scores(a.out, scores);
      std::cout << "wrote " << a.out << "\n";
    }
  }
  return 0;
}

// --------------------------------------------------------------------- pool

struct PoolArgs {
  std::string pooling = "corr";
  std::string stack_path;
  std::string out;
  int layer = -1;
  double epsilon = corrpool::kDefaultEpsilon;
};

int run_pool(const PoolArgs& a) {
  echo_config({{"pooling", a.pooling},
               {"stack", a.stack_path},
               {"layer", a.layer},
               {"epsilon", a.epsilon},
               {"out", a.out}},
              "pool");
  corrpool::PoolingMethod method = corrpool::parse_pooling(a.pooling);
  corrpool::LayerStack stack = corrpool::read_stack(a.stack_path);

  corrpool::Tensor frames;
  if (a.layer >= 0) {
    const auto l = static_cast<std::size_t>(a.layer);
    if (l >= stack.layer_count()) {
      throw corrpool::ValueError("--layer " + std::to_string(a.layer) + " out of range; stack has " +
                                 std::to_string(stack.layer_count()) + " layers");
    }
    frames = corrpool::Tensor({stack.frames(), stack.channels()});
    for (std::size_t t = 0; t < stack.frames(); ++t) {
      for (std::size_t d = 0; d < stack.channels(); ++d) {
        frames.at2(t, d) = stack.layers.at3(l, t, d);
      }
    }
  } else {
    corrpool::LayerWeights uniform(stack.layer_count());
    frames = corrpool::aggregate(stack, uniform);
  }

  corrpool::PooledVector pooled;
  switch (method) {
    case corrpool::PoolingMethod::kMean:
      pooled = corrpool::mean_pool(frames);
      break;
    case corrpool::PoolingMethod::kStatistics:
      pooled = corrpool::statistics_pool(frames);
      break;
    case corrpool::PoolingMethod::kCorrelation:
      pooled = corrpool::correlation_pool(frames, nullptr, a.epsilon);
      break;
  }

  std::string line;
  for (std::size_t i = 0; i < pooled.data.size(); ++i) {
    if (i > 0) line += ' ';
    line += corrpool::format_double(pooled.data[i]);
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw corrpool::FormatError("cannot open '" + a.out + "' for writing");
    f << line << '\n';
    std::cout << "wrote " << a.out << " (" << pooled.data.size() << " values)\n";
  } else {
    std::cout << line << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------- fuse

struct FuseArgs {
  std::vector<std::string> score_files;
  std::string out;
};

int run_fuse(const FuseArgs& a) {
  echo_config({{"scores", a.score_files}, {"out", a.out}}, "fuse");
  if (a.score_files.size() < 2) {
    throw corrpool::ValueError("fuse needs at least two --scores files");
  }
  corrpool::RecordKind kind = corrpool::sniff_record_kind(a.score_files.front());
  for (const std::string& f : a.score_files) {
    if (corrpool::sniff_record_kind(f) != kind) {
      throw corrpool::FormatError("cannot fuse '" + f + "': record kind differs from '" +
                                  a.score_files.front() + "'");
    }
  }

  if (kind == corrpool::RecordKind::kLogits) {
    std::vector<LogitSet> runs;
    std::vector<std::string> class_names;
    for (std::size_t i = 0; i < a.score_files.size(); ++i) {
      runs.push_back(corrpool::read_logits(a.score_files[i], i == 0 ? &class_names : nullptr));
    }
    LogitSet fused = corrpool::fuse_logits(runs);
    std::cout << "fused " << fused.ids.size() << " logit records from " << runs.size()
              << " runs\n";
    if (!class_names.empty()) {
      std::vector<std::size_t> labels;
      labels.reserve(fused.labels.size());
      bool labeled = fused.labels.size() == fused.ids.size();
      for (const std::string& name : fused.labels) {
        auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) {
          labeled = false;
          break;
        }
        labels.push_back(static_cast<std::size_t>(it - class_names.begin()));
      }
      if (labeled) {
        std::cout << "accuracy " << percent(corrpool::accuracy(fused.logits, labels)) << "\n";
      }
    }
    if (!a.out.empty()) {
      corrpool::write_logits(a.out, fused, class_names);
      std::cout << "wrote " << a.out << "\n";
    }
  } else {
    std::vector<ScoreSet> runs;
    for (const std::string& f : a.score_files) runs.push_back(corrpool::read_scores(f));
    ScoreSet fused = corrpool::fuse_scores(runs);
    std::cout << "fused " << fused.size() << " score records from " << runs.size() << " runs\n";
    std::cout << "eer " << percent(corrpool::eer(fused)) << "\n";
    if (!a.out.empty()) {
      corrpool::write_scores(a.out, fused);
      std::cout << "wrote " << a.out << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string task = "sid";
  std::string pooling = "corr";
  double dropout = 0.0;
  std::uint64_t seed = 1;
  double eps = 1e-5;
  double threshold = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  echo_config({{"task", a.task},
               {"pooling", a.pooling},
               {"dropout", a.dropout},
               {"seed", a.seed},
               {"eps", a.eps},
               {"threshold", a.threshold}},
              "gradcheck");
  // Toy instance: 3 layers of 16 frames x 6 channels, 3 classes, all model
  // widths shrunk to 8 so the central differences stay fast.
  corrpool::ModelConfig mc;
  mc.task = corrpool::parse_task(a.task);
  mc.pooling = corrpool::parse_pooling(a.pooling);
  mc.input_dim = 6;
  mc.layers = 3;
  mc.num_classes = 3;
  mc.dropout = a.dropout;
  mc.proj_dim = 8;
  mc.post_pool_dim = 8;
  mc.tdnn = {{3, 1, 8, corrpool::Activation::kRelu},
             {3, 2, 8, corrpool::Activation::kRelu},
             {1, 1, 8, corrpool::Activation::kRelu}};
  mc.embed_dim = 8;
  mc = corrpool::resolve_model_config(mc, "auto");

  corrpool::SeededRng init_rng(corrpool::SeededRng::mix(a.seed, 0x1217));
  corrpool::Model model(mc, {"a", "b", "c"}, init_rng);

  corrpool::SeededRng data_rng(corrpool::SeededRng::mix(a.seed, 0xDA7A));
  corrpool::Tensor stack({3, 16, 6});
  for (double& v : stack.raw()) v = data_rng.normal();
  corrpool::DropoutMask mask;
  const corrpool::DropoutMask* mask_ptr = nullptr;
  if (model.wants_dropout_mask()) {
    mask = model.draw_mask(data_rng);
    mask_ptr = &mask;
  }

  double err = corrpool::model_grad_check(model, stack, 1, mask_ptr, a.eps);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", err);
  std::cout << "max_relative_error " << buf << "\n";
  if (!(err <= a.threshold)) {
    std::cout << "FAIL (threshold " << a.threshold << ")\n";
    return 1;
  }
  std::cout << "PASS (threshold " << a.threshold << ")\n";
  return 0;
}

// ----------------------------------------------------------- export-weights

struct ExportWeightsArgs {
  std::string ckpt;
  std::string out;
};

int run_export_weights(const ExportWeightsArgs& a) {
  echo_config({{"ckpt", a.ckpt}, {"out", a.out}}, "export-weights");
  corrpool::LoadedCheckpoint loaded = corrpool::load_checkpoint(a.ckpt);
  auto rows = loaded.model.layer_weights().export_weights();
  std::string table = "#layer\tweight\n";
  for (const auto& [layer, weight] : rows) {
    table += std::to_string(layer);
    table += '\t';
    table += corrpool::format_double(weight);
    table += '\n';
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw corrpool::FormatError("cannot open '" + a.out + "' for writing");
    f << table;
    std::cout << "wrote " << a.out << "\n";
  } else {
    std::cout << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corrpool: correlation-pooling experiments on layered feature stacks"};
  app.require_subcommand(1);

  GenSynthArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset from a JSON spec");
  gen->add_option("--spec", gen_args.spec_path, "Synthetic dataset spec (JSON)")->required();
  gen->add_option("--out", gen_args.out_dir, "Output directory")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoints");
  train->add_option("--manifest", train_args.manifest, "Training manifest (TSV)")->required();
  train->add_option("--val-manifest", train_args.val_manifest,
                    "Validation manifest (defaults to --manifest)");
  train->add_option("--trials", train_args.trials, "Validation trial list (sv)");
  train->add_option("--config", train_args.config, "Training config (JSON); flags override");
  train->add_option("--out", train_args.out_dir, "Checkpoint directory")->required();
  train->add_option("--resume", train_args.resume, "Resume from a last.ckpt");
  train->add_option("--transfer-layer-weights", train_args.transfer_layer_weights,
                    "Checkpoint whose layer weights are copied in and frozen");
  CLI::Option* o_task = train->add_option("--task", train_args.task, "sid | sv | er");
  CLI::Option* o_pool = train->add_option("--pooling", train_args.pooling,
                                          "mean | meanstd | corr");
  CLI::Option* o_optim = train->add_option("--optimizer", train_args.optimizer, "adam | sgd");
  CLI::Option* o_drop = train->add_option("--dropout", train_args.dropout,
                                          "Channel dropout probability");
  CLI::Option* o_lr = train->add_option("--lr", train_args.learning_rate, "Learning rate");
  CLI::Option* o_seed = train->add_option("--seed", train_args.seed, "Run seed");
  CLI::Option* o_epochs = train->add_option("--epochs", train_args.epochs, "Epoch count");
  CLI::Option* o_batch = train->add_option("--batch-size", train_args.batch_size, "Batch size");
  CLI::Option* o_pat = train->add_option("--patience", train_args.patience,
                                         "Early-stop patience (0 = off)");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  evaluate->add_option("--ckpt", eval_args.ckpt, "Model checkpoint")->required();
  evaluate->add_option("--manifest", eval_args.manifest, "Evaluation manifest")->required();
  evaluate->add_option("--trials", eval_args.trials, "Trial list (sv checkpoints)");
  evaluate->add_option("--out", eval_args.out, "Write logits (sid/er) or scores (sv) here");

  PoolArgs pool_args;
  CLI::App* pool = app.add_subcommand("pool", "Pool one stack file (debugging)");
  pool->add_option("--pooling", pool_args.pooling, "mean | meanstd | corr (default corr)");
  pool->add_option("--stack", pool_args.stack_path, "Stack file")->required();
  pool->add_option("--layer", pool_args.layer,
                   "Layer index; default -1 averages all layers uniformly");
  pool->add_option("--epsilon", pool_args.epsilon, "Standardization floor");
  pool->add_option("--out", pool_args.out, "Write the vector here instead of stdout");

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "Average two or more result files");
  fuse->add_option("--scores", fuse_args.score_files, "Logit or score files (2+)")
      ->required()
      ->expected(2, -1);
  fuse->add_option("--out", fuse_args.out, "Write the fused records here");

  GradcheckArgs grad_args;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference gradient check on a toy model");
  gradcheck->add_option("--task", grad_args.task, "sid | sv | er (default sid)");
  gradcheck->add_option("--pooling", grad_args.pooling, "mean | meanstd | corr (default corr)");
  gradcheck->add_option("--dropout", grad_args.dropout, "Channel dropout probability");
  gradcheck->add_option("--seed", grad_args.seed, "Seed for the toy instance");
  gradcheck->add_option("--eps", grad_args.eps, "Central-difference step");
  gradcheck->add_option("--threshold", grad_args.threshold,
                        "Maximum acceptable relative error (default 1e-4)");

  ExportWeightsArgs export_args;
  CLI::App* export_weights = app.add_subcommand(
      "export-weights", "Print a checkpoint's layer weights as a two-column table");
  export_weights->add_option("--ckpt", export_args.ckpt, "Model checkpoint")->required();
  export_weights->add_option("--out", export_args.out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  train_args.has_task = o_task->count() > 0;
  train_args.has_pooling = o_pool->count() > 0;
  train_args.has_optimizer = o_optim->count() > 0;
  train_args.has_dropout = o_drop->count() > 0;
  train_args.has_lr = o_lr->count() > 0;
  train_args.has_seed = o_seed->count() > 0;
  train_args.has_epochs = o_epochs->count() > 0;
  train_args.has_batch = o_batch->count() > 0;
  train_args.has_patience = o_pat->count() > 0;

  try {
    if (gen->parsed()) return run_gen_synth(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (pool->parsed()) return run_pool(pool_args);
    if (fuse->parsed()) return run_fuse(fuse_args);
    if (gradcheck->parsed()) return run_gradcheck(grad_args);
    if (export_weights->parsed()) return run_export_weights(export_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
