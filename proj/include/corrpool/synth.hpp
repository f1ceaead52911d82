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

#ifndef CORRPOOL_SYNTH_HPP_
#define CORRPOOL_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "corrpool/heads.hpp"
#include "corrpool/tensor.hpp"

namespace corrpool {

/// Where the class signal lives:
///  - mean_coded: frames ~ Normal(mu_class, I), mu_class scaled by
///    `separation`; covariance is identical across classes.
///  - correlation_coded: frames = A_class * z with z ~ Normal(0, I) and
///    A_class a class-specific rotation-plus-shear with unit rows, so every
///    class has per-channel mean 0 and variance 1 and only cross-channel
///    correlations differ.  `separation` blends A_class toward a shared base
///    matrix (0 = identical classes, 1 = fully class-specific).
///  - layer_coded: one designated layer carries both a mean and a
///    correlation signal; all other layers are i.i.d. noise.
///  - mixed: even-indexed classes are mean-coded, odd-indexed classes are
///    correlation-coded.
enum class Regime { kMeanCoded, kCorrelationCoded, kLayerCoded, kMixed };

Regime parse_regime(const std::string& name);
std::string regime_name(Regime r);

struct SynthSpec {
  Regime regime = Regime::kCorrelationCoded;
  Task task = Task::kSid;
  std::size_t num_classes = 4;
  std::size_t utterances_per_class = 200;
  std::size_t val_utterances_per_class = 50;
  std::size_t t_min = 80;
  std::size_t t_max = 120;
  std::size_t dims = 16;    // D
  std::size_t layers = 4;   // L+1
  std::uint64_t seed = 1;
  double separation = 1.0;
  /// Layer carrying the class signal; -1 means every layer (for
  /// layer_coded, -1 resolves to the middle layer `layers / 2`).
  int signal_layer = -1;
  /// Verification only: held-out speakers scored by the trial list.
  std::size_t eval_classes = 0;
  std::size_t eval_utterances_per_class = 0;
  std::size_t num_trials = 500;
};

/// Reads a SynthSpec from a JSON document; unknown keys are rejected.
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// The spec as a JSON document; load(save(s)) == s.
nlohmann::json synth_spec_to_json(const SynthSpec& spec);

/// Validates field ranges and cross-field requirements; throws ValueError.
void validate_synth_spec(const SynthSpec& spec);

struct SynthOutput {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path eval_manifest;  // sv only
  std::filesystem::path val_trials;     // sv only
  std::filesystem::path eval_trials;    // sv only
  std::size_t stacks_written = 0;
};

/// Writes stack files, manifests, trial lists (sv), a spec echo
/// (spec.json), and the planted per-class parameters (ground_truth.json)
/// under out_dir.  Byte-identical for identical specs.
SynthOutput generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace corrpool

#endif  // CORRPOOL_SYNTH_HPP_
