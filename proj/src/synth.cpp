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

#include "corrpool/synth.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include <json.hpp>

#include "corrpool/error.hpp"
#include "corrpool/manifest.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/stack_io.hpp"

namespace corrpool {

namespace {

using nlohmann::json;

// Stream tags for deriving independent RNG sequences from one seed.
constexpr std::uint64_t kBaseStream = 0xBA5E;
constexpr std::uint64_t kClassStream = 0xC1A5;
constexpr std::uint64_t kUttStream = 0x0777;
constexpr std::uint64_t kTrialStream = 0x741A;

enum class ClassKind { kMean, kCorr, kBoth };

ClassKind class_kind(Regime regime, std::size_t class_id) {
  switch (regime) {
    case Regime::kMeanCoded:
      return ClassKind::kMean;
    case Regime::kCorrelationCoded:
      return ClassKind::kCorr;
    case Regime::kLayerCoded:
      return ClassKind::kBoth;
    case Regime::kMixed:
      return class_id % 2 == 0 ? ClassKind::kMean : ClassKind::kCorr;
  }
  throw ValueError("class_kind: unknown regime");
}

const char* kind_name(ClassKind k) {
  switch (k) {
    case ClassKind::kMean:
      return "mean";
    case ClassKind::kCorr:
      return "corr";
    case ClassKind::kBoth:
      return "both";
  }
  return "?";
}

struct ClassParams {
  std::string label;
  ClassKind kind = ClassKind::kMean;
  std::vector<double> mu;  // empty unless the kind carries a mean signal
  Tensor mixing;           // empty unless the kind carries a correlation signal
};

// Orthonormal rows via modified Gram-Schmidt on Gaussian draws.
Tensor random_rotation(std::size_t d, SeededRng& rng) {
  Tensor q({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (int attempt = 0;; ++attempt) {
      for (std::size_t k = 0; k < d; ++k) q.at2(i, k) = rng.normal();
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += q.at2(j, k) * q.at2(i, k);
        for (std::size_t k = 0; k < d; ++k) q.at2(i, k) -= dot * q.at2(j, k);
      }
      double norm2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) norm2 += q.at2(i, k) * q.at2(i, k);
      if (norm2 > 1e-12) {
        double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t k = 0; k < d; ++k) q.at2(i, k) *= inv;
        break;
      }
      if (attempt > 32) throw NumericError("random_rotation: degenerate draw");
    }
  }
  return q;
}

void normalize_rows(Tensor& a) {
  std::size_t d = a.dim(1);
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    double norm2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm2 += a.at2(i, k) * a.at2(i, k);
    if (norm2 <= 1e-16) throw NumericError("normalize_rows: degenerate mixing row");
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t k = 0; k < d; ++k) a.at2(i, k) *= inv;
  }
}

// Rotation plus strict-upper-triangle shear, rows normalized to unit length.
// Unit rows make every channel of A*z exactly zero-mean unit-variance; the
// shear is what puts nonzero values off the Gram matrix diagonal.
Tensor rotation_shear(std::size_t d, SeededRng& rng) {
  Tensor a = random_rotation(d, rng);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) a.at2(i, j) += 0.5 * rng.normal();
  }
  normalize_rows(a);
  return a;
}

// Convex blend toward the shared base matrix, rows renormalized:
// separation 0 collapses all classes onto the base, 1 keeps them apart.
Tensor blend_mixing(const Tensor& base, const Tensor& own, double separation) {
  Tensor a(base.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = (1.0 - separation) * base[i] + separation * own[i];
  }
  normalize_rows(a);
  return a;
}

int resolved_signal_layer(const SynthSpec& spec) {
  if (spec.signal_layer >= 0) return spec.signal_layer;
  if (spec.regime == Regime::kLayerCoded) return static_cast<int>(spec.layers / 2);
  return -1;
}

Tensor make_stack(const SynthSpec& spec, const ClassParams& cp, int signal_layer,
                  std::size_t frames, SeededRng& rng) {
  std::size_t d = spec.dims;
  Tensor stack({spec.layers, frames, d});
  std::vector<double> z(d);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    bool signal = signal_layer < 0 || l == static_cast<std::size_t>(signal_layer);
    for (std::size_t s = 0; s < frames; ++s) {
      for (double& v : z) v = rng.normal();
      double* row = stack.data() + (l * frames + s) * d;
      if (!signal) {
        for (std::size_t k = 0; k < d; ++k) row[k] = z[k];
        continue;
      }
      if (cp.kind == ClassKind::kMean) {
        for (std::size_t k = 0; k < d; ++k) row[k] = cp.mu[k] + z[k];
        continue;
      }
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += cp.mixing.at2(i, k) * z[k];
        row[i] = acc + (cp.kind == ClassKind::kBoth ? cp.mu[i] : 0.0);
      }
    }
  }
  return stack;
}

std::string pad4(std::size_t v) {
  std::string s = std::to_string(v);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

// Unordered-pair trial sampling with equal target/nontarget counts.
std::vector<TrialPair> make_trials(const std::vector<std::vector<std::string>>& utts_by_class,
                                   std::size_t count, SeededRng& rng) {
  std::size_t classes = utts_by_class.size();
  std::set<std::pair<std::string, std::string>> seen;
  auto key = [](const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  std::vector<TrialPair> trials;
  std::size_t per_kind = count / 2;
  std::size_t attempts = 0, cap = 1000 * count + 1000;
  while (trials.size() < per_kind) {
    if (++attempts > cap) {
      throw ValueError("make_trials: cannot draw " + std::to_string(per_kind) +
                       " distinct target trials; lower num_trials");
    }
    const auto& utts = utts_by_class[rng.uniform_int(classes)];
    if (utts.size() < 2) continue;
    std::size_t a = rng.uniform_int(utts.size());
    std::size_t b = rng.uniform_int(utts.size());
    if (a == b) continue;
    if (!seen.insert(key(utts[a], utts[b])).second) continue;
    trials.push_back({true, utts[a], utts[b]});
  }
  while (trials.size() < 2 * per_kind) {
    if (++attempts > cap) {
      throw ValueError("make_trials: cannot draw " + std::to_string(per_kind) +
                       " distinct nontarget trials; lower num_trials");
    }
    std::size_t ca = rng.uniform_int(classes);
    std::size_t cb = rng.uniform_int(classes);
    if (ca == cb) continue;
    const auto& ua = utts_by_class[ca];
    const auto& ub = utts_by_class[cb];
    if (ua.empty() || ub.empty()) continue;
    const std::string& a = ua[rng.uniform_int(ua.size())];
    const std::string& b = ub[rng.uniform_int(ub.size())];
    if (!seen.insert(key(a, b)).second) continue;
    trials.push_back({false, a, b});
  }
  return trials;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw FormatError("short write to '" + path.string() + "'");
}

}  // namespace

nlohmann::json synth_spec_to_json(const SynthSpec& spec) {
  return json{{"regime", regime_name(spec.regime)},
              {"task", task_name(spec.task)},
              {"num_classes", spec.num_classes},
              {"utterances_per_class", spec.utterances_per_class},
              {"val_utterances_per_class", spec.val_utterances_per_class},
              {"t_min", spec.t_min},
              {"t_max", spec.t_max},
              {"dims", spec.dims},
              {"layers", spec.layers},
              {"seed", spec.seed},
              {"separation", spec.separation},
              {"signal_layer", spec.signal_layer},
              {"eval_classes", spec.eval_classes},
              {"eval_utterances_per_class", spec.eval_utterances_per_class},
              {"num_trials", spec.num_trials}};
}

Regime parse_regime(const std::string& name) {
  if (name == "mean_coded") return Regime::kMeanCoded;
  if (name == "correlation_coded") return Regime::kCorrelationCoded;
  if (name == "layer_coded") return Regime::kLayerCoded;
  if (name == "mixed") return Regime::kMixed;
  throw ValueError("unknown regime '" + name +
                   "' (expected mean_coded|correlation_coded|layer_coded|mixed)");
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kMeanCoded:
      return "mean_coded";
    case Regime::kCorrelationCoded:
      return "correlation_coded";
    case Regime::kLayerCoded:
      return "layer_coded";
    case Regime::kMixed:
      return "mixed";
  }
  throw ValueError("regime_name: unknown regime");
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("load_synth_spec: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("load_synth_spec: '" + path.string() + "': " + e.what());
  }
  if (!j.is_object()) {
    throw FormatError("load_synth_spec: '" + path.string() + "' is not a JSON object");
  }
  SynthSpec spec;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "regime") {
        spec.regime = parse_regime(v.get<std::string>());
      } else if (k == "task") {
        spec.task = parse_task(v.get<std::string>());
      } else if (k == "num_classes") {
        spec.num_classes = v.get<std::size_t>();
      } else if (k == "utterances_per_class") {
        spec.utterances_per_class = v.get<std::size_t>();
      } else if (k == "val_utterances_per_class") {
        spec.val_utterances_per_class = v.get<std::size_t>();
      } else if (k == "t_min") {
        spec.t_min = v.get<std::size_t>();
      } else if (k == "t_max") {
        spec.t_max = v.get<std::size_t>();
      } else if (k == "dims") {
        spec.dims = v.get<std::size_t>();
      } else if (k == "layers") {
        spec.layers = v.get<std::size_t>();
      } else if (k == "seed") {
        spec.seed = v.get<std::uint64_t>();
      } else if (k == "separation") {
        spec.separation = v.get<double>();
      } else if (k == "signal_layer") {
        spec.signal_layer = v.get<int>();
      } else if (k == "eval_classes") {
        spec.eval_classes = v.get<std::size_t>();
      } else if (k == "eval_utterances_per_class") {
        spec.eval_utterances_per_class = v.get<std::size_t>();
      } else if (k == "num_trials") {
        spec.num_trials = v.get<std::size_t>();
      } else {
        throw FormatError("load_synth_spec: '" + path.string() + "': unknown key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("load_synth_spec: '" + path.string() + "': " + e.what());
  }
  validate_synth_spec(spec);
  return spec;
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw ValueError("SynthSpec: num_classes must be >= 2");
  if (spec.utterances_per_class == 0) {
    throw ValueError("SynthSpec: utterances_per_class must be positive");
  }
  if (spec.val_utterances_per_class == 0) {
    throw ValueError("SynthSpec: val_utterances_per_class must be positive");
  }
  if (spec.t_min < 2) throw ValueError("SynthSpec: t_min must be >= 2");
  if (spec.t_max < spec.t_min) throw ValueError("SynthSpec: t_max must be >= t_min");
  if (spec.dims == 0) throw ValueError("SynthSpec: dims must be positive");
  if (spec.regime != Regime::kMeanCoded && spec.dims < 2) {
    throw ValueError("SynthSpec: regime " + regime_name(spec.regime) +
                     " plants correlations and needs dims >= 2");
  }
  if (spec.layers == 0) throw ValueError("SynthSpec: layers must be positive");
  if (!(spec.separation >= 0.0 && spec.separation <= 1.0)) {
    throw ValueError("SynthSpec: separation must lie in [0, 1]");
  }
  if (spec.signal_layer >= 0 &&
      static_cast<std::size_t>(spec.signal_layer) >= spec.layers) {
    throw ValueError("SynthSpec: signal_layer " + std::to_string(spec.signal_layer) +
                     " out of range for " + std::to_string(spec.layers) + " layers");
  }
  if (spec.task == Task::kSv) {
    if (spec.eval_classes < 2) {
      throw ValueError("SynthSpec: sv needs eval_classes >= 2 for nontarget trials");
    }
    if (spec.eval_utterances_per_class < 2) {
      throw ValueError("SynthSpec: sv needs eval_utterances_per_class >= 2");
    }
    if (spec.val_utterances_per_class < 2) {
      throw ValueError("SynthSpec: sv needs val_utterances_per_class >= 2");
    }
    if (spec.num_trials < 2 || spec.num_trials % 2 != 0) {
      throw ValueError("SynthSpec: num_trials must be even and >= 2");
    }
  }
}

SynthOutput generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  validate_synth_spec(spec);
  std::filesystem::create_directories(out_dir / "stacks");

  const char* prefix = spec.task == Task::kSv ? "spk" : (spec.task == Task::kEr ? "emo" : "class");
  int signal_layer = resolved_signal_layer(spec);
  bool sv = spec.task == Task::kSv;
  std::size_t total_classes = spec.num_classes + (sv ? spec.eval_classes : 0);

  bool any_corr = spec.regime != Regime::kMeanCoded;
  Tensor base;
  if (any_corr) {
    SeededRng base_rng(SeededRng::mix(spec.seed, kBaseStream));
    base = rotation_shear(spec.dims, base_rng);
  }

  std::vector<ClassParams> classes(total_classes);
  for (std::size_t c = 0; c < total_classes; ++c) {
    ClassParams& cp = classes[c];
    cp.kind = class_kind(spec.regime, c);
    cp.label = c < spec.num_classes ? prefix + std::to_string(c)
                                    : std::string("x") + prefix + std::to_string(c - spec.num_classes);
    SeededRng rng(SeededRng::mix(spec.seed, kClassStream, c));
    if (cp.kind != ClassKind::kCorr) {
      cp.mu.resize(spec.dims);
      for (double& v : cp.mu) v = spec.separation * rng.normal();
    }
    if (cp.kind != ClassKind::kMean) {
      cp.mixing = blend_mixing(base, rotation_shear(spec.dims, rng), spec.separation);
    }
  }

  SynthOutput out;
  Manifest train_m, val_m, eval_m;
  std::vector<std::vector<std::string>> val_utts(spec.num_classes);
  std::vector<std::vector<std::string>> eval_utts(sv ? spec.eval_classes : 0);

  auto emit = [&](std::size_t class_id, std::size_t utt_counter, char split,
                  std::size_t local_index, Manifest& manifest,
                  std::vector<std::string>* utt_pool) {
    const ClassParams& cp = classes[class_id];
    SeededRng rng(SeededRng::mix(SeededRng::mix(spec.seed, kUttStream, class_id), utt_counter));
    std::size_t frames = spec.t_min + rng.uniform_int(spec.t_max - spec.t_min + 1);
    Tensor stack = make_stack(spec, cp, signal_layer, frames, rng);
    std::string utt_id = cp.label + "_" + split + pad4(local_index);
    std::string rel = "stacks/" + utt_id + ".stack";
    write_stack(out_dir / rel, LayerStack(std::move(stack)));
    manifest.entries.push_back({utt_id, rel, cp.label, out_dir / rel});
    if (utt_pool != nullptr) utt_pool->push_back(utt_id);
    ++out.stacks_written;
  };

  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t u = 0; u < spec.utterances_per_class; ++u) {
      emit(c, u, 't', u, train_m, nullptr);
    }
    for (std::size_t u = 0; u < spec.val_utterances_per_class; ++u) {
      emit(c, spec.utterances_per_class + u, 'v', u, val_m, &val_utts[c]);
    }
  }
  if (sv) {
    for (std::size_t e = 0; e < spec.eval_classes; ++e) {
      for (std::size_t u = 0; u < spec.eval_utterances_per_class; ++u) {
        emit(spec.num_classes + e, u, 'e', u, eval_m, &eval_utts[e]);
      }
    }
  }

  out.train_manifest = out_dir / "train.tsv";
  out.val_manifest = out_dir / "val.tsv";
  save_manifest(out.train_manifest, train_m);
  save_manifest(out.val_manifest, val_m);
  if (sv) {
    out.eval_manifest = out_dir / "eval.tsv";
    save_manifest(out.eval_manifest, eval_m);
    SeededRng val_rng(SeededRng::mix(spec.seed, kTrialStream, 0));
    SeededRng eval_rng(SeededRng::mix(spec.seed, kTrialStream, 1));
    out.val_trials = out_dir / "trials_val.txt";
    out.eval_trials = out_dir / "trials_eval.txt";
    save_trials(out.val_trials, make_trials(val_utts, spec.num_trials, val_rng));
    save_trials(out.eval_trials, make_trials(eval_utts, spec.num_trials, eval_rng));
  }

  write_json(out_dir / "spec.json", synth_spec_to_json(spec));

  json truth;
  truth["regime"] = regime_name(spec.regime);
  truth["task"] = task_name(spec.task);
  truth["signal_layer"] = signal_layer;
  truth["separation"] = spec.separation;
  truth["classes"] = json::array();
  for (const ClassParams& cp : classes) {
    json jc;
    jc["label"] = cp.label;
    jc["kind"] = kind_name(cp.kind);
    jc["mu"] = cp.mu.empty() ? json() : json(cp.mu);
    if (cp.mixing.size() == 0) {
      jc["mixing"] = json();
    } else {
      json rows = json::array();
      for (std::size_t i = 0; i < cp.mixing.dim(0); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < cp.mixing.dim(1); ++k) row.push_back(cp.mixing.at2(i, k));
        rows.push_back(row);
      }
      jc["mixing"] = rows;
    }
    truth["classes"].push_back(jc);
  }
  write_json(out_dir / "ground_truth.json", truth);
  return out;
}

}  // namespace corrpool
