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

#include "corrpool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "corrpool/error.hpp"

namespace corrpool {

std::size_t argmax_lowest(const std::vector<double>& v) {
  if (v.empty()) throw ValueError("argmax_lowest: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double accuracy(const std::vector<std::vector<double>>& logits,
                const std::vector<std::size_t>& labels) {
  if (logits.empty()) throw ValueError("accuracy: empty utterance set");
  if (logits.size() != labels.size()) {
    throw ValueError("accuracy: " + std::to_string(logits.size()) + " logit rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (argmax_lowest(logits[i]) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

double eer(const ScoreSet& scores) {
  std::vector<double> targets, nontargets;
  for (const Trial& t : scores) (t.target ? targets : nontargets).push_back(t.score);
  if (targets.empty() || nontargets.empty()) {
    throw ValueError("eer: need at least one target and one nontarget trial, got " +
                     std::to_string(targets.size()) + " targets and " +
                     std::to_string(nontargets.size()) + " nontargets");
  }
  std::vector<double> thresholds;
  thresholds.reserve(scores.size());
  for (const Trial& t : scores) thresholds.push_back(t.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // Operating point at threshold th: accept iff score >= th.
  auto point = [&](double th) {
    std::size_t fa = 0, fr = 0;
    for (double s : nontargets) fa += s >= th ? 1 : 0;
    for (double s : targets) fr += s < th ? 1 : 0;
    return std::pair<double, double>{
        static_cast<double>(fa) / static_cast<double>(nontargets.size()),
        static_cast<double>(fr) / static_cast<double>(targets.size())};
  };

  // FAR - FRR walks monotonically from +1 (accept all) to -1 (reject all);
  // find the bracketing pair and interpolate linearly.
  double prev_far = 1.0, prev_frr = 0.0;
  for (std::size_t k = 0; k <= thresholds.size(); ++k) {
    auto [far, frr] = k < thresholds.size()
                          ? point(thresholds[k])
                          : std::pair<double, double>{0.0, 1.0};
    double prev_diff = prev_far - prev_frr;
    double diff = far - frr;
    if (diff <= 0.0) {
      if (diff == 0.0) return (far + frr) / 2.0;
      if (prev_diff == 0.0) return (prev_far + prev_frr) / 2.0;
      double t = prev_diff / (prev_diff - diff);
      return prev_far + t * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  throw NumericError("eer: no FAR/FRR crossing found");
}

double cosine_score(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_score: length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw ValueError("cosine_score: zero vector has no direction");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

LogitSet fuse_logits(const std::vector<LogitSet>& runs) {
  if (runs.empty()) throw ValueError("fuse_logits: no runs");
  const LogitSet& first = runs.front();
  if (first.ids.empty()) throw ValueError("fuse_logits: empty run");
  if (first.ids.size() != first.logits.size()) {
    throw ValueError("fuse_logits: run 0 has " + std::to_string(first.ids.size()) +
                     " ids but " + std::to_string(first.logits.size()) + " logit rows");
  }
  LogitSet fused;
  fused.ids = first.ids;
  fused.labels = first.labels;
  fused.logits.assign(first.ids.size(), {});
  for (std::size_t u = 0; u < first.ids.size(); ++u) {
    fused.logits[u].assign(first.logits[u].size(), 0.0);
  }
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const LogitSet& run = runs[r];
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t u = 0; u < run.ids.size(); ++u) index.emplace(run.ids[u], u);
    if (index.size() != run.ids.size()) {
      throw ValueError("fuse_logits: run " + std::to_string(r) + " repeats an utterance id");
    }
    if (run.ids.size() != fused.ids.size()) {
      throw ValueError("fuse_logits: run " + std::to_string(r) + " has " +
                       std::to_string(run.ids.size()) + " utterances, expected " +
                       std::to_string(fused.ids.size()));
    }
    for (std::size_t u = 0; u < fused.ids.size(); ++u) {
      auto it = index.find(fused.ids[u]);
      if (it == index.end()) {
        throw ValueError("fuse_logits: run " + std::to_string(r) + " is missing utterance '" +
                         fused.ids[u] + "'");
      }
      const std::vector<double>& src = run.logits[it->second];
      if (src.size() != fused.logits[u].size()) {
        throw ShapeError("fuse_logits: utterance '" + fused.ids[u] + "' has " +
                         std::to_string(src.size()) + " classes in run " + std::to_string(r) +
                         ", expected " + std::to_string(fused.logits[u].size()));
      }
      if (!fused.labels.empty() && !run.labels.empty() &&
          run.labels[it->second] != fused.labels[u]) {
        throw ValueError("fuse_logits: utterance '" + fused.ids[u] +
                         "' has conflicting labels across runs");
      }
      for (std::size_t c = 0; c < src.size(); ++c) fused.logits[u][c] += src[c];
    }
  }
  double inv = 1.0 / static_cast<double>(runs.size());
  for (auto& row : fused.logits) {
    for (double& v : row) v *= inv;
  }
  return fused;
}

ScoreSet fuse_scores(const std::vector<ScoreSet>& runs) {
  if (runs.empty()) throw ValueError("fuse_scores: no runs");
  const ScoreSet& first = runs.front();
  if (first.empty()) throw ValueError("fuse_scores: empty run");
  ScoreSet fused = first;
  for (Trial& t : fused) t.score = 0.0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const ScoreSet& run = runs[r];
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t u = 0; u < run.size(); ++u) index.emplace(run[u].id, u);
    if (index.size() != run.size()) {
      throw ValueError("fuse_scores: run " + std::to_string(r) + " repeats a trial id");
    }
    if (run.size() != fused.size()) {
      throw ValueError("fuse_scores: run " + std::to_string(r) + " has " +
                       std::to_string(run.size()) + " trials, expected " +
                       std::to_string(fused.size()));
    }
    for (std::size_t u = 0; u < fused.size(); ++u) {
      auto it = index.find(fused[u].id);
      if (it == index.end()) {
        throw ValueError("fuse_scores: run " + std::to_string(r) + " is missing trial '" +
                         fused[u].id + "'");
      }
      if (run[it->second].target != fused[u].target) {
        throw ValueError("fuse_scores: trial '" + fused[u].id +
                         "' has conflicting labels across runs");
      }
      fused[u].score += run[it->second].score;
    }
  }
  double inv = 1.0 / static_cast<double>(runs.size());
  for (Trial& t : fused) t.score *= inv;
  return fused;
}

std::size_t epochs_to_plateau(const std::vector<double>& metric_log, double tolerance,
                              std::size_t patience, bool higher_better) {
  if (metric_log.empty()) throw ValueError("epochs_to_plateau: empty metric log");
  if (patience == 0) throw ValueError("epochs_to_plateau: patience must be positive");
  std::size_t n = metric_log.size();
  // improving[i]: epoch i+1 beats the best of all earlier epochs by more
  // than `tolerance`.
  std::vector<bool> improving(n, false);
  double best = metric_log[0];
  for (std::size_t i = 1; i < n; ++i) {
    double gain = higher_better ? metric_log[i] - best : best - metric_log[i];
    improving[i] = gain > tolerance;
    if (gain > 0.0) best = metric_log[i];
  }
  for (std::size_t e = 1; e < n; ++e) {
    std::size_t upto = std::min(n, e + patience);
    bool flat = true;
    for (std::size_t i = e; i < upto; ++i) {
      if (improving[i]) {
        flat = false;
        break;
      }
    }
    if (flat) return e;
  }
  return n;
}

}  // namespace corrpool
