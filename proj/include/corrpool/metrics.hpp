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

#ifndef CORRPOOL_METRICS_HPP_
#define CORRPOOL_METRICS_HPP_

#include <string>
#include <vector>

namespace corrpool {

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(const std::vector<double>& v);

/// Fraction of utterances whose argmax logit matches the label.
double accuracy(const std::vector<std::vector<double>>& logits,
                const std::vector<std::size_t>& labels);

struct Trial {
  std::string id;
  double score = 0.0;
  bool target = false;
};

using ScoreSet = std::vector<Trial>;

/// Equal-error rate from the ROC over all distinct thresholds, linearly
/// interpolated between the two operating points where FAR - FRR changes
/// sign.  Convention: a trial is accepted when score >= threshold.
/// Needs at least one target and one nontarget.
double eer(const ScoreSet& scores);

/// dot(a, b) / (|a| |b|); rejects zero vectors.
double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

/// One run's classifier outputs, keyed by utterance id.  `labels` carries
/// the reference label strings (may be empty when unknown).
struct LogitSet {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> logits;
  std::vector<std::string> labels;
};

/// Element-wise mean of logits across runs, aligned by utterance id.  All
/// runs must cover the same id set with equal class counts; the result
/// keeps the first run's order.
LogitSet fuse_logits(const std::vector<LogitSet>& runs);

/// Arithmetic mean of trial scores across runs, aligned by trial id.
ScoreSet fuse_scores(const std::vector<ScoreSet>& runs);

/// First epoch (1-indexed) after which the metric improves by more than
/// `tolerance` in none of the following `patience` observed epochs; the
/// last epoch if there is no such point.
std::size_t epochs_to_plateau(const std::vector<double>& metric_log, double tolerance,
                              std::size_t patience, bool higher_better);

}  // namespace corrpool

#endif  // CORRPOOL_METRICS_HPP_
