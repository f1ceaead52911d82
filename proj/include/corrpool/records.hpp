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

#ifndef CORRPOOL_RECORDS_HPP_
#define CORRPOOL_RECORDS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "corrpool/metrics.hpp"

namespace corrpool {

/// Renders a double with enough digits to round-trip exactly (printf %.17g).
std::string format_double(double v);

/// Metric log: one `epoch<TAB>train_loss<TAB>val_metric` line per epoch.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

void write_metric_log(const std::filesystem::path& path, const std::vector<EpochRecord>& rows);
std::vector<EpochRecord> read_metric_log(const std::filesystem::path& path);

/// Classifier outputs: `#corrpool-logits` header, a `#classes<TAB>...` line
/// naming the class order, then `utt_id<TAB>logit0 logit1 ...<TAB>label`
/// records.
void write_logits(const std::filesystem::path& path, const LogitSet& run,
                  const std::vector<std::string>& class_names);
LogitSet read_logits(const std::filesystem::path& path,
                     std::vector<std::string>* class_names = nullptr);

/// Trial scores: `#corrpool-scores` header, then
/// `trial_id<TAB>score<TAB>label` records with label target|nontarget.
void write_scores(const std::filesystem::path& path, const ScoreSet& scores);
ScoreSet read_scores(const std::filesystem::path& path);

enum class RecordKind { kLogits, kScores };

/// Decides whether a result file holds logits or trial scores, from the
/// header when present, otherwise from the shape of the first record.
RecordKind sniff_record_kind(const std::filesystem::path& path);

}  // namespace corrpool

#endif  // CORRPOOL_RECORDS_HPP_
