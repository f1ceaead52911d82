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

#ifndef CORRPOOL_MANIFEST_HPP_
#define CORRPOOL_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace corrpool {

/// One `utt_id<TAB>stack_path<TAB>label` manifest record.  stack_path is
/// stored as written in the file; `resolved_path` is relative paths joined
/// onto the manifest's directory.
struct ManifestEntry {
  std::string utt_id;
  std::string stack_path;
  std::string label;
  std::filesystem::path resolved_path;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  /// Sorted unique labels; the class index of a label is its position here.
  std::vector<std::string> class_names() const;
  /// Per-entry class indices under the class_names() ordering.
  std::vector<std::size_t> class_indices() const;
};

/// Loads and validates a manifest: three tab-separated fields per line,
/// unique utt_ids, and every referenced stack file present on disk.
/// Violations name the offending line number.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes entries as `utt_id<TAB>stack_path<TAB>label` lines.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// One `label enroll_utt test_utt` trial-list record; label 1 means both
/// utterances come from the same speaker.
struct TrialPair {
  bool target = false;
  std::string enroll;
  std::string test;

  std::string trial_id() const { return enroll + ":" + test; }
};

std::vector<TrialPair> load_trials(const std::filesystem::path& path);

void save_trials(const std::filesystem::path& path, const std::vector<TrialPair>& trials);

}  // namespace corrpool

#endif  // CORRPOOL_MANIFEST_HPP_
