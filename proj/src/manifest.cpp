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

#include "corrpool/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "corrpool/error.hpp"

namespace corrpool {

std::vector<std::string> Manifest::class_names() const {
  std::vector<std::string> names;
  for (const ManifestEntry& e : entries) names.push_back(e.label);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

std::vector<std::size_t> Manifest::class_indices() const {
  std::vector<std::string> names = class_names();
  std::vector<std::size_t> idx;
  idx.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    idx.push_back(static_cast<std::size_t>(
        std::lower_bound(names.begin(), names.end(), e.label) - names.begin()));
  }
  return idx;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw FormatError("load_manifest: cannot open '" + path.string() + "'");
  }
  std::filesystem::path base = path.parent_path();
  Manifest m;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos) {
      throw FormatError("load_manifest: '" + path.string() + "' line " +
                        std::to_string(lineno) +
                        ": expected utt_id<TAB>stack_path<TAB>label");
    }
    ManifestEntry e;
    e.utt_id = line.substr(0, t1);
    e.stack_path = line.substr(t1 + 1, t2 - t1 - 1);
    e.label = line.substr(t2 + 1);
    if (e.utt_id.empty() || e.stack_path.empty() || e.label.empty()) {
      throw FormatError("load_manifest: '" + path.string() + "' line " +
                        std::to_string(lineno) + ": empty field");
    }
    if (!seen.insert(e.utt_id).second) {
      throw FormatError("load_manifest: '" + path.string() + "' line " +
                        std::to_string(lineno) + ": duplicate utt_id '" + e.utt_id + "'");
    }
    std::filesystem::path p(e.stack_path);
    e.resolved_path = p.is_absolute() ? p : base / p;
    if (!std::filesystem::exists(e.resolved_path)) {
      throw FormatError("load_manifest: '" + path.string() + "' line " +
                        std::to_string(lineno) + ": stack file '" +
                        e.resolved_path.string() + "' does not exist");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw FormatError("save_manifest: cannot open '" + path.string() + "' for writing");
  }
  for (const ManifestEntry& e : manifest.entries) {
    f << e.utt_id << '\t' << e.stack_path << '\t' << e.label << '\n';
  }
  if (!f) {
    throw FormatError("save_manifest: short write to '" + path.string() + "'");
  }
}

std::vector<TrialPair> load_trials(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw FormatError("load_trials: cannot open '" + path.string() + "'");
  }
  std::vector<TrialPair> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string label, enroll, test, extra;
    if (!(ss >> label >> enroll >> test) || (ss >> extra)) {
      throw FormatError("load_trials: '" + path.string() + "' line " +
                        std::to_string(lineno) + ": expected `label enroll test`");
    }
    if (label != "0" && label != "1") {
      throw FormatError("load_trials: '" + path.string() + "' line " +
                        std::to_string(lineno) + ": label must be 0 or 1, got '" + label +
                        "'");
    }
    trials.push_back({label == "1", enroll, test});
  }
  if (trials.empty()) {
    throw FormatError("load_trials: '" + path.string() + "' contains no trials");
  }
  return trials;
}

void save_trials(const std::filesystem::path& path, const std::vector<TrialPair>& trials) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw FormatError("save_trials: cannot open '" + path.string() + "' for writing");
  }
  for (const TrialPair& t : trials) {
    f << (t.target ? '1' : '0') << ' ' << t.enroll << ' ' << t.test << '\n';
  }
  if (!f) {
    throw FormatError("save_trials: short write to '" + path.string() + "'");
  }
}

}  // namespace corrpool
