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

#include "corrpool/records.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "corrpool/error.hpp"

namespace corrpool {

namespace {

constexpr const char* kLogitsHeader = "#corrpool-logits";
constexpr const char* kScoresHeader = "#corrpool-scores";
constexpr const char* kClassesPrefix = "#classes";

double parse_double(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw FormatError(context + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) {
    throw FormatError(context + ": '" + s + "' is not a number");
  }
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path, const char* op) {
  std::ifstream f(path);
  if (!f) {
    throw FormatError(std::string(op) + ": cannot open '" + path.string() + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::filesystem::path& path, const char* op) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw FormatError(std::string(op) + ": cannot open '" + path.string() + "' for writing");
  }
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metric_log(const std::filesystem::path& path, const std::vector<EpochRecord>& rows) {
  std::ofstream f = open_out(path, "write_metric_log");
  for (const EpochRecord& r : rows) {
    f << r.epoch << '\t' << format_double(r.train_loss) << '\t' << format_double(r.val_metric)
      << '\n';
  }
  if (!f) throw FormatError("write_metric_log: short write to '" + path.string() + "'");
}

std::vector<EpochRecord> read_metric_log(const std::filesystem::path& path) {
  std::vector<EpochRecord> rows;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path, "read_metric_log")) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::string ctx = "read_metric_log: '" + path.string() + "' line " + std::to_string(lineno);
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 3) {
      throw FormatError(ctx + ": expected epoch<TAB>train_loss<TAB>val_metric");
    }
    EpochRecord r;
    r.epoch = static_cast<std::size_t>(parse_double(fields[0], ctx));
    r.train_loss = parse_double(fields[1], ctx);
    r.val_metric = parse_double(fields[2], ctx);
    rows.push_back(r);
  }
  return rows;
}

void write_logits(const std::filesystem::path& path, const LogitSet& run,
                  const std::vector<std::string>& class_names) {
  if (run.ids.size() != run.logits.size() ||
      (!run.labels.empty() && run.labels.size() != run.ids.size())) {
    throw ValueError("write_logits: ids, logits, and labels disagree in length");
  }
  std::ofstream f = open_out(path, "write_logits");
  f << kLogitsHeader << '\n';
  if (!class_names.empty()) {
    f << kClassesPrefix;
    for (std::size_t i = 0; i < class_names.size(); ++i) {
      f << (i == 0 ? '\t' : ' ') << class_names[i];
    }
    f << '\n';
  }
  for (std::size_t u = 0; u < run.ids.size(); ++u) {
    f << run.ids[u] << '\t';
    for (std::size_t c = 0; c < run.logits[u].size(); ++c) {
      if (c > 0) f << ' ';
      f << format_double(run.logits[u][c]);
    }
    f << '\t' << (run.labels.empty() ? "?" : run.labels[u]) << '\n';
  }
  if (!f) throw FormatError("write_logits: short write to '" + path.string() + "'");
}

LogitSet read_logits(const std::filesystem::path& path, std::vector<std::string>* class_names) {
  LogitSet run;
  if (class_names != nullptr) class_names->clear();
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path, "read_logits")) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (class_names != nullptr && line.rfind(kClassesPrefix, 0) == 0) {
        std::size_t tab = line.find('\t');
        if (tab != std::string::npos) {
          std::istringstream ss(line.substr(tab + 1));
          std::string name;
          while (ss >> name) class_names->push_back(name);
        }
      }
      continue;
    }
    std::string ctx = "read_logits: '" + path.string() + "' line " + std::to_string(lineno);
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 3) {
      throw FormatError(ctx + ": expected utt_id<TAB>logits<TAB>label");
    }
    std::istringstream ss(fields[1]);
    std::vector<double> logits;
    std::string tok;
    while (ss >> tok) logits.push_back(parse_double(tok, ctx));
    if (logits.empty()) throw FormatError(ctx + ": no logit values");
    run.ids.push_back(fields[0]);
    run.logits.push_back(std::move(logits));
    run.labels.push_back(fields[2]);
  }
  if (run.ids.empty()) {
    throw FormatError("read_logits: '" + path.string() + "' contains no records");
  }
  return run;
}

void write_scores(const std::filesystem::path& path, const ScoreSet& scores) {
  std::ofstream f = open_out(path, "write_scores");
  f << kScoresHeader << '\n';
  for (const Trial& t : scores) {
    f << t.id << '\t' << format_double(t.score) << '\t' << (t.target ? "target" : "nontarget")
      << '\n';
  }
  if (!f) throw FormatError("write_scores: short write to '" + path.string() + "'");
}

ScoreSet read_scores(const std::filesystem::path& path) {
  ScoreSet scores;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path, "read_scores")) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::string ctx = "read_scores: '" + path.string() + "' line " + std::to_string(lineno);
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 3) {
      throw FormatError(ctx + ": expected trial_id<TAB>score<TAB>label");
    }
    if (fields[2] != "target" && fields[2] != "nontarget") {
      throw FormatError(ctx + ": label must be target or nontarget, got '" + fields[2] + "'");
    }
    scores.push_back({fields[0], parse_double(fields[1], ctx), fields[2] == "target"});
  }
  if (scores.empty()) {
    throw FormatError("read_scores: '" + path.string() + "' contains no records");
  }
  return scores;
}

RecordKind sniff_record_kind(const std::filesystem::path& path) {
  for (const std::string& line : read_lines(path, "sniff_record_kind")) {
    if (line.empty()) continue;
    if (line.rfind(kLogitsHeader, 0) == 0) return RecordKind::kLogits;
    if (line.rfind(kScoresHeader, 0) == 0) return RecordKind::kScores;
    if (line[0] == '#') continue;
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() == 3 && (fields[2] == "target" || fields[2] == "nontarget")) {
      return RecordKind::kScores;
    }
    return RecordKind::kLogits;
  }
  throw FormatError("sniff_record_kind: '" + path.string() + "' is empty");
}

}  // namespace corrpool
