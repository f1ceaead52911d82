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

#include "corrpool/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "corrpool/error.hpp"
#include "corrpool/rng.hpp"

namespace corrpool {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'P', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint64_t kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& buf, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return v;
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(const std::string& buf, std::size_t offset) {
  return std::bit_cast<double>(get_u64(buf, offset));
}

json tdnn_to_json(const std::vector<TdnnLayerSpec>& tdnn) {
  json arr = json::array();
  for (const TdnnLayerSpec& l : tdnn) {
    arr.push_back(json{{"kernel", l.kernel},
                       {"dilation", l.dilation},
                       {"channels", l.channels},
                       {"activation", activation_name(l.activation)}});
  }
  return arr;
}

std::vector<TdnnLayerSpec> tdnn_from_json(const json& arr) {
  std::vector<TdnnLayerSpec> tdnn;
  for (const json& l : arr) {
    tdnn.push_back({l.at("kernel").get<std::size_t>(), l.at("dilation").get<std::size_t>(),
                    l.at("channels").get<std::size_t>(),
                    parse_activation(l.at("activation").get<std::string>())});
  }
  return tdnn;
}

class PayloadReader {
 public:
  PayloadReader(const std::string& buf, std::size_t offset, const std::string& path)
      : buf_(buf), offset_(offset), path_(path) {}

  Tensor tensor(const std::vector<std::size_t>& shape) {
    Tensor t(shape);
    if (offset_ + 8 * t.size() > buf_.size()) {
      throw FormatError("load_checkpoint: '" + path_ + "' truncated: payload ends at offset " +
                        std::to_string(buf_.size()) + ", need " +
                        std::to_string(offset_ + 8 * t.size()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = get_f64(buf_, offset_);
      offset_ += 8;
    }
    return t;
  }

  std::size_t offset() const { return offset_; }

 private:
  const std::string& buf_;
  std::size_t offset_;
  std::string path_;
};

}  // namespace

json model_config_to_json(const ModelConfig& cfg, const std::vector<std::string>& class_names) {
  return json{{"task", task_name(cfg.task)},
              {"pooling", pooling_name(cfg.pooling)},
              {"input_dim", cfg.input_dim},
              {"layers", cfg.layers},
              {"num_classes", cfg.num_classes},
              {"dropout", cfg.dropout},
              {"proj_dim", cfg.proj_dim},
              {"post_pool_proj", cfg.post_pool_proj},
              {"post_pool_dim", cfg.post_pool_dim},
              {"tdnn", tdnn_to_json(cfg.tdnn)},
              {"embed_dim", cfg.embed_dim},
              {"am_scale", cfg.am_scale},
              {"am_margin", cfg.am_margin},
              {"epsilon", cfg.epsilon},
              {"dropout_after_standardize", cfg.dropout_after_standardize},
              {"class_names", class_names}};
}

ModelConfig model_config_from_json(const json& j, std::vector<std::string>* class_names) {
  ModelConfig cfg;
  cfg.task = parse_task(j.at("task").get<std::string>());
  cfg.pooling = parse_pooling(j.at("pooling").get<std::string>());
  cfg.input_dim = j.at("input_dim").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.num_classes = j.at("num_classes").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.proj_dim = j.at("proj_dim").get<std::size_t>();
  cfg.post_pool_proj = j.at("post_pool_proj").get<bool>();
  cfg.post_pool_dim = j.at("post_pool_dim").get<std::size_t>();
  cfg.tdnn = tdnn_from_json(j.at("tdnn"));
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.am_scale = j.at("am_scale").get<double>();
  cfg.am_margin = j.at("am_margin").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.dropout_after_standardize = j.at("dropout_after_standardize").get<bool>();
  if (class_names != nullptr) {
    *class_names = j.at("class_names").get<std::vector<std::string>>();
  }
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const TrainState* train) {
  std::vector<Parameter*> params = model.parameters();

  json header;
  header["format_version"] = kVersion;
  header["model"] = model_config_to_json(model.config(), model.class_names());
  json ptable = json::array();
  for (const Parameter* p : params) {
    ptable.push_back(
        json{{"name", p->name}, {"shape", p->value.shape()}, {"trainable", p->trainable}});
  }
  header["params"] = ptable;
  if (train == nullptr) {
    header["train"] = json();
  } else {
    if (!train->moment1.empty() && (train->moment1.size() != params.size() ||
                                    train->moment2.size() != params.size())) {
      throw ValueError("save_checkpoint: moment slot count does not match parameters");
    }
    if (!train->best_params.empty() && train->best_params.size() != params.size()) {
      throw ValueError("save_checkpoint: best-snapshot count does not match parameters");
    }
    json jlog = json::array();
    for (const EpochRecord& r : train->log) {
      jlog.push_back(json::array({r.epoch, r.train_loss, r.val_metric}));
    }
    header["train"] = json{{"config", train->train_config},
                           {"epochs_done", train->epochs_done},
                           {"log", jlog},
                           {"best_epoch", train->best_epoch},
                           {"best_metric", train->best_metric},
                           {"has_best_params", !train->best_params.empty()},
                           {"optimizer_steps", train->optimizer_steps},
                           {"has_moments", !train->moment1.empty()}};
  }

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  std::string hdr = header.dump();
  put_u64(buf, hdr.size());
  buf += hdr;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) put_f64(buf, p->value[i]);
  }
  if (train != nullptr) {
    for (const Tensor& t : train->moment1) {
      for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
    }
    for (const Tensor& t : train->moment2) {
      for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
    }
    for (const Tensor& t : train->best_params) {
      for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw FormatError("save_checkpoint: cannot open '" + path.string() + "' for writing");
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw FormatError("save_checkpoint: short write to '" + path.string() + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_checkpoint: cannot open '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 16) {
    throw FormatError("load_checkpoint: '" + path.string() + "' is " +
                      std::to_string(buf.size()) + " bytes, need at least 16");
  }
  if (buf.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("load_checkpoint: '" + path.string() + "' has bad magic at offset 0");
  }
  std::uint64_t hlen = get_u64(buf, 8);
  if (16 + hlen > buf.size()) {
    throw FormatError("load_checkpoint: '" + path.string() +
                      "' truncated: header claims " + std::to_string(hlen) +
                      " bytes at offset 16 but file ends at " + std::to_string(buf.size()));
  }
  json header;
  try {
    header = json::parse(buf.substr(16, hlen));
  } catch (const json::exception& e) {
    throw FormatError("load_checkpoint: '" + path.string() + "': bad header: " + e.what());
  }

  try {
    if (header.at("format_version").get<std::uint64_t>() != kVersion) {
      throw FormatError("load_checkpoint: '" + path.string() +
                        "' has unsupported format version " +
                        header.at("format_version").dump());
    }
    std::vector<std::string> class_names;
    ModelConfig cfg = model_config_from_json(header.at("model"), &class_names);
    SeededRng scratch(0);
    Model model(cfg, std::move(class_names), scratch);
    std::vector<Parameter*> params = model.parameters();
    const json& ptable = header.at("params");
    if (ptable.size() != params.size()) {
      throw FormatError("load_checkpoint: '" + path.string() + "' lists " +
                        std::to_string(ptable.size()) + " parameters, model has " +
                        std::to_string(params.size()));
    }
    PayloadReader reader(buf, 16 + hlen, path.string());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& pj = ptable[i];
      if (pj.at("name").get<std::string>() != params[i]->name) {
        throw FormatError("load_checkpoint: '" + path.string() + "' parameter " +
                          std::to_string(i) + " is '" + pj.at("name").get<std::string>() +
                          "', model expects '" + params[i]->name + "'");
      }
      std::vector<std::size_t> shape = pj.at("shape").get<std::vector<std::size_t>>();
      if (shape != params[i]->value.shape()) {
        throw FormatError("load_checkpoint: '" + path.string() + "' parameter '" +
                          params[i]->name + "' has mismatched shape");
      }
      params[i]->value = reader.tensor(shape);
      params[i]->grad = Tensor(shape);
      params[i]->trainable = pj.at("trainable").get<bool>();
    }

    LoadedCheckpoint out{std::move(model), std::nullopt};
    const json& jt = header.at("train");
    if (!jt.is_null()) {
      TrainState ts;
      ts.train_config = jt.at("config");
      ts.epochs_done = jt.at("epochs_done").get<std::size_t>();
      for (const json& row : jt.at("log")) {
        ts.log.push_back({row.at(0).get<std::size_t>(), row.at(1).get<double>(),
                          row.at(2).get<double>()});
      }
      ts.best_epoch = jt.at("best_epoch").get<std::size_t>();
      ts.best_metric = jt.at("best_metric").get<double>();
      ts.optimizer_steps = jt.at("optimizer_steps").get<std::uint64_t>();
      std::vector<Parameter*> mp = out.model.parameters();
      if (jt.at("has_moments").get<bool>()) {
        for (Parameter* p : mp) ts.moment1.push_back(reader.tensor(p->value.shape()));
        for (Parameter* p : mp) ts.moment2.push_back(reader.tensor(p->value.shape()));
      }
      if (jt.at("has_best_params").get<bool>()) {
        for (Parameter* p : mp) ts.best_params.push_back(reader.tensor(p->value.shape()));
      }
      out.train = std::move(ts);
    }
    if (reader.offset() != buf.size()) {
      throw FormatError("load_checkpoint: '" + path.string() + "' has trailing bytes at offset " +
                        std::to_string(reader.offset()));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError("load_checkpoint: '" + path.string() + "': bad header: " + e.what());
  }
}

}  // namespace corrpool
