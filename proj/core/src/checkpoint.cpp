#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "nliart/train.hpp"

namespace nliart {
namespace {

using nlohmann::ordered_json;

constexpr const char* kFormat = "nliart-checkpoint";

ordered_json ToJson(const TrainConfig& c) {
  ordered_json j;
  j["hidden"] = c.model.hidden;
  j["vocab"] = c.model.vocab;
  j["lambda_len"] = c.model.lambda_len;
  j["lambda_ov"] = c.model.lambda_ov;
  j["lambda_con"] = c.model.lambda_con;
  j["temperature"] = c.model.temperature;
  j["learn_temperature"] = c.model.learn_temperature;
  j["contrastive"] = ContrastiveVariantName(c.model.contrastive);
  j["length_target_scale"] = c.model.length_target_scale;
  j["length_target_clip"] = c.model.length_target_clip;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["accumulation_steps"] = c.accumulation_steps;
  j["warmup_steps"] = c.warmup_steps;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  return j;
}

template <typename T>
void Read(const ordered_json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(fmt::format("config field '{}' has the wrong type", key));
    }
  }
}

TrainConfig FromJson(const ordered_json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "hidden",        "vocab",          "lambda_len",         "lambda_ov",
      "lambda_con",    "temperature",    "learn_temperature",  "contrastive",
      "length_target_scale", "length_target_clip", "learning_rate", "weight_decay",
      "clip_norm",     "epochs",         "batch_size",         "accumulation_steps",
      "warmup_steps",  "eval_every",     "seed",               "shuffle"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw ValidationError(fmt::format("unknown config field '{}'", key));
  }
  TrainConfig c;
  Read(j, "hidden", c.model.hidden);
  Read(j, "vocab", c.model.vocab);
  Read(j, "lambda_len", c.model.lambda_len);
  Read(j, "lambda_ov", c.model.lambda_ov);
  Read(j, "lambda_con", c.model.lambda_con);
  Read(j, "temperature", c.model.temperature);
  Read(j, "learn_temperature", c.model.learn_temperature);
  std::string variant(ContrastiveVariantName(c.model.contrastive));
  Read(j, "contrastive", variant);
  c.model.contrastive = ParseContrastiveVariant(variant);
  Read(j, "length_target_scale", c.model.length_target_scale);
  Read(j, "length_target_clip", c.model.length_target_clip);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "weight_decay", c.weight_decay);
  Read(j, "clip_norm", c.clip_norm);
  Read(j, "epochs", c.epochs);
  Read(j, "batch_size", c.batch_size);
  Read(j, "accumulation_steps", c.accumulation_steps);
  Read(j, "warmup_steps", c.warmup_steps);
  Read(j, "eval_every", c.eval_every);
  Read(j, "seed", c.seed);
  Read(j, "shuffle", c.shuffle);
  return c;
}

}  // namespace

std::string ConfigJson(const TrainConfig& config) { return ToJson(config).dump(2); }

TrainConfig ConfigFromJson(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("malformed config: {}", e.what()));
  }
  return FromJson(j);
}

void SaveCheckpoint(std::ostream& out, const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["seed"] = ckpt.config.seed;
  j["step"] = ckpt.step;
  j["config"] = ToJson(ckpt.config);
  ordered_json tensors = ordered_json::array();
  const auto& names = ModelParams::TensorNames();
  const auto ts = ckpt.params.Tensors();
  for (std::size_t t = 0; t < ts.size(); ++t) {
    ordered_json tj;
    tj["name"] = names[t];
    tj["shape"] = {ts[t]->rows, ts[t]->cols};
    tj["data"] = ts[t]->data;
    tensors.push_back(std::move(tj));
  }
  j["tensors"] = std::move(tensors);
  out << j.dump() << '\n';
}

namespace {

Checkpoint FromCheckpointJson(const ordered_json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw ValidationError("not a checkpoint file");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw ValidationError(fmt::format("unsupported checkpoint version {}",
                                      j.value("version", -1)));
  }
  Checkpoint ckpt;
  ckpt.config = FromJson(j.at("config"));
  ckpt.config.Validate();
  ckpt.step = j.value("step", std::int64_t{0});

  const int hidden = ckpt.config.model.hidden;
  const int vocab = ckpt.config.model.vocab;
  ckpt.params = ModelParams::Zeros(vocab, hidden);
  const auto& tensors = j.at("tensors");
  if (!tensors.is_array() || tensors.size() != ModelParams::kNumTensors) {
    throw ValidationError("checkpoint tensor list is incomplete");
  }
  const auto& names = ModelParams::TensorNames();
  auto ts = ckpt.params.Tensors();
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const auto& tj = tensors[t];
    if (tj.value("name", "") != names[t]) {
      throw ValidationError(fmt::format("expected tensor '{}' at position {}", names[t], t));
    }
    const auto shape = tj.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != ts[t]->rows || shape[1] != ts[t]->cols) {
      throw ValidationError(fmt::format(
          "tensor '{}' shape does not match config (hidden {}, vocab {})", names[t],
          hidden, vocab));
    }
    auto data = tj.at("data").get<std::vector<double>>();
    if (data.size() != ts[t]->size()) {
      throw ValidationError(fmt::format("tensor '{}' has {} values, expected {}",
                                        names[t], data.size(), ts[t]->size()));
    }
    ts[t]->data = std::move(data);
  }
  return ckpt;
}

}  // namespace

Checkpoint LoadCheckpoint(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("malformed checkpoint: {}", e.what()));
  }
  try {
    return FromCheckpointJson(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void SaveCheckpointFile(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  SaveCheckpoint(out, ckpt);
  if (!out) throw IoError(fmt::format("write failure on '{}'", path));
}

Checkpoint LoadCheckpointFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return LoadCheckpoint(in);
}

}  // namespace nliart
