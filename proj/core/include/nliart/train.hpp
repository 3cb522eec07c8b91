#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nliart/corpus.hpp"
#include "nliart/model.hpp"

namespace nliart {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int epochs = 5;
  int batch_size = 32;
  int accumulation_steps = 2;
  int warmup_steps = 50;
  // History is recorded at step 0, every `eval_every` optimizer steps and
  // after the final step.
  int eval_every = 50;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void Validate() const;
};

struct AdamWState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static AdamWState For(const ModelParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
// Floor applied to a learnable temperature after each update.
inline constexpr double kMinTemperature = 0.05;

// base * min(step / warmup, max(0, (total - step) / (total - warmup)))
double ScheduledLearningRate(double base, std::int64_t step, std::int64_t warmup,
                             std::int64_t total);

// Scales every gradient tensor so the global L2 norm is at most
// `clip_norm`. Returns the norm before clipping.
double ClipGradients(ModelParams& grads, double clip_norm);

// One AdamW update with global-norm clipping, bias correction and decoupled
// weight decay. `step_index` is 1-based and drives the learning-rate
// schedule over `total_steps`. The temperature is never decayed and is only
// updated when config.model.learn_temperature is set.
// Throws ValidationError on a shape mismatch and NumericalError when an
// updated parameter is not finite.
void OptimizerStep(ModelParams& params, ModelParams grads, AdamWState& state,
                   const TrainConfig& config, std::int64_t step_index,
                   std::int64_t total_steps);

// Uniform(+-1/sqrt(H)) embeddings, Xavier-uniform weights, zero biases,
// temperature from the config.
ModelParams InitParams(const ModelConfig& config, std::uint64_t seed);

struct HistoryRow {
  std::int64_t step = 0;
  LossBreakdown loss;
  double eval_accuracy = 0.0;
};

struct MicroStep {
  std::int64_t epoch = 0;
  std::int64_t micro_batch = 0;
  std::int64_t optimizer_step = 0;  // step the micro-batch contributes to
  LossBreakdown loss;
};

struct TrainOptions {
  // Loss/accuracy rows are computed on this set; defaults to the training
  // corpus.
  const std::vector<Example>* eval_examples = nullptr;
  // Called after every micro-batch forward/backward.
  std::function<void(const MicroStep&)> on_micro_step;
  // Called with the parameters after every optimizer step.
  std::function<void(std::int64_t, const ModelParams&)> on_step;
};

struct TrainResult {
  ModelParams params;
  std::vector<HistoryRow> history;
  std::int64_t steps = 0;
};

std::int64_t TotalOptimizerSteps(std::size_t corpus_size, const TrainConfig& config);

// Deterministic for a given config.seed. Throws ValidationError when the
// corpus is smaller than one batch.
TrainResult Train(const std::vector<Example>& corpus, const TrainConfig& config,
                  const TrainOptions& options = {});

// Mean loss over `examples` in fixed order and chunks of `batch_size`,
// weighted by chunk size; `total` follows the weighted identity.
LossBreakdown EvaluateLoss(const Batch& examples, const ModelParams& params,
                           const ModelConfig& config, int batch_size);

std::vector<Prediction> Predict(const ModelParams& params,
                                const std::vector<Example>& examples,
                                const ModelConfig& config);

double Accuracy(const std::vector<Example>& examples,
                const std::vector<Prediction>& predictions);

// step,ce,length_mse,overlap_mse,contrastive,total,eval_accuracy
void WriteHistoryCsv(std::ostream& out, const std::vector<HistoryRow>& history);

struct Checkpoint {
  TrainConfig config;
  std::int64_t step = 0;
  ModelParams params;
};

inline constexpr int kCheckpointVersion = 1;

std::string ConfigJson(const TrainConfig& config);
TrainConfig ConfigFromJson(const std::string& text);

// JSON container; every double is written in shortest round-trip form so
// Load(Save(x)) == x bit for bit.
void SaveCheckpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(std::istream& in);
void SaveCheckpointFile(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpointFile(const std::string& path);

}  // namespace nliart
