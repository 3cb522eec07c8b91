#include "nliart/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>

#include <fmt/format.h>

#include "nliart/random.hpp"

namespace nliart {
namespace {

void AddInPlace(ModelParams& acc, const ModelParams& g) {
  auto dst = acc.Tensors();
  auto src = g.Tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    auto& d = dst[t]->data;
    const auto& s = src[t]->data;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }
}

void ScaleInPlace(ModelParams& p, double s) {
  for (Tensor* t : p.Tensors()) {
    for (double& v : t->data) v *= s;
  }
}

void XavierUniform(Tensor& t, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
  for (double& v : t.data) v = rng.Uniform(-limit, limit);
}

}  // namespace

void TrainConfig::Validate() const {
  model.Validate();
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (weight_decay < 0.0) throw ValidationError("weight decay must be >= 0");
  if (!(clip_norm > 0.0)) throw ValidationError("clip norm must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (accumulation_steps < 1) throw ValidationError("accumulation steps must be >= 1");
  if (warmup_steps < 0) throw ValidationError("warmup steps must be >= 0");
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
}

AdamWState AdamWState::For(const ModelParams& params) {
  AdamWState s;
  s.m = ModelParams::Zeros(params.vocab(), params.hidden());
  s.v = ModelParams::Zeros(params.vocab(), params.hidden());
  return s;
}

double ScheduledLearningRate(double base, std::int64_t step, std::int64_t warmup,
                             std::int64_t total) {
  const double s = static_cast<double>(step);
  double warm = 1.0;
  if (warmup > 0) warm = s / static_cast<double>(warmup);
  double decay = 1.0;
  if (total > warmup) {
    decay = std::max(0.0, static_cast<double>(total - step) /
                              static_cast<double>(total - warmup));
  }
  return base * std::min(warm, decay);
}

double ClipGradients(ModelParams& grads, double clip_norm) {
  double sq = 0.0;
  for (const Tensor* t : std::as_const(grads).Tensors()) {
    for (double v : t->data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) ScaleInPlace(grads, clip_norm / norm);
  return norm;
}

void OptimizerStep(ModelParams& params, ModelParams grads, AdamWState& state,
                   const TrainConfig& config, std::int64_t step_index,
                   std::int64_t total_steps) {
  auto p = params.Tensors();
  auto g = grads.Tensors();
  auto m = state.m.Tensors();
  auto v = state.v.Tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!p[t]->SameShape(*g[t]) || !p[t]->SameShape(*m[t]) || !p[t]->SameShape(*v[t])) {
      throw ValidationError(fmt::format("shape mismatch for tensor '{}'",
                                        ModelParams::TensorNames()[t]));
    }
  }
  const bool learn_temp = config.model.learn_temperature;
  if (!learn_temp) grads.temperature.data[0] = 0.0;
  ClipGradients(grads, config.clip_norm);

  state.step += 1;
  const double lr = ScheduledLearningRate(config.learning_rate, step_index,
                                          config.warmup_steps, total_steps);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    const bool is_temperature = p[t] == &params.temperature;
    if (is_temperature && !learn_temp) continue;
    const double decay = is_temperature ? 0.0 : lr * config.weight_decay;
    auto& pd = p[t]->data;
    const auto& gd = g[t]->data;
    auto& md = m[t]->data;
    auto& vd = v[t]->data;
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = kAdamBeta1 * md[i] + (1.0 - kAdamBeta1) * gd[i];
      vd[i] = kAdamBeta2 * vd[i] + (1.0 - kAdamBeta2) * gd[i] * gd[i];
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      pd[i] -= decay * pd[i];
      pd[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
  if (learn_temp) {
    params.temperature.data[0] = std::max(params.temperature.data[0], kMinTemperature);
  }
  if (!params.AllFinite()) {
    throw NumericalError(fmt::format("non-finite parameter after step {}", step_index));
  }
}

ModelParams InitParams(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  ModelParams p = ModelParams::Zeros(config.vocab, config.hidden);
  const double emb = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (double& v : p.embed.data) v = rng.Uniform(-emb, emb);
  for (Tensor* w : {&p.cls_w, &p.len_w, &p.ov_w, &p.hyp_w, &p.proj1_w, &p.proj2_w}) {
    XavierUniform(*w, rng);
  }
  p.temperature.data[0] = config.temperature;
  return p;
}

std::int64_t TotalOptimizerSteps(std::size_t corpus_size, const TrainConfig& config) {
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const auto micro = static_cast<std::int64_t>((corpus_size + bs - 1) / bs);
  const std::int64_t per_epoch =
      (micro + config.accumulation_steps - 1) / config.accumulation_steps;
  return per_epoch * config.epochs;
}

LossBreakdown EvaluateLoss(const Batch& examples, const ModelParams& params,
                           const ModelConfig& config, int batch_size) {
  LossBreakdown acc;
  const std::size_t n = examples.size();
  if (n == 0) return acc;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
    const Batch chunk(examples.begin() + static_cast<std::ptrdiff_t>(start),
                      examples.begin() + static_cast<std::ptrdiff_t>(end));
    const LossBreakdown l = Forward(chunk, params, config).loss;
    const double w = static_cast<double>(end - start);
    acc.ce += w * l.ce;
    acc.length_mse += w * l.length_mse;
    acc.overlap_mse += w * l.overlap_mse;
    acc.contrastive += w * l.contrastive;
  }
  const double inv = 1.0 / static_cast<double>(n);
  acc.ce *= inv;
  acc.length_mse *= inv;
  acc.overlap_mse *= inv;
  acc.contrastive *= inv;
  acc.total = CombineLoss(acc, config);
  return acc;
}

std::vector<Prediction> Predict(const ModelParams& params,
                                const std::vector<Example>& examples,
                                const ModelConfig& config) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const Example& ex : examples) {
    const auto probs = PredictProbs(MakeBatchItem(ex, config), params);
    Prediction p;
    p.id = ex.id;
    p.probs = probs;
    p.predicted = ArgmaxLabel(probs);
    out.push_back(std::move(p));
  }
  return out;
}

double Accuracy(const std::vector<Example>& examples,
                const std::vector<Prediction>& predictions) {
  if (examples.empty()) return 0.0;
  const auto pairs = Align(examples, predictions);
  std::size_t correct = 0;
  for (const AlignedPair& p : pairs) {
    correct += p.example->gold == p.prediction->predicted ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

TrainResult Train(const std::vector<Example>& corpus, const TrainConfig& config,
                  const TrainOptions& options) {
  config.Validate();
  if (corpus.size() < static_cast<std::size_t>(config.batch_size)) {
    throw ValidationError(fmt::format(
        "corpus has {} examples, fewer than one batch of {}; use a smaller batch size",
        corpus.size(), config.batch_size));
  }
  const ModelConfig& mc = config.model;
  const Batch items = MakeBatch(corpus, mc);
  const std::vector<Example>& eval_set =
      options.eval_examples ? *options.eval_examples : corpus;
  const Batch eval_items = MakeBatch(eval_set, mc);

  Rng rng(config.seed);
  TrainResult result;
  result.params = InitParams(mc, rng.NextU64());
  ModelParams& params = result.params;
  AdamWState state = AdamWState::For(params);

  const std::int64_t total_steps = TotalOptimizerSteps(corpus.size(), config);
  auto record = [&](std::int64_t step) {
    HistoryRow row;
    row.step = step;
    row.loss = EvaluateLoss(eval_items, params, mc, config.batch_size);
    row.eval_accuracy = Accuracy(eval_set, Predict(params, eval_set, mc));
    result.history.push_back(row);
  };
  record(0);

  std::vector<std::size_t> order(items.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) rng.Shuffle(order);

    ModelParams accum;
    int in_group = 0;
    std::int64_t micro = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++micro) {
      const std::size_t end = std::min(order.size(), start + bs);
      Batch batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(items[order[k]]);

      Gradients g = Backward(batch, params, mc);
      if (options.on_micro_step) {
        options.on_micro_step({epoch, micro, step + 1, g.loss});
      }
      if (in_group == 0) {
        accum = std::move(g.grads);
      } else {
        AddInPlace(accum, g.grads);
      }
      ++in_group;

      const bool last = end == order.size();
      if (in_group == config.accumulation_steps || last) {
        if (in_group > 1) ScaleInPlace(accum, 1.0 / in_group);
        ++step;
        OptimizerStep(params, std::move(accum), state, config, step, total_steps);
        accum = ModelParams();
        in_group = 0;
        if (options.on_step) options.on_step(step, params);
        if (step % config.eval_every == 0 || step == total_steps) record(step);
      }
    }
  }
  result.steps = step;
  return result;
}

void WriteHistoryCsv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "step,ce,length_mse,overlap_mse,contrastive,total,eval_accuracy\n";
  for (const HistoryRow& r : history) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.step, r.loss.ce, r.loss.length_mse,
                       r.loss.overlap_mse, r.loss.contrastive, r.loss.total,
                       r.eval_accuracy);
  }
}

}  // namespace nliart
