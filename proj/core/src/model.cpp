#include "nliart/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nliart/artifacts.hpp"

namespace nliart {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// Adds embedding rows of `ids` scaled by 1/n into `out` (size H).
void AccumulateMean(const Tensor& embed, const std::vector<int>& ids,
                    std::vector<double>& out, double scale) {
  for (int id : ids) {
    auto r = embed.row(id);
    for (std::size_t h = 0; h < out.size(); ++h) out[h] += scale * r[h];
  }
}

// out[j] = sum_h x[h] * w(h, j) + b(0, j)
std::vector<double> Affine(std::span<const double> x, const Tensor& w,
                           const Tensor& b) {
  std::vector<double> out(b.data.begin(), b.data.end());
  for (int h = 0; h < w.rows; ++h) {
    const double xh = x[h];
    if (xh == 0.0) continue;
    auto wr = w.row(h);
    for (int j = 0; j < w.cols; ++j) out[j] += xh * wr[j];
  }
  return out;
}

// Accumulates grads of y = x^T w + b given dy; returns dx.
std::vector<double> AffineBackward(std::span<const double> x,
                                   std::span<const double> dy, const Tensor& w,
                                   Tensor& dw, Tensor& db) {
  std::vector<double> dx(static_cast<std::size_t>(w.rows), 0.0);
  for (int j = 0; j < w.cols; ++j) db.data[j] += dy[j];
  for (int h = 0; h < w.rows; ++h) {
    auto wr = w.row(h);
    auto dwr = dw.row(h);
    double acc = 0.0;
    for (int j = 0; j < w.cols; ++j) {
      dwr[j] += x[h] * dy[j];
      acc += wr[j] * dy[j];
    }
    dx[h] = acc;
  }
  return dx;
}

std::vector<double> PooledMean(const BatchItem& item, const ModelParams& params) {
  std::vector<double> out(static_cast<std::size_t>(params.hidden()), 0.0);
  const std::size_t n_all = item.premise_ids.size() + item.hypothesis_ids.size();
  if (n_all > 0) {
    const double s = 1.0 / static_cast<double>(n_all);
    AccumulateMean(params.embed, item.premise_ids, out, s);
    AccumulateMean(params.embed, item.hypothesis_ids, out, s);
  }
  return out;
}

std::vector<double> HypothesisMean(const BatchItem& item, const ModelParams& params) {
  std::vector<double> out(static_cast<std::size_t>(params.hidden()), 0.0);
  if (!item.hypothesis_ids.empty()) {
    AccumulateMean(params.embed, item.hypothesis_ids, out,
                   1.0 / static_cast<double>(item.hypothesis_ids.size()));
  }
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double LogSumExp(const std::array<double, kNumLabels>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

void CheckFinite(double v, std::string_view head) {
  if (!std::isfinite(v)) {
    throw NumericalError(fmt::format("non-finite value in {}", head));
  }
}

// Everything Backward needs from the forward pass, per example.
struct Activations {
  std::vector<double> pooled;
  std::vector<double> hyp_mean;
  std::vector<double> hyp_rep;
  std::vector<double> pre_relu;
  std::vector<double> relu;
};

struct ForwardState {
  ForwardResult result;
  std::vector<Activations> acts;
};

ForwardState RunForward(const Batch& batch, const ModelParams& params,
                        const ModelConfig& config) {
  if (batch.empty()) throw ValidationError("empty batch");
  const int half = params.proj2_w.cols;
  const auto n = batch.size();
  const double inv_b = 1.0 / static_cast<double>(n);

  ForwardState st;
  ForwardResult& r = st.result;
  r.logits.resize(n);
  r.length_pred.resize(n);
  r.overlap_pred.resize(n);
  r.projections = Tensor(static_cast<int>(n), half);
  st.acts.resize(n);

  std::vector<Label> labels(n);
  double ce = 0.0;
  double len_se = 0.0;
  double ov_se = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BatchItem& item = batch[i];
    Activations& a = st.acts[i];
    labels[i] = item.gold;

    a.pooled = PooledMean(item, params);
    a.hyp_mean = HypothesisMean(item, params);

    const auto logits = Affine(a.pooled, params.cls_w, params.cls_b);
    for (int c = 0; c < kNumLabels; ++c) {
      CheckFinite(logits[c], "classification head");
      r.logits[i][c] = logits[c];
    }
    r.length_pred[i] = Affine(a.pooled, params.len_w, params.len_b)[0];
    CheckFinite(r.length_pred[i], "length head");
    r.overlap_pred[i] = Affine(a.pooled, params.ov_w, params.ov_b)[0];
    CheckFinite(r.overlap_pred[i], "overlap head");

    a.hyp_rep = Affine(a.hyp_mean, params.hyp_w, params.hyp_b);
    a.pre_relu = Affine(a.hyp_rep, params.proj1_w, params.proj1_b);
    a.relu = a.pre_relu;
    for (double& v : a.relu) v = std::max(v, 0.0);
    const auto z = Affine(a.relu, params.proj2_w, params.proj2_b);
    for (int k = 0; k < half; ++k) {
      CheckFinite(z[k], "projection head");
      r.projections.at(static_cast<int>(i), k) = z[k];
    }

    ce += LogSumExp(r.logits[i]) - r.logits[i][LabelIndex(item.gold)];
    const double dl = r.length_pred[i] - item.length_target;
    const double dov = r.overlap_pred[i] - item.overlap_target;
    len_se += dl * dl;
    ov_se += dov * dov;
  }

  r.loss.ce = ce * inv_b;
  r.loss.length_mse = len_se * inv_b;
  r.loss.overlap_mse = ov_se * inv_b;
  r.loss.contrastive = ContrastiveLoss(r.projections, labels,
                                       params.temperature.data[0],
                                       config.contrastive);
  r.loss.total = CombineLoss(r.loss, config);
  CheckFinite(r.loss.total, "total loss");
  return st;
}

}  // namespace

std::string_view ContrastiveVariantName(ContrastiveVariant v) {
  return v == ContrastiveVariant::kLiteral ? "literal" : "infonce";
}

ContrastiveVariant ParseContrastiveVariant(std::string_view name) {
  if (name == "literal") return ContrastiveVariant::kLiteral;
  if (name == "infonce") return ContrastiveVariant::kInfoNce;
  throw ValidationError(fmt::format("unknown contrastive variant '{}'", name));
}

void ModelConfig::Validate() const {
  if (hidden <= 0 || hidden % 2 != 0) {
    throw ValidationError(fmt::format("hidden must be positive and even, got {}", hidden));
  }
  if (vocab <= 0) throw ValidationError(fmt::format("vocab must be positive, got {}", vocab));
  if (lambda_len < 0 || lambda_ov < 0 || lambda_con < 0) {
    throw ValidationError("loss weights must be >= 0");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError(fmt::format("temperature must be > 0, got {}", temperature));
  }
  if (!(length_target_scale > 0.0) || !(length_target_clip > 0.0)) {
    throw ValidationError("length target scale and clip must be > 0");
  }
}

ModelParams ModelParams::Zeros(int vocab, int hidden) {
  ModelParams p;
  p.embed = Tensor(vocab, hidden);
  p.cls_w = Tensor(hidden, kNumLabels);
  p.cls_b = Tensor(1, kNumLabels);
  p.len_w = Tensor(hidden, 1);
  p.len_b = Tensor(1, 1);
  p.ov_w = Tensor(hidden, 1);
  p.ov_b = Tensor(1, 1);
  p.hyp_w = Tensor(hidden, hidden);
  p.hyp_b = Tensor(1, hidden);
  p.proj1_w = Tensor(hidden, hidden);
  p.proj1_b = Tensor(1, hidden);
  p.proj2_w = Tensor(hidden, hidden / 2);
  p.proj2_b = Tensor(1, hidden / 2);
  p.temperature = Tensor(1, 1);
  return p;
}

const std::array<std::string_view, ModelParams::kNumTensors>& ModelParams::TensorNames() {
  static const std::array<std::string_view, kNumTensors> kNames = {
      "embed",   "cls_w",   "cls_b",   "len_w",   "len_b",
      "ov_w",    "ov_b",    "hyp_w",   "hyp_b",   "proj1_w",
      "proj1_b", "proj2_w", "proj2_b", "temperature"};
  return kNames;
}

std::array<Tensor*, ModelParams::kNumTensors> ModelParams::Tensors() {
  return {&embed, &cls_w,   &cls_b,   &len_w,   &len_b,   &ov_w,    &ov_b,
          &hyp_w, &hyp_b,   &proj1_w, &proj1_b, &proj2_w, &proj2_b, &temperature};
}

std::array<const Tensor*, ModelParams::kNumTensors> ModelParams::Tensors() const {
  return {&embed, &cls_w,   &cls_b,   &len_w,   &len_b,   &ov_w,    &ov_b,
          &hyp_w, &hyp_b,   &proj1_w, &proj1_b, &proj2_w, &proj2_b, &temperature};
}

bool ModelParams::AllFinite() const {
  for (const Tensor* t : Tensors()) {
    for (double v : t->data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::uint64_t Fnv1a64(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

int HashToken(std::string_view token, int vocab) {
  return static_cast<int>(Fnv1a64(token) % static_cast<std::uint64_t>(vocab));
}

BatchItem MakeBatchItem(const Example& example, const ModelConfig& config) {
  const TokenSeq prem = Tokenize(example.premise);
  const TokenSeq hyp = Tokenize(example.hypothesis);
  BatchItem item;
  item.id = example.id;
  item.gold = example.gold;
  item.premise_ids.reserve(prem.size());
  for (const auto& t : prem) item.premise_ids.push_back(HashToken(t, config.vocab));
  item.hypothesis_ids.reserve(hyp.size());
  for (const auto& t : hyp) item.hypothesis_ids.push_back(HashToken(t, config.vocab));
  const double diff = static_cast<double>(LengthDifference(prem, hyp));
  item.length_target = std::clamp(diff / config.length_target_scale,
                                  -config.length_target_clip, config.length_target_clip);
  item.overlap_target = OverlapScore(prem, hyp);
  return item;
}

Batch MakeBatch(std::span<const Example> examples, const ModelConfig& config) {
  Batch batch;
  batch.reserve(examples.size());
  for (const Example& ex : examples) batch.push_back(MakeBatchItem(ex, config));
  return batch;
}

Encoding Encode(const BatchItem& item, const ModelParams& params) {
  Encoding e;
  e.pooled = PooledMean(item, params);
  e.hyp_rep = Affine(HypothesisMean(item, params), params.hyp_w, params.hyp_b);
  return e;
}

double CombineLoss(const LossBreakdown& parts, const ModelConfig& config) {
  return parts.ce + config.lambda_len * parts.length_mse +
         config.lambda_ov * parts.overlap_mse +
         config.lambda_con * parts.contrastive;
}

double ContrastiveLoss(const Tensor& projections, std::span<const Label> labels,
                       double temperature, ContrastiveVariant variant,
                       Tensor* grad_projections, double* grad_temperature) {
  if (!(temperature > 0.0)) {
    throw ValidationError(fmt::format("temperature must be > 0, got {}", temperature));
  }
  const int b = projections.rows;
  const int d = projections.cols;
  if (static_cast<std::size_t>(b) != labels.size()) {
    throw ValidationError("projection rows and labels differ in length");
  }
  if (grad_projections) *grad_projections = Tensor(b, d);
  if (grad_temperature) *grad_temperature = 0.0;

  std::vector<double> norms(static_cast<std::size_t>(b));
  Tensor unit(b, d);
  for (int i = 0; i < b; ++i) {
    norms[i] = std::sqrt(Dot(projections.row(i), projections.row(i)));
    if (norms[i] > 0.0) {
      for (int k = 0; k < d; ++k) unit.at(i, k) = projections.at(i, k) / norms[i];
    }
  }
  Tensor sim(b, b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) sim.at(i, j) = Dot(unit.row(i), unit.row(j)) / temperature;
  }

  // denom[i] = sum over the negative-pair row, excluding the positive term.
  std::vector<double> denom(static_cast<std::size_t>(b), 0.0);
  std::int64_t num_pos = 0;
  for (int i = 0; i < b; ++i) {
    int row_pos = 0;
    for (int k = 0; k < b; ++k) {
      if (k == i) continue;
      if (labels[k] == labels[i]) {
        ++row_pos;
      } else {
        denom[i] += std::exp(sim.at(i, k));
      }
    }
    if (variant == ContrastiveVariant::kLiteral) denom[i] += row_pos + 1;
    num_pos += row_pos;
  }
  if (num_pos == 0) return 0.0;

  const double inv_pos = 1.0 / static_cast<double>(num_pos);
  double loss = 0.0;
  Tensor dsim(b, b);
  for (int i = 0; i < b; ++i) {
    double inv_q_sum = 0.0;
    for (int j = 0; j < b; ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      const double e = std::exp(sim.at(i, j));
      const double q = e + denom[i];
      loss += std::log(q) - sim.at(i, j);
      dsim.at(i, j) += inv_pos * (e / q - 1.0);
      inv_q_sum += 1.0 / q;
    }
    if (inv_q_sum == 0.0) continue;
    for (int k = 0; k < b; ++k) {
      if (k == i || labels[k] == labels[i]) continue;
      dsim.at(i, k) += inv_pos * std::exp(sim.at(i, k)) * inv_q_sum;
    }
  }
  loss *= inv_pos;

  if (grad_temperature) {
    double g = 0.0;
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) g -= dsim.at(i, j) * sim.at(i, j);
    }
    *grad_temperature = g / temperature;
  }
  if (grad_projections) {
    for (int i = 0; i < b; ++i) {
      if (norms[i] == 0.0) continue;
      std::vector<double> dunit(static_cast<std::size_t>(d), 0.0);
      for (int j = 0; j < b; ++j) {
        const double w = (dsim.at(i, j) + dsim.at(j, i)) / temperature;
        if (w == 0.0) continue;
        for (int k = 0; k < d; ++k) dunit[k] += w * unit.at(j, k);
      }
      const double radial = Dot(dunit, unit.row(i));
      for (int k = 0; k < d; ++k) {
        grad_projections->at(i, k) = (dunit[k] - radial * unit.at(i, k)) / norms[i];
      }
    }
  }
  return loss;
}

ForwardResult Forward(const Batch& batch, const ModelParams& params,
                      const ModelConfig& config) {
  return RunForward(batch, params, config).result;
}

Gradients Backward(const Batch& batch, const ModelParams& params,
                   const ModelConfig& config) {
  ForwardState st = RunForward(batch, params, config);
  const ForwardResult& fr = st.result;
  const int hidden = params.hidden();
  const auto n = batch.size();
  const double inv_b = 1.0 / static_cast<double>(n);

  Gradients out;
  out.loss = fr.loss;
  ModelParams& g = out.grads;
  g = ModelParams::Zeros(params.vocab(), hidden);

  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = batch[i].gold;
  Tensor dproj;
  double dtemp = 0.0;
  if (config.lambda_con != 0.0) {
    ContrastiveLoss(fr.projections, labels, params.temperature.data[0],
                    config.contrastive, &dproj, &dtemp);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const BatchItem& item = batch[i];
    const Activations& a = st.acts[i];

    const auto probs = Softmax(fr.logits[i]);
    std::array<double, kNumLabels> dlogits{};
    for (int c = 0; c < kNumLabels; ++c) {
      dlogits[c] = (probs[c] - (c == LabelIndex(item.gold) ? 1.0 : 0.0)) * inv_b;
    }
    const double dlen =
        config.lambda_len * 2.0 * (fr.length_pred[i] - item.length_target) * inv_b;
    const double dov =
        config.lambda_ov * 2.0 * (fr.overlap_pred[i] - item.overlap_target) * inv_b;

    auto dpooled = AffineBackward(a.pooled, dlogits, params.cls_w, g.cls_w, g.cls_b);
    const auto dp_len = AffineBackward(a.pooled, std::span<const double>(&dlen, 1),
                                       params.len_w, g.len_w, g.len_b);
    const auto dp_ov = AffineBackward(a.pooled, std::span<const double>(&dov, 1),
                                      params.ov_w, g.ov_w, g.ov_b);
    for (int h = 0; h < hidden; ++h) dpooled[h] += dp_len[h] + dp_ov[h];

    const std::size_t n_all = item.premise_ids.size() + item.hypothesis_ids.size();
    if (n_all > 0) {
      const double s = 1.0 / static_cast<double>(n_all);
      for (const auto* ids : {&item.premise_ids, &item.hypothesis_ids}) {
        for (int id : *ids) {
          auto row = g.embed.row(id);
          for (int h = 0; h < hidden; ++h) row[h] += s * dpooled[h];
        }
      }
    }

    if (config.lambda_con == 0.0) continue;
    std::vector<double> dz(static_cast<std::size_t>(fr.projections.cols));
    for (int k = 0; k < fr.projections.cols; ++k) {
      dz[k] = config.lambda_con * dproj.at(static_cast<int>(i), k);
    }
    auto drelu = AffineBackward(a.relu, dz, params.proj2_w, g.proj2_w, g.proj2_b);
    for (int j = 0; j < hidden; ++j) {
      if (a.pre_relu[j] <= 0.0) drelu[j] = 0.0;
    }
    const auto dhyp_rep =
        AffineBackward(a.hyp_rep, drelu, params.proj1_w, g.proj1_w, g.proj1_b);
    const auto dhyp_mean =
        AffineBackward(a.hyp_mean, dhyp_rep, params.hyp_w, g.hyp_w, g.hyp_b);
    if (!item.hypothesis_ids.empty()) {
      const double s = 1.0 / static_cast<double>(item.hypothesis_ids.size());
      for (int id : item.hypothesis_ids) {
        auto row = g.embed.row(id);
        for (int h = 0; h < hidden; ++h) row[h] += s * dhyp_mean[h];
      }
    }
  }
  if (config.learn_temperature) g.temperature.data[0] = config.lambda_con * dtemp;
  return out;
}

std::array<double, kNumLabels> Softmax(const std::array<double, kNumLabels>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumLabels> p{};
  double s = 0.0;
  for (int c = 0; c < kNumLabels; ++c) {
    p[c] = std::exp(logits[c] - m);
    s += p[c];
  }
  for (double& v : p) v /= s;
  return p;
}

std::array<double, kNumLabels> PredictProbs(const BatchItem& item,
                                            const ModelParams& params) {
  const auto z = Affine(PooledMean(item, params), params.cls_w, params.cls_b);
  std::array<double, kNumLabels> logits{};
  for (int c = 0; c < kNumLabels; ++c) {
    CheckFinite(z[c], "classification head");
    logits[c] = z[c];
  }
  return Softmax(logits);
}

}  // namespace nliart
