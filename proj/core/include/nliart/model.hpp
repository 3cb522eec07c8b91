#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nliart/corpus.hpp"

namespace nliart {

// Row-major dense matrix of doubles. Vectors are stored as 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::size_t size() const { return data.size(); }
  bool SameShape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Tensor&) const = default;
};

// Thrown when an activation, loss or parameter stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ContrastiveVariant {
  // The printed formula: masked-out entries of the negative matrix are zero
  // and still add exp(0) = 1 to every row's denominator.
  kLiteral,
  // Denominator restricted to the positive itself plus true negatives.
  kInfoNce,
};

std::string_view ContrastiveVariantName(ContrastiveVariant v);
ContrastiveVariant ParseContrastiveVariant(std::string_view name);

struct ModelConfig {
  int hidden = 64;    // must be even
  int vocab = 4096;
  double lambda_len = 0.05;
  double lambda_ov = 0.05;
  double lambda_con = 0.05;
  double temperature = 1.0;
  bool learn_temperature = false;
  ContrastiveVariant contrastive = ContrastiveVariant::kLiteral;
  // length target = clamp((prem_len - hyp_len) / scale, -clip, clip)
  double length_target_scale = 10.0;
  double length_target_clip = 3.0;

  // Throws ValidationError.
  void Validate() const;
};

struct ModelParams {
  Tensor embed;     // V x H
  Tensor cls_w;     // H x 3
  Tensor cls_b;     // 1 x 3
  Tensor len_w;     // H x 1
  Tensor len_b;     // 1 x 1
  Tensor ov_w;      // H x 1
  Tensor ov_b;      // 1 x 1
  Tensor hyp_w;     // H x H
  Tensor hyp_b;     // 1 x H
  Tensor proj1_w;   // H x H
  Tensor proj1_b;   // 1 x H
  Tensor proj2_w;   // H x H/2
  Tensor proj2_b;   // 1 x H/2
  Tensor temperature;  // 1 x 1

  // All-zero tensors of the right shapes (temperature included).
  static ModelParams Zeros(int vocab, int hidden);

  int hidden() const { return embed.cols; }
  int vocab() const { return embed.rows; }

  static constexpr std::size_t kNumTensors = 14;
  static const std::array<std::string_view, kNumTensors>& TensorNames();
  std::array<Tensor*, kNumTensors> Tensors();
  std::array<const Tensor*, kNumTensors> Tensors() const;

  bool AllFinite() const;
  bool operator==(const ModelParams&) const = default;
};

// FNV-1a 64-bit (offset 0xcbf29ce484222325, prime 0x100000001b3) mod vocab.
std::uint64_t Fnv1a64(std::string_view s);
int HashToken(std::string_view token, int vocab);

struct BatchItem {
  std::string id;
  std::vector<int> premise_ids;
  std::vector<int> hypothesis_ids;
  Label gold = Label::kEntailment;
  double length_target = 0.0;
  double overlap_target = 0.0;
};

using Batch = std::vector<BatchItem>;

BatchItem MakeBatchItem(const Example& example, const ModelConfig& config);
Batch MakeBatch(std::span<const Example> examples, const ModelConfig& config);

struct Encoding {
  std::vector<double> pooled;   // mean embedding over premise + hypothesis
  std::vector<double> hyp_rep;  // hyp_w^T mean(hypothesis) + hyp_b
};

Encoding Encode(const BatchItem& item, const ModelParams& params);

struct LossBreakdown {
  double ce = 0.0;
  double length_mse = 0.0;
  double overlap_mse = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

// total = ce + lambda_len*length_mse + lambda_ov*overlap_mse +
// lambda_con*contrastive, evaluated in exactly that order.
double CombineLoss(const LossBreakdown& parts, const ModelConfig& config);

struct ForwardResult {
  std::vector<std::array<double, kNumLabels>> logits;  // B x 3
  std::vector<double> length_pred;                     // B
  std::vector<double> overlap_pred;                    // B
  Tensor projections;                                  // B x H/2
  LossBreakdown loss;
};

// Throws NumericalError naming the head whose output is not finite.
ForwardResult Forward(const Batch& batch, const ModelParams& params,
                      const ModelConfig& config);

// Mean over positive pairs (same label, i != j) of the per-pair loss on
// row-normalised projections with similarity / temperature. Returns 0 when
// the batch has no positive pair. When `grad_projections` is non-null it
// receives d loss / d projections (same shape); `grad_temperature`
// receives d loss / d temperature.
double ContrastiveLoss(const Tensor& projections, std::span<const Label> labels,
                       double temperature, ContrastiveVariant variant,
                       Tensor* grad_projections = nullptr,
                       double* grad_temperature = nullptr);

struct Gradients {
  ModelParams grads;
  LossBreakdown loss;
};

// Exact gradient of the total loss. The temperature gradient is left at
// zero unless config.learn_temperature is set.
Gradients Backward(const Batch& batch, const ModelParams& params,
                   const ModelConfig& config);

std::array<double, kNumLabels> Softmax(const std::array<double, kNumLabels>& logits);

// Class probabilities for one item, without the auxiliary heads.
std::array<double, kNumLabels> PredictProbs(const BatchItem& item,
                                            const ModelParams& params);

}  // namespace nliart
