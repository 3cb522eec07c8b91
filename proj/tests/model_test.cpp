#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "nliart/model.hpp"
#include "nliart/train.hpp"
#include "oracles.hpp"

namespace nliart {

void PrintTo(ContrastiveVariant v, std::ostream* os) { *os << ContrastiveVariantName(v); }

namespace {

Tensor RandomProjections(std::mt19937_64& g, int b, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(b, d);
  for (double& v : t.data) v = n(g);
  return t;
}

std::vector<std::vector<double>> Rows(const Tensor& t) {
  std::vector<std::vector<double>> out;
  for (int i = 0; i < t.rows; ++i) out.emplace_back(t.row(i).begin(), t.row(i).end());
  return out;
}

TEST(Hash, Fnv1aReferenceValues) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(HashToken("dog", 4096), HashToken("dog", 4096));
}

TEST(Hash, RangeAndCollisionRate) {
  std::mt19937_64 g(1);
  for (int i = 0; i < 10000; ++i) {
    const int id = HashToken("tok" + std::to_string(g()), 4096);
    ASSERT_GE(id, 0);
    ASSERT_LT(id, 4096);
  }
  // Distinct-bucket count for n tokens in V buckets: mean V(1-(1-1/V)^n).
  const int n = 1000;
  const double v = 4096;
  std::set<int> buckets;
  for (int i = 0; i < n; ++i) buckets.insert(HashToken("word" + std::to_string(i), 4096));
  const double collisions = n - static_cast<double>(buckets.size());
  const double expected = n - v * (1 - std::pow(1 - 1 / v, n));
  const double sigma = std::sqrt(expected);
  EXPECT_NEAR(collisions, expected, 3 * sigma);
}

TEST(Encode, ZeroTableAndSingleTokens) {
  ModelConfig c;
  c.hidden = 8;
  c.vocab = 64;
  ModelParams p = ModelParams::Zeros(64, 8);
  for (int k = 0; k < 8; ++k) p.hyp_b.data[k] = k;
  const BatchItem item = MakeBatchItem({"e", "cats", "dogs", Label::kNeutral}, c);
  Encoding e = Encode(item, p);
  for (double v : e.pooled) EXPECT_EQ(v, 0.0);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(e.hyp_rep[k], k);

  std::mt19937_64 g(2);
  for (double& v : p.embed.data) v = std::uniform_real_distribution<double>(-1, 1)(g);
  e = Encode(item, p);
  const int a = item.premise_ids[0], b = item.hypothesis_ids[0];
  for (int k = 0; k < 8; ++k) {
    EXPECT_DOUBLE_EQ(e.pooled[k], (p.embed.at(a, k) + p.embed.at(b, k)) / 2);
  }
}

TEST(Forward, MatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (auto variant : {ContrastiveVariant::kLiteral, ContrastiveVariant::kInfoNce}) {
      const auto toy = oracle::MakeToy(seed, 4, 8, 64, variant);
      const ForwardResult got = Forward(toy.batch, toy.params, toy.config);
      const oracle::ForwardOut want = oracle::Forward(toy.batch, toy.params, toy.config);
      EXPECT_NEAR(got.loss.ce, want.ce, 1e-10);
      EXPECT_NEAR(got.loss.length_mse, want.length_mse, 1e-10);
      EXPECT_NEAR(got.loss.overlap_mse, want.overlap_mse, 1e-10);
      EXPECT_NEAR(got.loss.contrastive, want.contrastive, 1e-10);
      EXPECT_NEAR(got.loss.total, want.total, 1e-10);
      for (std::size_t i = 0; i < toy.batch.size(); ++i) {
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(got.logits[i][k], want.logits[i][k], 1e-12);
      }
    }
  }
}

TEST(Forward, LossIdentityIsExact) {
  const auto toy = oracle::MakeToy(3, 6, 8, 64, ContrastiveVariant::kLiteral);
  const LossBreakdown l = Forward(toy.batch, toy.params, toy.config).loss;
  EXPECT_EQ(l.total, l.ce + 0.05 * l.length_mse + 0.05 * l.overlap_mse + 0.05 * l.contrastive);
  auto c = toy.config;
  c.lambda_len = c.lambda_ov = c.lambda_con = 0;
  const LossBreakdown z = Forward(toy.batch, toy.params, c).loss;
  EXPECT_EQ(z.total, z.ce);
}

TEST(Forward, SingleExampleHasNoContrastiveTerm) {
  auto toy = oracle::MakeToy(4, 1, 8, 64, ContrastiveVariant::kLiteral);
  EXPECT_EQ(Forward(toy.batch, toy.params, toy.config).loss.contrastive, 0.0);
}

TEST(Forward, NonFiniteActivationNamesTheHead) {
  auto toy = oracle::MakeToy(5, 4, 8, 64, ContrastiveVariant::kLiteral);
  toy.params.len_b.data[0] = std::numeric_limits<double>::infinity();
  try {
    Forward(toy.batch, toy.params, toy.config);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("length"), std::string::npos) << e.what();
  }
}

TEST(Forward, PermutingBatchPermutesOutputs) {
  const auto toy = oracle::MakeToy(6, 6, 8, 64, ContrastiveVariant::kLiteral);
  const ForwardResult a = Forward(toy.batch, toy.params, toy.config);
  Batch rev(toy.batch.rbegin(), toy.batch.rend());
  const ForwardResult b = Forward(rev, toy.params, toy.config);
  const std::size_t n = toy.batch.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(a.logits[i][k], b.logits[n - 1 - i][k]);
  }
  EXPECT_NEAR(a.loss.ce, b.loss.ce, 1e-12);
  EXPECT_NEAR(a.loss.contrastive, b.loss.contrastive, 1e-12);
  EXPECT_NEAR(a.loss.total, b.loss.total, 1e-12);
}

TEST(Contrastive, LiteralFormulaOracle) {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor proj = RandomProjections(g, 4, 4);
    std::vector<Label> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(LabelFromIndex(static_cast<int>(g() % 2)));
    for (double t : {0.5, 1.0, 2.0}) {
      EXPECT_NEAR(ContrastiveLoss(proj, labels, t, ContrastiveVariant::kLiteral),
                  oracle::ContrastiveLiteral(Rows(proj), labels, t), 1e-10);
      EXPECT_NEAR(ContrastiveLoss(proj, labels, t, ContrastiveVariant::kInfoNce),
                  oracle::ContrastiveInfoNce(Rows(proj), labels, t), 1e-10);
    }
  }
}

TEST(Contrastive, IdenticalPairByHand) {
  Tensor proj(2, 2);
  proj.at(0, 0) = proj.at(1, 0) = 3.0;
  const std::vector<Label> labels = {Label::kNeutral, Label::kNeutral};
  // S is all ones; each row keeps only exp(0) from the two zeroed entries.
  const double e = std::exp(1.0);
  EXPECT_NEAR(ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral),
              -std::log(e / (e + 2.0)), 1e-15);
  EXPECT_NEAR(ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kInfoNce), 0.0, 1e-15);
}

TEST(Contrastive, NoPositivePairsGivesZero) {
  std::mt19937_64 g(11);
  const Tensor proj = RandomProjections(g, 3, 4);
  const std::vector<Label> labels = {Label::kEntailment, Label::kNeutral, Label::kContradiction};
  EXPECT_EQ(ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral), 0.0);
  EXPECT_THROW(ContrastiveLoss(proj, labels, 0.0, ContrastiveVariant::kLiteral), ValidationError);
}

TEST(Contrastive, RowScalingInvariance) {
  std::mt19937_64 g(12);
  const std::vector<Label> labels = {Label::kEntailment, Label::kEntailment, Label::kNeutral,
                                     Label::kNeutral, Label::kEntailment};
  for (int trial = 0; trial < 10; ++trial) {
    Tensor proj = RandomProjections(g, 5, 6);
    const double base = ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral);
    const int row = static_cast<int>(g() % 5);
    for (double& v : proj.row(row)) v *= 17.5;
    EXPECT_NEAR(ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral), base, 1e-9);
  }
}

TEST(Contrastive, TemperatureScalesSimilarities) {
  std::mt19937_64 g(13);
  const Tensor proj = RandomProjections(g, 4, 4);
  const std::vector<Label> labels = {Label::kEntailment, Label::kEntailment, Label::kNeutral,
                                     Label::kNeutral};
  // The oracle divides the raw cosine matrix by T before the formula.
  const auto rows = Rows(proj);
  EXPECT_NEAR(ContrastiveLoss(proj, labels, 2.0, ContrastiveVariant::kLiteral),
              oracle::ContrastiveLiteral(rows, labels, 2.0), 1e-12);
  EXPECT_NE(ContrastiveLoss(proj, labels, 2.0, ContrastiveVariant::kLiteral),
            ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral));
}

TEST(Contrastive, ZeroProjectionRowHasZeroGradient) {
  std::mt19937_64 g(14);
  Tensor proj = RandomProjections(g, 4, 4);
  for (double& v : proj.row(1)) v = 0.0;
  const std::vector<Label> labels = {Label::kEntailment, Label::kEntailment, Label::kNeutral,
                                     Label::kNeutral};
  Tensor grad;
  double gt = 0;
  const double l = ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral, &grad, &gt);
  EXPECT_TRUE(std::isfinite(l));
  for (double v : grad.row(1)) EXPECT_EQ(v, 0.0);
}

class GradientCheck : public ::testing::TestWithParam<ContrastiveVariant> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto toy = oracle::MakeToy(100 + seed, 4, 8, 64, GetParam());
    const auto r = oracle::CheckGradients(toy);
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed << " worst " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientCheck,
                         ::testing::Values(ContrastiveVariant::kLiteral,
                                           ContrastiveVariant::kInfoNce),
                         [](const auto& info) {
                           return std::string(ContrastiveVariantName(info.param));
                         });

TEST(Backward, FixedTemperatureGetsNoGradient) {
  auto toy = oracle::MakeToy(7, 4, 8, 64, ContrastiveVariant::kLiteral);
  toy.config.learn_temperature = false;
  EXPECT_EQ(Backward(toy.batch, toy.params, toy.config).grads.temperature.data[0], 0.0);
}

TEST(Backward, ClassifierBiasGradientIsSoftmaxMinusOneHot) {
  auto toy = oracle::MakeToy(8, 5, 8, 64, ContrastiveVariant::kLiteral);
  toy.config.lambda_len = toy.config.lambda_ov = toy.config.lambda_con = 0;
  const auto g = Backward(toy.batch, toy.params, toy.config);
  const auto f = Forward(toy.batch, toy.params, toy.config);
  for (int k = 0; k < 3; ++k) {
    double want = 0;
    for (std::size_t i = 0; i < toy.batch.size(); ++i) {
      want += Softmax(f.logits[i])[k] - (LabelIndex(toy.batch[i].gold) == k ? 1.0 : 0.0);
    }
    EXPECT_NEAR(g.grads.cls_b.data[k], want / toy.batch.size(), 1e-14);
  }
}

TEST(Backward, GradientVanishesAtPerfectLogits) {
  auto toy = oracle::MakeToy(9, 4, 8, 64, ContrastiveVariant::kLiteral);
  toy.config.lambda_len = toy.config.lambda_ov = toy.config.lambda_con = 0;
  double prev = 1e300;
  for (double scale : {1.0, 10.0, 40.0}) {
    ModelParams p = ModelParams::Zeros(64, 8);
    // Every example is neutral and only cls_b carries signal.
    auto batch = toy.batch;
    for (auto& item : batch) item.gold = Label::kNeutral;
    p.cls_b.data[1] = scale;
    p.temperature.data[0] = 1.0;
    const auto g = Backward(batch, p, toy.config);
    double norm = 0;
    for (const Tensor* t : std::as_const(g.grads).Tensors()) {
      for (double v : t->data) norm += v * v;
    }
    EXPECT_LT(std::sqrt(norm), prev);
    prev = std::sqrt(norm);
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(Predict, UniformWhenClassifierIsZero) {
  ModelConfig c;
  c.hidden = 8;
  c.vocab = 64;
  ModelParams p = InitParams(c, 1);
  for (double& v : p.cls_w.data) v = 0;
  const auto preds = Predict(p, {{"a", "x y", "z", Label::kNeutral}, {"b", "q", "r s t", Label::kEntailment}}, c);
  for (const auto& pr : preds) {
    for (double v : pr.probs) EXPECT_DOUBLE_EQ(v, 1.0 / 3);
    EXPECT_EQ(pr.predicted, Label::kEntailment);
  }
}

TEST(Predict, ProbabilitiesSumToOne) {
  std::mt19937_64 g(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto toy = oracle::MakeToy(g(), 4, 8, 64, ContrastiveVariant::kLiteral);
    for (const auto& item : toy.batch) {
      const auto p = PredictProbs(item, toy.params);
      EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-9);
    }
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.hidden = 7;
  EXPECT_THROW(c.Validate(), ValidationError);
  c = {};
  c.temperature = 0;
  EXPECT_THROW(c.Validate(), ValidationError);
  c = {};
  c.lambda_con = -1;
  EXPECT_THROW(c.Validate(), ValidationError);
  EXPECT_THROW(ParseContrastiveVariant("cosine"), ValidationError);
}

}  // namespace
}  // namespace nliart
