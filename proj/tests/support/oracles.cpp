#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace nliart::oracle {
namespace {

std::vector<double> MeanRows(const Tensor& embed, const std::vector<int>& ids, int h) {
  std::vector<double> out(h, 0.0);
  if (ids.empty()) return out;
  for (int id : ids) {
    for (int k = 0; k < h; ++k) out[k] += embed.data[id * h + k];
  }
  for (int k = 0; k < h; ++k) out[k] /= static_cast<double>(ids.size());
  return out;
}

// y[j] = b[j] + sum_i x[i] * W[i][j]
std::vector<double> Linear(const std::vector<double>& x, const Tensor& w, const Tensor& b) {
  std::vector<double> y(w.cols);
  for (int j = 0; j < w.cols; ++j) {
    double s = b.data[j];
    for (int i = 0; i < w.rows; ++i) s += x[i] * w.data[i * w.cols + j];
    y[j] = s;
  }
  return y;
}

std::vector<std::vector<double>> Normalize(const std::vector<std::vector<double>>& p) {
  std::vector<std::vector<double>> out = p;
  for (auto& row : out) {
    double n = 0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    for (double& v : row) v = n > 0 ? v / n : 0.0;
  }
  return out;
}

double Contrastive(const std::vector<std::vector<double>>& proj,
                   const std::vector<Label>& labels, double t, bool literal) {
  const auto z = Normalize(proj);
  const std::size_t b = z.size();
  std::vector<std::vector<double>> s(b, std::vector<double>(b)), m(b, std::vector<double>(b));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double d = 0;
      for (std::size_t k = 0; k < z[i].size(); ++k) d += z[i][k] * z[j][k];
      s[i][j] = d / t;
      m[i][j] = (labels[i] == labels[j] && i != j) ? 1.0 : 0.0;
    }
  }
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      if (m[i][j] != 1.0) continue;
      const double pos = m[i][j] * s[i][j];
      double neg = 0;
      for (std::size_t k = 0; k < b; ++k) {
        const bool kept = m[i][k] == 0.0 && k != i;
        if (kept) {
          neg += std::exp((1.0 - m[i][k]) * s[i][k]);
        } else if (literal) {
          neg += std::exp(0.0);
        }
      }
      sum += -std::log(std::exp(pos) / (std::exp(pos) + neg));
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

const std::vector<std::string> kWords = {
    "a",    "the",   "man",   "woman", "dog",  "runs",  "sits",  "park",
    "red",  "blue",  "not",   "no",    "is",   "in",    "on",    "street",
    "big",  "small", "child", "plays", "ball", "never", "water", "near"};

std::string RandomText(std::mt19937_64& g, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  const int n = len(g);
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[word(g)];
  }
  return out + ".";
}

int Code(Label l) { return static_cast<int>(l); }

}  // namespace

ForwardOut Forward(const Batch& batch, const ModelParams& p, const ModelConfig& c) {
  const int h = p.embed.cols;
  ForwardOut out;
  const double n = static_cast<double>(batch.size());
  std::vector<Label> labels;
  for (const BatchItem& item : batch) {
    std::vector<int> all = item.premise_ids;
    all.insert(all.end(), item.hypothesis_ids.begin(), item.hypothesis_ids.end());
    const auto pooled = MeanRows(p.embed, all, h);
    const auto hyp = Linear(MeanRows(p.embed, item.hypothesis_ids, h), p.hyp_w, p.hyp_b);

    const auto logits = Linear(pooled, p.cls_w, p.cls_b);
    out.logits.push_back({logits[0], logits[1], logits[2]});
    const double mx = std::max({logits[0], logits[1], logits[2]});
    double z = 0;
    for (double v : logits) z += std::exp(v - mx);
    out.ce += -(logits[Code(item.gold)] - mx - std::log(z)) / n;

    const double lp = Linear(pooled, p.len_w, p.len_b)[0];
    const double op = Linear(pooled, p.ov_w, p.ov_b)[0];
    out.length_mse += (lp - item.length_target) * (lp - item.length_target) / n;
    out.overlap_mse += (op - item.overlap_target) * (op - item.overlap_target) / n;

    auto hidden = Linear(hyp, p.proj1_w, p.proj1_b);
    for (double& v : hidden) v = std::max(0.0, v);
    out.projections.push_back(Linear(hidden, p.proj2_w, p.proj2_b));
    labels.push_back(item.gold);
  }
  const double t = p.temperature.data[0];
  out.contrastive = c.contrastive == ContrastiveVariant::kLiteral
                        ? ContrastiveLiteral(out.projections, labels, t)
                        : ContrastiveInfoNce(out.projections, labels, t);
  out.total = out.ce + c.lambda_len * out.length_mse + c.lambda_ov * out.overlap_mse +
              c.lambda_con * out.contrastive;
  return out;
}

double ContrastiveLiteral(const std::vector<std::vector<double>>& proj,
                          const std::vector<Label>& labels, double temperature) {
  return Contrastive(proj, labels, temperature, true);
}

double ContrastiveInfoNce(const std::vector<std::vector<double>>& proj,
                          const std::vector<Label>& labels, double temperature) {
  return Contrastive(proj, labels, temperature, false);
}

Toy MakeToy(std::uint64_t seed, int batch_size, int hidden, int vocab,
            ContrastiveVariant variant) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Toy toy;
  toy.config.hidden = hidden;
  toy.config.vocab = vocab;
  toy.config.contrastive = variant;
  toy.config.learn_temperature = true;
  toy.params = ModelParams::Zeros(vocab, hidden);
  for (Tensor* t : toy.params.Tensors()) {
    for (double& v : t->data) v = u(g);
  }
  toy.params.temperature.data[0] = 1.0;
  // Two labels repeated so the batch always has positive and negative pairs.
  for (int i = 0; i < batch_size; ++i) {
    Example ex;
    ex.id = "toy-" + std::to_string(i);
    ex.premise = RandomText(g, 3, 12);
    ex.hypothesis = RandomText(g, 1, 6);
    ex.gold = LabelFromIndex(i % 2 == 0 ? 0 : static_cast<int>(g() % 2 + 1));
    toy.batch.push_back(MakeBatchItem(ex, toy.config));
  }
  return toy;
}

GradCheck CheckGradients(const Toy& toy, double eps, double floor) {
  const Gradients analytic = Backward(toy.batch, toy.params, toy.config);
  GradCheck out;
  ModelParams p = toy.params;
  auto tensors = p.Tensors();
  const auto grads = analytic.grads.Tensors();
  const auto& names = ModelParams::TensorNames();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t]->data.size(); ++i) {
      double& x = tensors[t]->data[i];
      const double saved = x;
      x = saved + eps;
      const double up = oracle::Forward(toy.batch, p, toy.config).total;
      x = saved - eps;
      const double down = oracle::Forward(toy.batch, p, toy.config).total;
      x = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = grads[t]->data[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = std::string(names[t]) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

std::vector<Triple> RandomTriples(std::uint64_t seed, int n) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Triple> out;
  for (int i = 0; i < n; ++i) {
    Triple t;
    t.example.id = "r" + std::to_string(i);
    t.example.premise = RandomText(g, 1, 30);
    // Some hypotheses are copied from the premise so subset/overlap fire.
    t.example.hypothesis = (g() % 5 == 0) ? t.example.premise : RandomText(g, 1, 16);
    t.example.gold = LabelFromIndex(static_cast<int>(g() % 3));
    Probs probs{};
    if (g() % 10 == 0) {
      probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};  // exercises the tie rule
      const double s = probs[0] + probs[1] + probs[2];
      for (double& v : probs) v /= s;
    } else {
      double s = 0;
      for (double& v : probs) s += (v = u(g) + 1e-3);
      for (double& v : probs) v /= s;
    }
    t.prediction = MakePrediction(t.example.id, probs);
    out.push_back(std::move(t));
  }
  return out;
}

Recount BruteForce(const std::vector<Triple>& triples, int length_diff_min,
                   double overlap_min) {
  static const std::set<std::string> kNeg = {
      "not", "no", "never", "nobody", "nothing", "none", "neither", "nor", "cannot",
      "can't", "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't",
      "won't", "n't"};
  Recount r;
  for (const Triple& t : triples) {
    // Independent argmax: scan for the strictly largest entry.
    int pred = 0;
    for (int k = 1; k < 3; ++k) {
      if (t.prediction.probs[k] > t.prediction.probs[pred]) pred = k;
    }
    const int gold = Code(t.example.gold);
    r.confusion[gold][pred] += 1;
    const bool ok = gold == pred;

    const TokenSeq prem = Tokenize(t.example.premise);
    const TokenSeq hyp = Tokenize(t.example.hypothesis);
    const std::set<std::string> ps(prem.begin(), prem.end());
    const std::set<std::string> hs(hyp.begin(), hyp.end());
    int shared = 0;
    for (const auto& w : hs) shared += ps.count(w) ? 1 : 0;
    const double overlap = hs.empty() ? 0.0 : static_cast<double>(shared) / hs.size();
    const int diff = static_cast<int>(prem.size()) - static_cast<int>(hyp.size());
    bool neg = false;
    for (const auto& w : hyp) neg = neg || kNeg.count(w) > 0;
    const bool flags[4] = {std::abs(diff) >= length_diff_min, overlap >= overlap_min,
                           !hs.empty() && shared == static_cast<int>(hs.size()), neg};
    for (int f = 0; f < 4; ++f) {
      if (!flags[f]) continue;
      r.bias_pop[f] += 1;
      r.bias_correct[f] += ok ? 1 : 0;
    }
    const int ad = std::abs(diff);
    const int lb = ad <= 5 ? 0 : ad <= 10 ? 1 : ad <= 15 ? 2 : 3;
    r.len_bin_pop[lb] += 1;
    r.len_bin_correct[lb] += ok ? 1 : 0;
    const int hl = static_cast<int>(hyp.size());
    const int cb = hl <= 5 ? 0 : hl <= 12 ? 1 : 2;
    r.conf_bin_pop[cb] += 1;
    r.conf_bin_sum[cb] += std::max({t.prediction.probs[0], t.prediction.probs[1],
                                    t.prediction.probs[2]});
  }
  std::int64_t total = 0, trace = 0;
  for (int g = 0; g < 3; ++g) {
    for (int p = 0; p < 3; ++p) total += r.confusion[g][p];
    trace += r.confusion[g][g];
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  for (int c = 0; c < 3; ++c) {
    std::int64_t col = 0, row = 0;
    for (int k = 0; k < 3; ++k) {
      col += r.confusion[k][c];
      row += r.confusion[c][k];
    }
    r.precision[c] = col ? static_cast<double>(r.confusion[c][c]) / col : 0.0;
    r.recall[c] = row ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.f1[c] = pr > 0 ? 2 * r.precision[c] * r.recall[c] / pr : 0.0;
    r.macro_p += r.precision[c] / 3;
    r.macro_r += r.recall[c] / 3;
    r.macro_f1 += r.f1[c] / 3;
  }
  const int cells[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  const std::int64_t errors = total - trace;
  for (int k = 0; k < 6; ++k) {
    r.transition_count[k] = r.confusion[cells[k][0]][cells[k][1]];
    if (errors > 0) {
      r.transition_pct[k] = 100.0 * static_cast<double>(r.transition_count[k]) / errors;
    }
  }
  return r;
}

std::pair<std::vector<Example>, std::vector<Prediction>> RealizeTransitions(
    const std::array<std::int64_t, 6>& counts, std::int64_t correct) {
  const int cells[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  std::vector<Example> examples;
  std::vector<Prediction> preds;
  int next = 0;
  auto add = [&](int gold, int pred) {
    Example ex;
    ex.id = "fx" + std::to_string(next++);
    ex.premise = "a person is outside";
    ex.hypothesis = "a person";
    ex.gold = LabelFromIndex(gold);
    Probs probs{0.1, 0.1, 0.1};
    probs[pred] = 0.8;
    examples.push_back(ex);
    preds.push_back(MakePrediction(ex.id, probs));
  };
  for (int k = 0; k < 6; ++k) {
    for (std::int64_t i = 0; i < counts[k]; ++i) add(cells[k][0], cells[k][1]);
  }
  for (std::int64_t i = 0; i < correct; ++i) add(static_cast<int>(i % 3), static_cast<int>(i % 3));
  return {examples, preds};
}

}  // namespace nliart::oracle
