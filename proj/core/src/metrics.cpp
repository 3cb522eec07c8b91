#include "nliart/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include <fmt/format.h>

#include "json.hpp"

namespace nliart {
namespace {

using ProfileIndex = std::unordered_map<std::string_view, const ArtifactProfile*>;

// Maps pair ids to profiles and checks the two lists cover the same ids.
ProfileIndex IndexProfiles(const std::vector<AlignedPair>& pairs,
                           const std::vector<ArtifactProfile>& profiles) {
  ProfileIndex index;
  index.reserve(profiles.size());
  for (const ArtifactProfile& p : profiles) {
    if (!index.emplace(p.id, &p).second) {
      throw ValidationError(fmt::format("duplicate profile id '{}'", p.id));
    }
  }
  for (const AlignedPair& pair : pairs) {
    if (!index.count(pair.example->id)) {
      throw ValidationError(
          fmt::format("no artifact profile for id '{}'", pair.example->id));
    }
  }
  if (index.size() != pairs.size()) {
    throw ValidationError(fmt::format(
        "profile/prediction id mismatch: {} profiles for {} pairs",
        index.size(), pairs.size()));
  }
  return index;
}

bool IsCorrect(const AlignedPair& pair) {
  return pair.example->gold == pair.prediction->predicted;
}

void Finish(SliceAccuracy& s) {
  if (s.population > 0) {
    s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.population);
  }
}

struct Ratio {
  double value = 0.0;
  bool undefined = false;
};

Ratio SafeRatio(double num, double den) {
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

nlohmann::ordered_json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string OptionalCsv(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string();
}

}  // namespace

std::int64_t ConfusionMatrix::Total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) t += c;
  }
  return t;
}

std::int64_t ConfusionMatrix::Trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < kNumLabels; ++i) t += counts[i][i];
  return t;
}

std::int64_t ConfusionMatrix::RowSum(Label gold) const {
  std::int64_t t = 0;
  for (std::int64_t c : counts[LabelIndex(gold)]) t += c;
  return t;
}

std::int64_t ConfusionMatrix::ColSum(Label pred) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[LabelIndex(pred)];
  return t;
}

ConfusionMatrix Confusion(const std::vector<AlignedPair>& pairs) {
  if (pairs.empty()) {
    throw ValidationError("confusion matrix needs at least one pair");
  }
  ConfusionMatrix m;
  for (const AlignedPair& p : pairs) {
    ++m.counts[LabelIndex(p.example->gold)][LabelIndex(p.prediction->predicted)];
  }
  return m;
}

ClassStats ComputeClassStats(const ConfusionMatrix& m) {
  ClassStats s;
  for (Label l : kAllLabels) {
    const int c = LabelIndex(l);
    const double tp = static_cast<double>(m.counts[c][c]);
    ClassStat& cs = s.per_class[c];
    const Ratio precision = SafeRatio(tp, static_cast<double>(m.ColSum(l)));
    const Ratio recall = SafeRatio(tp, static_cast<double>(m.RowSum(l)));
    cs.precision = precision.value;
    cs.precision_undefined = precision.undefined;
    cs.recall = recall.value;
    cs.recall_undefined = recall.undefined;
    const Ratio f1 = SafeRatio(2.0 * cs.precision * cs.recall,
                               cs.precision + cs.recall);
    cs.f1 = f1.value;
    cs.f1_undefined = f1.undefined;
    s.macro_precision += cs.precision;
    s.macro_recall += cs.recall;
    s.macro_f1 += cs.f1;
  }
  s.macro_precision /= kNumLabels;
  s.macro_recall /= kNumLabels;
  s.macro_f1 /= kNumLabels;
  s.accuracy = SafeRatio(static_cast<double>(m.Trace()),
                         static_cast<double>(m.Total()))
                   .value;
  return s;
}

std::array<Transition, 6> ErrorTransitions(const ConfusionMatrix& m) {
  std::array<Transition, 6> out{};
  std::int64_t errors = 0;
  int k = 0;
  for (Label gold : kAllLabels) {
    for (Label pred : kAllLabels) {
      if (gold == pred) continue;
      out[k].gold = gold;
      out[k].predicted = pred;
      out[k].count = m.at(gold, pred);
      errors += out[k].count;
      ++k;
    }
  }
  if (errors > 0) {
    for (Transition& t : out) {
      t.percent = 100.0 * static_cast<double>(t.count) / static_cast<double>(errors);
    }
  }
  return out;
}

std::array<Transition, 6> ErrorTransitions(const std::vector<AlignedPair>& pairs) {
  ConfusionMatrix m;
  for (const AlignedPair& p : pairs) {
    ++m.counts[LabelIndex(p.example->gold)][LabelIndex(p.prediction->predicted)];
  }
  return ErrorTransitions(m);
}

std::array<SliceAccuracy, kNumArtifacts> BiasSlicedAccuracy(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles) {
  const ProfileIndex index = IndexProfiles(pairs, profiles);
  std::array<SliceAccuracy, kNumArtifacts> out{};
  for (const AlignedPair& pair : pairs) {
    const ArtifactProfile& prof = *index.at(pair.example->id);
    const bool ok = IsCorrect(pair);
    for (ArtifactKind k : kAllArtifacts) {
      if (!prof.Flag(k)) continue;
      SliceAccuracy& s = out[static_cast<int>(k)];
      ++s.population;
      s.correct += ok ? 1 : 0;
    }
  }
  for (SliceAccuracy& s : out) Finish(s);
  return out;
}

int LengthBinIndex(int length_diff) {
  const int d = std::abs(length_diff);
  if (d <= 5) return 0;
  if (d <= 10) return 1;
  if (d <= 15) return 2;
  return 3;
}

std::string LengthBinName(int bin) {
  static constexpr std::array<std::string_view, kNumLengthBins> kNames = {
      "0-5", "6-10", "11-15", "16+"};
  return std::string(kNames.at(static_cast<std::size_t>(bin)));
}

std::array<SliceAccuracy, kNumLengthBins> LengthBinAccuracy(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles) {
  const ProfileIndex index = IndexProfiles(pairs, profiles);
  std::array<SliceAccuracy, kNumLengthBins> out{};
  for (const AlignedPair& pair : pairs) {
    const ArtifactProfile& prof = *index.at(pair.example->id);
    SliceAccuracy& s = out[LengthBinIndex(prof.length_diff)];
    ++s.population;
    s.correct += IsCorrect(pair) ? 1 : 0;
  }
  for (SliceAccuracy& s : out) Finish(s);
  return out;
}

int ConfidenceBinIndex(int hyp_len) {
  if (hyp_len <= 5) return 0;
  if (hyp_len <= 12) return 1;
  return 2;
}

std::string ConfidenceBinName(int bin) {
  static constexpr std::array<std::string_view, kNumConfidenceBins> kNames = {
      "short", "medium", "long"};
  return std::string(kNames.at(static_cast<std::size_t>(bin)));
}

std::array<ConfidenceBin, kNumConfidenceBins> ConfidenceProfile(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles) {
  const ProfileIndex index = IndexProfiles(pairs, profiles);
  std::array<std::vector<double>, kNumConfidenceBins> values;
  for (const AlignedPair& pair : pairs) {
    const ArtifactProfile& prof = *index.at(pair.example->id);
    values[ConfidenceBinIndex(prof.hyp_len)].push_back(
        pair.prediction->Confidence());
  }
  std::array<ConfidenceBin, kNumConfidenceBins> out{};
  for (int b = 0; b < kNumConfidenceBins; ++b) {
    auto& v = values[b];
    out[b].population = static_cast<std::int64_t>(v.size());
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    out[b].mean_confidence = sum / static_cast<double>(v.size());
  }
  return out;
}

EvalReport Evaluate(const std::vector<AlignedPair>& pairs,
                    const std::vector<ArtifactProfile>& profiles) {
  EvalReport r;
  r.confusion = Confusion(pairs);
  r.total = r.confusion.Total();
  r.stats = ComputeClassStats(r.confusion);
  r.transitions = ErrorTransitions(r.confusion);
  r.total_errors = r.total - r.confusion.Trace();
  r.bias_accuracy = BiasSlicedAccuracy(pairs, profiles);
  r.length_bins = LengthBinAccuracy(pairs, profiles);
  r.confidence = ConfidenceProfile(pairs, profiles);
  return r;
}

std::string ReportJson(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["total"] = r.total;
  j["accuracy"] = r.stats.accuracy;
  j["macro_precision"] = r.stats.macro_precision;
  j["macro_recall"] = r.stats.macro_recall;
  j["macro_f1"] = r.stats.macro_f1;

  ordered_json confusion = ordered_json::array();
  for (const auto& row : r.confusion.counts) confusion.push_back(row);
  j["confusion"] = confusion;

  ordered_json per_class;
  for (Label l : kAllLabels) {
    const ClassStat& cs = r.stats.per_class[LabelIndex(l)];
    ordered_json c;
    c["precision"] = cs.precision;
    c["recall"] = cs.recall;
    c["f1"] = cs.f1;
    c["precision_undefined"] = cs.precision_undefined;
    c["recall_undefined"] = cs.recall_undefined;
    c["f1_undefined"] = cs.f1_undefined;
    per_class[std::string(LabelName(l))] = c;
  }
  j["per_class"] = per_class;

  j["total_errors"] = r.total_errors;
  ordered_json transitions = ordered_json::array();
  for (const Transition& t : r.transitions) {
    ordered_json tj;
    tj["gold"] = LabelName(t.gold);
    tj["predicted"] = LabelName(t.predicted);
    tj["count"] = t.count;
    tj["percent_of_errors"] = OptionalJson(t.percent);
    transitions.push_back(tj);
  }
  j["transitions"] = transitions;

  ordered_json bias;
  for (ArtifactKind k : kAllArtifacts) {
    const SliceAccuracy& s = r.bias_accuracy[static_cast<int>(k)];
    ordered_json sj;
    sj["population"] = s.population;
    sj["correct"] = s.correct;
    sj["accuracy"] = OptionalJson(s.accuracy);
    bias[std::string(ArtifactName(k))] = sj;
  }
  j["bias_accuracy"] = bias;

  ordered_json bins = ordered_json::array();
  for (int b = 0; b < kNumLengthBins; ++b) {
    const SliceAccuracy& s = r.length_bins[b];
    ordered_json bj;
    bj["bin"] = LengthBinName(b);
    bj["population"] = s.population;
    bj["correct"] = s.correct;
    bj["accuracy"] = OptionalJson(s.accuracy);
    bins.push_back(bj);
  }
  j["length_bin_accuracy"] = bins;

  ordered_json conf = ordered_json::array();
  for (int b = 0; b < kNumConfidenceBins; ++b) {
    ordered_json cj;
    cj["bin"] = ConfidenceBinName(b);
    cj["population"] = r.confidence[b].population;
    cj["mean_confidence"] = OptionalJson(r.confidence[b].mean_confidence);
    conf.push_back(cj);
  }
  j["confidence_profile"] = conf;
  return j.dump(2) + "\n";
}

void WriteConfusionCsv(std::ostream& out, const ConfusionMatrix& m) {
  out << "gold,entailment,neutral,contradiction\n";
  for (Label g : kAllLabels) {
    out << fmt::format("{},{},{},{}\n", LabelName(g),
                       m.at(g, Label::kEntailment), m.at(g, Label::kNeutral),
                       m.at(g, Label::kContradiction));
  }
}

void WriteTransitionsCsv(std::ostream& out, const EvalReport& report) {
  out << "gold,predicted,count,percent_of_errors\n";
  for (const Transition& t : report.transitions) {
    out << fmt::format("{},{},{},{}\n", LabelName(t.gold),
                       LabelName(t.predicted), t.count,
                       OptionalCsv(t.percent));
  }
}

void WriteBiasSlicesCsv(std::ostream& out, const EvalReport& report) {
  out << "artifact,population,correct,accuracy\n";
  for (ArtifactKind k : kAllArtifacts) {
    const SliceAccuracy& s = report.bias_accuracy[static_cast<int>(k)];
    out << fmt::format("{},{},{},{}\n", ArtifactName(k), s.population,
                       s.correct, OptionalCsv(s.accuracy));
  }
}

void WriteBinsCsv(std::ostream& out, const EvalReport& report) {
  out << "kind,bin,population,value\n";
  for (int b = 0; b < kNumLengthBins; ++b) {
    const SliceAccuracy& s = report.length_bins[b];
    out << fmt::format("length_diff_accuracy,{},{},{}\n", LengthBinName(b),
                       s.population, OptionalCsv(s.accuracy));
  }
  for (int b = 0; b < kNumConfidenceBins; ++b) {
    const ConfidenceBin& c = report.confidence[b];
    out << fmt::format("hypothesis_length_confidence,{},{},{}\n",
                       ConfidenceBinName(b), c.population,
                       OptionalCsv(c.mean_confidence));
  }
}

}  // namespace nliart
