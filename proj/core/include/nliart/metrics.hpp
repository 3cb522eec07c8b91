#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nliart/artifacts.hpp"
#include "nliart/corpus.hpp"

namespace nliart {

// Rows are gold labels, columns are predicted labels.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumLabels>, kNumLabels> counts{};

  std::int64_t at(Label gold, Label pred) const {
    return counts[LabelIndex(gold)][LabelIndex(pred)];
  }
  std::int64_t Total() const;
  std::int64_t Trace() const;
  std::int64_t RowSum(Label gold) const;
  std::int64_t ColSum(Label pred) const;
};

// Throws ValidationError on empty input.
ConfusionMatrix Confusion(const std::vector<AlignedPair>& pairs);

struct ClassStat {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding denominator was zero and the value was
  // reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct ClassStats {
  std::array<ClassStat, kNumLabels> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

ClassStats ComputeClassStats(const ConfusionMatrix& m);

struct Transition {
  Label gold = Label::kEntailment;
  Label predicted = Label::kEntailment;
  std::int64_t count = 0;
  // Share of all errors, in percent. Absent when there are no errors.
  std::optional<double> percent;
};

// The six gold != predicted cells in row-major order: E->N, E->C, N->E,
// N->C, C->E, C->N.
std::array<Transition, 6> ErrorTransitions(const std::vector<AlignedPair>& pairs);
std::array<Transition, 6> ErrorTransitions(const ConfusionMatrix& m);

struct SliceAccuracy {
  std::int64_t population = 0;
  std::int64_t correct = 0;
  std::optional<double> accuracy;  // absent when population == 0
};

// The profile list must cover exactly the ids in `pairs`, in any order.
// A missing or extra id raises ValidationError.
std::array<SliceAccuracy, kNumArtifacts> BiasSlicedAccuracy(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles);

inline constexpr int kNumLengthBins = 4;
// |length_diff| in [0,5], [6,10], [11,15], [16,inf)
int LengthBinIndex(int length_diff);
std::string LengthBinName(int bin);

std::array<SliceAccuracy, kNumLengthBins> LengthBinAccuracy(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles);

inline constexpr int kNumConfidenceBins = 3;
// Hypothesis length: <= 5 short, 6..12 medium, > 12 long.
int ConfidenceBinIndex(int hyp_len);
std::string ConfidenceBinName(int bin);

struct ConfidenceBin {
  std::int64_t population = 0;
  std::optional<double> mean_confidence;
};

// Bin means are summed in sorted order, so the result does not depend on
// the order of `pairs`.
std::array<ConfidenceBin, kNumConfidenceBins> ConfidenceProfile(
    const std::vector<AlignedPair>& pairs,
    const std::vector<ArtifactProfile>& profiles);

struct EvalReport {
  std::int64_t total = 0;
  ConfusionMatrix confusion;
  ClassStats stats;
  std::array<Transition, 6> transitions{};
  std::int64_t total_errors = 0;
  std::array<SliceAccuracy, kNumArtifacts> bias_accuracy{};
  std::array<SliceAccuracy, kNumLengthBins> length_bins{};
  std::array<ConfidenceBin, kNumConfidenceBins> confidence{};
};

EvalReport Evaluate(const std::vector<AlignedPair>& pairs,
                    const std::vector<ArtifactProfile>& profiles);

// Stable key order, full double precision.
std::string ReportJson(const EvalReport& report);

void WriteConfusionCsv(std::ostream& out, const ConfusionMatrix& m);
void WriteTransitionsCsv(std::ostream& out, const EvalReport& report);
void WriteBiasSlicesCsv(std::ostream& out, const EvalReport& report);
// Length-difference bins followed by hypothesis-length confidence bins.
void WriteBinsCsv(std::ostream& out, const EvalReport& report);

}  // namespace nliart
