#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nliart/artifacts.hpp"
#include "nliart/corpus.hpp"

namespace nliart {

// The three cue generators. Each cue points at one label:
// short hypothesis under a long premise -> entailment, hypothesis built
// from premise words -> entailment, negation word -> contradiction.
enum class SynthGenerator : int { kLength = 0, kOverlap = 1, kNegation = 2 };

inline constexpr int kNumGenerators = 3;

Label IndicatedLabel(SynthGenerator g);
// Label each artifact flag points at in audits (subset behaves like overlap).
Label IndicatedLabel(ArtifactKind kind);

struct SynthConfig {
  std::size_t n_train = 8000;
  std::size_t n_test = 2000;
  // P(gold = indicated label | cue present) in the training and aligned
  // test splits. The anti split uses (1 - bias_strength) / 2.
  double bias_strength = 0.9;
  // length, overlap, negation
  std::array<double, kNumGenerators> artifact_mix = {1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  void Validate() const;
};

struct SynthCorpus {
  std::vector<Example> train;
  std::vector<Example> test_aligned;
  std::vector<Example> test_anti;
};

// Deterministic per seed; the three splits draw from independent streams.
// Within each generator one third of the examples carry the cue and the
// label quotas are fixed so label marginals stay uniform.
SynthCorpus Generate(const SynthConfig& config);

struct CorrelationStat {
  std::int64_t flagged = 0;
  std::int64_t indicated = 0;
  std::optional<double> rate;  // indicated / flagged
};

struct SplitAudit {
  std::string name;
  std::int64_t total = 0;
  std::array<std::int64_t, kNumLabels> label_counts{};
  std::array<CorrelationStat, kNumArtifacts> correlation{};
};

struct SynthAudit {
  std::array<SplitAudit, 3> splits;  // train, test_aligned, test_anti
};

SynthAudit Audit(const SynthCorpus& corpus, const ProfileOptions& options);
SplitAudit AuditSplit(const std::string& name, const std::vector<Example>& split,
                      const ProfileOptions& options);

std::string AuditJson(const SynthAudit& audit, const SynthConfig& config);

}  // namespace nliart
