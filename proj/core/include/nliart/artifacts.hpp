#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nliart/corpus.hpp"

namespace nliart {

// Axis order used by every per-flag array and the co-occurrence matrix.
enum class ArtifactKind : int { kLength = 0, kOverlap = 1, kSubset = 2, kNegation = 3 };

inline constexpr int kNumArtifacts = 4;
inline constexpr std::array<ArtifactKind, kNumArtifacts> kAllArtifacts = {
    ArtifactKind::kLength, ArtifactKind::kOverlap, ArtifactKind::kSubset,
    ArtifactKind::kNegation};

std::string_view ArtifactName(ArtifactKind kind);

struct Thresholds {
  int length_diff_min = 5;
  double overlap_min = 0.8;

  // Throws ValidationError when out of range.
  void Validate() const;
};

class NegationLexicon {
 public:
  // not, no, never, nobody, nothing, none, neither, nor, cannot and the
  // common n't contractions.
  static NegationLexicon Default();

  // Entries are lowercased; an empty set is rejected.
  explicit NegationLexicon(std::set<std::string> cues);

  // One cue per line; blank lines and lines starting with '#' are ignored.
  static NegationLexicon FromFile(const std::string& path);

  bool Contains(std::string_view token) const;
  const std::set<std::string, std::less<>>& cues() const { return cues_; }

 private:
  std::set<std::string, std::less<>> cues_;
};

struct ProfileOptions {
  Thresholds thresholds;
  NegationLexicon lexicon = NegationLexicon::Default();
  // Off by default: negation is a hypothesis-side cue.
  bool negation_in_premise = false;
};

struct ArtifactProfile {
  std::string id;
  int prem_len = 0;
  int hyp_len = 0;
  int length_diff = 0;  // prem_len - hyp_len
  double overlap = 0.0;
  bool is_subset = false;
  bool has_negation = false;
  bool flag_length = false;
  bool flag_overlap = false;
  bool flag_subset = false;
  bool flag_negation = false;

  bool Flag(ArtifactKind kind) const;
  bool AnyFlag() const;
};

// Fraction of unique hypothesis tokens that also occur in the premise;
// 0 for an empty hypothesis.
double OverlapScore(const TokenSeq& premise, const TokenSeq& hypothesis);

int LengthDifference(const TokenSeq& premise, const TokenSeq& hypothesis);

bool HasNegation(const TokenSeq& tokens, const NegationLexicon& lexicon);

ArtifactProfile Profile(const Example& example, const ProfileOptions& options);

std::vector<ArtifactProfile> ProfileAll(const std::vector<Example>& examples,
                                        const ProfileOptions& options);

struct PrevalenceReport {
  std::int64_t total = 0;
  std::array<std::int64_t, kNumArtifacts> flag_counts{};
  std::int64_t any_artifact_count = 0;
  double any_artifact_fraction = 0.0;

  double FlagFraction(ArtifactKind kind) const;
};

// Throws ValidationError on an empty list.
PrevalenceReport Prevalence(const std::vector<ArtifactProfile>& profiles);

struct CooccurrenceMatrix {
  std::array<std::array<std::int64_t, kNumArtifacts>, kNumArtifacts> counts{};
  std::int64_t total_examples = 0;

  std::int64_t at(ArtifactKind a, ArtifactKind b) const {
    return counts[static_cast<int>(a)][static_cast<int>(b)];
  }
};

CooccurrenceMatrix Cooccurrence(const std::vector<ArtifactProfile>& profiles);

// id,prem_len,hyp_len,length_diff,overlap,is_subset,has_negation,
// flag_length,flag_overlap,flag_subset,flag_negation
void WriteProfilesCsv(std::ostream& out,
                      const std::vector<ArtifactProfile>& profiles);

// Count matrix plus fraction-of-total columns, one row per axis pair.
void WriteCooccurrenceCsv(std::ostream& out, const CooccurrenceMatrix& m);

std::string PrevalenceJson(const PrevalenceReport& report);

}  // namespace nliart
