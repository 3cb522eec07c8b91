#include "nliart/artifacts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "csv.hpp"
#include "json.hpp"

namespace nliart {

std::string_view ArtifactName(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::kLength:
      return "length";
    case ArtifactKind::kOverlap:
      return "overlap";
    case ArtifactKind::kSubset:
      return "subset";
    case ArtifactKind::kNegation:
      return "negation";
  }
  return "?";
}

void Thresholds::Validate() const {
  if (length_diff_min < 0) {
    throw ValidationError(
        fmt::format("length_diff_min must be >= 0, got {}", length_diff_min));
  }
  if (!(overlap_min >= 0.0 && overlap_min <= 1.0)) {
    throw ValidationError(
        fmt::format("overlap_min must be in [0,1], got {}", overlap_min));
  }
}

NegationLexicon NegationLexicon::Default() {
  return NegationLexicon({"not", "no", "never", "nobody", "nothing", "none",
                          "neither", "nor", "cannot", "can't", "don't",
                          "doesn't", "didn't", "isn't", "aren't", "wasn't",
                          "weren't", "won't", "n't"});
}

NegationLexicon::NegationLexicon(std::set<std::string> cues) {
  for (std::string cue : cues) {
    std::transform(cue.begin(), cue.end(), cue.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (!cue.empty()) cues_.insert(std::move(cue));
  }
  if (cues_.empty()) throw ValidationError("negation lexicon is empty");
}

NegationLexicon NegationLexicon::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open lexicon '{}'", path));
  std::set<std::string> cues;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    cues.insert(line.substr(b, e - b + 1));
  }
  return NegationLexicon(std::move(cues));
}

bool NegationLexicon::Contains(std::string_view token) const {
  return cues_.find(token) != cues_.end();
}

bool ArtifactProfile::Flag(ArtifactKind kind) const {
  switch (kind) {
    case ArtifactKind::kLength:
      return flag_length;
    case ArtifactKind::kOverlap:
      return flag_overlap;
    case ArtifactKind::kSubset:
      return flag_subset;
    case ArtifactKind::kNegation:
      return flag_negation;
  }
  return false;
}

bool ArtifactProfile::AnyFlag() const {
  return flag_length || flag_overlap || flag_subset || flag_negation;
}

double OverlapScore(const TokenSeq& premise, const TokenSeq& hypothesis) {
  std::unordered_set<std::string_view> hyp(hypothesis.begin(),
                                           hypothesis.end());
  if (hyp.empty()) return 0.0;
  std::unordered_set<std::string_view> prem(premise.begin(), premise.end());
  std::size_t shared = 0;
  for (std::string_view t : hyp) shared += prem.count(t);
  return static_cast<double>(shared) / static_cast<double>(hyp.size());
}

int LengthDifference(const TokenSeq& premise, const TokenSeq& hypothesis) {
  return static_cast<int>(premise.size()) - static_cast<int>(hypothesis.size());
}

bool HasNegation(const TokenSeq& tokens, const NegationLexicon& lexicon) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return lexicon.Contains(t); });
}

ArtifactProfile Profile(const Example& example, const ProfileOptions& options) {
  const TokenSeq prem = Tokenize(example.premise);
  const TokenSeq hyp = Tokenize(example.hypothesis);

  ArtifactProfile p;
  p.id = example.id;
  p.prem_len = static_cast<int>(prem.size());
  p.hyp_len = static_cast<int>(hyp.size());
  p.length_diff = LengthDifference(prem, hyp);
  p.overlap = OverlapScore(prem, hyp);
  p.is_subset = p.hyp_len > 0 && p.overlap == 1.0;
  p.has_negation = HasNegation(hyp, options.lexicon) ||
                   (options.negation_in_premise &&
                    HasNegation(prem, options.lexicon));

  p.flag_length = std::abs(p.length_diff) >= options.thresholds.length_diff_min;
  p.flag_overlap = p.overlap >= options.thresholds.overlap_min;
  p.flag_subset = p.is_subset;
  p.flag_negation = p.has_negation;
  return p;
}

std::vector<ArtifactProfile> ProfileAll(const std::vector<Example>& examples,
                                        const ProfileOptions& options) {
  std::vector<ArtifactProfile> out;
  out.reserve(examples.size());
  for (const Example& ex : examples) out.push_back(Profile(ex, options));
  return out;
}

double PrevalenceReport::FlagFraction(ArtifactKind kind) const {
  if (total == 0) return 0.0;
  return static_cast<double>(flag_counts[static_cast<int>(kind)]) /
         static_cast<double>(total);
}

PrevalenceReport Prevalence(const std::vector<ArtifactProfile>& profiles) {
  if (profiles.empty()) {
    throw ValidationError("prevalence needs at least one profile");
  }
  PrevalenceReport r;
  r.total = static_cast<std::int64_t>(profiles.size());
  for (const ArtifactProfile& p : profiles) {
    for (ArtifactKind k : kAllArtifacts) {
      r.flag_counts[static_cast<int>(k)] += p.Flag(k) ? 1 : 0;
    }
    r.any_artifact_count += p.AnyFlag() ? 1 : 0;
  }
  r.any_artifact_fraction =
      static_cast<double>(r.any_artifact_count) / static_cast<double>(r.total);
  return r;
}

CooccurrenceMatrix Cooccurrence(const std::vector<ArtifactProfile>& profiles) {
  CooccurrenceMatrix m;
  m.total_examples = static_cast<std::int64_t>(profiles.size());
  for (const ArtifactProfile& p : profiles) {
    std::array<bool, kNumArtifacts> f{};
    for (ArtifactKind k : kAllArtifacts) f[static_cast<int>(k)] = p.Flag(k);
    for (int i = 0; i < kNumArtifacts; ++i) {
      if (!f[i]) continue;
      for (int j = 0; j < kNumArtifacts; ++j) {
        if (f[j]) ++m.counts[i][j];
      }
    }
  }
  return m;
}

void WriteProfilesCsv(std::ostream& out,
                      const std::vector<ArtifactProfile>& profiles) {
  out << "id,prem_len,hyp_len,length_diff,overlap,is_subset,has_negation,"
         "flag_length,flag_overlap,flag_subset,flag_negation\n";
  for (const ArtifactProfile& p : profiles) {
    out << fmt::format("{},{},{},{},{:.4f},{:d},{:d},{:d},{:d},{:d},{:d}\n",
                       internal::CsvField(p.id), p.prem_len, p.hyp_len, p.length_diff, p.overlap,
                       static_cast<int>(p.is_subset),
                       static_cast<int>(p.has_negation),
                       static_cast<int>(p.flag_length),
                       static_cast<int>(p.flag_overlap),
                       static_cast<int>(p.flag_subset),
                       static_cast<int>(p.flag_negation));
  }
}

void WriteCooccurrenceCsv(std::ostream& out, const CooccurrenceMatrix& m) {
  out << "artifact_a,artifact_b,count,fraction_of_total\n";
  for (ArtifactKind a : kAllArtifacts) {
    for (ArtifactKind b : kAllArtifacts) {
      const std::int64_t c = m.at(a, b);
      const double frac =
          m.total_examples == 0
              ? 0.0
              : static_cast<double>(c) / static_cast<double>(m.total_examples);
      out << fmt::format("{},{},{},{:.4f}\n", ArtifactName(a), ArtifactName(b),
                         c, frac);
    }
  }
}

std::string PrevalenceJson(const PrevalenceReport& report) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  nlohmann::ordered_json flags;
  for (ArtifactKind k : kAllArtifacts) {
    nlohmann::ordered_json f;
    f["count"] = report.flag_counts[static_cast<int>(k)];
    f["fraction"] = report.FlagFraction(k);
    flags[std::string(ArtifactName(k))] = f;
  }
  j["flags"] = flags;
  j["any_artifact_count"] = report.any_artifact_count;
  j["any_artifact_fraction"] = report.any_artifact_fraction;
  return j.dump(2) + "\n";
}

}  // namespace nliart
