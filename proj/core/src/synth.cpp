#include "nliart/synth.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include <fmt/format.h>

#include "json.hpp"
#include "nliart/random.hpp"

namespace nliart {
namespace {

// Phrase bank. Every premise describes someone doing an outdoor activity.
// The hypothesis carries exactly one content word that decides the label:
// a consequence of the scene (entailment), something the scene rules out
// (contradiction) or an unverifiable attribute (neutral).
// Cue words never overlap with content words or with each other.

struct Synonym {
  const char* canonical;
  const char* paraphrase;
};

const std::vector<Synonym> kNouns = {
    {"man", "guy"},         {"woman", "lady"},       {"boy", "youngster"},
    {"girl", "lass"},       {"worker", "laborer"},   {"student", "pupil"},
    {"dancer", "performer"}, {"farmer", "grower"},   {"tourist", "visitor"},
    {"teenager", "adolescent"}, {"musician", "player"}, {"painter", "artist"}};

const std::vector<Synonym> kVerbs = {
    {"walking", "strolling"}, {"running", "sprinting"}, {"jogging", "trotting"},
    {"climbing", "scaling"},  {"dancing", "twirling"},  {"skating", "gliding"},
    {"cycling", "biking"},    {"hiking", "trekking"},   {"marching", "parading"},
    {"skipping", "hopping"}};

const std::vector<Synonym> kPlaces = {
    {"park", "grounds"},  {"street", "road"},   {"field", "meadow"},
    {"plaza", "square"},  {"garden", "yard"},   {"beach", "shore"},
    {"market", "bazaar"}, {"forest", "woods"},  {"village", "hamlet"},
    {"harbor", "port"}};

// Long-premise details, only used by the length generator when the cue is on.
const std::vector<std::string> kDetails = {
    "wearing a red hat",        "near a yellow building",  "with a blue backpack",
    "beside an old fence",      "under a cloudy sky",      "holding a green umbrella",
    "next to a wooden bench",   "carrying a small bag",    "past a white van",
    "by a tall brick wall",     "wearing brown boots",     "behind a parked truck"};

// Premise endings shared by both overlap variants.
const std::vector<std::string> kTails = {"", "at noon", "this morning",
                                         "after lunch", "in spring"};

const std::vector<std::string> kFillers = {"nearby", "around", "there", "here"};

const std::array<std::vector<std::string>, kNumLabels> kContent = {{
    // entailment
    {"outdoors", "outside", "moving", "active", "awake", "exercising",
     "visible", "mobile", "upright", "energetic", "alert", "conscious",
     "breathing", "underway", "afoot", "openair"},
    // neutral
    {"famous", "wealthy", "married", "hungry", "lonely", "late", "nervous",
     "celebrating", "competing", "training", "lost", "bored", "tired",
     "happy", "sad", "retired"},
    // contradiction
    {"sleeping", "asleep", "indoors", "seated", "motionless", "napping",
     "resting", "bedridden", "absent", "lying", "frozen", "inside", "dozing",
     "unconscious", "immobile", "hospitalized"},
}};

struct Row {
  SynthGenerator generator;
  bool cued;
  Label gold;
};

// Largest-remainder split of n into parts proportional to weights.
std::vector<std::size_t> Apportion(std::size_t n, std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<std::size_t> out(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(n) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    if (weights[i] > 0.0) rema.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[rema[k % rema.size()].second];
  return out;
}

// Label quotas for one generator: one third cued, strength of the cued
// part on the indicated label, and the uncued part filling every label up
// to an even share.
void AppendRows(SynthGenerator g, std::size_t n, double strength,
                std::vector<Row>& rows) {
  if (n == 0) return;
  const int ind = LabelIndex(IndicatedLabel(g));
  const int o1 = (ind + 1) % kNumLabels;
  const int o2 = (ind + 2) % kNumLabels;

  const std::size_t cued = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 3.0));
  std::array<std::int64_t, kNumLabels> cued_counts{};
  cued_counts[ind] = std::llround(strength * static_cast<double>(cued));
  const std::int64_t rest = static_cast<std::int64_t>(cued) - cued_counts[ind];
  cued_counts[o1] = (rest + 1) / 2;
  cued_counts[o2] = rest / 2;

  const double shares[kNumLabels] = {1.0, 1.0, 1.0};
  // Remainders rotate with the generator so a split stays balanced.
  const auto even = Apportion(n, shares);
  std::array<std::size_t, kNumLabels> target{};
  for (int l = 0; l < kNumLabels; ++l) {
    target[(l + static_cast<int>(g)) % kNumLabels] = even[l];
  }
  std::array<std::int64_t, kNumLabels> uncued{};
  std::int64_t deficit = 0;
  for (int l = 0; l < kNumLabels; ++l) {
    uncued[l] = static_cast<std::int64_t>(target[l]) - cued_counts[l];
    if (uncued[l] < 0) {
      deficit += -uncued[l];
      uncued[l] = 0;
    }
  }
  while (deficit > 0) {
    auto it = std::max_element(uncued.begin(), uncued.end());
    --*it;
    --deficit;
  }
  for (int l = 0; l < kNumLabels; ++l) {
    for (std::int64_t k = 0; k < cued_counts[l]; ++k) rows.push_back({g, true, LabelFromIndex(l)});
    for (std::int64_t k = 0; k < uncued[l]; ++k) rows.push_back({g, false, LabelFromIndex(l)});
  }
}

std::string Join(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (std::string_view p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(p);
  }
  return out;
}

std::string Capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s + ".";
}

Example Render(const Row& row, Rng& rng) {
  const Synonym& noun = rng.Pick(kNouns);
  const Synonym& verb = rng.Pick(kVerbs);
  const Synonym& place = rng.Pick(kPlaces);
  const std::string& content = rng.Pick(kContent[LabelIndex(row.gold)]);
  const std::string det = "a";

  Example ex;
  ex.gold = row.gold;
  switch (row.generator) {
    case SynthGenerator::kLength: {
      // Hypothesis is always 4 tokens; the cue is a premise at least 5
      // tokens longer.
      std::string premise = Join({det, noun.canonical, "is", verb.canonical, "in the", place.canonical});
      if (row.cued) {
        const std::string& d1 = rng.Pick(kDetails);
        std::string d2 = rng.Pick(kDetails);
        while (d2 == d1) d2 = rng.Pick(kDetails);
        premise = Join({premise, d1, d2});
      }
      ex.premise = premise;
      ex.hypothesis = Join({det, noun.canonical, "is", content});
      break;
    }
    case SynthGenerator::kOverlap: {
      // Same hypothesis either way; the cue is a premise that reuses its
      // words (7 of 8 unique hypothesis tokens) instead of paraphrasing.
      const std::string& tail = rng.Pick(kTails);
      if (row.cued) {
        ex.premise = Join({det, noun.canonical, "is", verb.canonical, "in the", place.canonical, tail});
      } else {
        ex.premise = Join({det, noun.paraphrase, "is", verb.paraphrase, "across the", place.paraphrase, tail});
      }
      ex.hypothesis = Join({det, noun.canonical, verb.canonical, "in the", place.canonical, "is", content});
      break;
    }
    case SynthGenerator::kNegation: {
      const std::string& filler = rng.Pick(kFillers);
      ex.premise = Join({det, noun.canonical, "is", verb.canonical, "in the", place.canonical});
      ex.hypothesis = row.cued ? Join({det, noun.canonical, "is", content, "and not", filler})
                               : Join({det, noun.canonical, "is", content, "and", filler});
      break;
    }
  }
  ex.premise = Capitalize(ex.premise);
  ex.hypothesis = Capitalize(ex.hypothesis);
  return ex;
}

std::vector<Example> GenerateSplit(const std::string& prefix, std::size_t n,
                                   double strength,
                                   const std::array<double, kNumGenerators>& mix,
                                   std::uint64_t seed) {
  Rng rng(seed);
  const auto per_gen = Apportion(n, mix);
  std::vector<Row> rows;
  rows.reserve(n);
  for (int g = 0; g < kNumGenerators; ++g) {
    AppendRows(static_cast<SynthGenerator>(g), per_gen[g], strength, rows);
  }
  rng.Shuffle(rows);
  std::vector<Example> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Example ex = Render(rows[i], rng);
    ex.id = fmt::format("{}-{:06d}", prefix, i);
    out.push_back(std::move(ex));
  }
  return out;
}

nlohmann::ordered_json SplitJson(const SplitAudit& s) {
  nlohmann::ordered_json j;
  j["total"] = s.total;
  nlohmann::ordered_json labels;
  for (Label l : kAllLabels) labels[std::string(LabelName(l))] = s.label_counts[LabelIndex(l)];
  j["label_counts"] = labels;
  nlohmann::ordered_json corr;
  for (ArtifactKind k : kAllArtifacts) {
    const CorrelationStat& c = s.correlation[static_cast<int>(k)];
    nlohmann::ordered_json cj;
    cj["indicated_label"] = LabelName(IndicatedLabel(k));
    cj["flagged"] = c.flagged;
    cj["indicated"] = c.indicated;
    cj["rate"] = c.rate ? nlohmann::ordered_json(*c.rate) : nlohmann::ordered_json(nullptr);
    corr[std::string(ArtifactName(k))] = cj;
  }
  j["correlation"] = corr;
  return j;
}

}  // namespace

Label IndicatedLabel(SynthGenerator g) {
  return g == SynthGenerator::kNegation ? Label::kContradiction : Label::kEntailment;
}

Label IndicatedLabel(ArtifactKind kind) {
  return kind == ArtifactKind::kNegation ? Label::kContradiction : Label::kEntailment;
}

void SynthConfig::Validate() const {
  constexpr double kFloor = 1.0 / 3.0;
  if (!(bias_strength >= kFloor - 1e-9 && bias_strength <= 1.0)) {
    throw ValidationError(
        fmt::format("bias strength must be in [1/3, 1], got {}", bias_strength));
  }
  double sum = 0.0;
  for (double w : artifact_mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("artifact mix weights must be finite and >= 0");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("artifact mix weights must not all be zero");
  if (n_train == 0) throw ValidationError("n_train must be positive");
}

SynthCorpus Generate(const SynthConfig& config) {
  config.Validate();
  Rng master(config.seed);
  const std::uint64_t train_seed = master.NextU64();
  const std::uint64_t aligned_seed = master.NextU64();
  const std::uint64_t anti_seed = master.NextU64();
  const double anti_strength = (1.0 - config.bias_strength) / 2.0;

  SynthCorpus c;
  c.train = GenerateSplit("train", config.n_train, config.bias_strength,
                          config.artifact_mix, train_seed);
  c.test_aligned = GenerateSplit("aligned", config.n_test, config.bias_strength,
                                 config.artifact_mix, aligned_seed);
  c.test_anti = GenerateSplit("anti", config.n_test, anti_strength,
                              config.artifact_mix, anti_seed);
  return c;
}

SplitAudit AuditSplit(const std::string& name, const std::vector<Example>& split,
                      const ProfileOptions& options) {
  SplitAudit a;
  a.name = name;
  a.total = static_cast<std::int64_t>(split.size());
  for (const Example& ex : split) {
    ++a.label_counts[LabelIndex(ex.gold)];
    const ArtifactProfile p = Profile(ex, options);
    for (ArtifactKind k : kAllArtifacts) {
      if (!p.Flag(k)) continue;
      CorrelationStat& c = a.correlation[static_cast<int>(k)];
      ++c.flagged;
      c.indicated += ex.gold == IndicatedLabel(k) ? 1 : 0;
    }
  }
  for (CorrelationStat& c : a.correlation) {
    if (c.flagged > 0) c.rate = static_cast<double>(c.indicated) / static_cast<double>(c.flagged);
  }
  return a;
}

SynthAudit Audit(const SynthCorpus& corpus, const ProfileOptions& options) {
  SynthAudit a;
  a.splits[0] = AuditSplit("train", corpus.train, options);
  a.splits[1] = AuditSplit("test_aligned", corpus.test_aligned, options);
  a.splits[2] = AuditSplit("test_anti", corpus.test_anti, options);
  return a;
}

std::string AuditJson(const SynthAudit& audit, const SynthConfig& config) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  cfg["n_train"] = config.n_train;
  cfg["n_test"] = config.n_test;
  cfg["bias_strength"] = config.bias_strength;
  cfg["artifact_mix"] = {{"length", config.artifact_mix[0]},
                         {"overlap", config.artifact_mix[1]},
                         {"negation", config.artifact_mix[2]}};
  cfg["seed"] = config.seed;
  j["config"] = cfg;
  nlohmann::ordered_json splits;
  for (const SplitAudit& s : audit.splits) splits[s.name] = SplitJson(s);
  j["splits"] = splits;
  return j.dump(2) + "\n";
}

}  // namespace nliart
