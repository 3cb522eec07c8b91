#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nliart {

// Raised for malformed input records and contract violations on user data.
// The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a file cannot be opened/read. Exit code 2 in the CLI.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stable integer codes are used for vector indexing everywhere.
enum class Label : int { kEntailment = 0, kNeutral = 1, kContradiction = 2 };

inline constexpr int kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {
    Label::kEntailment, Label::kNeutral, Label::kContradiction};

constexpr int LabelIndex(Label l) { return static_cast<int>(l); }
constexpr Label LabelFromIndex(int i) { return static_cast<Label>(i); }

// Lowercase corpus spelling: "entailment", "neutral", "contradiction".
std::string_view LabelName(Label l);
std::optional<Label> ParseLabel(std::string_view name);

struct Example {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label gold = Label::kEntailment;

  bool operator==(const Example&) const = default;
};

using TokenSeq = std::vector<std::string>;

// Lowercases ASCII, deletes the characters .,!?;:"()[] , splits on
// whitespace, then trims leading/trailing apostrophes from each fragment.
// Internal apostrophes survive ("don't"). Empty fragments are dropped.
TokenSeq Tokenize(std::string_view text);

using Probs = std::array<double, kNumLabels>;

struct Prediction {
  std::string id;
  Label predicted = Label::kEntailment;
  Probs probs{};

  // max(probs)
  double Confidence() const;
};

// First maximal entry wins, so ties go to the lowest label code.
Label ArgmaxLabel(const Probs& probs);

struct LoadReport {
  std::size_t lines_read = 0;
  std::size_t skipped_unlabeled = 0;
  std::size_t skipped_blank = 0;
};

struct LoadedExamples {
  std::vector<Example> examples;
  LoadReport report;
};

// One JSON object per line: premise, hypothesis, label, optional id.
// Records labelled "-" are skipped and counted; a missing id becomes the
// zero-based line index. Blank lines are ignored.
LoadedExamples LoadExamples(std::istream& in);
LoadedExamples LoadExamplesFile(const std::string& path);

void WriteExamples(std::ostream& out, const std::vector<Example>& examples);
void WriteExamplesFile(const std::string& path,
                       const std::vector<Example>& examples);

// One JSON object per line: id, probs (3 numbers summing to 1 within 1e-6).
std::vector<Prediction> LoadPredictions(std::istream& in);
std::vector<Prediction> LoadPredictionsFile(const std::string& path);

// Doubles are written in shortest round-trip form, so loading the output
// reproduces the probabilities bit for bit.
void WritePredictions(std::ostream& out,
                      const std::vector<Prediction>& predictions);

// Checks the probability invariants and derives `predicted`.
Prediction MakePrediction(std::string id, const Probs& probs);

struct AlignedPair {
  const Example* example = nullptr;
  const Prediction* prediction = nullptr;
};

// Joins predictions onto examples by id, in example order. The returned
// pairs point into the two input vectors.
std::vector<AlignedPair> Align(const std::vector<Example>& examples,
                               const std::vector<Prediction>& predictions);

}  // namespace nliart
