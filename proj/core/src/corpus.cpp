#include "nliart/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "json.hpp"

namespace nliart {
namespace {

using nlohmann::json;

constexpr std::string_view kStripped = ".,!?;:\"()[]";
constexpr double kProbSumTolerance = 1e-6;

bool IsAsciiSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

bool IsBlank(std::string_view s) {
  for (char c : s) {
    if (!IsAsciiSpace(c)) return false;
  }
  return true;
}

const std::string& RequireString(const json& obj, const char* field,
                                 std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw ValidationError(fmt::format(
        "missing or non-string field '{}' at line {}", field, line_no));
  }
  return it->get_ref<const std::string&>();
}

json ParseLine(const std::string& line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(
        fmt::format("malformed record at line {}: {}", line_no, e.what()));
  }
  if (!obj.is_object()) {
    throw ValidationError(
        fmt::format("malformed record at line {}: not a JSON object", line_no));
  }
  return obj;
}

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return in;
}

}  // namespace

std::string_view LabelName(Label l) {
  switch (l) {
    case Label::kEntailment:
      return "entailment";
    case Label::kNeutral:
      return "neutral";
    case Label::kContradiction:
      return "contradiction";
  }
  return "?";
}

std::optional<Label> ParseLabel(std::string_view name) {
  for (Label l : kAllLabels) {
    if (LabelName(l) == name) return l;
  }
  return std::nullopt;
}

TokenSeq Tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  auto flush = [&] {
    std::size_t b = current.find_first_not_of('\'');
    if (b != std::string::npos) {
      std::size_t e = current.find_last_not_of('\'');
      tokens.push_back(current.substr(b, e - b + 1));
    }
    current.clear();
  };
  for (char c : text) {
    if (IsAsciiSpace(c)) {
      flush();
    } else if (kStripped.find(c) != std::string_view::npos) {
      continue;
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

double Prediction::Confidence() const {
  return probs[LabelIndex(ArgmaxLabel(probs))];
}

Label ArgmaxLabel(const Probs& probs) {
  int best = 0;
  for (int i = 1; i < kNumLabels; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return LabelFromIndex(best);
}

Prediction MakePrediction(std::string id, const Probs& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ValidationError(fmt::format(
          "probability {} out of [0,1] for id '{}'", p, id));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw ValidationError(fmt::format(
        "probabilities for id '{}' sum to {} (expected 1)", id, sum));
  }
  Prediction p;
  p.id = std::move(id);
  p.probs = probs;
  p.predicted = ArgmaxLabel(probs);
  return p;
}

LoadedExamples LoadExamples(std::istream& in) {
  LoadedExamples out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t index = 0;
  for (; std::getline(in, line); ++index) {
    const std::size_t line_no = index + 1;
    ++out.report.lines_read;
    if (IsBlank(line)) {
      ++out.report.skipped_blank;
      continue;
    }
    const json obj = ParseLine(line, line_no);
    const std::string& label = RequireString(obj, "label", line_no);
    if (label == "-") {
      ++out.report.skipped_unlabeled;
      continue;
    }
    auto gold = ParseLabel(label);
    if (!gold) {
      throw ValidationError(
          fmt::format("unknown label '{}' at line {}", label, line_no));
    }
    Example ex;
    ex.premise = RequireString(obj, "premise", line_no);
    ex.hypothesis = RequireString(obj, "hypothesis", line_no);
    ex.gold = *gold;
    if (auto it = obj.find("id"); it != obj.end()) {
      if (!it->is_string()) {
        throw ValidationError(
            fmt::format("field 'id' must be a string at line {}", line_no));
      }
      ex.id = it->get<std::string>();
    } else {
      ex.id = std::to_string(index);
    }
    if (IsBlank(ex.premise) || IsBlank(ex.hypothesis)) {
      throw ValidationError(
          fmt::format("empty premise or hypothesis at line {}", line_no));
    }
    if (!seen.insert(ex.id).second) {
      throw ValidationError(
          fmt::format("duplicate id '{}' at line {}", ex.id, line_no));
    }
    out.examples.push_back(std::move(ex));
  }
  if (in.bad()) throw IoError("read failure while loading examples");
  return out;
}

LoadedExamples LoadExamplesFile(const std::string& path) {
  auto in = OpenOrThrow(path);
  return LoadExamples(in);
}

void WriteExamples(std::ostream& out, const std::vector<Example>& examples) {
  for (const Example& ex : examples) {
    nlohmann::ordered_json obj;
    obj["id"] = ex.id;
    obj["premise"] = ex.premise;
    obj["hypothesis"] = ex.hypothesis;
    obj["label"] = std::string(LabelName(ex.gold));
    out << obj.dump() << '\n';
  }
}

void WriteExamplesFile(const std::string& path,
                       const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  WriteExamples(out, examples);
  if (!out) throw IoError(fmt::format("write failure on '{}'", path));
}

std::vector<Prediction> LoadPredictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (IsBlank(line)) continue;
    const json obj = ParseLine(line, line_no);
    std::string id = RequireString(obj, "id", line_no);
    auto it = obj.find("probs");
    if (it == obj.end() || !it->is_array()) {
      throw ValidationError(
          fmt::format("missing 'probs' array at line {}", line_no));
    }
    if (it->size() != kNumLabels) {
      throw ValidationError(fmt::format(
          "'probs' must have {} entries, got {} at line {}", kNumLabels,
          it->size(), line_no));
    }
    Probs probs{};
    for (int i = 0; i < kNumLabels; ++i) {
      const json& v = (*it)[i];
      if (!v.is_number()) {
        throw ValidationError(
            fmt::format("non-numeric probability at line {}", line_no));
      }
      probs[i] = v.get<double>();
    }
    try {
      out.push_back(MakePrediction(std::move(id), probs));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{} at line {}", e.what(), line_no));
    }
  }
  if (in.bad()) throw IoError("read failure while loading predictions");
  return out;
}

std::vector<Prediction> LoadPredictionsFile(const std::string& path) {
  auto in = OpenOrThrow(path);
  return LoadPredictions(in);
}

void WritePredictions(std::ostream& out,
                      const std::vector<Prediction>& predictions) {
  for (const Prediction& p : predictions) {
    nlohmann::ordered_json obj;
    obj["id"] = p.id;
    obj["probs"] = json::array({p.probs[0], p.probs[1], p.probs[2]});
    out << obj.dump() << '\n';
  }
}

std::vector<AlignedPair> Align(const std::vector<Example>& examples,
                               const std::vector<Prediction>& predictions) {
  std::unordered_map<std::string_view, const Example*> by_example;
  by_example.reserve(examples.size());
  for (const Example& ex : examples) {
    if (!by_example.emplace(ex.id, &ex).second) {
      throw ValidationError(fmt::format("duplicate example id '{}'", ex.id));
    }
  }
  std::unordered_map<std::string_view, const Prediction*> by_prediction;
  by_prediction.reserve(predictions.size());
  for (const Prediction& p : predictions) {
    if (!by_example.count(p.id)) {
      throw ValidationError(
          fmt::format("prediction for unknown id '{}'", p.id));
    }
    if (!by_prediction.emplace(p.id, &p).second) {
      throw ValidationError(fmt::format("duplicate prediction id '{}'", p.id));
    }
  }

  std::vector<AlignedPair> pairs;
  pairs.reserve(examples.size());
  std::vector<std::string_view> missing;
  std::size_t missing_count = 0;
  for (const Example& ex : examples) {
    auto it = by_prediction.find(ex.id);
    if (it == by_prediction.end()) {
      if (missing.size() < 10) missing.push_back(ex.id);
      ++missing_count;
      continue;
    }
    pairs.push_back({&ex, it->second});
  }
  if (missing_count > 0) {
    throw ValidationError(fmt::format("{} example(s) have no prediction: {}{}",
                                      missing_count,
                                      fmt::join(missing, ", "),
                                      missing_count > missing.size() ? ", ..."
                                                                     : ""));
  }
  return pairs;
}

}  // namespace nliart
