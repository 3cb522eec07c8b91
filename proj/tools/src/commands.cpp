#include "nliart/commands.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nliart/artifacts.hpp"
#include "nliart/corpus.hpp"
#include "nliart/metrics.hpp"
#include "nliart/model.hpp"
#include "nliart/synth.hpp"
#include "nliart/train.hpp"
#include "nliart/version.hpp"

namespace nliart::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Manifest {
  std::string command;
  ordered_json config = ordered_json::object();
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
};

fs::path PrepareDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory '{}'", dir));
  }
  return fs::path(dir);
}

void WriteFile(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  body(out);
  out.flush();
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

void WriteManifest(const fs::path& dir, const Manifest& m, double seconds) {
  ordered_json j;
  j["command"] = m.command;
  j["version"] = std::string(kVersion);
  j["seed"] = m.seed ? ordered_json(*m.seed) : ordered_json(nullptr);
  j["config"] = m.config;
  ordered_json inputs = ordered_json::array();
  for (const std::string& path : m.inputs) {
    inputs.push_back({{"path", path}, {"sha256", Sha256File(path)}});
  }
  j["inputs"] = inputs;
  j["duration_seconds"] = seconds;
  WriteFile(dir / "manifest.json", [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

struct ThresholdFlags {
  Thresholds thresholds;
  std::string lexicon;
  bool negation_in_premise = false;

  void Attach(CLI::App* app) {
    app->add_option("--length-diff-min", thresholds.length_diff_min,
                    "minimum premise-hypothesis token difference for the length flag")
        ->capture_default_str();
    app->add_option("--overlap-min", thresholds.overlap_min,
                    "minimum overlap score for the overlap flag")
        ->capture_default_str();
    app->add_option("--lexicon", lexicon, "negation cue file, one cue per line");
    app->add_flag("--negation-in-premise", negation_in_premise,
                  "also look for negation cues in the premise");
  }

  ProfileOptions Resolve() const {
    thresholds.Validate();
    ProfileOptions o;
    o.thresholds = thresholds;
    if (!lexicon.empty()) o.lexicon = NegationLexicon::FromFile(lexicon);
    o.negation_in_premise = negation_in_premise;
    return o;
  }

  ordered_json Json() const {
    ordered_json j;
    j["length_diff_min"] = thresholds.length_diff_min;
    j["overlap_min"] = thresholds.overlap_min;
    j["lexicon"] = lexicon.empty() ? ordered_json("default") : ordered_json(lexicon);
    j["negation_in_premise"] = negation_in_premise;
    return j;
  }
};

std::vector<Example> LoadCorpus(const std::string& path, std::ostream& err) {
  LoadedExamples loaded = LoadExamplesFile(path);
  if (loaded.report.skipped_unlabeled > 0) {
    err << fmt::format("{}: skipped {} unlabeled records\n", path,
                       loaded.report.skipped_unlabeled);
  }
  return std::move(loaded.examples);
}

// ---- profile ----

struct ProfileCmd {
  std::string examples;
  std::string out_dir;
  ThresholdFlags flags;

  void Run(std::ostream& out, std::ostream& err, Manifest& m) {
    const ProfileOptions options = flags.Resolve();
    const auto examples_list = LoadCorpus(examples, err);
    const fs::path dir = PrepareDir(out_dir);
    const auto profiles = ProfileAll(examples_list, options);
    const PrevalenceReport prevalence = Prevalence(profiles);
    WriteFile(dir / "profiles.csv", [&](std::ostream& o) { WriteProfilesCsv(o, profiles); });
    WriteFile(dir / "prevalence.json", [&](std::ostream& o) { o << PrevalenceJson(prevalence); });
    WriteFile(dir / "cooccurrence.csv",
              [&](std::ostream& o) { WriteCooccurrenceCsv(o, Cooccurrence(profiles)); });
    m.config = flags.Json();
    m.inputs = {examples};
    if (!flags.lexicon.empty()) m.inputs.push_back(flags.lexicon);
    out << fmt::format("profiled {} examples, {:.4f} carry at least one artifact\n",
                       prevalence.total, prevalence.any_artifact_fraction);
  }
};

// ---- evaluate ----

struct EvaluateCmd {
  std::string examples;
  std::string predictions;
  std::string out_dir;
  ThresholdFlags flags;

  void Run(std::ostream& out, std::ostream& err, Manifest& m) {
    const ProfileOptions options = flags.Resolve();
    const auto examples_list = LoadCorpus(examples, err);
    const auto preds = LoadPredictionsFile(predictions);
    const auto pairs = Align(examples_list, preds);
    const fs::path dir = PrepareDir(out_dir);
    const EvalReport report = Evaluate(pairs, ProfileAll(examples_list, options));
    WriteFile(dir / "report.json", [&](std::ostream& o) { o << ReportJson(report); });
    WriteFile(dir / "confusion.csv",
              [&](std::ostream& o) { WriteConfusionCsv(o, report.confusion); });
    WriteFile(dir / "transitions.csv", [&](std::ostream& o) { WriteTransitionsCsv(o, report); });
    WriteFile(dir / "bias_slices.csv", [&](std::ostream& o) { WriteBiasSlicesCsv(o, report); });
    WriteFile(dir / "bins.csv", [&](std::ostream& o) { WriteBinsCsv(o, report); });
    m.config = flags.Json();
    m.inputs = {examples, predictions};
    if (!flags.lexicon.empty()) m.inputs.push_back(flags.lexicon);
    out << fmt::format("evaluated {} examples, accuracy {:.4f}, macro F1 {:.4f}\n",
                       report.total, report.stats.accuracy, report.stats.macro_f1);
  }
};

// ---- train ----

struct TrainCmd {
  std::string examples;
  std::string eval_examples;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch_size, hidden, vocab, accum, warmup, eval_every;
  std::optional<double> lr, weight_decay, clip, lambda_len, lambda_ov, lambda_con, temperature;
  std::optional<std::string> contrastive;
  bool learn_temperature = false;
  bool no_shuffle = false;

  void Attach(CLI::App* app) {
    app->add_option("--examples", examples, "training examples (JSONL)")
        ->required();
    app->add_option("--eval-examples", eval_examples,
                    "examples for history rows (defaults to the training set)");
    app->add_option("--config", config_path, "JSON training config; flags override it");
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--seed", seed);
    app->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
    app->add_option("--lr", lr)->check(CLI::PositiveNumber);
    app->add_option("--weight-decay", weight_decay)->check(CLI::NonNegativeNumber);
    app->add_option("--clip", clip)->check(CLI::PositiveNumber);
    app->add_option("--lambda-len", lambda_len)->check(CLI::NonNegativeNumber);
    app->add_option("--lambda-ov", lambda_ov)->check(CLI::NonNegativeNumber);
    app->add_option("--lambda-con", lambda_con)->check(CLI::NonNegativeNumber);
    app->add_option("--temperature", temperature)->check(CLI::PositiveNumber);
    app->add_option("--hidden", hidden)->check(CLI::PositiveNumber);
    app->add_option("--vocab", vocab)->check(CLI::PositiveNumber);
    app->add_option("--accum", accum)->check(CLI::PositiveNumber);
    app->add_option("--warmup", warmup)->check(CLI::NonNegativeNumber);
    app->add_option("--eval-every", eval_every)->check(CLI::PositiveNumber);
    app->add_option("--contrastive", contrastive, "literal or infonce")
        ->check(CLI::IsMember({"literal", "infonce"}));
    app->add_flag("--learn-temperature", learn_temperature);
    app->add_flag("--no-shuffle", no_shuffle);
  }

  TrainConfig Resolve() const {
    TrainConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw IoError(fmt::format("cannot open '{}'", config_path));
      std::stringstream buf;
      buf << in.rdbuf();
      c = ConfigFromJson(buf.str());
    }
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (lr) c.learning_rate = *lr;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (clip) c.clip_norm = *clip;
    if (lambda_len) c.model.lambda_len = *lambda_len;
    if (lambda_ov) c.model.lambda_ov = *lambda_ov;
    if (lambda_con) c.model.lambda_con = *lambda_con;
    if (temperature) c.model.temperature = *temperature;
    if (hidden) c.model.hidden = *hidden;
    if (vocab) c.model.vocab = *vocab;
    if (accum) c.accumulation_steps = *accum;
    if (warmup) c.warmup_steps = *warmup;
    if (eval_every) c.eval_every = *eval_every;
    if (contrastive) c.model.contrastive = ParseContrastiveVariant(*contrastive);
    if (learn_temperature) c.model.learn_temperature = true;
    if (no_shuffle) c.shuffle = false;
    c.Validate();
    return c;
  }

  void Run(std::ostream& out, std::ostream& err, Manifest& m) {
    const TrainConfig config = Resolve();
    const auto corpus = LoadCorpus(examples, err);
    std::vector<Example> eval_set;
    TrainOptions options;
    if (!eval_examples.empty()) {
      eval_set = LoadCorpus(eval_examples, err);
      options.eval_examples = &eval_set;
    }
    const fs::path dir = PrepareDir(out_dir);
    TrainResult result = Train(corpus, config, options);
    Checkpoint ckpt{config, result.steps, std::move(result.params)};
    SaveCheckpointFile((dir / "checkpoint.json").string(), ckpt);
    WriteFile(dir / "history.csv",
              [&](std::ostream& o) { WriteHistoryCsv(o, result.history); });

    m.config = ordered_json::parse(ConfigJson(config));
    m.seed = config.seed;
    m.inputs = {examples};
    if (!eval_examples.empty()) m.inputs.push_back(eval_examples);
    if (!config_path.empty()) m.inputs.push_back(config_path);
    const HistoryRow& last = result.history.back();
    out << fmt::format("trained {} steps, final total {:.6f}, eval accuracy {:.4f}\n",
                       result.steps, last.loss.total, last.eval_accuracy);
  }
};

// ---- predict ----

struct PredictCmd {
  std::string checkpoint;
  std::string examples;
  std::string out_dir;

  void Run(std::ostream& out, std::ostream& err, Manifest& m) {
    const Checkpoint ckpt = LoadCheckpointFile(checkpoint);
    const auto examples_list = LoadCorpus(examples, err);
    const fs::path dir = PrepareDir(out_dir);
    const auto preds = Predict(ckpt.params, examples_list, ckpt.config.model);
    WriteFile(dir / "predictions.jsonl", [&](std::ostream& o) { WritePredictions(o, preds); });
    m.config = ordered_json::parse(ConfigJson(ckpt.config));
    m.config["checkpoint_step"] = ckpt.step;
    m.seed = ckpt.config.seed;
    m.inputs = {checkpoint, examples};
    out << fmt::format("wrote {} predictions\n", preds.size());
  }
};

// ---- synth ----

struct SynthCmd {
  SynthConfig config;
  std::string out_dir;

  void Attach(CLI::App* app) {
    app->add_option("--n-train", config.n_train)->capture_default_str();
    app->add_option("--n-test", config.n_test)->capture_default_str();
    app->add_option("--bias", config.bias_strength,
                    "P(gold = indicated label | cue) in train and aligned test, in [1/3, 1]")
        ->capture_default_str();
    app->add_option("--mix-length", config.artifact_mix[0])->capture_default_str();
    app->add_option("--mix-overlap", config.artifact_mix[1])->capture_default_str();
    app->add_option("--mix-negation", config.artifact_mix[2])->capture_default_str();
    app->add_option("--seed", config.seed)->capture_default_str();
    app->add_option("--out", out_dir, "output directory")->required();
  }

  void Run(std::ostream& out, std::ostream&, Manifest& m) {
    config.Validate();
    const fs::path dir = PrepareDir(out_dir);
    const SynthCorpus corpus = Generate(config);
    WriteExamplesFile((dir / "train.jsonl").string(), corpus.train);
    WriteExamplesFile((dir / "test_aligned.jsonl").string(), corpus.test_aligned);
    WriteExamplesFile((dir / "test_anti.jsonl").string(), corpus.test_anti);
    const SynthAudit audit = Audit(corpus, ProfileOptions{});
    WriteFile(dir / "audit.json", [&](std::ostream& o) { o << AuditJson(audit, config); });
    m.config = ordered_json::parse(AuditJson(audit, config))["config"];
    m.seed = config.seed;
    out << fmt::format("wrote {} train, {} aligned and {} anti examples\n",
                       corpus.train.size(), corpus.test_aligned.size(),
                       corpus.test_anti.size());
  }
};

}  // namespace

std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 unavailable");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  if (in.bad()) throw IoError(fmt::format("read failure on '{}'", path));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset artifact profiling, bias-sliced evaluation and debiased training"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  ProfileCmd profile;
  auto* p = app.add_subcommand("profile", "flag artifacts in an examples file");
  p->add_option("--examples", profile.examples)->required();
  p->add_option("--out", profile.out_dir)->required();
  profile.flags.Attach(p);

  EvaluateCmd evaluate;
  auto* e = app.add_subcommand("evaluate", "score predictions with bias-sliced metrics");
  e->add_option("--examples", evaluate.examples)->required();
  e->add_option("--predictions", evaluate.predictions)->required();
  e->add_option("--out", evaluate.out_dir)->required();
  evaluate.flags.Attach(e);

  TrainCmd train;
  auto* t = app.add_subcommand("train", "train the multi-head debiasing classifier");
  train.Attach(t);

  PredictCmd predict;
  auto* pr = app.add_subcommand("predict", "write predictions from a checkpoint");
  pr->add_option("--checkpoint", predict.checkpoint)->required();
  pr->add_option("--examples", predict.examples)->required();
  pr->add_option("--out", predict.out_dir)->required();

  SynthCmd synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic corpus with planted artifacts");
  synth.Attach(s);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  Manifest manifest;
  std::string out_dir;
  std::function<void()> body;
  const auto start = std::chrono::steady_clock::now();
  auto bind = [&](auto& cmd, const char* name, const std::string& dir) {
    manifest.command = name;
    out_dir = dir;
    body = [&cmd, &out, &err, &manifest] { cmd.Run(out, err, manifest); };
  };
  if (*p) bind(profile, "profile", profile.out_dir);
  if (*e) bind(evaluate, "evaluate", evaluate.out_dir);
  if (*t) bind(train, "train", train.out_dir);
  if (*pr) bind(predict, "predict", predict.out_dir);
  if (*s) bind(synth, "synth", synth.out_dir);

  try {
    body();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    WriteManifest(fs::path(out_dir), manifest, seconds);
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace nliart::cli
