// Copyright 2026 The AVRA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// avra: corpus generation, training, evaluation and analysis.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "avra/analyzer.hpp"
#include "avra/cnn.hpp"
#include "avra/dataset.hpp"
#include "avra/dsp.hpp"
#include "avra/error.hpp"
#include "avra/eval.hpp"
#include "avra/model_io.hpp"
#include "avra/service.hpp"
#include "avra/svm.hpp"

namespace fs = std::filesystem;
using namespace avra;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct MelOptions {
  dsp::MelConfig mel;
  dsp::StftConfig stft;

  void add(CLI::App* cmd) {
    cmd->add_option("--fmax", mel.f_max, "Upper edge of the mel filterbank in Hz")->capture_default_str();
    cmd->add_option("--fmin", mel.f_min, "Lower edge of the mel filterbank in Hz")->capture_default_str();
    cmd->add_option("--n-mels", mel.n_mels, "Number of mel bands")->capture_default_str();
    cmd->add_option("--gain-db", mel.gain_db, "Gain added after peak normalization")->capture_default_str();
    cmd->add_option("--range-db", mel.range_db, "Displayed dynamic range")->capture_default_str();
    cmd->add_option("--fft-size", stft.fft_size, "STFT frame length")->capture_default_str();
    cmd->add_option("--hop", stft.hop, "STFT hop")->capture_default_str();
  }

  void validate() const {
    stft.validate();
    mel.validate(audio::kWorkingSampleRate);
  }

  [[nodiscard]] dsp::MelRenderer renderer() const {
    validate();
    return dsp::MelRenderer(stft, mel);
  }
};

// --seed beats AVRA_SEED, which beats the built-in default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("AVRA_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("AVRA_SEED is not an unsigned integer: ") + env);
    return v;
  }
  return fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

struct LoadedCorpus {
  dataset::DatasetManifest manifest;
  std::vector<SpectrogramImage> images;
  std::vector<RegisterLabel> labels;
};

LoadedCorpus load_corpus(const fs::path& manifest_path, const std::optional<fs::path>& root) {
  LoadedCorpus c;
  c.manifest = dataset::read_manifest(manifest_path);
  if (c.manifest.entries.empty()) throw InvalidArgument("manifest " + manifest_path.string() + " has no entries");
  c.images = dataset::load_manifest_images(c.manifest, root.value_or(manifest_path.parent_path()));
  c.labels = c.manifest.labels();
  return c;
}

std::string metrics_block(const std::string& title, std::span<const RegisterLabel> actual,
                          std::span<const RegisterLabel> predicted) {
  const auto report = eval::metrics(eval::confusion(actual, predicted));
  return title + "\n" + eval::format_table(report) + "\n" + eval::format_confusion(report.confusion);
}

// ---- gen-corpus -------------------------------------------------------------

struct GenCorpusArgs {
  std::size_t per_class = 100;
  std::optional<std::uint64_t> seed;
  fs::path out;
  MelOptions mel;
};

int run_gen_corpus(const GenCorpusArgs& a) {
  dataset::SyntheticCorpusConfig cfg;
  cfg.per_class = a.per_class;
  cfg.seed = resolve_seed(a.seed, cfg.seed);
  cfg.validate();
  const auto renderer = a.mel.renderer();
  const auto corpus = dataset::generate_synthetic_corpus(cfg, renderer);
  dataset::write_corpus(a.out, corpus);
  std::printf("wrote %zu images and %s\n", corpus.images.size(), (a.out / "manifest.txt").string().c_str());
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string kind = "svm";
  fs::path manifest;
  std::optional<fs::path> root;
  fs::path out;
  std::optional<fs::path> report;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::uint64_t> seed;
  double train_fraction = 0.8;
  bool no_augment = false;
  svm::SvmTrainConfig svm;
  cnn::CnnConfig cnn;
};

int run_train(TrainArgs a) {
  if (a.kind != "svm" && a.kind != "cnn") throw ConfigError("--kind must be svm or cnn");
  a.svm.seed = resolve_seed(a.seed, a.svm.seed);
  a.cnn.seed = resolve_seed(a.seed, a.cnn.seed);
  if (a.kind == "svm") a.svm.validate();
  if (a.kind == "cnn") a.cnn.validate();

  const auto corpus = load_corpus(a.manifest, a.root);
  const std::uint64_t split_seed = a.split_seed.value_or(corpus.manifest.split_seed);
  const auto split = dataset::split_train_test(corpus.labels, a.train_fraction, split_seed);
  std::vector<std::size_t> groups;
  const auto train = dataset::make_samples(corpus.images, corpus.labels, split.train, !a.no_augment, &groups);
  const auto test = dataset::make_samples(corpus.images, corpus.labels, split.test, false);

  std::ostringstream report;
  report << "model: " << a.kind << "\n"
         << "train images: " << split.train.size() << ", train samples: " << train.size()
         << ", test samples: " << test.size() << "\n\n";

  std::vector<RegisterLabel> actual;
  for (const auto& s : test) actual.push_back(s.label);
  std::vector<RegisterLabel> predicted;
  if (a.kind == "svm") {
    const auto model = svm::train(train, a.svm, groups);
    svm::save_model(a.out, model);
    std::vector<RegisterLabel> train_actual;
    std::vector<RegisterLabel> train_pred;
    for (const auto& s : train) {
      train_actual.push_back(s.label);
      train_pred.push_back(svm::predict(model, s.features));
    }
    for (const auto& s : test) predicted.push_back(svm::predict(model, s.features));
    report << metrics_block("Training set", train_actual, train_pred) << "\n";
  } else {
    auto model = cnn::init_model(a.cnn);
    const auto tr = cnn::train(model, train, test, a.cnn, [](const cnn::EpochStats& e) {
      std::fprintf(stderr, "epoch %d: train loss %.6f, val loss %.6f, val accuracy %.1f%%\n", e.epoch,
                   e.train_loss_mean, e.val_loss, 100.0 * e.val_accuracy);
    });
    cnn::save_model(a.out, model);
    predicted = cnn::evaluate(model, test).predicted;
    report << eval::format_epoch_table(tr.epochs) << "\n";
  }
  report << metrics_block("Test set", actual, predicted);
  if (a.report) write_text(*a.report, report.str());
  std::cout << report.str();
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  fs::path model;
  fs::path manifest;
  std::optional<fs::path> root;
  std::string subset = "all";
  std::optional<std::uint64_t> split_seed;
  double train_fraction = 0.8;
  std::string format = "table";
  std::optional<fs::path> out;
};

int run_eval(const EvalArgs& a) {
  if (a.subset != "all" && a.subset != "train" && a.subset != "test") {
    throw ConfigError("--subset must be all, train or test");
  }
  const auto classifier = analyzer::load_classifier(a.model);
  const auto corpus = load_corpus(a.manifest, a.root);
  std::vector<std::size_t> indices(corpus.images.size());
  std::iota(indices.begin(), indices.end(), 0);
  if (a.subset != "all") {
    const auto split =
        dataset::split_train_test(corpus.labels, a.train_fraction, a.split_seed.value_or(corpus.manifest.split_seed));
    indices = a.subset == "train" ? split.train : split.test;
  }
  const auto samples = dataset::make_samples(corpus.images, corpus.labels, indices, false);
  std::vector<RegisterLabel> actual;
  std::vector<RegisterLabel> predicted;
  for (const auto& s : samples) {
    actual.push_back(s.label);
    predicted.push_back(classifier->classify(s.features).label);
  }
  const auto report = eval::metrics(eval::confusion(actual, predicted));
  const std::string text = a.format == "kv" ? eval::format_key_values(report)
                                            : eval::format_table(report) + "\n" + eval::format_confusion(report.confusion);
  if (a.out) write_text(*a.out, text);
  std::cout << text;
  return 0;
}

// ---- analyze / render / synth -----------------------------------------------

struct AnalyzeArgs {
  fs::path in;
  fs::path model;
  std::optional<double> start;
  std::optional<double> end;
  fs::path out;
  std::optional<fs::path> ticks;
  std::size_t window = 0;
  MelOptions mel;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto classifier = analyzer::load_classifier(a.model);
  const auto buffer = audio::load_working_audio(read_file_bytes(a.in));
  analyzer::AnalyzerConfig cfg;
  cfg.window_columns = a.window;
  const auto result = analyzer::analyze(buffer, a.start.value_or(0.0), a.end.value_or(buffer.duration_seconds()),
                                        *classifier, a.mel.renderer(), cfg);
  png::write_rgb(a.out, analyzer::annotate(result));
  const std::string text = analyzer::format_ticks(result);
  if (a.ticks) {
    write_text(*a.ticks, text);
  } else {
    std::cout << text;
  }
  std::fprintf(stderr, "%zu ticks, %zu shift markers\n", result.ticks.size(), result.shift_markers.size());
  return 0;
}

struct RenderArgs {
  fs::path in;
  fs::path out;
  std::optional<double> start;
  std::optional<double> end;
  MelOptions mel;
};

int run_render(const RenderArgs& a) {
  auto buffer = audio::load_working_audio(read_file_bytes(a.in));
  if (a.start || a.end) {
    buffer = analyzer::cut_selection(buffer, a.start.value_or(0.0), a.end.value_or(buffer.duration_seconds()));
  }
  png::write_gray(a.out, a.mel.renderer().render(buffer));
  return 0;
}

struct SynthArgs {
  std::vector<int> labels;
  std::size_t index = 0;
  std::optional<std::uint64_t> seed;
  double seconds = 3.0;
  fs::path out;
};

int run_synth(const SynthArgs& a) {
  dataset::SyntheticCorpusConfig cfg;
  cfg.seed = resolve_seed(a.seed, cfg.seed);
  cfg.clip_seconds = a.seconds;
  cfg.validate();
  std::vector<RegisterLabel> labels;
  for (int c : a.labels) labels.push_back(label_from_code(c));
  audio::write_wav_file(a.out, dataset::synthesize_register_sequence(cfg, labels, a.index));
  return 0;
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string listen = "127.0.0.1:8080";
  std::optional<fs::path> svm;
  std::optional<fs::path> cnn;
  double max_upload_mb = 50.0;
  MelOptions mel;
};

int run_serve(const ServeArgs& a) {
  if (!a.svm && !a.cnn) throw ConfigError("serve needs --svm and/or --cnn");
  service::ServiceConfig cfg;
  cfg.max_upload_bytes = static_cast<std::size_t>(a.max_upload_mb * 1024.0 * 1024.0);
  cfg.mel = a.mel.mel;
  cfg.stft = a.mel.stft;
  a.mel.validate();
  std::shared_ptr<const analyzer::RegisterClassifier> svm_model;
  std::shared_ptr<const analyzer::RegisterClassifier> cnn_model;
  if (a.svm) svm_model = std::make_shared<analyzer::SvmClassifier>(svm::load_model(*a.svm));
  if (a.cnn) cnn_model = std::make_shared<analyzer::CnnClassifier>(cnn::load_model(*a.cnn));
  service::Service svc(cfg, svm_model, cnn_model);
  service::HttpServer server(svc);
  const auto [host, port] = service::parse_listen_address(a.listen);
  std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
  server.listen(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vocal register analysis: corpus generation, training, evaluation and analysis"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate the synthetic register corpus");
  gen_cmd->add_option("--per-class", gen.per_class, "Clips per register")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed (default: AVRA_SEED or 7)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen.mel.add(gen_cmd);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an SVM or CNN on a manifest");
  train_cmd->add_option("--kind", train.kind, "svm or cnn")->capture_default_str();
  train_cmd->add_option("--manifest", train.manifest, "Manifest file")->required();
  train_cmd->add_option("--root", train.root, "Image root (default: manifest directory)");
  train_cmd->add_option("--out", train.out, "Model output path")->required();
  train_cmd->add_option("--report", train.report, "Report output path");
  train_cmd->add_option("--split-seed", train.split_seed, "Split seed (default: from manifest)");
  train_cmd->add_option("--train-fraction", train.train_fraction)->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Model seed (default: AVRA_SEED or 0)");
  train_cmd->add_flag("--no-augment", train.no_augment, "Skip augmentation of the training split");
  train_cmd->add_option("--c", train.svm.c, "SVM regularization C")->capture_default_str();
  train_cmd->add_option("--max-epochs", train.svm.max_epochs, "SVM solver epoch cap")->capture_default_str();
  train_cmd->add_option("--tolerance", train.svm.tolerance, "SVM stopping tolerance")->capture_default_str();
  train_cmd->add_option("--calibration-folds", train.svm.calibration_folds)->capture_default_str();
  train_cmd->add_option("--epochs", train.cnn.epochs, "CNN epochs")->capture_default_str();
  train_cmd->add_option("--learning-rate", train.cnn.learning_rate, "CNN learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", train.cnn.momentum, "CNN momentum")->capture_default_str();
  train_cmd->add_option("--batch-size", train.cnn.batch_size, "CNN batch size")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a manifest");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Manifest file")->required();
  eval_cmd->add_option("--root", ev.root, "Image root (default: manifest directory)");
  eval_cmd->add_option("--subset", ev.subset, "all, train or test")->capture_default_str();
  eval_cmd->add_option("--split-seed", ev.split_seed, "Split seed (default: from manifest)");
  eval_cmd->add_option("--train-fraction", ev.train_fraction)->capture_default_str();
  eval_cmd->add_option("--format", ev.format, "table or kv")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report output path");

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Label a WAV selection every 10 columns");
  analyze_cmd->add_option("--in", an.in, "Input WAV")->required();
  analyze_cmd->add_option("--model", an.model, "Model file (svm or cnn)")->required();
  analyze_cmd->add_option("--start", an.start, "Selection start in seconds");
  analyze_cmd->add_option("--end", an.end, "Selection end in seconds");
  analyze_cmd->add_option("--out", an.out, "Annotated PNG")->required();
  analyze_cmd->add_option("--ticks", an.ticks, "Tick list output (default: stdout)");
  analyze_cmd->add_option("--window", an.window, "Columns per classification window (0: one clip)");
  an.mel.add(analyze_cmd);

  RenderArgs rn;
  auto* render_cmd = app.add_subcommand("render", "Render a WAV to a mel-spectrogram PNG");
  render_cmd->add_option("--in", rn.in, "Input WAV")->required();
  render_cmd->add_option("--out", rn.out, "Output PNG")->required();
  render_cmd->add_option("--start", rn.start, "Selection start in seconds");
  render_cmd->add_option("--end", rn.end, "Selection end in seconds");
  rn.mel.add(render_cmd);

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic register clips to a WAV");
  synth_cmd->add_option("--labels", sy.labels, "Register codes, one clip each")->delimiter(',')->required();
  synth_cmd->add_option("--index", sy.index, "Index of the first clip")->capture_default_str();
  synth_cmd->add_option("--seed", sy.seed, "Corpus seed (default: AVRA_SEED or 7)");
  synth_cmd->add_option("--seconds", sy.seconds, "Seconds per clip")->capture_default_str();
  synth_cmd->add_option("--out", sy.out, "Output WAV")->required();

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--listen", sv.listen, "host:port")->capture_default_str();
  serve_cmd->add_option("--svm", sv.svm, "SVM model file");
  serve_cmd->add_option("--cnn", sv.cnn, "CNN model file");
  serve_cmd->add_option("--max-upload-mb", sv.max_upload_mb)->capture_default_str();
  sv.mel.add(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_corpus(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(ev);
    if (*analyze_cmd) return run_analyze(an);
    if (*render_cmd) return run_render(rn);
    if (*synth_cmd) return run_synth(sy);
    if (*serve_cmd) return run_serve(sv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
