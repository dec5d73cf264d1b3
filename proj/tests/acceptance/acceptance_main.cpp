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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Detail lines are indented under their verdict.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>

#include "../support/oracles.hpp"
#include "avra/analyzer.hpp"
#include "avra/audio_io.hpp"
#include "avra/cnn.hpp"
#include "avra/dataset.hpp"
#include "avra/dsp.hpp"
#include "avra/eval.hpp"
#include "avra/image.hpp"
#include "avra/service.hpp"
#include "avra/svm.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace avra;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(const char* name, double limit_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(elapsed < limit_s, fmt("runtime %.1f s < %.0f s", elapsed, limit_s));
  std::printf("%s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name, elapsed);
  for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

// ---- Criteria -------------------------------------------------------------

void table_oracle(Verdict& v) {
  const auto r = eval::metrics(oracle::reference_confusion());
  const char* names[] = {"Chest", "Mix", "HeadMix", "Head"};
  double worst = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& ref = oracle::kReferenceRows[c];
    const auto& got = r.per_class[c];
    worst = std::max({worst, std::abs(got.precision - ref.precision), std::abs(got.recall - ref.recall),
                      std::abs(got.f1 - ref.f1)});
    v.details.push_back(fmt("%-8s P %.4f R %.4f F1 %.4f (reference %.2f %.2f %.2f)", names[c], got.precision,
                            got.recall, got.f1, ref.precision, ref.recall, ref.f1));
  }
  worst = std::max(worst, std::abs(r.accuracy - oracle::kReferenceAccuracy));
  v.require(worst <= 0.005, fmt("max cell deviation %.4f <= 0.005 (accuracy %.4f)", worst, r.accuracy));
}

void fft_oracle(Verdict& v) {
  double worst = 0.0;
  for (std::size_t n = 2; n <= 4096; n *= 2) {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
      const auto x = oracle::random_complex(n, n * 31 + trial);
      worst = std::max(worst, oracle::relative_error(dsp::fft(x), oracle::naive_dft(x)));
    }
  }
  v.require(worst < 1e-9, fmt("sizes 2..4096, worst relative error %.2e < 1e-9", worst));
}

void gradient_check(Verdict& v) {
  using cnn::Tensor;
  Rng rng(2026);
  double conv = 0.0, pool = 0.0, relu = 0.0, dense = 0.0, net = 0.0;

  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 1}}) {
    auto x = oracle::random_tensor(2, 3, 6, 7, rng);
    auto k = oracle::random_tensor(4, 3, 3, 3, rng);
    std::vector<double> b{0.1, -0.2, 0.3, 0.0};
    const auto y = cnn::conv2d_forward(x, k, b, stride, pad);
    const auto w = oracle::random_tensor(y.n, y.c, y.h, y.w, rng);
    const auto g = cnn::conv2d_backward(x, k, w, stride, pad);
    const auto loss = [&] { return oracle::weighted_sum(cnn::conv2d_forward(x, k, b, stride, pad), w); };
    conv = std::max({conv, oracle::check_gradient(x.data, g.dx.data, loss),
                     oracle::check_gradient(k.data, g.dkernel.data, loss), oracle::check_gradient(b, g.dbias, loss)});
  }
  {
    Tensor x(2, 2, 6, 6);
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 0.01 * static_cast<double>(order[i]);
    const auto p = cnn::maxpool2d_forward(x);
    const auto w = oracle::random_tensor(p.y.n, p.y.c, p.y.h, p.y.w, rng);
    pool = oracle::check_gradient(x.data, cnn::maxpool2d_backward(w, p.argmax, x).data,
                                  [&] { return oracle::weighted_sum(cnn::maxpool2d_forward(x).y, w); });
  }
  {
    auto x = oracle::random_tensor(2, 2, 4, 4, rng);
    for (auto& e : x.data) e = e < 0 ? e - 0.1 : e + 0.1;
    const auto w = oracle::random_tensor(2, 2, 4, 4, rng);
    relu = oracle::check_gradient(x.data, cnn::relu_backward(x, w).data,
                                  [&] { return oracle::weighted_sum(cnn::relu(x), w); });
  }
  {
    auto x = oracle::random_tensor(3, 2, 2, 3, rng);
    auto weight = oracle::random_tensor(5, 12, 1, 1, rng);
    std::vector<double> b(5, 0.1);
    const auto w = oracle::random_tensor(3, 5, 1, 1, rng);
    const auto g = cnn::dense_backward(x, weight, w);
    const auto loss = [&] { return oracle::weighted_sum(cnn::dense_forward(x, weight, b), w); };
    dense = std::max({oracle::check_gradient(x.data, g.dx.data, loss),
                      oracle::check_gradient(weight.data, g.dweight.data, loss),
                      oracle::check_gradient(b, g.dbias, loss)});
  }
  {
    cnn::CnnConfig cfg;
    cfg.channels = {2, 3, 4};
    cfg.hidden = 6;
    cfg.input_height = 8;
    cfg.input_width = 16;
    auto model = cnn::init_model(cfg);
    for (auto p : cnn::parameters(model))
      for (auto& e : p) e = rng.uniform(-0.5, 0.5);
    const auto batch = oracle::random_tensor(3, 1, 8, 16, rng);
    const std::vector<RegisterLabel> labels{RegisterLabel::Mix, RegisterLabel::Head, RegisterLabel::Chest};
    cnn::ForwardCache cache;
    const auto logits = cnn::forward(model, batch, &cache);
    const auto grads = cnn::backward(model, cache, cnn::softmax_cross_entropy(logits, labels).grad);
    auto params = cnn::parameters(model);
    const auto g = cnn::parameters(grads);
    const auto loss = [&] { return cnn::softmax_cross_entropy(cnn::forward(model, batch), labels).loss; };
    for (std::size_t i = 0; i < params.size(); ++i) net = std::max(net, oracle::check_gradient(params[i], g[i], loss));
  }
  v.require(conv < 1e-4, fmt("conv2d worst relative error %.2e", conv));
  v.require(pool < 1e-4, fmt("maxpool worst relative error %.2e", pool));
  v.require(relu < 1e-4, fmt("relu worst relative error %.2e", relu));
  v.require(dense < 1e-4, fmt("dense worst relative error %.2e", dense));
  v.require(net < 1e-4, fmt("3-conv/2-FC network worst relative error %.2e", net));
}

void svm_oracle(Verdict& v) {
  double worst = 0.0;
  bool monotone = true;
  int instances = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.below(3);
    const std::size_t dim = 1 + rng.below(3);
    std::vector<dataset::Sample> samples(n);
    std::vector<double> sign(n);
    std::vector<double> upper(n);
    std::vector<std::vector<double>> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < dim; ++f) {
        samples[i].features.push_back(static_cast<float>(rng.uniform(-2.0, 2.0)));
        z[i].push_back(samples[i].features.back());
      }
      sign[i] = i == 0 ? 1.0 : i == 1 ? -1.0 : (rng.uniform() < 0.5 ? 1.0 : -1.0);
      upper[i] = rng.uniform(0.05, 5.0);
    }
    svm::SvmTrainConfig cfg;
    cfg.feature_scale = 1.0;
    cfg.center = false;
    cfg.tolerance = 1e-10;
    cfg.max_epochs = 200000;
    svm::SolverTrace trace;
    const auto head = svm::solve_binary(samples, sign, upper, cfg, &trace);
    const auto best = oracle::solve_dual_exhaustive(z, sign, upper, cfg.bias_feature);
    const double primal = svm::primal_objective(head, samples, sign, upper, cfg);
    worst = std::max(worst, std::abs(primal + best.objective) / std::max(1.0, std::abs(best.objective)));
    for (std::size_t i = 1; i < trace.dual_objective.size(); ++i) {
      const double prev = trace.dual_objective[i - 1];
      if (trace.dual_objective[i] > prev + 1e-9 * std::max(1.0, std::abs(prev))) monotone = false;
    }
    ++instances;
  }
  v.require(worst <= 1e-3, fmt("%d instances, worst objective gap %.2e <= 1e-3", instances, worst));
  v.require(monotone, "dual objective non-increasing across epochs on every instance");
}

// Shared by the learning contract and the later end-to-end criteria.
struct Trained {
  dataset::SyntheticCorpus corpus;
  std::vector<RegisterLabel> labels;
  dataset::SplitIndices split;
  std::unique_ptr<svm::SvmModel> svm;
  std::unique_ptr<cnn::CnnModel> cnn;
};
Trained trained;

void learning_contract(Verdict& v) {
  const dataset::SyntheticCorpusConfig corpus_cfg;  // per_class 100, seed 7
  const dsp::MelRenderer renderer;
  auto& t = trained;
  t.corpus = dataset::generate_synthetic_corpus(corpus_cfg, renderer);
  t.labels = t.corpus.manifest.labels();
  t.split = dataset::split_train_test(t.labels, 0.8, t.corpus.manifest.split_seed);
  std::vector<std::size_t> groups;
  const auto train = dataset::make_samples(t.corpus.images, t.labels, t.split.train, true, &groups);
  const auto test = dataset::make_samples(t.corpus.images, t.labels, t.split.test, false);
  v.details.push_back(fmt("corpus %zu clips, train %zu samples (augmented), held-out %zu samples",
                          t.corpus.images.size(), train.size(), test.size()));

  t.svm = std::make_unique<svm::SvmModel>(svm::train(train, svm::SvmTrainConfig{}, groups));
  std::size_t correct = 0;
  for (const auto& s : test) correct += svm::predict(*t.svm, s.features) == s.label;
  const double svm_acc = static_cast<double>(correct) / static_cast<double>(test.size());
  v.require(svm_acc >= 0.95, fmt("SVM test accuracy %.4f >= 0.95", svm_acc));

  const cnn::CnnConfig cfg;
  t.cnn = std::make_unique<cnn::CnnModel>(cnn::init_model(cfg));
  const auto report = cnn::train(*t.cnn, train, test, cfg);
  for (const auto& e : report.epochs) {
    v.details.push_back(fmt("epoch %d train loss %.6f [%.6f, %.6f] val loss %.6f val acc %.4f", e.epoch,
                            e.train_loss_mean, e.train_loss_min, e.train_loss_max, e.val_loss, e.val_accuracy));
  }
  v.require(report.epochs.size() == 6, fmt("%zu epochs reported", report.epochs.size()));
  const double first = report.epochs.front().train_loss_mean;
  v.require(std::abs(first - std::log(4.0)) <= 0.15, fmt("epoch-1 mean loss %.4f within 0.15 of ln 4", first));
  bool decreasing = true;
  for (std::size_t i = 1; i < report.epochs.size(); ++i)
    decreasing = decreasing && report.epochs[i].train_loss_mean < report.epochs[i - 1].train_loss_mean;
  v.require(decreasing, "epoch mean training loss strictly decreasing");
  const double cnn_acc = report.epochs.back().val_accuracy;
  v.require(cnn_acc >= 0.95, fmt("CNN validation accuracy %.4f >= 0.95 after %zu epochs", cnn_acc,
                                 report.epochs.size()));
}

void pipeline_invariants(Verdict& v) {
  auto& t = trained;
  if (!t.svm || !t.cnn) throw std::runtime_error("learning contract did not produce models");
  const auto standardized = dataset::standardize(t.corpus.images[0]);
  v.require(dataset::flatten(standardized).size() == 19712, "flatten length 19712");

  bool six = true, labels_kept = true, involution = true, idempotent = true, in_range = true;
  std::vector<std::size_t> groups;
  const auto aug = dataset::make_samples(t.corpus.images, t.labels, t.split.train, true, &groups);
  six = aug.size() == 6 * t.split.train.size();
  for (std::size_t i = 0; i < aug.size(); ++i) {
    labels_kept = labels_kept && aug[i].label == t.labels[groups[i]];
    for (float p : aug[i].features) in_range = in_range && p >= 0.0F && p <= 1.0F;
  }
  for (std::size_t i = 0; i < t.corpus.images.size(); i += 7) {
    const auto& img = t.corpus.images[i];
    involution = involution && dataset::hflip(dataset::hflip(img)) == img;
    const auto s = dataset::standardize(img);
    idempotent = idempotent && dataset::standardize(s) == s;
    six = six && dataset::augment(s).size() == 6;
  }
  v.require(six, fmt("augmentation multiplicity 6 (%zu images -> %zu samples)", t.split.train.size(), aug.size()));
  v.require(labels_kept && in_range, "augmented samples keep their label and stay in [0, 1]");
  v.require(involution, "hflip is an involution");
  v.require(idempotent, "standardize is idempotent");

  const auto train_counts = dataset::class_counts([&] {
    std::vector<RegisterLabel> l;
    for (auto i : t.split.train) l.push_back(t.labels[i]);
    return l;
  }());
  const auto all_counts = dataset::class_counts(t.labels);
  bool proportional = true;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    proportional = proportional && std::abs(static_cast<double>(train_counts[c]) - 0.8 * all_counts[c]) <= 1.0;
  v.require(proportional, "stratified 80/20 split within +-1 sample per class");

  const auto dir = std::filesystem::temp_directory_path() / "avra_acceptance";
  std::filesystem::create_directories(dir);
  svm::save_model(dir / "svm.model", *t.svm);
  cnn::save_model(dir / "cnn.model", *t.cnn);
  const auto svm_back = svm::load_model(dir / "svm.model");
  const auto cnn_back = cnn::load_model(dir / "cnn.model");
  v.require(svm_back == *t.svm && svm::serialize(svm_back) == read_file_bytes(dir / "svm.model"),
            "SVM save/load round trip is bit-exact");
  v.require(cnn_back == *t.cnn && cnn::serialize(cnn_back) == read_file_bytes(dir / "cnn.model"),
            "CNN save/load round trip is bit-exact");
  std::filesystem::remove_all(dir);
}

void analyzer_contract(Verdict& v) {
  auto& t = trained;
  if (!t.svm || !t.cnn) throw std::runtime_error("learning contract did not produce models");
  const dsp::MelRenderer renderer;
  const dataset::SyntheticCorpusConfig cfg;
  // Indices past the corpus range give clips the models never saw.
  const std::vector<RegisterLabel> seq(3, RegisterLabel::HeadMix);
  const auto clip = dataset::synthesize_register_sequence(cfg, seq, 1000);
  const analyzer::SvmClassifier svm_model(*t.svm);
  const analyzer::CnnClassifier cnn_model(*t.cnn);
  for (const analyzer::RegisterClassifier* model : {static_cast<const analyzer::RegisterClassifier*>(&svm_model),
                                                    static_cast<const analyzer::RegisterClassifier*>(&cnn_model)}) {
    const auto r = analyzer::analyze(clip, *model, renderer);
    const std::string kind(model->kind());
    bool spacing = !r.ticks.empty() && r.ticks.size() == (r.spectrogram.width - 1) / 10 + 1;
    bool uniform = true;
    for (std::size_t i = 0; i < r.ticks.size(); ++i) {
      spacing = spacing && r.ticks[i].x == 10 * i;
      uniform = uniform && r.ticks[i].label == RegisterLabel::HeadMix;
    }
    v.require(spacing, fmt("%s: %zu ticks at exactly 10 px over %zu columns", kind.c_str(), r.ticks.size(),
                           r.spectrogram.width));
    v.require(uniform && r.shift_markers.empty(),
              fmt("%s: constant HeadMix clip gives a uniform label sequence, %zu shift markers", kind.c_str(),
                  r.shift_markers.size()));
    std::size_t covered = 0;
    std::size_t next = 0;
    bool exact = true;
    for (const auto& run : analyzer::label_run_lengths(r)) {
      for (std::size_t x = run.start_x; x <= run.end_x; x += 10, ++next, ++covered)
        exact = exact && next < r.ticks.size() && r.ticks[next].x == x && r.ticks[next].label == run.label;
    }
    v.require(exact && covered == r.ticks.size(), fmt("%s: runs cover all ticks exactly once", kind.c_str()));
  }

  // Run decomposition on a clip that changes register.
  const std::vector<RegisterLabel> change{RegisterLabel::Chest, RegisterLabel::Chest, RegisterLabel::Head,
                                          RegisterLabel::Head};
  const auto r = analyzer::analyze(dataset::synthesize_register_sequence(cfg, change, 1100), svm_model, renderer);
  std::size_t covered = 0;
  for (const auto& run : analyzer::label_run_lengths(r)) covered += (run.end_x - run.start_x) / 10 + 1;
  v.require(covered == r.ticks.size() && analyzer::label_run_lengths(r).size() == r.shift_markers.size() + 1,
            fmt("Chest->Head clip: %zu ticks, %zu runs, %zu shift markers", r.ticks.size(),
                analyzer::label_run_lengths(r).size(), r.shift_markers.size()));
}

void service_end_to_end(Verdict& v) {
  auto& t = trained;
  if (!t.svm || !t.cnn) throw std::runtime_error("learning contract did not produce models");
  service::Service svc({}, std::make_shared<analyzer::SvmClassifier>(*t.svm),
                       std::make_shared<analyzer::CnnClassifier>(*t.cnn));
  service::HttpServer server(svc);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);

  const dataset::SyntheticCorpusConfig cfg;
  const std::vector<RegisterLabel> seq{RegisterLabel::Mix, RegisterLabel::Mix};
  const auto wav = audio::encode_wav_pcm16(dataset::synthesize_register_sequence(cfg, seq, 1200));
  const auto up = cli.Post("/audio", std::string(wav.begin(), wav.end()), "audio/wav");
  v.require(up && up->status == 200, "POST /audio -> 200");
  if (!up || up->status != 200) return;
  const auto meta = json::parse(up->body);
  const std::string id = meta["id"];
  v.require(std::abs(meta["duration_s"].get<double>() - 6.0) <= 0.01, "reported duration 6.0 s");

  const auto spec = cli.Get("/audio/" + id + "/spectrogram");
  const auto png_height = spec && spec->status == 200
                              ? png::decode_gray({reinterpret_cast<const std::uint8_t*>(spec->body.data()),
                                                  spec->body.size()})
                                    .height
                              : 0;
  v.require(png_height == 128, fmt("GET spectrogram -> PNG of height %zu", png_height));

  for (const char* model : {"svm", "cnn"}) {
    const std::string body = json{{"id", id}, {"model", model}, {"start_s", 0.5}, {"end_s", 5.5}}.dump();
    const auto a = cli.Post("/analyze", body, "application/json");
    const auto b = cli.Post("/analyze", body, "application/json");
    if (!a || a->status != 200) {
      v.require(false, std::string(model) + ": POST /analyze -> 200");
      continue;
    }
    const auto j = json::parse(a->body);
    const std::size_t width = j["width"];
    bool formed = j["ticks"].size() == (width - 1) / 10 + 1;
    std::string text;
    for (std::size_t i = 0; i < j["ticks"].size(); ++i) {
      const auto& tick = j["ticks"][i];
      const double conf = tick["confidence"];
      const int label = tick["label"];
      formed = formed && tick["x"] == 10 * i && label >= 0 && label < 4 && conf >= 0.0 && conf <= 1.0;
      text += fmt("%zu,%d,%.6f\n", tick["x"].get<std::size_t>(), label, conf);
    }
    formed = formed && j["ticks_text"] == text;
    v.require(formed, fmt("%s: well-formed tick list (%zu ticks over %zu columns)", model, j["ticks"].size(), width));
    v.require(b && b->body == a->body, fmt("%s: identical request -> identical response bytes", model));
    const std::string png_path = j["annotated_png"];
    const auto p1 = cli.Get(png_path);
    const auto p2 = cli.Get(png_path);
    v.require(p1 && p1->status == 200 && p2 && p1->body == p2->body,
              fmt("%s: annotated PNG served with identical bytes", model));
  }
  server.stop();
}

}  // namespace

int main() {
  run("reference confusion matrix to metrics", 1.0, table_oracle);
  run("fft matches naive DFT", 30.0, fft_oracle);
  run("cnn gradient check", 60.0, gradient_check);
  run("svm solver oracle", 60.0, svm_oracle);
  run("synthetic-corpus learning contract", 600.0, learning_contract);
  run("pipeline invariants", 120.0, pipeline_invariants);
  run("analyzer contract", 60.0, analyzer_contract);
  run("end-to-end service", 120.0, service_end_to_end);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
