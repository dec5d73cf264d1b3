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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "avra/analyzer.hpp"
#include "avra/audio_io.hpp"
#include "avra/cnn.hpp"
#include "avra/dataset.hpp"
#include "avra/dsp.hpp"
#include "avra/error.hpp"
#include "avra/eval.hpp"
#include "avra/svm.hpp"

namespace py = pybind11;
using namespace avra;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const SpectrogramImage& image) {
  py::array_t<float> out({image.height, image.width});
  std::copy(image.pixels.begin(), image.pixels.end(), out.mutable_data());
  return out;
}

SpectrogramImage from_numpy(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D (height, width) array");
  SpectrogramImage image(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), image.pixels.begin());
  return image;
}

audio::AudioBuffer buffer_from(const DoubleArray& samples, int sample_rate) {
  if (samples.ndim() != 1) throw py::value_error("expected a 1-D sample array");
  audio::AudioBuffer b;
  b.sample_rate = sample_rate;
  b.samples.assign(samples.data(), samples.data() + samples.size());
  return b;
}

py::array_t<double> samples_of(const audio::AudioBuffer& b) {
  return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(b.samples.size())}, b.samples.data());
}

std::vector<dataset::Sample> samples_from(const FloatArray& features, const std::vector<int>& labels) {
  if (features.ndim() != 2) throw py::value_error("expected a 2-D (samples, features) array");
  const auto n = static_cast<std::size_t>(features.shape(0));
  const auto dim = static_cast<std::size_t>(features.shape(1));
  if (labels.size() != n) throw py::value_error("need one label per feature row");
  std::vector<dataset::Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].features.assign(features.data() + i * dim, features.data() + (i + 1) * dim);
    out[i].label = label_from_code(labels[i]);
  }
  return out;
}

std::span<const float> row_of(const FloatArray& x) {
  if (x.ndim() != 1 && x.ndim() != 2) throw py::value_error("expected a flattened image or a 2-D image");
  return {x.data(), static_cast<std::size_t>(x.size())};
}

dsp::MelRenderer make_renderer(std::size_t n_mels, double f_max, double gain_db, double range_db, int sample_rate) {
  dsp::MelConfig mel;
  mel.n_mels = n_mels;
  mel.f_max = f_max;
  mel.gain_db = gain_db;
  mel.range_db = range_db;
  return dsp::MelRenderer({}, mel, sample_rate);
}

py::bytes as_bytes(const std::vector<std::uint8_t>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size()};
}

std::span<const std::uint8_t> view_bytes(const py::bytes& b) {
  const std::string_view sv(b);
  return {reinterpret_cast<const std::uint8_t*>(sv.data()), sv.size()};
}

}  // namespace

PYBIND11_MODULE(_avra, m) {
  m.doc() = "Vocal register analysis: mel spectrograms, linear SVM and CNN classifiers, sliding-window analysis";

  py::register_exception<Error>(m, "AvraError");

  m.attr("FEATURE_DIM") = kFeatureDim;
  m.attr("INPUT_WIDTH") = kInputWidth;
  m.attr("INPUT_HEIGHT") = kInputHeight;
  m.attr("WORKING_SAMPLE_RATE") = audio::kWorkingSampleRate;

  m.def("label_name", [](int code) { return std::string(label_name(label_from_code(code))); });

  // Audio.
  m.def(
      "decode_wav",
      [](const py::bytes& data) {
        const auto b = audio::decode_wav(view_bytes(data));
        return py::make_tuple(samples_of(b), b.sample_rate);
      },
      py::arg("data"));
  m.def(
      "load_working_audio", [](const py::bytes& data) { return samples_of(audio::load_working_audio(view_bytes(data))); },
      py::arg("data"));
  m.def(
      "encode_wav",
      [](const DoubleArray& samples, int sample_rate) {
        return as_bytes(audio::encode_wav_pcm16(buffer_from(samples, sample_rate)));
      },
      py::arg("samples"), py::arg("sample_rate") = audio::kWorkingSampleRate);
  m.def(
      "synthesize_register_clip",
      [](int label, std::size_t index, std::uint64_t seed, double clip_seconds) {
        dataset::SyntheticCorpusConfig cfg;
        cfg.seed = seed;
        cfg.clip_seconds = clip_seconds;
        return samples_of(dataset::synthesize_register_clip(cfg, label_from_code(label), index));
      },
      py::arg("label"), py::arg("index") = 0, py::arg("seed") = 7, py::arg("clip_seconds") = 3.0);

  // Spectrograms and preprocessing.
  m.def("fft", [](const std::vector<std::complex<double>>& x) { return dsp::fft(x); }, py::arg("x"));
  m.def(
      "render_mel_spectrogram",
      [](const DoubleArray& samples, int sample_rate, std::size_t n_mels, double f_max, double gain_db,
         double range_db) {
        const auto renderer = make_renderer(n_mels, f_max, gain_db, range_db, sample_rate);
        return to_numpy(renderer.render(buffer_from(samples, sample_rate)));
      },
      py::arg("samples"), py::arg("sample_rate") = audio::kWorkingSampleRate, py::arg("n_mels") = 128,
      py::arg("f_max") = 20000.0, py::arg("gain_db") = 20.0, py::arg("range_db") = 80.0);
  m.def("standardize", [](const FloatArray& img) { return to_numpy(dataset::standardize(from_numpy(img))); });
  m.def("hflip", [](const FloatArray& img) { return to_numpy(dataset::hflip(from_numpy(img))); });
  m.def("brightness", [](const FloatArray& img, double f) { return to_numpy(dataset::brightness(from_numpy(img), f)); });
  m.def("augment", [](const FloatArray& img) {
    std::vector<py::array_t<float>> out;
    for (const auto& v : dataset::augment(from_numpy(img))) out.push_back(to_numpy(v));
    return out;
  });
  m.def("flatten", [](const FloatArray& img) {
    const auto f = dataset::flatten(from_numpy(img));
    return py::array_t<float>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(f.size())}, f.data());
  });
  m.def(
      "split_train_test",
      [](const std::vector<int>& codes, double train_fraction, std::uint64_t seed) {
        std::vector<RegisterLabel> labels;
        for (int c : codes) labels.push_back(label_from_code(c));
        const auto s = dataset::split_train_test(labels, train_fraction, seed);
        return py::make_tuple(s.train, s.test);
      },
      py::arg("labels"), py::arg("train_fraction") = 0.8, py::arg("seed") = 7);
  m.def(
      "generate_synthetic_corpus",
      [](std::size_t per_class, std::uint64_t seed) {
        dataset::SyntheticCorpusConfig cfg;
        cfg.per_class = per_class;
        cfg.seed = seed;
        const auto corpus = dataset::generate_synthetic_corpus(cfg, dsp::MelRenderer());
        std::vector<py::array_t<float>> images;
        for (const auto& img : corpus.images) images.push_back(to_numpy(img));
        std::vector<int> labels;
        for (const auto& e : corpus.manifest.entries) labels.push_back(code(e.label));
        return py::make_tuple(images, labels);
      },
      py::arg("per_class") = 100, py::arg("seed") = 7);

  // SVM.
  py::class_<svm::SvmModel>(m, "SvmModel")
      .def_readonly("feature_dim", &svm::SvmModel::feature_dim)
      .def("decision_values", [](const svm::SvmModel& s, const FloatArray& x) { return svm::decision_values(s, row_of(x)); })
      .def("predict", [](const svm::SvmModel& s, const FloatArray& x) { return code(svm::predict(s, row_of(x))); })
      .def("predict_proba", [](const svm::SvmModel& s, const FloatArray& x) { return svm::predict_proba(s, row_of(x)); })
      .def("serialize", [](const svm::SvmModel& s) { return as_bytes(svm::serialize(s)); })
      .def("save", [](const svm::SvmModel& s, const std::filesystem::path& p) { svm::save_model(p, s); })
      .def_static(
          "deserialize", [](const py::bytes& b, std::size_t dim) { return svm::deserialize(view_bytes(b), dim); },
          py::arg("data"), py::arg("expected_dim") = kFeatureDim)
      .def_static(
          "load", [](const std::filesystem::path& p, std::size_t dim) { return svm::load_model(p, dim); },
          py::arg("path"), py::arg("expected_dim") = kFeatureDim)
      .def("__eq__", [](const svm::SvmModel& a, const svm::SvmModel& b) { return a == b; });
  m.def(
      "train_svm",
      [](const FloatArray& features, const std::vector<int>& labels, double c, int max_epochs, double tolerance,
         std::uint64_t seed, int calibration_folds, const std::vector<std::size_t>& groups) {
        svm::SvmTrainConfig cfg;
        cfg.c = c;
        cfg.max_epochs = max_epochs;
        cfg.tolerance = tolerance;
        cfg.seed = seed;
        cfg.calibration_folds = calibration_folds;
        const auto samples = samples_from(features, labels);
        py::gil_scoped_release release;
        return svm::train(samples, cfg, groups);
      },
      py::arg("features"), py::arg("labels"), py::arg("c") = 2.5e-6, py::arg("max_epochs") = 1000,
      py::arg("tolerance") = 1e-4, py::arg("seed") = 0, py::arg("calibration_folds") = 3,
      py::arg("groups") = std::vector<std::size_t>{});

  // CNN.
  py::class_<cnn::CnnModel>(m, "CnnModel")
      .def("predict", [](const cnn::CnnModel& s, const FloatArray& x) { return code(cnn::predict(s, row_of(x))); })
      .def("predict_proba", [](const cnn::CnnModel& s, const FloatArray& x) { return cnn::predict_proba(s, row_of(x)); })
      .def("serialize", [](const cnn::CnnModel& s) { return as_bytes(cnn::serialize(s)); })
      .def("save", [](const cnn::CnnModel& s, const std::filesystem::path& p) { cnn::save_model(p, s); })
      .def_static("deserialize", [](const py::bytes& b) { return cnn::deserialize(view_bytes(b), 0, 0); })
      .def_static("load", [](const std::filesystem::path& p) { return cnn::load_model(p, 0, 0); })
      .def_property_readonly("input_shape",
                             [](const cnn::CnnModel& s) {
                               return py::make_tuple(s.config.input_height, s.config.input_width);
                             })
      .def("__eq__", [](const cnn::CnnModel& a, const cnn::CnnModel& b) { return a == b; });
  m.def(
      "init_cnn",
      [](std::uint64_t seed, std::size_t input_height, std::size_t input_width) {
        cnn::CnnConfig cfg;
        cfg.seed = seed;
        cfg.input_height = input_height;
        cfg.input_width = input_width;
        return cnn::init_model(cfg);
      },
      py::arg("seed") = 0, py::arg("input_height") = kInputHeight, py::arg("input_width") = kInputWidth);
  m.def(
      "train_cnn",
      [](cnn::CnnModel& model, const FloatArray& train_x, const std::vector<int>& train_y, const FloatArray& val_x,
         const std::vector<int>& val_y, int epochs, double learning_rate, double momentum, std::size_t batch_size,
         std::uint64_t seed) {
        cnn::CnnConfig cfg = model.config;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.momentum = momentum;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        const auto train = samples_from(train_x, train_y);
        const auto val = samples_from(val_x, val_y);
        cnn::TrainReport report;
        {
          py::gil_scoped_release release;
          report = cnn::train(model, train, val, cfg);
        }
        py::list rows;
        for (const auto& e : report.epochs) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["train_loss"] = e.train_loss_mean;
          row["train_loss_min"] = e.train_loss_min;
          row["train_loss_max"] = e.train_loss_max;
          row["val_loss"] = e.val_loss;
          row["val_accuracy"] = e.val_accuracy;
          rows.append(row);
        }
        return rows;
      },
      py::arg("model"), py::arg("train_x"), py::arg("train_y"), py::arg("val_x"), py::arg("val_y"),
      py::arg("epochs") = 6, py::arg("learning_rate") = 0.01, py::arg("momentum") = 0.9, py::arg("batch_size") = 32,
      py::arg("seed") = 0);

  // Evaluation.
  m.def(
      "metrics",
      [](const std::vector<int>& actual, const std::vector<int>& predicted) {
        std::vector<RegisterLabel> a;
        std::vector<RegisterLabel> p;
        for (int c : actual) a.push_back(label_from_code(c));
        for (int c : predicted) p.push_back(label_from_code(c));
        const auto r = eval::metrics(eval::confusion(a, p));
        py::dict out;
        py::list per_class;
        for (const auto& cm : r.per_class) {
          py::dict d;
          d["precision"] = cm.precision;
          d["recall"] = cm.recall;
          d["f1"] = cm.f1;
          d["support"] = cm.support;
          per_class.append(d);
        }
        out["per_class"] = per_class;
        out["accuracy"] = r.accuracy;
        out["macro_f1"] = r.macro_f1;
        out["confusion"] = r.confusion.counts;
        out["table"] = eval::format_table(r);
        return out;
      },
      py::arg("actual"), py::arg("predicted"));

  // Analysis.
  m.def(
      "analyze",
      [](const DoubleArray& samples, int sample_rate, py::object model, double start_s, double end_s) {
        std::unique_ptr<analyzer::RegisterClassifier> classifier;
        if (py::isinstance<svm::SvmModel>(model)) {
          classifier = std::make_unique<analyzer::SvmClassifier>(model.cast<svm::SvmModel>());
        } else if (py::isinstance<cnn::CnnModel>(model)) {
          classifier = std::make_unique<analyzer::CnnClassifier>(model.cast<cnn::CnnModel>());
        } else {
          throw py::type_error("model must be an SvmModel or CnnModel");
        }
        const auto buffer = buffer_from(samples, sample_rate);
        const double end = end_s < 0.0 ? buffer.duration_seconds() : end_s;
        analyzer::AnalysisResult result;
        {
          py::gil_scoped_release release;
          result = analyzer::analyze(buffer, start_s, end, *classifier, dsp::MelRenderer());
        }
        py::list ticks;
        for (const auto& t : result.ticks) ticks.append(py::make_tuple(t.x, code(t.label), t.confidence));
        py::dict out;
        out["ticks"] = ticks;
        out["shift_markers"] = result.shift_markers;
        out["spectrogram"] = to_numpy(result.spectrogram);
        out["annotated_png"] = as_bytes(png::encode_rgb(analyzer::annotate(result)));
        out["ticks_text"] = analyzer::format_ticks(result);
        return out;
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("model"), py::arg("start_s") = 0.0,
      py::arg("end_s") = -1.0);
}
