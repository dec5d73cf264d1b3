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

#include "avra/service.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <thread>

#include "avra/error.hpp"
#include "avra/image.hpp"
#include "avra/rng.hpp"

namespace avra::service {
namespace {

using nlohmann::json;

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

Response error_response(int status, std::string_view message) {
  return json_response(status, json{{"error", std::string(message)}});
}

std::string to_string(std::span<const std::uint8_t> bytes) { return {bytes.begin(), bytes.end()}; }

std::optional<double> parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string png_of(const SpectrogramImage& image) { return to_string(png::encode_gray(image)); }

}  // namespace

SessionStore::SessionStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("session capacity must be positive");
}

std::string SessionStore::insert(audio::AudioBuffer buffer, std::string full_spectrogram_png) {
  std::lock_guard lock(mutex_);
  std::string id = hex64(splitmix64(counter_++));
  auto session = std::make_shared<Session>();
  session->id = id;
  session->buffer = std::move(buffer);
  session->full_spectrogram_png = std::move(full_spectrogram_png);
  while (entries_.size() >= capacity_) {
    entries_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(id);
  entries_.emplace(id, Entry{std::move(session), lru_.begin()});
  return id;
}

std::shared_ptr<const Session> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second.position);
  return it->second.session;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Service::Service(ServiceConfig cfg, std::shared_ptr<const analyzer::RegisterClassifier> svm,
                 std::shared_ptr<const analyzer::RegisterClassifier> cnn)
    : cfg_(std::move(cfg)),
      renderer_(cfg_.stft, cfg_.mel),
      svm_(std::move(svm)),
      cnn_(std::move(cnn)),
      sessions_(cfg_.session_capacity) {
  if (cfg_.annotation_capacity == 0) throw ConfigError("annotation capacity must be positive");
}

Response Service::upload_audio(std::string_view body) {
  if (body.size() > cfg_.max_upload_bytes) {
    return error_response(413, "upload of " + std::to_string(body.size()) + " bytes exceeds the limit of " +
                                   std::to_string(cfg_.max_upload_bytes));
  }
  if (body.empty()) return error_response(415, "empty body; expected a WAV file");
  audio::AudioBuffer buffer;
  std::string png;
  try {
    const auto* data = reinterpret_cast<const std::uint8_t*>(body.data());
    buffer = audio::load_working_audio({data, body.size()});
    png = png_of(renderer_.render(buffer));
  } catch (const DecodeError& e) {
    return error_response(415, e.what());
  } catch (const UnsupportedFormat& e) {
    return error_response(415, e.what());
  } catch (const EmptyInput& e) {
    return error_response(415, e.what());
  }
  const double duration = buffer.duration_seconds();
  const int rate = buffer.sample_rate;
  const std::size_t columns = renderer_.frames_for(buffer.samples.size());
  const std::string id = sessions_.insert(std::move(buffer), std::move(png));
  return json_response(200, json{{"id", id},
                                 {"duration_s", duration},
                                 {"sample_rate", rate},
                                 {"hop", cfg_.stft.hop},
                                 {"columns", columns},
                                 {"height", cfg_.mel.n_mels}});
}

Response Service::spectrogram(const std::string& id, const std::optional<std::string>& start_s,
                              const std::optional<std::string>& end_s) {
  const auto session = sessions_.get(id);
  if (!session) return error_response(404, "unknown audio id '" + id + "'");
  if (!start_s && !end_s) return {200, "image/png", session->full_spectrogram_png};
  const double duration = session->buffer.duration_seconds();
  const auto start = start_s ? parse_double(*start_s) : std::optional<double>(0.0);
  const auto end = end_s ? parse_double(*end_s) : std::optional<double>(duration);
  if (!start || !end) return error_response(400, "start_s and end_s must be finite numbers");
  try {
    const auto selection = analyzer::cut_selection(session->buffer, *start, *end);
    return {200, "image/png", png_of(renderer_.render(selection))};
  } catch (const SelectionError& e) {
    return error_response(400, e.what());
  }
}

Response Service::analyze(std::string_view json_body) {
  json req;
  try {
    req = json::parse(json_body);
  } catch (const json::parse_error& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object() || !req.contains("id") || !req["id"].is_string()) {
    return error_response(400, "request needs a string 'id'");
  }
  if (!req.contains("model") || !req["model"].is_string()) return error_response(400, "request needs a 'model'");
  for (const char* key : {"start_s", "end_s"}) {
    if (req.contains(key) && !req[key].is_number()) return error_response(400, std::string(key) + " must be a number");
  }
  const std::string id = req["id"];
  const std::string model_name = req["model"];

  const auto session = sessions_.get(id);
  if (!session) return error_response(404, "unknown audio id '" + id + "'");
  const analyzer::RegisterClassifier* model = nullptr;
  if (model_name == "svm") model = svm_.get();
  if (model_name == "cnn") model = cnn_.get();
  if (model == nullptr) return error_response(409, "model '" + model_name + "' is not available");

  const double start = req.value("start_s", 0.0);
  const double end = req.value("end_s", session->buffer.duration_seconds());
  analyzer::AnalysisResult result;
  try {
    result = analyzer::analyze(session->buffer, start, end, *model, renderer_, cfg_.analyzer);
  } catch (const SelectionError& e) {
    return error_response(400, e.what());
  } catch (const ModelError& e) {
    return error_response(409, e.what());
  }

  char canonical[192];
  std::snprintf(canonical, sizeof canonical, "%s|%.17g|%.17g|%s", id.c_str(), start, end, model_name.c_str());
  const std::string key = hex64(fnv1a(canonical));
  remember_annotation(key, to_string(png::encode_rgb(analyzer::annotate(result))));

  json ticks = json::array();
  for (const auto& t : result.ticks) {
    ticks.push_back({{"x", t.x}, {"label", code(t.label)}, {"confidence", t.confidence}});
  }
  json runs = json::array();
  for (const auto& r : analyzer::label_run_lengths(result)) {
    runs.push_back({{"label", code(r.label)}, {"start_x", r.start_x}, {"end_x", r.end_x}});
  }
  return json_response(200, json{{"id", id},
                                 {"model", model_name},
                                 {"start_s", start},
                                 {"end_s", end},
                                 {"width", result.spectrogram.width},
                                 {"height", result.spectrogram.height},
                                 {"tick_spacing", cfg_.analyzer.tick_spacing},
                                 {"ticks", ticks},
                                 {"shift_markers", result.shift_markers},
                                 {"runs", runs},
                                 {"ticks_text", analyzer::format_ticks(result)},
                                 {"annotated_png", "/analysis/" + key + ".png"}});
}

void Service::remember_annotation(const std::string& key, std::string png) {
  std::lock_guard lock(annotations_mutex_);
  if (annotations_.count(key) != 0) {
    annotation_order_.remove(key);
  } else {
    while (annotations_.size() >= cfg_.annotation_capacity) {
      annotations_.erase(annotation_order_.back());
      annotation_order_.pop_back();
    }
  }
  annotations_[key] = std::move(png);
  annotation_order_.push_front(key);
}

Response Service::annotated_png(const std::string& key) {
  std::lock_guard lock(annotations_mutex_);
  const auto it = annotations_.find(key);
  if (it == annotations_.end()) return error_response(404, "unknown analysis '" + key + "'");
  return {200, "image/png", it->second};
}

Response Service::health() const {
  json models = json::array();
  if (svm_) models.push_back("svm");
  if (cnn_) models.push_back("cnn");
  return json_response(200, json{{"status", "ok"}, {"models", models}});
}

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.set_payload_max_length(service.config().max_upload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Post("/audio", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.upload_audio(req.body));
    });
    server.Get(R"(/audio/([0-9a-f]+)/spectrogram)", [this, send](const httplib::Request& req, httplib::Response& res) {
      auto param = [&](const char* name) -> std::optional<std::string> {
        if (!req.has_param(name)) return std::nullopt;
        return req.get_param_value(name);
      };
      send(res, service.spectrogram(req.matches[1], param("start_s"), param("end_s")));
    });
    server.Post("/analyze", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.analyze(req.body));
    });
    server.Get(R"(/analysis/([0-9a-f]+)\.png)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.annotated_png(req.matches[1]));
    });
    server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.health());
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json{{"error", message}}.dump(), "application/json");
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::pair<std::string, int> parse_listen_address(std::string_view address) {
  std::string host = "127.0.0.1";
  std::string_view port_text = address;
  if (const auto colon = address.rfind(':'); colon != std::string_view::npos) {
    host = std::string(address.substr(0, colon));
    port_text = address.substr(colon + 1);
  }
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535 || host.empty()) {
    throw ConfigError("listen address must be host:port, got '" + std::string(address) + "'");
  }
  return {host, port};
}

}  // namespace avra::service
