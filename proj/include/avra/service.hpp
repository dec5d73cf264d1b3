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

#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "avra/analyzer.hpp"
#include "avra/audio_io.hpp"
#include "avra/dsp.hpp"

namespace avra::service {

struct Session {
  std::string id;
  audio::AudioBuffer buffer;
  /// Grayscale PNG of the whole clip, rendered at upload.
  std::string full_spectrogram_png;
};

/// Thread-safe id -> session map with least-recently-used eviction.
class SessionStore {
 public:
  explicit SessionStore(std::size_t capacity = 32);

  /// Stores the session under a fresh id, evicting the least recently used
  /// entry when full, and returns the id.
  std::string insert(audio::AudioBuffer buffer, std::string full_spectrogram_png);
  /// nullptr when absent. A hit refreshes the entry's recency.
  std::shared_ptr<const Session> get(const std::string& id);

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t capacity() const { return capacity_; }

 private:
  using Lru = std::list<std::string>;
  struct Entry {
    std::shared_ptr<const Session> session;
    Lru::iterator position;
  };

  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::uint64_t counter_ = 0;
  Lru lru_;
  std::unordered_map<std::string, Entry> entries_;
};

struct ServiceConfig {
  std::size_t max_upload_bytes = 50u * 1024u * 1024u;
  std::size_t session_capacity = 32;
  std::size_t annotation_capacity = 64;
  dsp::StftConfig stft;
  dsp::MelConfig mel;
  analyzer::AnalyzerConfig analyzer;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request handlers. Models are fixed at
/// construction; all handlers may be called concurrently.
class Service {
 public:
  Service(ServiceConfig cfg, std::shared_ptr<const analyzer::RegisterClassifier> svm,
          std::shared_ptr<const analyzer::RegisterClassifier> cnn);

  /// POST /audio with a WAV body.
  Response upload_audio(std::string_view body);
  /// GET /audio/{id}/spectrogram?start_s=&end_s= (both optional).
  Response spectrogram(const std::string& id, const std::optional<std::string>& start_s,
                       const std::optional<std::string>& end_s);
  /// POST /analyze with {"id", "start_s", "end_s", "model"}.
  Response analyze(std::string_view json_body);
  /// GET /analysis/{key}.png
  Response annotated_png(const std::string& key);
  /// GET /health
  Response health() const;

  [[nodiscard]] const ServiceConfig& config() const { return cfg_; }
  [[nodiscard]] SessionStore& sessions() { return sessions_; }

 private:
  void remember_annotation(const std::string& key, std::string png);

  ServiceConfig cfg_;
  dsp::MelRenderer renderer_;
  std::shared_ptr<const analyzer::RegisterClassifier> svm_;
  std::shared_ptr<const analyzer::RegisterClassifier> cnn_;
  SessionStore sessions_;

  std::mutex annotations_mutex_;
  std::list<std::string> annotation_order_;
  std::map<std::string, std::string> annotations_;
};

/// HTTP front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; a bare port binds 127.0.0.1.
std::pair<std::string, int> parse_listen_address(std::string_view address);

}  // namespace avra::service
