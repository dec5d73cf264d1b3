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

// Small cached corpora shared by the test suites.

#pragma once

#include <map>
#include <mutex>

#include "avra/dataset.hpp"
#include "avra/dsp.hpp"

namespace avra::fixture {

inline const dataset::SyntheticCorpus& corpus(std::size_t per_class, std::uint64_t seed = 7) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::uint64_t>, dataset::SyntheticCorpus> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({per_class, seed});
  if (it == cache.end()) {
    dataset::SyntheticCorpusConfig cfg;
    cfg.per_class = per_class;
    cfg.seed = seed;
    it = cache.emplace(std::pair{per_class, seed}, dataset::generate_synthetic_corpus(cfg, dsp::MelRenderer())).first;
  }
  return it->second;
}

/// Standardized samples of a corpus; `augment` adds the six variants.
inline std::vector<dataset::Sample> samples(const dataset::SyntheticCorpus& c, std::span<const std::size_t> indices,
                                            bool augment, std::vector<std::size_t>* groups = nullptr) {
  const auto labels = c.manifest.labels();
  return dataset::make_samples(c.images, labels, indices, augment, groups);
}

inline std::vector<std::size_t> all_indices(const dataset::SyntheticCorpus& c) {
  std::vector<std::size_t> out(c.images.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

}  // namespace avra::fixture
