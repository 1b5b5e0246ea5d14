// Copyright 2026 The fivelm Authors
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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fivelm/errors.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

/// Dense real vector representing one piece of text under a named provider.
struct Embedding {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dim() const { return values.size(); }
};

/// Where an embedding row came from: scenario, layer, and field selector.
struct SourceRef {
  std::string scenario_id;
  int layer = 0;
  std::string field;

  bool operator==(const SourceRef&) const = default;
};

/// Ordered embedding rows with parallel source references. All rows share a
/// dimension and provider.
struct EmbeddingSet {
  std::vector<Embedding> rows;
  std::vector<SourceRef> source_ids;

  std::size_t size() const { return rows.size(); }

  void append(Embedding embedding, SourceRef source) {
    if (!rows.empty()) {
      if (embedding.dim() != rows.front().dim()) {
        throw DimensionMismatch("embedding set rows must share a dimension");
      }
      if (embedding.provider_id != rows.front().provider_id) {
        throw Error("embedding set rows must share a provider");
      }
    }
    rows.push_back(std::move(embedding));
    source_ids.push_back(std::move(source));
  }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace detail

/// Cosine similarity. Bitwise-identical non-zero vectors score exactly 1.0;
/// raw values are otherwise reported unclamped, so providers with signed
/// coordinates can legitimately return negatives.
inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("cosine: dims " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
  const double norm_a = detail::norm(a.values);
  const double norm_b = detail::norm(b.values);
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw ZeroNorm("cosine: zero-norm embedding");
  }
  if (a.values == b.values) {
    return 1.0;
  }
  return detail::dot(a.values, b.values) / (norm_a * norm_b);
}

inline constexpr std::size_t kLocalEmbeddingDim = 256;
inline constexpr const char* kLocalProviderId = "local-256";

/// Deterministic offline embedder: lowercase tokens split on non-alphanumeric
/// boundaries, hashed into 256 count buckets. Empty text yields the zero
/// vector; cosine raises ZeroNorm on it downstream.
inline Embedding local_embed(std::string_view text) {
  Embedding e;
  e.provider_id = kLocalProviderId;
  e.values.assign(kLocalEmbeddingDim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    e.values[detail::fnv1a64(token) % kLocalEmbeddingDim] += 1.0;
    token.clear();
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) != 0) {
      token.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return e;
}

/// Abstract embedding provider. Implementations must be deterministic per
/// (id, input text) within one cache epoch, and must preserve input order.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const std::string& id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
  /// True when identical inputs always produce identical outputs in-process.
  virtual bool deterministic() const { return false; }
};

class LocalProvider final : public EmbeddingProvider {
 public:
  const std::string& id() const override {
    static const std::string name = kLocalProviderId;
    return name;
  }
  std::size_t dim() const override { return kLocalEmbeddingDim; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(local_embed(text));
    return out;
  }
  bool deterministic() const override { return true; }
};

/// One-file embedding cache keyed by (provider id, content). Records are
/// appended; vectors are stored as little-endian 64-bit floats. The full key
/// is kept in each record, so hash collisions cannot alias entries.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;

  explicit EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
    if (!file_.empty() && std::filesystem::exists(file_)) {
      load();
    }
  }

  static constexpr char kKeySeparator = '\x1f';

  std::optional<std::vector<double>> lookup(const std::string& provider_id,
                                            const std::string& text) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(make_key(provider_id, text));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& provider_id, const std::string& text,
             const std::vector<double>& values) {
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string key = make_key(provider_id, text);
    auto [it, inserted] = entries_.emplace(key, values);
    if (!inserted) return;
    if (!file_.empty()) {
      append_record(key, values);
    }
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

  /// Provider id of the first stored record, when any exist.
  std::optional<std::string> any_provider_id() const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [key, values] : entries_) {
      const auto sep = key.find(kKeySeparator);
      if (sep != std::string::npos) return key.substr(0, sep);
    }
    return std::nullopt;
  }

  std::optional<std::size_t> dim_for(const std::string& provider_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string prefix = provider_id + kKeySeparator;
    for (const auto& [key, values] : entries_) {
      if (key.rfind(prefix, 0) == 0) return values.size();
    }
    return std::nullopt;
  }

  const std::filesystem::path& file() const { return file_; }

 private:
  static std::string make_key(const std::string& provider_id, const std::string& text) {
    return provider_id + kKeySeparator + text;
  }

  static constexpr char kMagic[8] = {'F', 'L', 'M', 'E', 'C', '0', '1', '\n'};

  void load() {
    std::ifstream input(file_, std::ios::binary);
    if (!input) {
      throw IoFailure("failed to open embedding cache: " + file_.string());
    }
    char magic[8];
    input.read(magic, sizeof(magic));
    if (input.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw IoFailure("not an embedding cache file: " + file_.string());
    }
    while (true) {
      std::uint64_t hash = 0;
      std::uint32_t key_len = 0;
      std::uint32_t dim = 0;
      input.read(reinterpret_cast<char*>(&hash), sizeof(hash));
      if (input.gcount() == 0) break;
      if (input.gcount() != sizeof(hash)) {
        throw IoFailure("truncated embedding cache record: " + file_.string());
      }
      input.read(reinterpret_cast<char*>(&key_len), sizeof(key_len));
      std::string key(key_len, '\0');
      input.read(key.data(), key_len);
      input.read(reinterpret_cast<char*>(&dim), sizeof(dim));
      std::vector<double> values(dim);
      input.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(dim * sizeof(double)));
      if (!input) {
        throw IoFailure("truncated embedding cache record: " + file_.string());
      }
      if (detail::fnv1a64(key) != hash) {
        throw IoFailure("corrupt embedding cache record: " + file_.string());
      }
      entries_[key] = std::move(values);
    }
  }

  void append_record(const std::string& key, const std::vector<double>& values) {
    const bool fresh = !std::filesystem::exists(file_) || std::filesystem::file_size(file_) == 0;
    if (auto parent = file_.parent_path(); !parent.empty()) {
      std::filesystem::create_directories(parent);
    }
    std::ofstream output(file_, std::ios::binary | std::ios::app);
    if (!output) {
      throw IoFailure("failed to open embedding cache for append: " + file_.string());
    }
    if (fresh) {
      output.write(kMagic, sizeof(kMagic));
    }
    const std::uint64_t hash = detail::fnv1a64(key);
    const auto key_len = static_cast<std::uint32_t>(key.size());
    const auto dim = static_cast<std::uint32_t>(values.size());
    output.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
    output.write(reinterpret_cast<const char*>(&key_len), sizeof(key_len));
    output.write(key.data(), key_len);
    output.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    output.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!output) {
      throw IoFailure("failed to append embedding cache record: " + file_.string());
    }
  }

  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<double>> entries_;
};

/// Write-through cache wrapper: only cache misses reach the inner provider.
class CachedProvider final : public EmbeddingProvider {
 public:
  CachedProvider(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<EmbeddingCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  const std::string& id() const override { return inner_->id(); }
  std::size_t dim() const override { return inner_->dim(); }
  bool deterministic() const override { return inner_->deterministic(); }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    std::vector<Embedding> out(texts.size());
    std::vector<std::string> misses;
    std::vector<std::size_t> miss_slots;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (auto hit = cache_->lookup(inner_->id(), texts[i])) {
        out[i] = Embedding{std::move(*hit), inner_->id()};
        ++hits_;
      } else {
        misses.push_back(texts[i]);
        miss_slots.push_back(i);
      }
    }
    if (!misses.empty()) {
      misses_ += misses.size();
      auto fetched = inner_->embed(misses);
      if (fetched.size() != misses.size()) {
        throw ProviderUnavailable("provider returned " + std::to_string(fetched.size()) +
                                  " rows for " + std::to_string(misses.size()) + " inputs");
      }
      for (std::size_t i = 0; i < fetched.size(); ++i) {
        cache_->store(inner_->id(), misses[i], fetched[i].values);
        out[miss_slots[i]] = std::move(fetched[i]);
      }
    }
    return out;
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Replays a cache without any backing provider; a miss is an error. Used for
/// offline evaluation from shipped fixture caches.
class ReplayProvider final : public EmbeddingProvider {
 public:
  explicit ReplayProvider(std::shared_ptr<EmbeddingCache> cache, std::string provider_id = "")
      : cache_(std::move(cache)), id_(std::move(provider_id)) {
    if (id_.empty()) {
      auto any = cache_->any_provider_id();
      if (!any) {
        throw ProviderUnavailable("replay cache is empty; cannot infer a provider id");
      }
      id_ = *any;
    }
    auto dim = cache_->dim_for(id_);
    if (!dim) {
      throw ProviderUnavailable("replay cache has no entries for provider '" + id_ + "'");
    }
    dim_ = *dim;
  }

  const std::string& id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  bool deterministic() const override { return true; }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      auto hit = cache_->lookup(id_, text);
      if (!hit) {
        throw ProviderUnavailable("replay cache miss for provider '" + id_ + "', text: " +
                                  text.substr(0, 80));
      }
      out.push_back(Embedding{std::move(*hit), id_});
    }
    return out;
  }

 private:
  std::shared_ptr<EmbeddingCache> cache_;
  std::string id_;
  std::size_t dim_ = 0;
};

/// Selects the text embedded per scenario: the whole flattened layer, or one
/// component's characteristics field.
struct WholeLayer {
  bool operator==(const WholeLayer&) const = default;
};

struct CharacteristicsOf {
  std::string group;
  std::size_t index = 0;

  bool operator==(const CharacteristicsOf&) const = default;
};

using FieldSelector = std::variant<WholeLayer, CharacteristicsOf>;

inline std::string field_selector_name(const FieldSelector& field) {
  if (std::holds_alternative<WholeLayer>(field)) return "layer";
  const auto& sel = std::get<CharacteristicsOf>(field);
  return "characteristics(" + sel.group + "[" + std::to_string(sel.index) + "])";
}

inline std::string resolve_field_text(const Scenario& s, int k, const FieldSelector& field) {
  if (std::holds_alternative<WholeLayer>(field)) {
    return layer_text(s, k);
  }
  const auto& sel = std::get<CharacteristicsOf>(field);
  if (!s.layer(k).is_structured()) {
    throw EmptyField("scenario '" + s.id + "' layer " + std::to_string(k) +
                     " has no component groups");
  }
  const auto* components = s.layer(k).structured().find(sel.group);
  if (components == nullptr || sel.index >= components->size()) {
    throw EmptyField("scenario '" + s.id + "' has no component " + sel.group + "[" +
                     std::to_string(sel.index) + "] in layer " + std::to_string(k));
  }
  const std::string& text = (*components)[sel.index].characteristics;
  if (text.empty()) {
    throw EmptyField("scenario '" + s.id + "' component " + sel.group + "[" +
                     std::to_string(sel.index) + "] has empty characteristics");
  }
  return text;
}

/// Embeds one field of layer k across a corpus, one row per scenario in input
/// order.
inline EmbeddingSet embed_corpus(EmbeddingProvider& provider, const std::vector<Scenario>& scenarios,
                                 int k, const FieldSelector& field = WholeLayer{}) {
  std::vector<std::string> texts;
  texts.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    texts.push_back(resolve_field_text(s, k, field));
  }
  auto rows = provider.embed(texts);
  if (rows.size() != texts.size()) {
    throw ProviderUnavailable("provider returned " + std::to_string(rows.size()) + " rows for " +
                              std::to_string(texts.size()) + " inputs");
  }
  EmbeddingSet set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.append(std::move(rows[i]), SourceRef{scenarios[i].id, k, field_selector_name(field)});
  }
  return set;
}

}  // namespace fivelm
