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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fivelm/embedding.hpp"
#include "fivelm/errors.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

enum class CorpusRole { kReference, kGenerated };

inline std::string to_string(CorpusRole role) {
  return role == CorpusRole::kReference ? "reference" : "generated";
}

inline CorpusRole corpus_role_from_string(std::string_view text) {
  if (text == "reference") return CorpusRole::kReference;
  if (text == "generated") return CorpusRole::kGenerated;
  throw Error("unknown corpus role: " + std::string(text));
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream input(path, std::ios::binary);
  if (!input) {
    throw IoFailure("failed to open file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << input.rdbuf();
  return buffer.str();
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (auto parent = path.parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream output(tmp, std::ios::binary | std::ios::trunc);
    if (!output) {
      throw IoFailure("failed to open file for writing: " + tmp.string());
    }
    output << content;
    if (!output) {
      throw IoFailure("failed to write file: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoFailure("failed to replace " + path.string() + ": " + ec.message());
  }
}

inline std::string checksum(std::string_view content) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return std::string("fnv1a64:") + hex;
}

/// Replaces every byte unsafe in a filename with '_'.
inline std::string sanitize_id(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out.push_back(safe ? c : '_');
  }
  return out.empty() ? "scenario" : out;
}

}  // namespace detail

struct ManifestEntry {
  std::string id;
  std::string file;
  std::string role;
  std::string checksum;
};

/// JSON array of {id, file, role, checksum}; file paths are relative to the
/// manifest's directory.
struct Manifest {
  std::vector<ManifestEntry> entries;

  static Manifest from_json(const json& doc) {
    if (!doc.is_array()) {
      throw MalformedDocument("manifest must be a JSON array");
    }
    Manifest m;
    for (const auto& item : doc) {
      if (!item.is_object()) {
        throw MalformedDocument("manifest entries must be objects");
      }
      ManifestEntry entry;
      entry.id = item.value("id", std::string{});
      entry.file = item.value("file", std::string{});
      entry.role = item.value("role", std::string{});
      entry.checksum = item.value("checksum", std::string{});
      if (entry.id.empty() || entry.file.empty() || entry.role.empty()) {
        throw MalformedDocument("manifest entry requires id, file, role");
      }
      m.entries.push_back(std::move(entry));
    }
    return m;
  }

  json to_json() const {
    json doc = json::array();
    for (const auto& entry : entries) {
      json item;
      item["id"] = entry.id;
      item["file"] = entry.file;
      item["role"] = entry.role;
      item["checksum"] = entry.checksum;
      doc.push_back(std::move(item));
    }
    return doc;
  }

  static Manifest load(const std::filesystem::path& path) {
    json doc;
    try {
      doc = json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedDocument("manifest " + path.string() + ": " + e.what());
    }
    return from_json(doc);
  }

  void save(const std::filesystem::path& path) const {
    detail::write_file_atomic(path, to_json().dump(2) + "\n");
  }
};

struct Corpus {
  CorpusRole role = CorpusRole::kReference;
  std::vector<Scenario> scenarios;
  std::filesystem::path manifest_path;
};

/// Detects the structure mode of a scenario document on disk: string layers
/// are unstructured, anything else is hard.
inline StructureMode detect_mode(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(e.what());
  }
  if (doc.is_object() && doc.contains("L1") && !doc.at("L1").is_string()) {
    return StructureMode::kHard;
  }
  return StructureMode::kUnstructured;
}

/// Loads a corpus through its manifest. Checksums are verified before parsing
/// and nothing is returned unless every file loads, so a corrupt corpus never
/// surfaces partially.
inline Corpus load_corpus(const std::filesystem::path& manifest_path, const Taxonomy& taxonomy,
                          std::optional<StructureMode> mode_hint = std::nullopt) {
  const Manifest manifest = Manifest::load(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();

  Corpus corpus;
  corpus.manifest_path = manifest_path;
  std::optional<CorpusRole> role;
  std::set<std::string> ids;
  for (const auto& entry : manifest.entries) {
    const std::filesystem::path file = base / entry.file;
    const std::string content = detail::read_file(file);
    if (!entry.checksum.empty() && detail::checksum(content) != entry.checksum) {
      throw ChecksumMismatch("checksum mismatch for " + file.string() + " (manifest " +
                             entry.checksum + ", actual " + detail::checksum(content) + ")");
    }
    const StructureMode mode = mode_hint.value_or(detect_mode(content));
    Scenario s;
    try {
      s = parse_scenario(content, mode, taxonomy);
    } catch (const SchemaViolation& e) {
      throw SchemaViolation(file.string() + ": " + e.path(), e.what());
    } catch (const MalformedDocument& e) {
      throw MalformedDocument(file.string() + ": " + e.what());
    }
    if (s.id.empty()) {
      s.id = entry.id;
    }
    if (s.id != entry.id) {
      throw SchemaViolation(file.string(), "scenario id '" + s.id +
                                               "' does not match manifest id '" + entry.id + "'");
    }
    if (!ids.insert(s.id).second) {
      throw SchemaViolation(file.string(), "duplicate scenario id '" + s.id + "'");
    }
    const CorpusRole entry_role = corpus_role_from_string(entry.role);
    if (role && *role != entry_role) {
      throw SchemaViolation(file.string(), "mixed corpus roles in one manifest");
    }
    role = entry_role;
    corpus.scenarios.push_back(std::move(s));
  }
  corpus.role = role.value_or(CorpusRole::kReference);
  return corpus;
}

/// Persists a batch of generated scenarios under dir, one file per scenario,
/// then updates dir/manifest.json atomically. Duplicate ids, either inside the
/// batch or against the existing manifest, reject the whole batch before any
/// write happens.
inline Manifest save_generated(const std::vector<Scenario>& batch,
                               const std::filesystem::path& dir,
                               CorpusRole role = CorpusRole::kGenerated) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  Manifest manifest;
  if (std::filesystem::exists(manifest_path)) {
    manifest = Manifest::load(manifest_path);
  }
  if (batch.empty()) {
    return manifest;
  }

  std::set<std::string> ids;
  for (const auto& entry : manifest.entries) {
    ids.insert(entry.id);
  }
  for (const auto& s : batch) {
    if (s.id.empty()) {
      throw SchemaViolation("id", "generated scenarios require a non-empty id");
    }
    if (!ids.insert(s.id).second) {
      throw SchemaViolation("id", "duplicate scenario id '" + s.id + "'");
    }
  }

  std::filesystem::create_directories(dir);
  for (const auto& s : batch) {
    const std::string content = serialize_scenario(s) + "\n";
    const std::string file = detail::sanitize_id(s.id) + ".json";
    detail::write_file_atomic(dir / file, content);
    manifest.entries.push_back(
        ManifestEntry{s.id, file, to_string(role), detail::checksum(content)});
  }
  manifest.save(manifest_path);
  return manifest;
}

}  // namespace fivelm
