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

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fivelm/errors.hpp"

namespace fivelm {

using json = nlohmann::ordered_json;

inline constexpr int kLayerCount = 5;

/// How a scenario document represents its five layers.
///   unstructured : each layer is one free-text string
///   soft         : free text, written against per-layer guidance prompts
///   hard         : each layer is a schema-checked list of typed components
enum class StructureMode { kUnstructured, kSoft, kHard };

enum class ContextMode { kIndependent, kShared };

inline std::string to_string(StructureMode mode) {
  switch (mode) {
    case StructureMode::kUnstructured:
      return "unstructured";
    case StructureMode::kSoft:
      return "soft";
    case StructureMode::kHard:
      return "hard";
  }
  return "unstructured";
}

inline std::string to_string(ContextMode mode) {
  return mode == ContextMode::kIndependent ? "independent" : "shared";
}

inline StructureMode structure_mode_from_string(std::string_view text) {
  if (text == "unstructured") return StructureMode::kUnstructured;
  if (text == "soft") return StructureMode::kSoft;
  if (text == "hard") return StructureMode::kHard;
  throw Error("unknown structure mode: " + std::string(text));
}

inline ContextMode context_mode_from_string(std::string_view text) {
  if (text == "independent") return ContextMode::kIndependent;
  if (text == "shared") return ContextMode::kShared;
  throw Error("unknown context mode: " + std::string(text));
}

namespace detail {

inline std::string trim(std::string_view raw) {
  std::size_t begin = 0;
  while (begin < raw.size() && std::isspace(static_cast<unsigned char>(raw[begin])) != 0) {
    ++begin;
  }
  std::size_t end = raw.size();
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1])) != 0) {
    --end;
  }
  return std::string(raw.substr(begin, end - begin));
}

inline std::string to_lower(std::string value) {
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return value;
}

/// Collapses whitespace runs to single spaces and trims both ends.
inline std::string normalize_whitespace(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool in_gap = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      in_gap = true;
      continue;
    }
    if (in_gap && !out.empty()) {
      out.push_back(' ');
    }
    in_gap = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Declared component groups per layer, in serialization order.
inline const std::vector<std::string>& layer_groups(int layer) {
  static const std::array<std::vector<std::string>, kLayerCount> groups = {{
      {"roads", "guidance"},
      {"environment", "structures"},
      {"objects"},
      {"objects"},
      {"weather", "illumination"},
  }};
  if (layer < 1 || layer > kLayerCount) {
    throw Error("layer index out of range: " + std::to_string(layer));
  }
  return groups[static_cast<std::size_t>(layer - 1)];
}

/// Motion is a dynamic-object attribute; only layer 4 components may carry it.
inline bool layer_allows_motion(int layer) { return layer == 4; }

/// Single-group layers (L3, L4) serialize their component list as a bare
/// array; multi-group layers as an object of group name to array.
inline bool layer_serializes_as_array(int layer) { return layer_groups(layer).size() == 1; }

/// One typed object inside a structured layer. `category` is stored under the
/// JSON field name "type".
struct Component {
  std::string category;
  std::string characteristics;
  std::optional<std::string> position;
  std::optional<std::string> motion;
  std::map<std::string, std::string> extras;

  bool operator==(const Component&) const = default;
};

/// Hard-mode layer body: every group declared for the layer, in template
/// order, each holding the parsed components.
struct StructuredBody {
  std::vector<std::pair<std::string, std::vector<Component>>> groups;

  const std::vector<Component>* find(std::string_view group) const {
    for (const auto& [name, components] : groups) {
      if (name == group) return &components;
    }
    return nullptr;
  }

  std::vector<Component>* find(std::string_view group) {
    for (auto& [name, components] : groups) {
      if (name == group) return &components;
    }
    return nullptr;
  }

  bool operator==(const StructuredBody&) const = default;
};

struct Layer {
  int index = 0;
  std::variant<std::string, StructuredBody> body;

  bool is_structured() const { return std::holds_alternative<StructuredBody>(body); }
  const std::string& text() const { return std::get<std::string>(body); }
  const StructuredBody& structured() const { return std::get<StructuredBody>(body); }
  StructuredBody& structured() { return std::get<StructuredBody>(body); }

  bool operator==(const Layer&) const = default;
};

/// Records the generation axes of an edited scenario.
struct Provenance {
  std::string source_id;
  int edited_layer = 0;
  StructureMode strategy = StructureMode::kUnstructured;
  ContextMode context_mode = ContextMode::kIndependent;
  std::string model_id;
  double temperature = 1.0;
  std::string created_at;

  bool operator==(const Provenance&) const = default;
};

/// One driving scene as exactly five layers. Immutable by convention once
/// parsed or validated; all free functions below treat it as a value.
struct Scenario {
  std::string id;
  StructureMode mode = StructureMode::kUnstructured;
  std::array<Layer, kLayerCount> layers;
  std::optional<Provenance> provenance;

  const Layer& layer(int k) const { return layers.at(static_cast<std::size_t>(k - 1)); }
  Layer& layer(int k) { return layers.at(static_cast<std::size_t>(k - 1)); }

  bool operator==(const Scenario&) const = default;
};

/// Category lists per (layer, group). A missing entry means the group's
/// category is free text and component-count metrics do not apply to it.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// Built-in defaults. The L4 object list is the canonical one; the category
  /// lists for L1, L2 and L5 are configuration placeholders meant to be
  /// overridden from a taxonomy file when a deployment needs its own enums.
  static const Taxonomy& defaults() {
    static const Taxonomy instance = [] {
      Taxonomy t;
      t.set(1, "roads",
            {"highway", "urban road", "rural road", "intersection", "roundabout", "parking area",
             "other"});
      t.set(1, "guidance", {"traffic light", "traffic sign", "road marking", "barrier", "other"});
      t.set(2, "environment",
            {"urban", "suburban", "rural", "industrial", "forest", "open field", "other"});
      t.set(2, "structures",
            {"building", "bridge", "tunnel", "wall", "fence", "vegetation", "street furniture",
             "other"});
      t.set(4, "objects", {"vehicle", "cyclist", "pedestrian", "animal", "inanimate object", "other"});
      t.set(5, "weather", {"clear", "cloudy", "rain", "snow", "fog", "other"});
      t.set(5, "illumination", {"daylight", "twilight", "night", "artificial lighting", "other"});
      return t;
    }();
    return instance;
  }

  void set(int layer, const std::string& group, std::vector<std::string> categories) {
    if (categories.empty()) {
      throw Error("taxonomy list for layer " + std::to_string(layer) + " group '" + group +
                  "' must not be empty");
    }
    std::set<std::string> seen;
    for (const auto& category : categories) {
      if (!seen.insert(detail::to_lower(detail::trim(category))).second) {
        throw Error("duplicate taxonomy category '" + category + "' in layer " +
                    std::to_string(layer) + " group '" + group + "'");
      }
    }
    entries_[{layer, group}] = std::move(categories);
  }

  const std::vector<std::string>* categories(int layer, const std::string& group) const {
    auto it = entries_.find({layer, group});
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Case-insensitive, whitespace-trimmed category lookup. Returns the
  /// canonical taxonomy entry, or nullopt when no entry matches.
  std::optional<std::string> match(int layer, const std::string& group,
                                   std::string_view category) const {
    const auto* list = categories(layer, group);
    if (list == nullptr) return std::nullopt;
    const std::string needle = detail::to_lower(detail::trim(category));
    for (const auto& entry : *list) {
      if (detail::to_lower(detail::trim(entry)) == needle) return entry;
    }
    return std::nullopt;
  }

  /// File format: {"L4": {"objects": ["vehicle", ...]}, ...}
  static Taxonomy from_json(const json& doc) {
    if (!doc.is_object()) {
      throw MalformedDocument("taxonomy document must be a JSON object");
    }
    Taxonomy t;
    for (const auto& [layer_key, groups] : doc.items()) {
      const int layer = parse_layer_key(layer_key);
      if (!groups.is_object()) {
        throw MalformedDocument("taxonomy entry '" + layer_key + "' must be an object");
      }
      for (const auto& [group, list] : groups.items()) {
        if (!list.is_array()) {
          throw MalformedDocument("taxonomy list '" + layer_key + "." + group +
                                  "' must be an array");
        }
        std::vector<std::string> categories;
        for (const auto& item : list) {
          if (!item.is_string()) {
            throw MalformedDocument("taxonomy categories in '" + layer_key + "." + group +
                                    "' must be strings");
          }
          categories.push_back(item.get<std::string>());
        }
        t.set(layer, group, std::move(categories));
      }
    }
    return t;
  }

  static Taxonomy load_file(const std::string& path) {
    std::ifstream input(path);
    if (!input) {
      throw IoFailure("failed to open taxonomy file: " + path);
    }
    json doc;
    try {
      input >> doc;
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedDocument("taxonomy file " + path + ": " + e.what());
    }
    return from_json(doc);
  }

  json to_json() const {
    json doc = json::object();
    for (const auto& [key, list] : entries_) {
      doc["L" + std::to_string(key.first)][key.second] = list;
    }
    return doc;
  }

 private:
  static int parse_layer_key(const std::string& key) {
    std::string digits = key;
    if (!digits.empty() && (digits[0] == 'L' || digits[0] == 'l')) {
      digits.erase(0, 1);
    }
    if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5') {
      return digits[0] - '0';
    }
    throw MalformedDocument("taxonomy layer key must be L1..L5, got '" + key + "'");
  }

  std::map<std::pair<int, std::string>, std::vector<std::string>> entries_;
};

namespace detail {

inline std::string layer_key(int k) { return "L" + std::to_string(k); }

inline std::string join_groups(const std::vector<std::string>& groups) {
  std::string out = "[";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i > 0) out += ", ";
    out += groups[i];
  }
  return out + "]";
}

inline std::string extra_value_to_string(const json& value) {
  return value.is_string() ? value.get<std::string>() : value.dump();
}

inline Component parse_component(const json& value, int layer, const std::string& group,
                                 std::size_t index, const Taxonomy& taxonomy,
                                 const std::string& path) {
  if (!value.is_object()) {
    throw SchemaViolation(path, "component must be a JSON object");
  }
  Component component;
  bool saw_type = false;
  bool saw_characteristics = false;
  for (const auto& [key, field] : value.items()) {
    if (key == "type") {
      if (!field.is_string()) {
        throw SchemaViolation(path + ".type", "must be a string");
      }
      component.category = trim(field.get<std::string>());
      saw_type = true;
    } else if (key == "characteristics") {
      if (!field.is_string()) {
        throw SchemaViolation(path + ".characteristics", "must be a string");
      }
      component.characteristics = trim(field.get<std::string>());
      saw_characteristics = true;
    } else if (key == "position") {
      if (!field.is_string()) {
        throw SchemaViolation(path + ".position", "must be a string");
      }
      component.position = field.get<std::string>();
    } else if (key == "motion") {
      if (!field.is_string()) {
        throw SchemaViolation(path + ".motion", "must be a string");
      }
      if (!layer_allows_motion(layer)) {
        throw SchemaViolation(path + ".motion",
                              "motion is only permitted on layer 4 components");
      }
      component.motion = field.get<std::string>();
    } else {
      component.extras[key] = extra_value_to_string(field);
    }
  }
  if (!saw_type) {
    throw SchemaViolation(path + ".type", "is required");
  }
  if (component.category.empty()) {
    throw SchemaViolation(path + ".type", "must be non-empty");
  }
  if (!saw_characteristics || component.characteristics.empty()) {
    throw SchemaViolation(path + ".characteristics", "is required and must be non-empty");
  }
  if (const auto* list = taxonomy.categories(layer, group)) {
    auto canonical = taxonomy.match(layer, group, component.category);
    if (!canonical) {
      std::string allowed;
      for (const auto& entry : *list) {
        if (!allowed.empty()) allowed += ", ";
        allowed += entry;
      }
      throw SchemaViolation(path + ".category", "'" + component.category +
                                                    "' is not one of [" + allowed + "]");
    }
    component.category = *canonical;
  }
  (void)index;
  return component;
}

inline StructuredBody parse_structured_layer(const json& value, int layer,
                                             const Taxonomy& taxonomy) {
  const auto& declared = layer_groups(layer);
  const std::string base = "layers[" + std::to_string(layer) + "]";

  StructuredBody body;
  for (const auto& group : declared) {
    body.groups.emplace_back(group, std::vector<Component>{});
  }

  auto parse_group_array = [&](const std::string& group, const json& items) {
    if (!items.is_array()) {
      throw SchemaViolation(base + "." + group, "must be an array of components");
    }
    auto* slot = body.find(group);
    std::size_t index = 0;
    for (const auto& item : items) {
      const std::string path = base + "." + group + "[" + std::to_string(index) + "]";
      slot->push_back(parse_component(item, layer, group, index, taxonomy, path));
      ++index;
    }
  };

  if (value.is_array()) {
    if (declared.size() != 1) {
      throw SchemaViolation(base, "layer has groups " + join_groups(declared) +
                                      " and must be an object, not an array");
    }
    parse_group_array(declared.front(), value);
    return body;
  }
  if (value.is_object()) {
    for (const auto& [group, items] : value.items()) {
      if (body.find(group) == nullptr) {
        throw SchemaViolation(base + "." + group, "unknown group; expected one of " +
                                                      join_groups(declared));
      }
      parse_group_array(group, items);
    }
    return body;
  }
  throw SchemaViolation(base, "hard-mode layer must be an object of groups or a component array");
}

inline Provenance parse_provenance(const json& value) {
  if (!value.is_object()) {
    throw SchemaViolation("provenance", "must be an object");
  }
  Provenance p;
  bool saw_source = false, saw_layer = false, saw_strategy = false, saw_context = false,
       saw_model = false, saw_temperature = false, saw_created = false;
  for (const auto& [key, field] : value.items()) {
    if (key == "source_id" && field.is_string()) {
      p.source_id = field.get<std::string>();
      saw_source = true;
    } else if (key == "edited_layer" && field.is_number_integer()) {
      p.edited_layer = field.get<int>();
      saw_layer = true;
    } else if (key == "strategy" && field.is_string()) {
      p.strategy = structure_mode_from_string(field.get<std::string>());
      saw_strategy = true;
    } else if (key == "context_mode" && field.is_string()) {
      p.context_mode = context_mode_from_string(field.get<std::string>());
      saw_context = true;
    } else if (key == "model_id" && field.is_string()) {
      p.model_id = field.get<std::string>();
      saw_model = true;
    } else if (key == "temperature" && field.is_number()) {
      p.temperature = field.get<double>();
      saw_temperature = true;
    } else if (key == "created_at" && field.is_string()) {
      p.created_at = field.get<std::string>();
      saw_created = true;
    } else {
      throw SchemaViolation("provenance." + key, "unknown or mistyped field");
    }
  }
  if (!saw_source || !saw_layer || !saw_strategy || !saw_context || !saw_model ||
      !saw_temperature || !saw_created) {
    throw SchemaViolation("provenance",
                          "requires source_id, edited_layer, strategy, context_mode, model_id, "
                          "temperature, created_at");
  }
  if (p.edited_layer < 1 || p.edited_layer > kLayerCount) {
    throw SchemaViolation("provenance.edited_layer", "must be in 1..5");
  }
  return p;
}

inline json provenance_to_json(const Provenance& p) {
  json out;
  out["source_id"] = p.source_id;
  out["edited_layer"] = p.edited_layer;
  out["strategy"] = to_string(p.strategy);
  out["context_mode"] = to_string(p.context_mode);
  out["model_id"] = p.model_id;
  out["temperature"] = p.temperature;
  out["created_at"] = p.created_at;
  return out;
}

inline json component_to_json(const Component& c) {
  json out;
  out["type"] = c.category;
  out["characteristics"] = c.characteristics;
  if (c.position) out["position"] = *c.position;
  if (c.motion) out["motion"] = *c.motion;
  for (const auto& [key, value] : c.extras) {
    out[key] = value;
  }
  return out;
}

}  // namespace detail

/// Re-checks every type invariant on an already-built scenario. Generated
/// scenarios go through the same gate as parsed ones.
inline void validate_scenario(const Scenario& s, const Taxonomy& taxonomy) {
  for (int k = 1; k <= kLayerCount; ++k) {
    const Layer& layer = s.layer(k);
    if (layer.index != k) {
      throw SchemaViolation("layers[" + std::to_string(k) + "]",
                            "layer index " + std::to_string(layer.index) + " out of place");
    }
    const bool structured = layer.is_structured();
    if (structured != (s.mode == StructureMode::kHard)) {
      throw SchemaViolation("layers[" + std::to_string(k) + "]",
                            "layer body does not match scenario mode " + to_string(s.mode));
    }
    if (!structured) continue;

    const auto& declared = layer_groups(k);
    const StructuredBody& body = layer.structured();
    if (body.groups.size() != declared.size()) {
      throw SchemaViolation("layers[" + std::to_string(k) + "]",
                            "expected groups " + detail::join_groups(declared));
    }
    for (std::size_t g = 0; g < declared.size(); ++g) {
      if (body.groups[g].first != declared[g]) {
        throw SchemaViolation("layers[" + std::to_string(k) + "]." + body.groups[g].first,
                              "unknown group; expected one of " + detail::join_groups(declared));
      }
      const auto& components = body.groups[g].second;
      for (std::size_t i = 0; i < components.size(); ++i) {
        const std::string path = "layers[" + std::to_string(k) + "]." + declared[g] + "[" +
                                 std::to_string(i) + "]";
        const Component& c = components[i];
        if (c.category.empty()) {
          throw SchemaViolation(path + ".type", "must be non-empty");
        }
        if (c.characteristics.empty()) {
          throw SchemaViolation(path + ".characteristics", "is required and must be non-empty");
        }
        if (c.motion && !layer_allows_motion(k)) {
          throw SchemaViolation(path + ".motion",
                                "motion is only permitted on layer 4 components");
        }
        if (taxonomy.categories(k, declared[g]) != nullptr &&
            !taxonomy.match(k, declared[g], c.category)) {
          throw SchemaViolation(path + ".category",
                                "'" + c.category + "' is not a taxonomy entry");
        }
      }
    }
  }
  if (s.provenance && (s.provenance->edited_layer < 1 || s.provenance->edited_layer > kLayerCount)) {
    throw SchemaViolation("provenance.edited_layer", "must be in 1..5");
  }
}

/// Parses one scenario document. Unknown component fields are preserved in
/// extras; anything else unknown is rejected with a path-qualified violation.
inline Scenario parse_scenario(const std::string& document, StructureMode mode,
                               const Taxonomy& taxonomy) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(e.what());
  }
  if (!doc.is_object()) {
    throw MalformedDocument("scenario document must be a JSON object");
  }

  Scenario s;
  s.mode = mode;
  std::array<bool, kLayerCount> seen{};

  for (const auto& [key, value] : doc.items()) {
    if (key == "id") {
      if (!value.is_string()) {
        throw SchemaViolation("id", "must be a string");
      }
      s.id = value.get<std::string>();
      continue;
    }
    if (key == "provenance") {
      s.provenance = detail::parse_provenance(value);
      continue;
    }
    if (key.size() == 2 && key[0] == 'L' && key[1] >= '1' && key[1] <= '5') {
      const int k = key[1] - '0';
      seen[static_cast<std::size_t>(k - 1)] = true;
      Layer& layer = s.layer(k);
      layer.index = k;
      if (mode == StructureMode::kHard) {
        layer.body = detail::parse_structured_layer(value, k, taxonomy);
      } else {
        if (!value.is_string()) {
          throw SchemaViolation("layers[" + std::to_string(k) + "]",
                                "must be a string in " + to_string(mode) + " mode");
        }
        layer.body = value.get<std::string>();
      }
      continue;
    }
    throw SchemaViolation(key, "unknown field; expected id, L1..L5, provenance");
  }

  for (int k = 1; k <= kLayerCount; ++k) {
    if (!seen[static_cast<std::size_t>(k - 1)]) {
      throw SchemaViolation("layers[" + std::to_string(k) + "]", "missing layer L" +
                                                                     std::to_string(k));
    }
  }
  validate_scenario(s, taxonomy);
  return s;
}

/// Canonical serialization: id, L1..L5 (groups in template order, empty groups
/// explicit), provenance last. Output re-parses to an equal scenario and the
/// second serialize pass is byte-stable.
inline std::string serialize_scenario(const Scenario& s) {
  json doc;
  if (!s.id.empty()) {
    doc["id"] = s.id;
  }
  for (int k = 1; k <= kLayerCount; ++k) {
    const Layer& layer = s.layer(k);
    if (!layer.is_structured()) {
      doc[detail::layer_key(k)] = layer.text();
      continue;
    }
    const StructuredBody& body = layer.structured();
    if (layer_serializes_as_array(k)) {
      json items = json::array();
      for (const auto& component : body.groups.front().second) {
        items.push_back(detail::component_to_json(component));
      }
      doc[detail::layer_key(k)] = std::move(items);
    } else {
      json groups = json::object();
      for (const auto& [name, components] : body.groups) {
        json items = json::array();
        for (const auto& component : components) {
          items.push_back(detail::component_to_json(component));
        }
        groups[name] = std::move(items);
      }
      doc[detail::layer_key(k)] = std::move(groups);
    }
  }
  if (s.provenance) {
    doc["provenance"] = detail::provenance_to_json(*s.provenance);
  }
  return doc.dump(2);
}

/// Deterministic flattening of layer k to comparable text. Free-text layers
/// come back verbatim; structured layers emit one line per component:
///   "group: category — characteristics (position; motion)"
inline std::string layer_text(const Scenario& s, int k) {
  if (k < 1 || k > kLayerCount) {
    throw Error("layer index out of range: " + std::to_string(k));
  }
  const Layer& layer = s.layer(k);
  if (!layer.is_structured()) {
    return layer.text();
  }
  std::string out;
  for (const auto& [group, components] : layer.structured().groups) {
    for (const auto& c : components) {
      if (!out.empty()) out += "\n";
      out += group + ": " + c.category + " — " + c.characteristics;
      if (c.position || c.motion) {
        out += " (";
        if (c.position) out += *c.position;
        if (c.position && c.motion) out += "; ";
        if (c.motion) out += *c.motion;
        out += ")";
      }
    }
  }
  return out;
}

/// Full-scenario text: the five layer texts joined with a blank line.
inline std::string concat_layers(const Scenario& s) {
  std::string out;
  for (int k = 1; k <= kLayerCount; ++k) {
    if (k > 1) out += "\n\n";
    out += layer_text(s, k);
  }
  return out;
}

/// Indices of layers whose flattened text differs after whitespace
/// normalization. Both scenarios must share a structure mode.
inline std::set<int> diff_layers(const Scenario& original, const Scenario& candidate) {
  if (original.mode != candidate.mode) {
    throw ModeMismatch("cannot diff scenarios in modes " + to_string(original.mode) + " and " +
                       to_string(candidate.mode));
  }
  std::set<int> changed;
  for (int k = 1; k <= kLayerCount; ++k) {
    if (detail::normalize_whitespace(layer_text(original, k)) !=
        detail::normalize_whitespace(layer_text(candidate, k))) {
      changed.insert(k);
    }
  }
  return changed;
}

}  // namespace fivelm
