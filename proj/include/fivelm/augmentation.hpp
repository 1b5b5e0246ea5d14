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
#include <chrono>
#include <ctime>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fivelm/corpus.hpp"
#include "fivelm/errors.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

/// The layer-agnostic edit instruction used in unstructured mode.
inline constexpr const char* kOnlyModifyInstruction =
    "Please only modify the layer specified in the prompt to generate an Edge Case and change "
    "nothing in the other layers (MOST IMPORTANT)";

/// Sentinel line separating variants in shared-context replies.
inline constexpr const char* kVariantDelimiter = "-----NEXT SCENARIO-----";

inline constexpr const char* kDefaultSystemPrompt =
    "You are a driving scenario engineer. Scenes are described in a five-layer model:\n"
    "  L1 - road structures: geometry, lanes, junctions and the built road surface.\n"
    "  L2 - structures surrounding the road: buildings, vegetation, street furniture.\n"
    "  L3 - temporary changes to L1 and L2: roadworks, temporary signage, short-lived "
    "obstructions.\n"
    "  L4 - dynamic objects: vehicles, pedestrians, cyclists, animals, and their motion.\n"
    "  L5 - environmental conditions: weather and illumination.\n"
    "An Edge Case is a scenario that is rare or unexpected relative to a reference set of known "
    "scenarios: objects, agents or behaviours one would not expect in a normal everyday "
    "situation. Edits must stay physically plausible. When asked to edit one layer, change only "
    "that layer and preserve every other layer exactly.";

/// One edit job: n variants of one source scenario, editing one layer.
struct EditRequest {
  Scenario source;
  int target_layer = 4;
  StructureMode structure_mode = StructureMode::kUnstructured;
  ContextMode context_mode = ContextMode::kIndependent;
  int n_variants = 1;
  double temperature = 1.0;
};

/// Per-layer task texts used by the soft and hard editing strategies. The L4
/// entry is the canonical task; the others are editable defaults, replaceable
/// from a task file.
class TaskLibrary {
 public:
  TaskLibrary() = default;

  static const TaskLibrary& defaults() {
    static const TaskLibrary instance = [] {
      TaskLibrary t;
      t.set(1,
            "Turn this scenario into an Edge Case by modifying only the layer L1 from the input. "
            "Introduce rare or challenging road structures: unusual junction geometry, degraded "
            "or missing markings, unexpected lane layouts, or uncommon road surfaces. Change "
            "nothing in the other layers.");
      t.set(2,
            "Turn this scenario into an Edge Case by modifying only the layer L2 from the input. "
            "Introduce rare or challenging roadside structures: unexpected buildings or "
            "installations, encroaching vegetation, or unusual street furniture close to the "
            "carriageway. Change nothing in the other layers.");
      t.set(3,
            "Turn this scenario into an Edge Case by modifying only the layer L3 from the input. "
            "Introduce rare or challenging temporary changes: construction zones, contradictory "
            "temporary signage, debris, or short-lived obstructions. Change nothing in the other "
            "layers.");
      t.set(4,
            "Turn this scenario into an Edge Case by modifying only the layer L4 from the input. "
            "You should either: - Modify existing dynamic objects, or add new ones with rare "
            "and/or challenging characteristics. Look for object that do not belong in such a "
            "scenario. - Modify the motion of existing dynamic objects, or add new objects with "
            "unique and challenging motion. You may do both if needed, but focus on either the "
            "characteristics or the motion of the objects when generating a scenario.");
      t.set(5,
            "Turn this scenario into an Edge Case by modifying only the layer L5 from the input. "
            "Introduce rare or challenging environmental conditions: unusual weather, extreme or "
            "failing illumination, or combinations that sharply reduce visibility. Change "
            "nothing in the other layers.");
      return t;
    }();
    return instance;
  }

  void set(int layer, std::string task) { tasks_[layer] = std::move(task); }

  const std::string* task_for(int layer) const {
    auto it = tasks_.find(layer);
    return it == tasks_.end() ? nullptr : &it->second;
  }

  /// File format: JSON object mapping layer index ("1".."5" or "L1".."L5")
  /// to task text.
  static TaskLibrary load_file(const std::string& path) {
    json doc;
    try {
      doc = json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedDocument("task file " + path + ": " + e.what());
    }
    if (!doc.is_object()) {
      throw MalformedDocument("task file must be a JSON object");
    }
    TaskLibrary t;
    for (const auto& [key, value] : doc.items()) {
      std::string digits = key;
      if (!digits.empty() && (digits[0] == 'L' || digits[0] == 'l')) digits.erase(0, 1);
      if (digits.size() != 1 || digits[0] < '1' || digits[0] > '5') {
        throw MalformedDocument("task file key must be a layer index 1..5, got '" + key + "'");
      }
      if (!value.is_string()) {
        throw MalformedDocument("task for layer " + digits + " must be a string");
      }
      t.set(digits[0] - '0', value.get<std::string>());
    }
    return t;
  }

 private:
  std::map<int, std::string> tasks_;
};

/// Everything sent to the model for one edit conversation.
struct PromptBundle {
  std::string system;
  std::string task;
  std::string scenario_payload;
  std::optional<std::string> schema;
  int target_layer = 0;
  int n_variants = 1;

  /// The assembled user message: task, response contract, then the scenario.
  std::string user_message() const {
    std::string out = task;
    out += "\n\nLayer to modify: L" + std::to_string(target_layer);
    out += "\nRespond with the complete scenario as a single JSON document in the same format "
           "as the input, editing only layer L" +
           std::to_string(target_layer) +
           " and copying every other layer verbatim. Do not add commentary.";
    if (n_variants > 1) {
      out += "\nProduce exactly " + std::to_string(n_variants) +
             " variants. Separate consecutive variants with a line containing exactly:\n" +
             kVariantDelimiter;
    }
    if (schema) {
      out += "\nThe reply must follow this layer template:\n" + *schema;
    }
    out += "\n\nSCENARIO:\n```json\n" + scenario_payload + "\n```";
    return out;
  }
};

/// Layer template attached to hard-mode prompts: declared groups, enum ranges
/// where a taxonomy exists, and the expected component fields.
inline json hard_template_json(const Taxonomy& taxonomy) {
  json doc;
  for (int k = 1; k <= kLayerCount; ++k) {
    json layer;
    for (const auto& group : layer_groups(k)) {
      json component;
      if (const auto* list = taxonomy.categories(k, group)) {
        std::string enums = "enum:";
        for (std::size_t i = 0; i < list->size(); ++i) {
          enums += (i == 0 ? " " : " | ") + (*list)[i];
        }
        component["type"] = enums;
      } else {
        component["type"] = "str";
      }
      component["characteristics"] = "str";
      component["position"] = "str (optional)";
      if (layer_allows_motion(k)) {
        component["motion"] = "str (optional)";
      }
      json items = json::array();
      items.push_back(std::move(component));
      layer[group] = std::move(items);
    }
    if (layer_serializes_as_array(k)) {
      doc[detail::layer_key(k)] = layer.begin().value();
    } else {
      doc[detail::layer_key(k)] = std::move(layer);
    }
  }
  return doc;
}

struct PromptConfig {
  std::string system_prompt = kDefaultSystemPrompt;
  TaskLibrary tasks = TaskLibrary::defaults();
  Taxonomy taxonomy = Taxonomy::defaults();
};

/// Builds the deterministic prompt bundle for one edit request. Unstructured
/// mode carries the generic only-edit-this-layer instruction; soft and hard
/// modes carry the per-layer task; hard mode attaches the layer template.
inline PromptBundle build_edit_prompt(const EditRequest& req, const PromptConfig& config = {}) {
  if (req.target_layer < 1 || req.target_layer > kLayerCount) {
    throw Error("target layer out of range: " + std::to_string(req.target_layer));
  }
  if (req.n_variants < 1) {
    throw Error("n_variants must be at least 1");
  }
  PromptBundle bundle;
  bundle.system = config.system_prompt;
  bundle.target_layer = req.target_layer;
  bundle.n_variants = req.context_mode == ContextMode::kShared ? req.n_variants : 1;
  if (req.structure_mode == StructureMode::kUnstructured) {
    bundle.task = kOnlyModifyInstruction;
  } else {
    const std::string* task = config.tasks.task_for(req.target_layer);
    if (task == nullptr) {
      throw MissingTaskText("no task text configured for layer " +
                            std::to_string(req.target_layer));
    }
    bundle.task = *task;
  }
  if (req.structure_mode == StructureMode::kHard) {
    bundle.schema = hard_template_json(config.taxonomy).dump(2);
  }
  bundle.scenario_payload = serialize_scenario(req.source);
  return bundle;
}

/// Chat completion contract. Implementations must be safe to call from
/// multiple threads; deterministic() marks seeded offline clients whose
/// replies repeat bit-for-bit given the same call sequence.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual const std::string& model_id() const = 0;
  virtual bool supports_schema_enforcement() const = 0;
  virtual bool deterministic() const { return false; }
  virtual std::string complete(const std::string& system, const std::string& user,
                               double temperature,
                               const std::optional<std::string>& response_schema) = 0;
};

struct EditCheck {
  bool accepted = false;
  bool noop = false;
  std::set<int> violations;
};

/// Accepts a candidate iff no layer other than k changed. An unchanged
/// candidate is accepted but flagged as a no-op edit.
inline EditCheck enforce_single_layer_edit(const Scenario& original, const Scenario& candidate,
                                           int k) {
  EditCheck check;
  const std::set<int> changed = diff_layers(original, candidate);
  for (int index : changed) {
    if (index != k) check.violations.insert(index);
  }
  check.accepted = check.violations.empty();
  check.noop = changed.empty();
  return check;
}

namespace detail {

inline std::string strip_code_fence(const std::string& raw) {
  std::string text = trim(raw);
  if (text.rfind("```", 0) != 0) return text;
  const auto first_newline = text.find('\n');
  if (first_newline == std::string::npos) return text;
  const auto closing = text.rfind("```");
  if (closing == std::string::npos || closing <= first_newline) return text;
  return trim(text.substr(first_newline + 1, closing - first_newline - 1));
}

inline std::vector<std::string> split_variants(const std::string& reply) {
  std::vector<std::string> parts;
  std::string current;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    const auto end = reply.find('\n', pos);
    const std::string line =
        end == std::string::npos ? reply.substr(pos) : reply.substr(pos, end - pos);
    if (trim(line) == kVariantDelimiter) {
      parts.push_back(current);
      current.clear();
    } else {
      current += line;
      current += '\n';
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  parts.push_back(current);
  return parts;
}

inline std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

}  // namespace detail

struct GenerateOptions {
  int max_repairs = 2;
  /// Provenance timestamp; empty picks the wall clock for live clients and a
  /// fixed epoch for deterministic ones, keeping seeded sweeps reproducible.
  std::string created_at;
  int max_in_flight = 4;
};

/// Parses one model reply, re-prompting with the violation message appended
/// until it validates or max_retries is exhausted. Returns the scenario and
/// the number of retries consumed.
inline std::pair<Scenario, int> repair_structured_output(const std::string& raw,
                                                         const Taxonomy& taxonomy,
                                                         int max_retries, ChatClient& client,
                                                         const PromptBundle& bundle,
                                                         StructureMode reply_mode,
                                                         double temperature) {
  std::vector<std::string> attempts;
  std::string reply = raw;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    try {
      return {parse_scenario(detail::strip_code_fence(reply), reply_mode, taxonomy), attempt};
    } catch (const Error& e) {
      attempts.push_back(e.what());
      if (attempt == max_retries) break;
      const std::string repair_user = bundle.user_message() +
                                      "\n\nYour previous reply was invalid: " + e.what() +
                                      "\nReply again with one corrected scenario document.";
      reply = client.complete(bundle.system, repair_user, temperature, bundle.schema);
    }
  }
  throw ExhaustedRepairs(std::move(attempts));
}

struct QuarantinedScenario {
  Scenario scenario;
  std::set<int> violations;
};

struct GenerationResult {
  std::vector<Scenario> accepted;
  std::vector<QuarantinedScenario> quarantined;
  std::vector<std::string> noop_ids;
  std::size_t repair_retries = 0;
};

namespace detail {

struct VariantOutcome {
  Scenario scenario;
  int retries = 0;
};

inline Scenario finalize_variant(Scenario scenario, const EditRequest& req,
                                 const ChatClient& client, int variant_index,
                                 const std::string& created_at) {
  scenario.id = req.source.id + "-L" + std::to_string(req.target_layer) + "-v" +
                std::to_string(variant_index);
  Provenance provenance;
  provenance.source_id = req.source.id;
  provenance.edited_layer = req.target_layer;
  provenance.strategy = req.structure_mode;
  provenance.context_mode = req.context_mode;
  provenance.model_id = client.model_id();
  provenance.temperature = req.temperature;
  provenance.created_at = created_at;
  scenario.provenance = provenance;
  return scenario;
}

}  // namespace detail

/// Runs one edit request against a chat client. Every reply is parsed,
/// validated and checked for single-layer compliance; violating scenarios are
/// returned in quarantine rather than silently mixed with accepted ones.
inline GenerationResult generate_edits(ChatClient& client, const EditRequest& req,
                                       const PromptConfig& config = {},
                                       const GenerateOptions& options = {}) {
  if ((req.structure_mode == StructureMode::kHard) != (req.source.mode == StructureMode::kHard)) {
    throw ModeMismatch("edit request in " + to_string(req.structure_mode) +
                       " mode cannot use a " + to_string(req.source.mode) + " source");
  }
  const StructureMode reply_mode =
      req.structure_mode == StructureMode::kHard ? StructureMode::kHard : req.source.mode;
  const PromptBundle bundle = build_edit_prompt(req, config);
  const std::string created_at =
      !options.created_at.empty()
          ? options.created_at
          : (client.deterministic() ? "1970-01-01T00:00:00Z" : detail::now_iso8601());

  GenerationResult result;
  auto deliver = [&](Scenario scenario, int variant_index) {
    scenario = detail::finalize_variant(std::move(scenario), req, client, variant_index,
                                        created_at);
    const EditCheck check = enforce_single_layer_edit(req.source, scenario, req.target_layer);
    if (check.noop) {
      result.noop_ids.push_back(scenario.id);
    }
    if (check.accepted) {
      result.accepted.push_back(std::move(scenario));
    } else {
      result.quarantined.push_back(QuarantinedScenario{std::move(scenario), check.violations});
    }
  };

  if (req.context_mode == ContextMode::kShared) {
    std::vector<std::string> attempts;
    std::string reply =
        client.complete(bundle.system, bundle.user_message(), req.temperature, bundle.schema);
    for (int attempt = 0; attempt <= options.max_repairs; ++attempt) {
      std::vector<Scenario> parsed;
      try {
        const auto parts = detail::split_variants(reply);
        std::vector<std::string> documents;
        for (const auto& part : parts) {
          if (!detail::trim(part).empty()) documents.push_back(part);
        }
        if (documents.size() != static_cast<std::size_t>(req.n_variants)) {
          throw MalformedDocument("expected " + std::to_string(req.n_variants) +
                                  " delimited scenario documents, found " +
                                  std::to_string(documents.size()));
        }
        for (const auto& document : documents) {
          parsed.push_back(
              parse_scenario(detail::strip_code_fence(document), reply_mode, config.taxonomy));
        }
      } catch (const Error& e) {
        attempts.push_back(e.what());
        if (attempt == options.max_repairs) {
          throw ExhaustedRepairs(std::move(attempts));
        }
        ++result.repair_retries;
        const std::string repair_user = bundle.user_message() +
                                        "\n\nYour previous reply was invalid: " + e.what() +
                                        "\nReply again with all " +
                                        std::to_string(req.n_variants) +
                                        " corrected scenario documents.";
        reply = client.complete(bundle.system, repair_user, req.temperature, bundle.schema);
        continue;
      }
      for (std::size_t j = 0; j < parsed.size(); ++j) {
        deliver(std::move(parsed[j]), static_cast<int>(j) + 1);
      }
      return result;
    }
    return result;
  }

  auto run_variant = [&](int) -> detail::VariantOutcome {
    const std::string raw =
        client.complete(bundle.system, bundle.user_message(), req.temperature, bundle.schema);
    auto [scenario, retries] = repair_structured_output(
        raw, config.taxonomy, options.max_repairs, client, bundle, reply_mode, req.temperature);
    return {std::move(scenario), retries};
  };

  const bool concurrent = !client.deterministic() && options.max_in_flight > 1;
  if (!concurrent) {
    for (int j = 1; j <= req.n_variants; ++j) {
      auto outcome = run_variant(j);
      result.repair_retries += static_cast<std::size_t>(outcome.retries);
      deliver(std::move(outcome.scenario), j);
    }
    return result;
  }

  std::vector<detail::VariantOutcome> outcomes(static_cast<std::size_t>(req.n_variants));
  int next = 1;
  while (next <= req.n_variants) {
    std::vector<std::pair<int, std::future<detail::VariantOutcome>>> window;
    for (; next <= req.n_variants && window.size() < static_cast<std::size_t>(options.max_in_flight);
         ++next) {
      window.emplace_back(next, std::async(std::launch::async, run_variant, next));
    }
    for (auto& [index, future] : window) {
      outcomes[static_cast<std::size_t>(index - 1)] = future.get();
    }
  }
  for (int j = 1; j <= req.n_variants; ++j) {
    auto& outcome = outcomes[static_cast<std::size_t>(j - 1)];
    result.repair_retries += static_cast<std::size_t>(outcome.retries);
    deliver(std::move(outcome.scenario), j);
  }
  return result;
}

/// Knobs that make the mock client misbehave on purpose; used to exercise the
/// repair loop and the quarantine path.
struct MockBehavior {
  int malformed_replies = 0;
  int invalid_schema_replies = 0;
  bool echo_source = false;
  bool tamper_extra_layer = false;
};

/// Deterministic offline stand-in for the LLM. It extracts the scenario and
/// target layer from the prompt, edits exactly that layer with seeded picks
/// from small phrase banks, and returns a full scenario document (or several,
/// delimiter-separated, when the prompt asks for shared-context variants).
class MockChatClient final : public ChatClient {
 public:
  explicit MockChatClient(std::uint64_t seed, Taxonomy taxonomy = Taxonomy::defaults(),
                          MockBehavior behavior = {})
      : rng_(seed), taxonomy_(std::move(taxonomy)), behavior_(behavior) {}

  const std::string& model_id() const override {
    static const std::string name = "mock-edgecase-1";
    return name;
  }
  bool supports_schema_enforcement() const override { return true; }
  bool deterministic() const override { return true; }

  std::string complete(const std::string& system, const std::string& user, double temperature,
                       const std::optional<std::string>& response_schema) override {
    (void)system;
    (void)temperature;
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    if (behavior_.malformed_replies > 0) {
      --behavior_.malformed_replies;
      return "{ this is not a scenario";
    }

    const std::string payload = extract_payload(user);
    const int target = extract_target_layer(user);
    const int variants = extract_variant_count(user);
    const StructureMode mode =
        response_schema.has_value() ? StructureMode::kHard : detect_mode(payload);
    const Scenario source = parse_scenario(payload, mode, taxonomy_);

    std::string out;
    for (int i = 0; i < variants; ++i) {
      if (i > 0) {
        out += "\n";
        out += kVariantDelimiter;
        out += "\n";
      }
      Scenario edited = source;
      edited.provenance.reset();
      if (!behavior_.echo_source) {
        edit_layer(edited, target);
      }
      if (behavior_.invalid_schema_replies > 0) {
        --behavior_.invalid_schema_replies;
        out += invalidate(edited, target);
        continue;
      }
      if (behavior_.tamper_extra_layer) {
        int other = 1 + static_cast<int>(rng_() % kLayerCount);
        if (other == target) other = other % kLayerCount + 1;
        edit_layer(edited, other);
      }
      out += serialize_scenario(edited);
    }
    return out;
  }

  std::size_t calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
  }

 private:
  static std::string extract_payload(const std::string& user) {
    const std::string opening = "```json\n";
    const auto start = user.rfind(opening);
    if (start == std::string::npos) {
      throw Error("mock client: no scenario payload in prompt");
    }
    const auto end = user.find("\n```", start + opening.size());
    if (end == std::string::npos) {
      throw Error("mock client: unterminated scenario payload");
    }
    return user.substr(start + opening.size(), end - start - opening.size());
  }

  static int extract_target_layer(const std::string& user) {
    const std::string marker = "Layer to modify: L";
    const auto pos = user.find(marker);
    if (pos == std::string::npos || pos + marker.size() >= user.size()) {
      throw Error("mock client: no target layer in prompt");
    }
    const char digit = user[pos + marker.size()];
    if (digit < '1' || digit > '5') {
      throw Error("mock client: bad target layer digit");
    }
    return digit - '0';
  }

  static int extract_variant_count(const std::string& user) {
    const std::string marker = "Produce exactly ";
    const auto pos = user.find(marker);
    if (pos == std::string::npos) return 1;
    int value = 0;
    for (std::size_t i = pos + marker.size(); i < user.size() && std::isdigit(
             static_cast<unsigned char>(user[i])) != 0; ++i) {
      value = value * 10 + (user[i] - '0');
    }
    return value > 0 ? value : 1;
  }

  const std::string& pick(const std::vector<std::string>& bank) {
    return bank[rng_() % bank.size()];
  }

  void edit_layer(Scenario& s, int k) {
    static const std::array<std::vector<std::string>, kLayerCount> phrase_banks = {{
        {"a sinkhole has opened across the right lane exposing rebar",
         "all lane markings vanish mid-junction leaving an unmarked merge",
         "a contraflow lane runs against oncoming traffic behind water barriers",
         "the asphalt gives way to broken cobblestone through the curve",
         "a five-way intersection operates with every signal head dark",
         "the road narrows to a single shared lane beneath a low rail bridge"},
        {"scaffolding leans over the carriageway from a half-demolished facade",
         "a street market spills crates and awnings onto the shoulder",
         "a mirrored billboard reflects low sun directly into the lane",
         "overgrown hedges swallow the sidewalk and half of the lane",
         "a tower crane swings a concrete segment above the roadway",
         "stadium floodlights and crowds press against both curbs"},
        {"a construction trench is covered by loose unsecured steel plates",
         "temporary detour signs contradict the permanent overhead signage",
         "a burst water main floods the whole intersection",
         "detour cones funnel traffic onto the tram tracks",
         "storm debris and branches block the bicycle lane",
         "a toppled traffic light lies across the crosswalk"},
        {"a mattress slides off a pickup and tumbles between lanes",
         "a loose horse gallops along the median strip",
         "an overloaded cargo bike weaves between the queued cars",
         "a reversing articulated truck blocks every visible lane",
         "a street sweeper crawls against the direction of travel",
         "a dog chases a delivery robot across the junction"},
        {"dense fog cuts visibility to under twenty meters",
         "low sun sits exactly at windshield height ahead",
         "a sudden hailstorm whitens the asphalt in seconds",
         "street lighting fails across the entire block",
         "heavy rain pools into mirror-like sheets on the lane",
         "drifting smoke from a nearby fire crosses the road"},
    }};
    static const std::vector<std::string> positions = {
        "directly in front of ego", "in the opposite lane",    "on the left shoulder",
        "at the crosswalk ahead",   "behind the ego vehicle",  "in the center of the junction"};
    static const std::vector<std::string> motions = {
        "sudden swerve across two lanes", "hard braking then reversing",
        "erratic stop-and-go",            "drifting against the traffic flow",
        "stationary in the fast lane",    "weaving between barriers"};
    static const std::vector<std::string> free_text_categories = {
        "construction zone", "temporary barrier", "debris field",
        "event closure",     "emergency works",   "flooded section"};

    const auto& bank = phrase_banks[static_cast<std::size_t>(k - 1)];
    if (!s.layer(k).is_structured()) {
      std::string text = pick(bank);
      if (rng_() % 2 == 0) {
        text += ", " + pick(bank);
      }
      s.layer(k).body = text;
      return;
    }

    StructuredBody& body = s.layer(k).structured();
    auto& [group, components] = body.groups[rng_() % body.groups.size()];
    Component component;
    if (const auto* list = taxonomy_.categories(k, group)) {
      component.category = (*list)[rng_() % list->size()];
    } else {
      component.category = pick(free_text_categories);
    }
    component.characteristics = pick(bank);
    if (rng_() % 2 == 0) {
      component.position = pick(positions);
    }
    if (layer_allows_motion(k) && rng_() % 2 == 0) {
      component.motion = pick(motions);
    }
    if (rng_() % 3 == 0 && !components.empty()) {
      components[rng_() % components.size()].characteristics = pick(bank);
    }
    components.push_back(std::move(component));
  }

  /// Produces a schema-invalid document: hard mode gets an empty
  /// characteristics field, text modes get truncated JSON.
  std::string invalidate(Scenario& s, int k) {
    if (s.mode != StructureMode::kHard) {
      return "{\"L1\": \"truncated";
    }
    StructuredBody& body = s.layer(k).structured();
    auto& components = body.groups.front().second;
    Component broken;
    broken.category = components.empty() ? "vehicle" : components.front().category;
    broken.characteristics = "x";
    components.push_back(broken);
    std::string text = serialize_scenario(s);
    const std::string needle = "\"characteristics\": \"x\"";
    const auto pos = text.find(needle);
    if (pos != std::string::npos) {
      text.replace(pos, needle.size(), "\"characteristics\": \"\"");
    }
    return text;
  }

  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  Taxonomy taxonomy_;
  MockBehavior behavior_;
  std::size_t calls_ = 0;
};

}  // namespace fivelm
