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

// Acceptance suite: every release criterion runs here, one pass/fail line
// each, with its runtime budget enforced.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fivelm/pipeline.hpp"
#include "generators.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;

using fivelm::Aggregation;
using fivelm::Embedding;
using fivelm::EmbeddingSet;
using fivelm::Scenario;
using fivelm::StructureMode;
using fivelm::Taxonomy;

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void()> run;
};

struct Failure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure{message};
}

void require_near(double actual, double expected, double tolerance, const std::string& label) {
  if (!(std::abs(actual - expected) <= tolerance)) {
    std::ostringstream out;
    out.precision(17);
    out << label << ": expected " << expected << " +/- " << tolerance << ", got " << actual;
    throw Failure{out.str()};
  }
}

fs::path fixtures_dir() { return fs::path(FIVELM_FIXTURES_DIR); }

fs::path scratch_dir() {
  static const fs::path dir =
      fs::temp_directory_path() / ("fivelm-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

EmbeddingSet make_set(const std::vector<std::vector<double>>& rows) {
  EmbeddingSet set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.append(Embedding{rows[i], "test"}, {"row" + std::to_string(i), 0, "layer"});
  }
  return set;
}

// --- component-vector worked example ---------------------------------------

void worked_example() {
  const std::string document = R"({
    "id": "worked-example",
    "L1": {"roads": [{"type": "urban road", "characteristics": "four lanes"}], "guidance": []},
    "L2": {"environment": [{"type": "urban", "characteristics": "downtown"}], "structures": []},
    "L3": [],
    "L4": [
      {"type": "vehicle", "characteristics": "sedan"},
      {"type": "inanimate object", "characteristics": "fallen crate"},
      {"type": "vehicle", "characteristics": "bus"},
      {"type": "pedestrian", "characteristics": "runner"}
    ],
    "L5": {"weather": [{"type": "clear", "characteristics": "dry"}],
            "illumination": [{"type": "daylight", "characteristics": "noon"}]}
  })";
  const Scenario s = fivelm::parse_scenario(document, StructureMode::kHard, Taxonomy::defaults());
  const auto v = fivelm::component_vector(s, 4, "objects", Taxonomy::defaults());
  require(v.counts == std::vector<int>({2, 0, 1, 0, 1, 0}),
          "component vector of the worked example must be (2,0,1,0,1,0)");
}

// --- brute-force oracle equivalence -----------------------------------------

oracle::Agg to_oracle(Aggregation mode) {
  switch (mode) {
    case Aggregation::kMin:
      return oracle::Agg::kMin;
    case Aggregation::kMax:
      return oracle::Agg::kMax;
    case Aggregation::kMean:
      return oracle::Agg::kMean;
  }
  return oracle::Agg::kMin;
}

void oracle_equivalence() {
  gen::Rng rng(20260810);
  constexpr double kTol = 1e-12;
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t m = static_cast<std::size_t>(gen::pick_int(rng, 2, 8));
    const std::size_t n = static_cast<std::size_t>(gen::pick_int(rng, 1, 8));
    const std::size_t dim = static_cast<std::size_t>(gen::pick_int(rng, 2, 16));
    const auto gen_rows = gen::random_rows(rng, m, dim);
    const auto ref_rows = gen::random_rows(rng, n, dim);
    const EmbeddingSet gen_set = make_set(gen_rows);
    const EmbeddingSet ref_set = make_set(ref_rows);

    for (auto mode : {Aggregation::kMin, Aggregation::kMax}) {
      const std::size_t j = static_cast<std::size_t>(gen::pick_int(rng, 0, static_cast<int>(m) - 1));
      require_near(fivelm::sample_originality(gen_set.rows[j], ref_set, mode),
                   oracle::sample_originality(gen_rows[j], ref_rows, to_oracle(mode)), kTol,
                   "sample originality");
      require_near(fivelm::dataset_originality(gen_set, ref_set, mode),
                   oracle::dataset_originality(gen_rows, ref_rows, to_oracle(mode)), kTol,
                   "dataset originality");
    }
    for (auto mode : {Aggregation::kMin, Aggregation::kMax, Aggregation::kMean}) {
      const std::size_t j = static_cast<std::size_t>(gen::pick_int(rng, 0, static_cast<int>(m) - 1));
      require_near(fivelm::sample_diversity(j, gen_set, mode),
                   oracle::sample_diversity(j, gen_rows, to_oracle(mode)), kTol,
                   "sample diversity");
      require_near(fivelm::dataset_diversity(gen_set, mode),
                   oracle::dataset_diversity(gen_rows, to_oracle(mode)), kTol,
                   "dataset diversity");
    }
  }

  // Component-count metrics against their own naive loops.
  for (int instance = 0; instance < 50; ++instance) {
    std::vector<Scenario> gen_scenes;
    std::vector<Scenario> ref_scenes;
    for (int i = 0; i < 6; ++i) {
      gen_scenes.push_back(gen::random_scenario(rng, StructureMode::kHard, Taxonomy::defaults(),
                                                "g" + std::to_string(i)));
      ref_scenes.push_back(gen::random_scenario(rng, StructureMode::kHard, Taxonomy::defaults(),
                                                "r" + std::to_string(i)));
    }
    auto counts_of = [&](const std::vector<Scenario>& scenes) {
      std::vector<std::vector<int>> out;
      for (const auto& s : scenes) {
        out.push_back(fivelm::component_vector(s, 4, "objects", Taxonomy::defaults()).counts);
      }
      return out;
    };
    const auto result =
        fivelm::component_metrics(gen_scenes, ref_scenes, 4, "objects", Taxonomy::defaults());
    require(!result.co.is_na() && !result.cd_gen.is_na(), "component metrics must score");
    require_near(*result.co.score,
                 oracle::dataset_originality_counts(counts_of(gen_scenes), counts_of(ref_scenes)),
                 kTol, "component originality");
    require_near(*result.cd_gen.score,
                 oracle::dataset_diversity_counts_mean(counts_of(gen_scenes)), kTol,
                 "component diversity");
  }
}

// --- metric order laws -------------------------------------------------------

void metric_order_laws() {
  gen::Rng rng(7341);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t m = static_cast<std::size_t>(gen::pick_int(rng, 2, 8));
    const std::size_t n = static_cast<std::size_t>(gen::pick_int(rng, 1, 8));
    const auto gen_rows = gen::random_rows(rng, m, 8);
    const auto ref_rows = gen::random_rows(rng, n, 8);
    const EmbeddingSet gen_set = make_set(gen_rows);
    const EmbeddingSet ref_set = make_set(ref_rows);

    const double d_min = fivelm::dataset_diversity(gen_set, Aggregation::kMin);
    const double d_mean = fivelm::dataset_diversity(gen_set, Aggregation::kMean);
    const double d_max = fivelm::dataset_diversity(gen_set, Aggregation::kMax);
    require(d_min <= d_mean + 1e-15 && d_mean <= d_max + 1e-15,
            "diversity must order min <= mean <= max");
    require(fivelm::dataset_originality(gen_set, ref_set, Aggregation::kMin) <=
                fivelm::dataset_originality(gen_set, ref_set, Aggregation::kMax) + 1e-15,
            "originality must order min <= max");

    require_near(fivelm::dataset_originality(gen_set, gen_set, Aggregation::kMax), 1.0, 1e-12,
                 "exact copies give O(max) = 1");

    const auto row = gen::random_vector(rng, 8);
    const EmbeddingSet duplicate_pair = make_set({row, row});
    require(fivelm::sample_diversity(0, duplicate_pair, Aggregation::kMin) == 1.0,
            "duplicate rows give sample D(min) = 1.0 exactly");
  }
}

// --- cosine laws -------------------------------------------------------------

void cosine_laws() {
  gen::Rng rng(99173);
  for (int i = 0; i < 1000; ++i) {
    const Embedding a{gen::random_vector(rng, 12), "t"};
    const Embedding b{gen::random_vector(rng, 12), "t"};
    require(fivelm::cosine(a, b) == fivelm::cosine(b, a), "cosine symmetry must be exact");

    Embedding scaled = a;
    const double alpha = gen::pick_real(rng, 0.001, 1000.0);
    for (double& x : scaled.values) x *= alpha;
    require_near(fivelm::cosine(scaled, b), fivelm::cosine(a, b), 1e-12,
                 "cosine scale invariance");
  }
  require(fivelm::cosine(Embedding{{1.0, 0.0}, "t"}, Embedding{{0.0, 1.0}, "t"}) == 0.0,
          "orthogonal pair must score exactly 0.0");
}

// --- schema gate --------------------------------------------------------------

fivelm::json valid_hard_doc() {
  return fivelm::json::parse(R"({
    "id": "schema-gate",
    "L1": {"roads": [{"type": "urban road", "characteristics": "two lanes"}],
            "guidance": [{"type": "traffic light", "characteristics": "green"}]},
    "L2": {"environment": [{"type": "urban", "characteristics": "downtown"}],
            "structures": [{"type": "building", "characteristics": "offices"}]},
    "L3": [{"type": "roadworks", "characteristics": "cone taper"}],
    "L4": [{"type": "vehicle", "characteristics": "parked van", "position": "right lane",
             "motion": "stationary"}],
    "L5": {"weather": [{"type": "rain", "characteristics": "heavy"}],
            "illumination": [{"type": "night", "characteristics": "street lamps"}]}
  })");
}

void schema_gate() {
  struct InvalidCase {
    std::string label;
    std::function<void(fivelm::json&)> mutate;
    std::string path_contains;
  };
  const std::vector<InvalidCase> cases = {
      {"bad L4 category", [](fivelm::json& d) { d["L4"][0]["type"] = "spaceship"; },
       "layers[4].objects[0].category"},
      {"empty L4 type", [](fivelm::json& d) { d["L4"][0]["type"] = ""; },
       "layers[4].objects[0].type"},
      {"missing L4 type", [](fivelm::json& d) { d["L4"][0].erase("type"); },
       "layers[4].objects[0].type"},
      {"missing characteristics", [](fivelm::json& d) { d["L4"][0].erase("characteristics"); },
       "layers[4].objects[0].characteristics"},
      {"empty characteristics", [](fivelm::json& d) { d["L4"][0]["characteristics"] = ""; },
       "layers[4].objects[0].characteristics"},
      {"whitespace characteristics",
       [](fivelm::json& d) { d["L4"][0]["characteristics"] = "   "; },
       "layers[4].objects[0].characteristics"},
      {"bad L1 category", [](fivelm::json& d) { d["L1"]["roads"][0]["type"] = "teleport pad"; },
       "layers[1].roads[0].category"},
      {"motion on L1", [](fivelm::json& d) { d["L1"]["roads"][0]["motion"] = "drifting"; },
       "layers[1].roads[0].motion"},
      {"motion on L2", [](fivelm::json& d) { d["L2"]["structures"][0]["motion"] = "swaying"; },
       "layers[2].structures[0].motion"},
      {"motion on L3", [](fivelm::json& d) { d["L3"][0]["motion"] = "spreading"; },
       "layers[3].objects[0].motion"},
      {"motion on L5", [](fivelm::json& d) { d["L5"]["weather"][0]["motion"] = "falling"; },
       "layers[5].weather[0].motion"},
      {"missing L5", [](fivelm::json& d) { d.erase("L5"); }, "layers[5]"},
      {"missing L1", [](fivelm::json& d) { d.erase("L1"); }, "layers[1]"},
      {"extra L6", [](fivelm::json& d) { d["L6"] = fivelm::json::array(); }, "L6"},
      {"L1 as array",
       [](fivelm::json& d) { d["L1"] = fivelm::json::array(); }, "layers[1]"},
      {"unknown L1 group",
       [](fivelm::json& d) { d["L1"]["rivers"] = fivelm::json::array(); }, "layers[1].rivers"},
      {"unknown L4 group",
       [](fivelm::json& d) {
         fivelm::json grouped;
         grouped["agents"] = d["L4"];
         d["L4"] = grouped;
       },
       "layers[4].agents"},
      {"bad L2 category",
       [](fivelm::json& d) { d["L2"]["environment"][0]["type"] = "underwater"; },
       "layers[2].environment[0].category"},
      {"bad L5 category",
       [](fivelm::json& d) { d["L5"]["weather"][0]["type"] = "meteor shower"; },
       "layers[5].weather[0].category"},
      {"component is a string",
       [](fivelm::json& d) { d["L4"][0] = "just text"; }, "layers[4].objects[0]"},
  };
  require(cases.size() == 20, "schema gate must cover 20 crafted invalid documents");

  for (const auto& invalid : cases) {
    fivelm::json doc = valid_hard_doc();
    invalid.mutate(doc);
    bool rejected = false;
    try {
      fivelm::parse_scenario(doc.dump(), StructureMode::kHard, Taxonomy::defaults());
    } catch (const fivelm::SchemaViolation& e) {
      rejected = true;
      require(!e.path().empty(), invalid.label + ": violation must carry a path");
      require(e.path().find(invalid.path_contains) != std::string::npos,
              invalid.label + ": path '" + e.path() + "' must name '" + invalid.path_contains +
                  "'");
    }
    require(rejected, invalid.label + ": document must be rejected");
  }

  gen::Rng rng(5177);
  for (int i = 0; i < 20; ++i) {
    const Scenario s = gen::random_scenario(rng, StructureMode::kHard, Taxonomy::defaults(),
                                            "valid-" + std::to_string(i));
    const std::string once = fivelm::serialize_scenario(
        fivelm::parse_scenario(fivelm::serialize_scenario(s), StructureMode::kHard,
                               Taxonomy::defaults()));
    const std::string twice = fivelm::serialize_scenario(
        fivelm::parse_scenario(once, StructureMode::kHard, Taxonomy::defaults()));
    require(once == twice, "second serialization must be byte-stable");
  }
}

// --- end-to-end offline sweep --------------------------------------------------

void offline_sweep() {
  const auto refs = fivelm::load_corpus(fixtures_dir() / "refs" / "manifest.json",
                                        Taxonomy::defaults());
  require(refs.scenarios.size() == 10, "fixture corpus must hold 10 reference scenes");

  const fs::path out = scratch_dir() / "sweep";
  fs::remove_all(out);
  fivelm::MockChatClient client(42);
  fivelm::SweepConfig config;
  config.layers = {1, 2, 3, 4, 5};
  config.variants = 10;
  config.structure = StructureMode::kHard;
  const auto summary = fivelm::run_generation_sweep(client, refs.scenarios, config, out);
  require(summary.generated == 500, "sweep must generate exactly 500 scenarios, got " +
                                        std::to_string(summary.generated));
  require(summary.quarantined == 0, "sweep must quarantine nothing");

  const auto generated = fivelm::load_corpus(out / "manifest.json", Taxonomy::defaults());
  require(generated.scenarios.size() == 500, "persisted corpus must reload with 500 scenarios");
  for (const auto& s : generated.scenarios) {
    require(s.provenance.has_value(), "every generated scenario carries provenance");
  }

  fivelm::LocalProvider provider;
  const auto report =
      fivelm::evaluate_corpora(generated.scenarios, refs.scenarios, provider, Taxonomy::defaults());
  require(report.generated_count == 500, "report must count 500 generated scenarios");
  for (int k = 1; k <= 5; ++k) {
    const std::string layer = "L" + std::to_string(k);
    for (const auto& [metric, mode] :
         std::vector<std::pair<std::string, std::string>>{{"O", "max"}, {"O", "min"},
                                                          {"D", "min"}, {"D", "max"},
                                                          {"D_ref", "min"}}) {
      const auto* row = report.find(layer, metric, mode);
      require(row != nullptr, "report must include " + metric + "(" + mode + ") for " + layer);
      require(row->score.has_value(), metric + "(" + mode + ") must score for " + layer);
    }
    require(report.find(layer, "CO", "max") != nullptr, "report must include CO for " + layer);
  }
  require(report.find("total-text", "O", "max") != nullptr, "report must include total-text");
  require(report.find("total-mean", "D", "min") != nullptr, "report must include total-mean");
}

// --- single-layer enforcement ---------------------------------------------------

void single_layer_enforcement() {
  const auto refs = fivelm::load_corpus(fixtures_dir() / "refs" / "manifest.json",
                                        Taxonomy::defaults());
  fivelm::MockBehavior behavior;
  behavior.tamper_extra_layer = true;
  fivelm::MockChatClient client(4242, Taxonomy::defaults(), behavior);

  std::size_t total = 0;
  std::size_t quarantined = 0;
  for (const auto& source : refs.scenarios) {
    for (int layer = 1; layer <= 5; ++layer) {
      fivelm::EditRequest req;
      req.source = source;
      req.target_layer = layer;
      req.structure_mode = StructureMode::kHard;
      req.n_variants = 2;
      const auto result = fivelm::generate_edits(client, req);
      total += result.accepted.size() + result.quarantined.size();
      quarantined += result.quarantined.size();
      for (const auto& q : result.quarantined) {
        require(!q.violations.empty(), "quarantined scenarios must record violations");
        require(!q.violations.contains(layer), "target layer is never a violation");
      }
    }
  }
  require(total == 100, "mutation harness must produce 100 candidates");
  require(quarantined == total,
          "every mutated candidate must be quarantined, got " + std::to_string(quarantined) +
              "/" + std::to_string(total));
}

// --- replay determinism -----------------------------------------------------------

void replay_determinism() {
  const auto refs = fivelm::load_corpus(fixtures_dir() / "refs" / "manifest.json",
                                        Taxonomy::defaults());
  const fs::path cache_file = fixtures_dir() / "cache" / "local-256.bin";
  require(fs::exists(cache_file), "shipped embedding cache fixture must exist");

  auto render_once = [&] {
    auto cache = std::make_shared<fivelm::EmbeddingCache>(cache_file);
    fivelm::ReplayProvider provider(cache);
    const auto report =
        fivelm::evaluate_corpora(refs.scenarios, refs.scenarios, provider, Taxonomy::defaults());
    return fivelm::render_markdown(report);
  };
  const std::string first = render_once();
  const std::string second = render_once();
  require(!first.empty(), "replay evaluation must produce a report");
  require(first == second, "markdown reports from the replay cache must be byte-identical");

  // Golden file committed with the fixtures: replay must reproduce it
  // byte-for-byte on any machine.
  const fs::path golden = fixtures_dir() / "golden" / "self-evaluation.md";
  require(fs::exists(golden), "golden report fixture must exist");
  require(first == fivelm::detail::read_file(golden),
          "replay evaluation must reproduce the committed golden report");
}

// --- NA handling --------------------------------------------------------------------

void na_handling() {
  const auto refs = fivelm::load_corpus(fixtures_dir() / "refs" / "manifest.json",
                                        Taxonomy::defaults());
  fivelm::LocalProvider provider;

  const auto report =
      fivelm::evaluate_corpora(refs.scenarios, refs.scenarios, provider, Taxonomy::defaults());
  for (const auto& [metric, mode] :
       std::vector<std::pair<std::string, std::string>>{{"CO", "max"}, {"CD", "mean"},
                                                        {"CD_ref", "mean"}}) {
    const auto* row = report.find("L3", metric, mode);
    require(row != nullptr, "L3 component row must exist");
    require(!row->score.has_value(), "L3 " + metric + " must be NA");
  }

  const std::vector<Scenario> singleton = {refs.scenarios.front()};
  const auto single_report =
      fivelm::evaluate_corpora(singleton, refs.scenarios, provider, Taxonomy::defaults());
  for (const auto& row : single_report.rows) {
    if (row.metric == "D" || row.metric == "CD") {
      require(!row.score.has_value(),
              row.metric + " must be NA for a singleton corpus (layer " + row.layer + ")");
    }
  }
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"component-vector worked example", 1.0, worked_example},
      {"brute-force oracle equivalence (200 instances, 1e-12)", 5.0, oracle_equivalence},
      {"metric order laws (100 sets)", 5.0, metric_order_laws},
      {"cosine laws (symmetry, scale, orthogonality)", 5.0, cosine_laws},
      {"schema gate (20 invalid, 20 byte-stable)", 5.0, schema_gate},
      {"end-to-end offline sweep (500 scenarios)", 30.0, offline_sweep},
      {"single-layer enforcement (mutation harness)", 30.0, single_layer_enforcement},
      {"replay determinism (shipped cache)", 30.0, replay_determinism},
      {"NA handling (L3 components, singleton corpora)", 30.0, na_handling},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      criterion.run();
    } catch (const Failure& f) {
      error = f.message;
    } catch (const std::exception& e) {
      error = std::string("unexpected exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && elapsed > criterion.budget_seconds) {
      std::ostringstream out;
      out << "exceeded runtime budget (" << elapsed << "s > " << criterion.budget_seconds << "s)";
      error = out.str();
    }
    if (error.empty()) {
      std::printf("[PASS] %s (%.2fs)\n", criterion.name.c_str(), elapsed);
    } else {
      std::printf("[FAIL] %s (%.2fs): %s\n", criterion.name.c_str(), elapsed, error.c_str());
      ++failures;
    }
  }
  fs::remove_all(scratch_dir());
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
