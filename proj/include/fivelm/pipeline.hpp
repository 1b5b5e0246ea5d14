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

// Orchestration shared by the CLI and the acceptance suite: the generation
// sweep over (source, layer) pairs and the full corpus-pair evaluation.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fivelm/augmentation.hpp"
#include "fivelm/corpus.hpp"
#include "fivelm/embedding.hpp"
#include "fivelm/errors.hpp"
#include "fivelm/metrics.hpp"
#include "fivelm/report.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

struct SweepConfig {
  std::vector<int> layers = {1, 2, 3, 4, 5};
  int variants = 10;
  StructureMode structure = StructureMode::kHard;
  ContextMode context = ContextMode::kIndependent;
  double temperature = 1.0;
  PromptConfig prompts;
  GenerateOptions generate;
};

struct SweepSummary {
  std::size_t generated = 0;
  std::size_t quarantined = 0;
  std::size_t noops = 0;
  std::size_t repair_retries = 0;
  std::filesystem::path manifest_path;
};

/// Edits every source scenario once per configured layer, n variants each.
/// Accepted scenarios land under out_dir with a manifest; violating ones are
/// quarantined under out_dir/rejects with their violation indices recorded.
inline SweepSummary run_generation_sweep(ChatClient& client,
                                         const std::vector<Scenario>& sources,
                                         const SweepConfig& config,
                                         const std::filesystem::path& out_dir) {
  std::vector<Scenario> accepted;
  std::vector<QuarantinedScenario> quarantined;
  SweepSummary summary;

  for (const auto& source : sources) {
    for (int layer : config.layers) {
      EditRequest req;
      req.source = source;
      req.target_layer = layer;
      req.structure_mode = config.structure;
      req.context_mode = config.context;
      req.n_variants = config.variants;
      req.temperature = config.temperature;
      GenerationResult result = generate_edits(client, req, config.prompts, config.generate);
      summary.noops += result.noop_ids.size();
      summary.repair_retries += result.repair_retries;
      for (auto& s : result.accepted) accepted.push_back(std::move(s));
      for (auto& q : result.quarantined) quarantined.push_back(std::move(q));
    }
  }

  summary.generated = accepted.size();
  summary.quarantined = quarantined.size();
  save_generated(accepted, out_dir);
  summary.manifest_path = out_dir / "manifest.json";

  if (!quarantined.empty()) {
    std::vector<Scenario> rejects;
    json violations = json::object();
    for (auto& q : quarantined) {
      json indices = json::array();
      for (int index : q.violations) indices.push_back(index);
      violations[q.scenario.id] = std::move(indices);
      rejects.push_back(std::move(q.scenario));
    }
    save_generated(rejects, out_dir / "rejects");
    detail::write_file_atomic(out_dir / "rejects" / "violations.json",
                              violations.dump(2) + "\n");
  }
  return summary;
}

struct EvaluateOptions {
  /// Drop generated scenarios whose edit turned out to be a no-op against
  /// their provenance source.
  bool exclude_noops = false;
  /// Metric family selection; component-level families apply to hard-mode
  /// corpora only.
  bool semantic = true;
  bool components = true;
  bool characteristics = true;
  bool counts = true;
};

namespace detail {

inline MetricRow make_row(std::string layer, std::string metric, std::string mode,
                          MetricValue value, std::size_t m, std::size_t n) {
  MetricRow row;
  row.layer = std::move(layer);
  row.metric = std::move(metric);
  row.mode = std::move(mode);
  row.score = value.score;
  row.na_pairs = value.na_pairs;
  row.m = m;
  row.n = n;
  return row;
}

inline MetricValue diversity_or_na(const EmbeddingSet& set, Aggregation mode) {
  try {
    return dataset_diversity_scored(set, mode);
  } catch (const TooFewSamples&) {
    return {};
  }
}

inline MetricValue text_diversity_or_na(const std::vector<std::string>& texts,
                                        EmbeddingProvider& provider) {
  return text_set_diversity(texts, provider, Aggregation::kMin);
}

inline EmbeddingSet embed_texts(EmbeddingProvider& provider,
                                const std::vector<std::string>& texts,
                                const std::string& field) {
  auto rows = provider.embed(texts);
  EmbeddingSet set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.append(std::move(rows[i]), SourceRef{"doc[" + std::to_string(i) + "]", 0, field});
  }
  return set;
}

/// Concatenation of the per-group count vectors of layer k, covering every
/// group with a taxonomy; nullopt when the whole layer is free text.
inline std::optional<ComponentVector> layer_concat_vector(const Scenario& s, int k,
                                                          const Taxonomy& taxonomy) {
  ComponentVector out;
  out.layer = k;
  out.group = "layer";
  bool any = false;
  for (const auto& group : layer_groups(k)) {
    if (taxonomy.categories(k, group) == nullptr) continue;
    const ComponentVector v = component_vector(s, k, group, taxonomy);
    out.counts.insert(out.counts.end(), v.counts.begin(), v.counts.end());
    any = true;
  }
  if (!any) return std::nullopt;
  return out;
}

inline bool all_hard(const std::vector<Scenario>& scenes) {
  for (const auto& s : scenes) {
    if (s.mode != StructureMode::kHard) return false;
  }
  return !scenes.empty();
}

}  // namespace detail

/// Computes the full per-layer metric report for a generated-vs-reference
/// corpus pair: semantic originality and diversity (plus total-text and
/// total-mean columns), and for hard-mode corpora the component-count
/// metrics, per-group characteristics and motion diversity, and mean
/// component counts.
inline MetricReport evaluate_corpora(const std::vector<Scenario>& generated,
                                     const std::vector<Scenario>& references,
                                     EmbeddingProvider& provider, const Taxonomy& taxonomy,
                                     const EvaluateOptions& options = {}) {
  std::vector<Scenario> gen = generated;
  if (options.exclude_noops) {
    std::map<std::string, const Scenario*> by_id;
    for (const auto& ref : references) by_id[ref.id] = &ref;
    std::vector<Scenario> kept;
    for (auto& s : gen) {
      bool noop = false;
      if (s.provenance) {
        auto it = by_id.find(s.provenance->source_id);
        if (it != by_id.end() && it->second->mode == s.mode) {
          noop = diff_layers(*it->second, s).empty();
        }
      }
      if (!noop) kept.push_back(std::move(s));
    }
    gen = std::move(kept);
  }

  if (gen.empty()) {
    throw EmptyGenerated("evaluate: generated corpus is empty");
  }
  if (references.empty()) {
    throw EmptyReference("evaluate: reference corpus is empty");
  }

  MetricReport report;
  report.provider_id = provider.id();
  report.generated_count = gen.size();
  report.reference_count = references.size();
  const std::size_t m = gen.size();
  const std::size_t n = references.size();

  struct SemanticCell {
    std::string metric;
    Aggregation mode;
  };
  const std::vector<SemanticCell> semantic_cells = {{"O", Aggregation::kMax},
                                                    {"O", Aggregation::kMin},
                                                    {"D", Aggregation::kMin},
                                                    {"D", Aggregation::kMax},
                                                    {"D_ref", Aggregation::kMin}};

  auto semantic_rows_for = [&](const std::string& label, const EmbeddingSet& gen_set,
                               const EmbeddingSet& ref_set) {
    for (const auto& cell : semantic_cells) {
      MetricValue value;
      if (cell.metric == "O") {
        value = dataset_originality_scored(gen_set, ref_set, cell.mode);
      } else if (cell.metric == "D") {
        value = detail::diversity_or_na(gen_set, cell.mode);
      } else {
        value = detail::diversity_or_na(ref_set, cell.mode);
      }
      report.rows.push_back(
          detail::make_row(label, cell.metric, to_string(cell.mode), value, m, n));
    }
  };

  if (options.semantic) {
    for (int k = 1; k <= kLayerCount; ++k) {
      semantic_rows_for("L" + std::to_string(k), embed_corpus(provider, gen, k),
                        embed_corpus(provider, references, k));
    }

    std::vector<std::string> gen_whole;
    std::vector<std::string> ref_whole;
    for (const auto& s : gen) gen_whole.push_back(concat_layers(s));
    for (const auto& s : references) ref_whole.push_back(concat_layers(s));
    semantic_rows_for("total-text", detail::embed_texts(provider, gen_whole, "concat"),
                      detail::embed_texts(provider, ref_whole, "concat"));

    for (const auto& cell : semantic_cells) {
      double sum = 0.0;
      std::size_t scored = 0;
      std::size_t na_pairs = 0;
      for (int k = 1; k <= kLayerCount; ++k) {
        const MetricRow* row = report.find("L" + std::to_string(k), cell.metric,
                                           to_string(cell.mode));
        if (row == nullptr) continue;
        na_pairs += row->na_pairs;
        if (row->score) {
          sum += *row->score;
          ++scored;
        }
      }
      MetricValue value;
      value.na_pairs = na_pairs;
      if (scored > 0) value.score = sum / static_cast<double>(scored);
      report.rows.push_back(
          detail::make_row("total-mean", cell.metric, to_string(cell.mode), value, m, n));
    }
  }

  if (!detail::all_hard(gen) || !detail::all_hard(references)) {
    return report;
  }

  for (int k = 1; options.components && k <= kLayerCount; ++k) {
    const std::string label = "L" + std::to_string(k);
    std::vector<ComponentVector> gen_vectors;
    std::vector<ComponentVector> ref_vectors;
    bool applicable = true;
    for (const auto& s : gen) {
      auto v = detail::layer_concat_vector(s, k, taxonomy);
      if (!v) {
        applicable = false;
        break;
      }
      gen_vectors.push_back(std::move(*v));
    }
    if (applicable) {
      for (const auto& s : references) {
        ref_vectors.push_back(*detail::layer_concat_vector(s, k, taxonomy));
      }
    }
    MetricValue co, cd_gen, cd_ref;
    if (applicable) {
      co = detail::originality_engine(gen_vectors.size(), ref_vectors.size(), Aggregation::kMax,
                                      detail::component_pair(gen_vectors, ref_vectors));
      if (gen_vectors.size() >= 2) {
        cd_gen = detail::diversity_engine(gen_vectors.size(), Aggregation::kMean,
                                          detail::component_pair(gen_vectors, gen_vectors));
      }
      if (ref_vectors.size() >= 2) {
        cd_ref = detail::diversity_engine(ref_vectors.size(), Aggregation::kMean,
                                          detail::component_pair(ref_vectors, ref_vectors));
      }
    }
    report.rows.push_back(detail::make_row(label, "CO", "max", co, m, n));
    report.rows.push_back(detail::make_row(label, "CD", "mean", cd_gen, m, n));
    report.rows.push_back(detail::make_row(label, "CD_ref", "mean", cd_ref, m, n));
  }

  for (int k = 1; options.characteristics && k <= kLayerCount; ++k) {
    const std::string label = "L" + std::to_string(k);
    for (const auto& group : layer_groups(k)) {
      report.rows.push_back(detail::make_row(
          label, "char_D(" + group + ")", "min",
          characteristics_diversity(gen, k, group, provider), m, n));
      report.rows.push_back(detail::make_row(
          label, "char_D_ref(" + group + ")", "min",
          characteristics_diversity(references, k, group, provider), m, n));
    }
    if (layer_allows_motion(k)) {
      report.rows.push_back(detail::make_row(
          label, "motion_D(objects)", "min",
          detail::text_diversity_or_na(
              component_texts(gen, k, "objects", ComponentTextField::kMotion), provider),
          m, n));
      report.rows.push_back(detail::make_row(
          label, "motion_D_ref(objects)", "min",
          detail::text_diversity_or_na(
              component_texts(references, k, "objects", ComponentTextField::kMotion), provider),
          m, n));
    }
  }

  for (int k = 1; options.counts && k <= kLayerCount; ++k) {
    const std::string label = "L" + std::to_string(k);
    for (const auto& group : layer_groups(k)) {
      MetricValue gen_mean;
      gen_mean.score = mean_component_count(gen, k, group);
      report.rows.push_back(
          detail::make_row(label, "mean_components(" + group + ")", "mean", gen_mean, m, n));
      MetricValue ref_mean;
      ref_mean.score = mean_component_count(references, k, group);
      report.rows.push_back(
          detail::make_row(label, "mean_components_ref(" + group + ")", "mean", ref_mean, m, n));
    }
  }

  return report;
}

}  // namespace fivelm
