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

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fivelm/embedding.hpp"
#include "fivelm/errors.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

enum class Aggregation { kMin, kMax, kMean };

inline std::string to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::kMin:
      return "min";
    case Aggregation::kMax:
      return "max";
    case Aggregation::kMean:
      return "mean";
  }
  return "min";
}

inline Aggregation aggregation_from_string(std::string_view text) {
  if (text == "min") return Aggregation::kMin;
  if (text == "max") return Aggregation::kMax;
  if (text == "mean") return Aggregation::kMean;
  throw Error("unknown aggregation mode: " + std::string(text));
}

/// A score that may be NA. Pairs whose similarity is undefined (zero-norm
/// embeddings) are skipped and counted instead of biasing the mean.
struct MetricValue {
  std::optional<double> score;
  std::size_t na_pairs = 0;

  bool is_na() const { return !score.has_value(); }
};

namespace detail {

/// Pair similarity used by the metric engine; nullopt marks an NA pair.
using PairSim = std::function<std::optional<double>(std::size_t, std::size_t)>;

inline std::optional<double> cosine_or_na(const Embedding& a, const Embedding& b) {
  try {
    return cosine(a, b);
  } catch (const ZeroNorm&) {
    return std::nullopt;
  }
}

struct Extremum {
  double value = 0.0;
  double sum = 0.0;
  std::size_t valid = 0;

  void feed(double sim, Aggregation mode) {
    sum += sim;
    if (valid == 0) {
      value = sim;
    } else if (mode == Aggregation::kMax ? sim > value : sim < value) {
      value = sim;
    }
    ++valid;
  }

  std::optional<double> result(Aggregation mode) const {
    if (valid == 0) return std::nullopt;
    if (mode == Aggregation::kMean) return sum / static_cast<double>(valid);
    return value;
  }
};

// Mean over generated rows of the extremal similarity to the other set.
// Summation order is fixed (row-major) so results are reproducible.
inline MetricValue originality_engine(std::size_t gen_count, std::size_t ref_count,
                                      Aggregation mode, const PairSim& sim) {
  MetricValue out;
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t j = 0; j < gen_count; ++j) {
    Extremum extremum;
    for (std::size_t i = 0; i < ref_count; ++i) {
      if (auto value = sim(j, i)) {
        extremum.feed(*value, mode);
      } else {
        ++out.na_pairs;
      }
    }
    if (auto value = extremum.result(mode)) {
      sum += *value;
      ++scored;
    }
  }
  if (scored > 0) {
    out.score = sum / static_cast<double>(scored);
  }
  return out;
}

inline MetricValue diversity_engine(std::size_t count, Aggregation mode, const PairSim& sim) {
  MetricValue out;
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t j = 0; j < count; ++j) {
    Extremum extremum;
    for (std::size_t other = 0; other < count; ++other) {
      if (other == j) continue;
      if (auto value = sim(other, j)) {
        extremum.feed(*value, mode);
      } else {
        ++out.na_pairs;
      }
    }
    if (auto value = extremum.result(mode)) {
      sum += *value;
      ++scored;
    }
  }
  if (scored > 0) {
    out.score = sum / static_cast<double>(scored);
  }
  return out;
}

// Row norms are computed once per set; each pair then costs one dot product.
// Results are bit-identical to calling cosine() pairwise.
inline PairSim semantic_pair(const EmbeddingSet& left, const EmbeddingSet& right) {
  auto norms_of = [](const EmbeddingSet& set) {
    auto norms = std::make_shared<std::vector<double>>();
    norms->reserve(set.rows.size());
    for (const auto& row : set.rows) norms->push_back(norm(row.values));
    return norms;
  };
  auto left_norms = norms_of(left);
  auto right_norms = right.rows.data() == left.rows.data() ? left_norms : norms_of(right);
  return [&left, &right, left_norms, right_norms](std::size_t j,
                                                  std::size_t i) -> std::optional<double> {
    const double norm_a = (*right_norms)[i];
    const double norm_b = (*left_norms)[j];
    if (norm_a == 0.0 || norm_b == 0.0) return std::nullopt;
    const auto& a = right.rows[i].values;
    const auto& b = left.rows[j].values;
    if (a.size() != b.size()) {
      throw DimensionMismatch("cosine: dims " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    if (a == b) return 1.0;
    return dot(a, b) / (norm_a * norm_b);
  };
}

inline void require_same_dim(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (!a.rows.empty() && !b.rows.empty() && a.rows.front().dim() != b.rows.front().dim()) {
    throw DimensionMismatch("embedding sets have dims " +
                            std::to_string(a.rows.front().dim()) + " and " +
                            std::to_string(b.rows.front().dim()));
  }
}

}  // namespace detail

/// Extremal similarity of one generated embedding against a reference set.
/// mode=max is the closest-reference originality; mode=min the prior
/// least-similar variant. Zero-norm pairs are skipped.
inline double sample_originality(const Embedding& e_gen, const EmbeddingSet& refs,
                                 Aggregation mode) {
  if (mode == Aggregation::kMean) {
    throw Error("originality aggregation must be min or max");
  }
  if (refs.size() == 0) {
    throw EmptyReference("sample_originality: empty reference set");
  }
  if (refs.rows.front().dim() != e_gen.dim()) {
    throw DimensionMismatch("sample_originality: dims " +
                            std::to_string(refs.rows.front().dim()) + " vs " +
                            std::to_string(e_gen.dim()));
  }
  detail::Extremum extremum;
  for (const auto& ref : refs.rows) {
    if (auto value = detail::cosine_or_na(ref, e_gen)) {
      extremum.feed(*value, mode);
    }
  }
  auto result = extremum.result(mode);
  if (!result) {
    throw ZeroNorm("sample_originality: every pair involved a zero-norm embedding");
  }
  return *result;
}

/// NA-aware dataset originality: mean over generated rows, skipping NA pairs
/// and counting them.
inline MetricValue dataset_originality_scored(const EmbeddingSet& gen, const EmbeddingSet& refs,
                                              Aggregation mode) {
  if (mode == Aggregation::kMean) {
    throw Error("originality aggregation must be min or max");
  }
  if (gen.size() == 0) {
    throw EmptyGenerated("dataset_originality: empty generated set");
  }
  if (refs.size() == 0) {
    throw EmptyReference("dataset_originality: empty reference set");
  }
  detail::require_same_dim(gen, refs);
  return detail::originality_engine(gen.size(), refs.size(), mode,
                                    detail::semantic_pair(gen, refs));
}

inline double dataset_originality(const EmbeddingSet& gen, const EmbeddingSet& refs,
                                  Aggregation mode) {
  auto value = dataset_originality_scored(gen, refs, mode);
  if (value.is_na()) {
    throw ZeroNorm("dataset_originality: all pairs were NA");
  }
  return *value.score;
}

/// Similarity of row j to the rest of its own set; the row itself is strictly
/// excluded. mean mode divides by the number of valid counterparts (M-1 when
/// no pair is NA).
inline double sample_diversity(std::size_t j, const EmbeddingSet& set, Aggregation mode) {
  if (set.size() < 2) {
    throw TooFewSamples("sample_diversity: need at least 2 rows, got " +
                        std::to_string(set.size()));
  }
  if (j >= set.size()) {
    throw Error("sample_diversity: row index " + std::to_string(j) + " out of range");
  }
  detail::Extremum extremum;
  for (std::size_t other = 0; other < set.size(); ++other) {
    if (other == j) continue;
    if (auto value = detail::cosine_or_na(set.rows[other], set.rows[j])) {
      extremum.feed(*value, mode);
    }
  }
  auto result = extremum.result(mode);
  if (!result) {
    throw ZeroNorm("sample_diversity: every pair involved a zero-norm embedding");
  }
  return *result;
}

inline MetricValue dataset_diversity_scored(const EmbeddingSet& set, Aggregation mode) {
  if (set.size() < 2) {
    throw TooFewSamples("dataset_diversity: need at least 2 rows, got " +
                        std::to_string(set.size()));
  }
  return detail::diversity_engine(set.size(), mode, detail::semantic_pair(set, set));
}

inline double dataset_diversity(const EmbeddingSet& set, Aggregation mode) {
  auto value = dataset_diversity_scored(set, mode);
  if (value.is_na()) {
    throw ZeroNorm("dataset_diversity: all pairs were NA");
  }
  return *value.score;
}

/// Integer category-count vector of one (layer, group) under a taxonomy.
struct ComponentVector {
  std::vector<int> counts;
  int layer = 0;
  std::string group;

  std::size_t dim() const { return counts.size(); }

  bool operator==(const ComponentVector&) const = default;
};

inline ComponentVector component_vector(const Scenario& s, int k, const std::string& group,
                                        const Taxonomy& taxonomy) {
  if (s.mode != StructureMode::kHard) {
    throw NotHardMode("component_vector: scenario '" + s.id + "' is " + to_string(s.mode));
  }
  const auto* categories = taxonomy.categories(k, group);
  if (categories == nullptr) {
    throw NotApplicable("no taxonomy for layer " + std::to_string(k) + " group '" + group +
                        "'; category is free text");
  }
  ComponentVector v;
  v.layer = k;
  v.group = group;
  v.counts.assign(categories->size(), 0);
  const auto* components = s.layer(k).structured().find(group);
  if (components == nullptr) {
    throw NotApplicable("layer " + std::to_string(k) + " declares no group '" + group + "'");
  }
  for (const auto& component : *components) {
    auto canonical = taxonomy.match(k, group, component.category);
    if (!canonical) {
      throw SchemaViolation("layers[" + std::to_string(k) + "]." + group,
                            "category '" + component.category + "' is not a taxonomy entry");
    }
    for (std::size_t c = 0; c < categories->size(); ++c) {
      if ((*categories)[c] == *canonical) {
        ++v.counts[c];
        break;
      }
    }
  }
  return v;
}

/// Cosine on counts with a total extension: two all-zero vectors are
/// maximally similar, a zero against a non-zero is maximally dissimilar.
inline double component_similarity(const ComponentVector& u, const ComponentVector& v) {
  if (u.dim() != v.dim()) {
    throw DimensionMismatch("component_similarity: dims " + std::to_string(u.dim()) + " vs " +
                            std::to_string(v.dim()));
  }
  long total_u = 0;
  long total_v = 0;
  for (int x : u.counts) total_u += x;
  for (int x : v.counts) total_v += x;
  if (total_u == 0 && total_v == 0) return 1.0;
  if (total_u == 0 || total_v == 0) return 0.0;
  Embedding a{std::vector<double>(u.counts.begin(), u.counts.end()), "component"};
  Embedding b{std::vector<double>(v.counts.begin(), v.counts.end()), "component"};
  return cosine(a, b);
}

struct ComponentMetricsResult {
  MetricValue co;
  MetricValue cd_gen;
  MetricValue cd_ref;
};

namespace detail {

inline std::vector<ComponentVector> component_vectors(const std::vector<Scenario>& scenes, int k,
                                                      const std::string& group,
                                                      const Taxonomy& taxonomy) {
  std::vector<ComponentVector> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    out.push_back(component_vector(s, k, group, taxonomy));
  }
  return out;
}

inline PairSim component_pair(const std::vector<ComponentVector>& left,
                              const std::vector<ComponentVector>& right) {
  return [&left, &right](std::size_t j, std::size_t i) -> std::optional<double> {
    return component_similarity(right[i], left[j]);
  };
}

}  // namespace detail

/// Component-level originality and diversity of one (layer, group):
/// CO aggregates with max, CD uses the mean-similarity diversity. Free-text
/// groups (layer 3 by default) report NA across the board.
inline ComponentMetricsResult component_metrics(const std::vector<Scenario>& gen,
                                                const std::vector<Scenario>& refs, int k,
                                                const std::string& group,
                                                const Taxonomy& taxonomy) {
  if (taxonomy.categories(k, group) == nullptr) {
    return {};
  }
  auto gen_vectors = detail::component_vectors(gen, k, group, taxonomy);
  auto ref_vectors = detail::component_vectors(refs, k, group, taxonomy);

  ComponentMetricsResult result;
  if (!gen_vectors.empty() && !ref_vectors.empty()) {
    result.co = detail::originality_engine(gen_vectors.size(), ref_vectors.size(),
                                           Aggregation::kMax,
                                           detail::component_pair(gen_vectors, ref_vectors));
  }
  if (gen_vectors.size() >= 2) {
    result.cd_gen = detail::diversity_engine(gen_vectors.size(), Aggregation::kMean,
                                             detail::component_pair(gen_vectors, gen_vectors));
  }
  if (ref_vectors.size() >= 2) {
    result.cd_ref = detail::diversity_engine(ref_vectors.size(), Aggregation::kMean,
                                             detail::component_pair(ref_vectors, ref_vectors));
  }
  return result;
}

enum class ComponentTextField { kCharacteristics, kMotion };

/// Every non-empty text of the chosen component field in (layer, group)
/// across a corpus, in scenario-then-component order.
inline std::vector<std::string> component_texts(const std::vector<Scenario>& scenes, int k,
                                                const std::string& group,
                                                ComponentTextField field) {
  std::vector<std::string> texts;
  for (const auto& s : scenes) {
    if (s.mode != StructureMode::kHard) {
      throw NotHardMode("component_texts: scenario '" + s.id + "' is " + to_string(s.mode));
    }
    const auto* components = s.layer(k).structured().find(group);
    if (components == nullptr) continue;
    for (const auto& component : *components) {
      if (field == ComponentTextField::kCharacteristics) {
        if (!component.characteristics.empty()) texts.push_back(component.characteristics);
      } else if (component.motion && !component.motion->empty()) {
        texts.push_back(*component.motion);
      }
    }
  }
  return texts;
}

/// D(min) over a bag of texts under the given provider; NA when fewer than
/// two texts exist.
inline MetricValue text_set_diversity(const std::vector<std::string>& texts,
                                      EmbeddingProvider& provider,
                                      Aggregation mode = Aggregation::kMin) {
  if (texts.size() < 2) {
    return {};
  }
  auto rows = provider.embed(texts);
  EmbeddingSet set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.append(std::move(rows[i]), SourceRef{"text[" + std::to_string(i) + "]", 0, "text"});
  }
  return dataset_diversity_scored(set, mode);
}

inline MetricValue characteristics_diversity(const std::vector<Scenario>& scenes, int k,
                                             const std::string& group,
                                             EmbeddingProvider& provider) {
  return text_set_diversity(component_texts(scenes, k, group, ComponentTextField::kCharacteristics),
                            provider);
}

/// Arithmetic mean of per-scene component counts in (layer, group).
inline double mean_component_count(const std::vector<Scenario>& scenes, int k,
                                   const std::string& group) {
  if (scenes.empty()) {
    throw EmptySet("mean_component_count: empty scene list");
  }
  double total = 0.0;
  for (const auto& s : scenes) {
    if (s.mode != StructureMode::kHard) {
      throw NotHardMode("mean_component_count: scenario '" + s.id + "' is " + to_string(s.mode));
    }
    const auto* components = s.layer(k).structured().find(group);
    if (components == nullptr) {
      throw NotApplicable("layer " + std::to_string(k) + " declares no group '" + group + "'");
    }
    total += static_cast<double>(components->size());
  }
  return total / static_cast<double>(scenes.size());
}

}  // namespace fivelm
