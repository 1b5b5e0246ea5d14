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
#include <optional>
#include <string>
#include <vector>

#include "fivelm/errors.hpp"
#include "fivelm/scenario.hpp"

namespace fivelm {

/// One scored cell: a metric at a mode for a layer column. NA cells keep
/// score empty; na_pairs counts similarity pairs skipped for zero norms.
struct MetricRow {
  std::string layer;
  std::string metric;
  std::string mode;
  std::optional<double> score;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t na_pairs = 0;
};

struct MetricReport {
  std::string provider_id;
  std::size_t generated_count = 0;
  std::size_t reference_count = 0;
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& layer, const std::string& metric,
                        const std::string& mode) const {
    for (const auto& row : rows) {
      if (row.layer == layer && row.metric == metric && row.mode == mode) return &row;
    }
    return nullptr;
  }

  json to_json() const {
    json doc;
    doc["provider"] = provider_id;
    doc["generated"] = generated_count;
    doc["reference"] = reference_count;
    json rows_json = json::array();
    for (const auto& row : rows) {
      json item;
      item["layer"] = row.layer;
      item["metric"] = row.metric;
      item["mode"] = row.mode;
      if (row.score) {
        item["score"] = *row.score;
      } else {
        item["score"] = nullptr;
      }
      item["M"] = row.m;
      item["N"] = row.n;
      item["na_pairs"] = row.na_pairs;
      rows_json.push_back(std::move(item));
    }
    doc["rows"] = std::move(rows_json);
    return doc;
  }

  static MetricReport from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("rows") || !doc.at("rows").is_array()) {
      throw MalformedDocument("metric report requires a rows array");
    }
    MetricReport report;
    report.provider_id = doc.value("provider", std::string{});
    report.generated_count = doc.value("generated", std::size_t{0});
    report.reference_count = doc.value("reference", std::size_t{0});
    for (const auto& item : doc.at("rows")) {
      MetricRow row;
      row.layer = item.value("layer", std::string{});
      row.metric = item.value("metric", std::string{});
      row.mode = item.value("mode", std::string{});
      if (item.contains("score") && item.at("score").is_number()) {
        row.score = item.at("score").get<double>();
      }
      row.m = item.value("M", std::size_t{0});
      row.n = item.value("N", std::size_t{0});
      row.na_pairs = item.value("na_pairs", std::size_t{0});
      report.rows.push_back(std::move(row));
    }
    return report;
  }
};

namespace detail {

inline std::string format_score(const std::optional<double>& score) {
  if (!score) return "NA";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", *score);
  return buffer;
}

inline std::string format_score_csv(const std::optional<double>& score) {
  if (!score) return "NA";
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.12g", *score);
  return buffer;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// CSV rendering with the fixed column set layer,metric,mode,score,M,N,na_pairs.
inline std::string render_csv(const MetricReport& report) {
  std::string out = "layer,metric,mode,score,M,N,na_pairs\n";
  for (const auto& row : report.rows) {
    out += detail::csv_escape(row.layer) + "," + detail::csv_escape(row.metric) + "," +
           detail::csv_escape(row.mode) + "," + detail::format_score_csv(row.score) + "," +
           std::to_string(row.m) + "," + std::to_string(row.n) + "," +
           std::to_string(row.na_pairs) + "\n";
  }
  return out;
}

namespace detail {

inline const std::vector<std::string>& semantic_layer_columns() {
  static const std::vector<std::string> columns = {"L1", "L2", "L3", "L4", "L5",
                                                   "total-text", "total-mean"};
  return columns;
}

inline void render_metric_table(const MetricReport& report, std::string& out,
                                const std::vector<std::pair<std::string, std::string>>& metrics,
                                const std::vector<std::string>& columns) {
  out += "| metric | mode |";
  for (const auto& column : columns) out += " " + column + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& [metric, mode] : metrics) {
    bool any = false;
    std::string line = "| " + metric + " | " + mode + " |";
    for (const auto& column : columns) {
      const MetricRow* row = report.find(column, metric, mode);
      line += " " + (row ? format_score(row->score) : std::string("-")) + " |";
      any = any || row != nullptr;
    }
    if (any) {
      out += line + "\n";
    }
  }
}

/// Rows whose metric is "<stem>(group)" (optionally with a _ref stem variant),
/// rendered as a layer/group table with generated and reference columns.
inline void render_grouped_table(const MetricReport& report, std::string& out,
                                 const std::string& stem) {
  struct Entry {
    std::string layer;
    std::string group;
    const MetricRow* gen = nullptr;
    const MetricRow* ref = nullptr;
  };
  std::vector<Entry> entries;
  auto locate = [&](const std::string& layer, const std::string& group) -> Entry& {
    for (auto& entry : entries) {
      if (entry.layer == layer && entry.group == group) return entry;
    }
    entries.push_back(Entry{layer, group, nullptr, nullptr});
    return entries.back();
  };
  const std::string gen_prefix = stem + "(";
  const std::string ref_prefix = stem + "_ref(";
  for (const auto& row : report.rows) {
    if (row.metric.rfind(gen_prefix, 0) == 0 && row.metric.back() == ')') {
      const std::string group =
          row.metric.substr(gen_prefix.size(), row.metric.size() - gen_prefix.size() - 1);
      locate(row.layer, group).gen = &row;
    } else if (row.metric.rfind(ref_prefix, 0) == 0 && row.metric.back() == ')') {
      const std::string group =
          row.metric.substr(ref_prefix.size(), row.metric.size() - ref_prefix.size() - 1);
      locate(row.layer, group).ref = &row;
    }
  }
  if (entries.empty()) {
    out += "no rows\n";
    return;
  }
  out += "| layer | component | generated | reference |\n|---|---|---|---|\n";
  for (const auto& entry : entries) {
    out += "| " + entry.layer + " | " + entry.group + " | " +
           (entry.gen ? format_score(entry.gen->score) : "-") + " | " +
           (entry.ref ? format_score(entry.ref->score) : "-") + " |\n";
  }
}

}  // namespace detail

/// Markdown rendering: layers as columns, one block per metric family,
/// deterministic byte-for-byte for a given report.
inline std::string render_markdown(const MetricReport& report) {
  std::string out = "# Corpus evaluation report\n\n";
  out += "- provider: " + report.provider_id + "\n";
  out += "- generated scenarios (M): " + std::to_string(report.generated_count) + "\n";
  out += "- reference scenarios (N): " + std::to_string(report.reference_count) + "\n";

  out += "\n## Semantic metrics\n\n";
  detail::render_metric_table(report, out,
                              {{"O", "max"}, {"O", "min"}, {"D", "min"}, {"D", "max"},
                               {"D_ref", "min"}},
                              detail::semantic_layer_columns());

  const bool has_component_rows = report.find("L4", "CO", "max") != nullptr ||
                                  report.find("L1", "CO", "max") != nullptr;
  if (has_component_rows) {
    out += "\n## Component metrics\n\n";
    detail::render_metric_table(report, out,
                                {{"CO", "max"}, {"CD", "mean"}, {"CD_ref", "mean"}},
                                {"L1", "L2", "L3", "L4", "L5"});
    out += "\n## Characteristics diversity (min)\n\n";
    detail::render_grouped_table(report, out, "char_D");
    out += "\n## Motion diversity (min)\n\n";
    detail::render_grouped_table(report, out, "motion_D");
    out += "\n## Mean component counts\n\n";
    detail::render_grouped_table(report, out, "mean_components");
  }
  return out;
}

}  // namespace fivelm
