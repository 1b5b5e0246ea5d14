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

// fivelm: five-layer driving-scenario corpora. Ingestion, LLM-driven
// single-layer edge-case editing, and originality/diversity evaluation.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fivelm/corpus.hpp"
#include "fivelm/http_clients.hpp"
#include "fivelm/pipeline.hpp"
#include "fivelm/report.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes, one per error class.
constexpr int kExitOk = 0;
constexpr int kExitMalformed = 2;
constexpr int kExitSchema = 3;
constexpr int kExitChecksum = 4;
constexpr int kExitIo = 5;
constexpr int kExitProvider = 6;
constexpr int kExitClient = 7;
constexpr int kExitRepairs = 8;
constexpr int kExitStrictQuarantine = 9;
constexpr int kExitOther = 10;

struct CommonOptions {
  std::string taxonomy_file;
};

fivelm::Taxonomy load_taxonomy(const CommonOptions& common) {
  if (common.taxonomy_file.empty()) {
    return fivelm::Taxonomy::defaults();
  }
  return fivelm::Taxonomy::load_file(common.taxonomy_file);
}

std::vector<int> parse_layers(const std::string& expression) {
  std::vector<int> layers;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const auto dash = token.find('-');
    if (dash != std::string::npos) {
      const int lo = std::stoi(token.substr(0, dash));
      const int hi = std::stoi(token.substr(dash + 1));
      for (int k = lo; k <= hi; ++k) layers.push_back(k);
    } else {
      layers.push_back(std::stoi(token));
    }
    token.clear();
  };
  for (char c : expression) {
    if (c == ',') {
      flush();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token.push_back(c);
    }
  }
  flush();
  for (int k : layers) {
    if (k < 1 || k > 5) {
      throw CLI::ValidationError("--layers", "layer indices must be in 1..5");
    }
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  if (layers.empty()) {
    throw CLI::ValidationError("--layers", "no layers selected");
  }
  return layers;
}

void write_output(const std::string& content, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  fivelm::detail::write_file_atomic(out_path, content);
}

std::string read_text_file(const std::string& path) {
  return fivelm::detail::read_file(path);
}

/// Picks the embedding provider from --provider/--embed-cache and the
/// environment. "auto" is remote when EMBED_ENDPOINT is set, local otherwise.
std::shared_ptr<fivelm::EmbeddingProvider> make_provider(const std::string& provider_choice,
                                                         const std::string& cache_file) {
  std::string choice = provider_choice;
  if (choice == "auto") {
    choice = fivelm::detail::env_value("EMBED_ENDPOINT") ? "remote" : "local";
  }
  std::shared_ptr<fivelm::EmbeddingCache> cache;
  if (!cache_file.empty()) {
    cache = std::make_shared<fivelm::EmbeddingCache>(cache_file);
  }
  if (choice == "replay") {
    if (!cache) {
      throw fivelm::ProviderUnavailable("--provider replay requires --embed-cache");
    }
    return std::make_shared<fivelm::ReplayProvider>(cache);
  }
  std::shared_ptr<fivelm::EmbeddingProvider> inner;
  if (choice == "local") {
    inner = std::make_shared<fivelm::LocalProvider>();
  } else if (choice == "remote") {
    inner = std::make_shared<fivelm::RemoteEmbeddingProvider>(
        fivelm::RemoteEmbeddingProvider::config_from_env());
  } else {
    throw fivelm::Error("unknown provider '" + choice + "'; use local, remote, replay or auto");
  }
  if (cache) {
    return std::make_shared<fivelm::CachedProvider>(inner, cache);
  }
  return inner;
}

int cmd_ingest(const std::string& in_dir, const std::string& out_manifest,
               const std::string& role, const CommonOptions& common) {
  const fivelm::Taxonomy taxonomy = load_taxonomy(common);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".json") continue;
    if (entry.path().filename() == "manifest.json") continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw fivelm::IoFailure("no scenario files found under " + in_dir);
  }

  const fs::path manifest_path =
      out_manifest.empty() ? fs::path(in_dir) / "manifest.json" : fs::path(out_manifest);
  const fs::path base = manifest_path.parent_path();

  fivelm::Manifest manifest;
  std::set<std::string> ids;
  for (const auto& file : files) {
    const std::string content = fivelm::detail::read_file(file);
    fivelm::Scenario s;
    try {
      s = fivelm::parse_scenario(content, fivelm::detect_mode(content), taxonomy);
    } catch (const fivelm::SchemaViolation& e) {
      throw fivelm::SchemaViolation(file.string() + ": " + e.path(), e.what());
    } catch (const fivelm::MalformedDocument& e) {
      throw fivelm::MalformedDocument(file.string() + ": " + e.what());
    }
    std::string id = s.id.empty() ? file.stem().string() : s.id;
    if (!ids.insert(id).second) {
      throw fivelm::SchemaViolation(file.string(), "duplicate scenario id '" + id + "'");
    }
    const fs::path relative = fs::relative(file, base);
    manifest.entries.push_back(
        fivelm::ManifestEntry{id, relative.string(), role, fivelm::detail::checksum(content)});
  }
  manifest.save(manifest_path);
  std::cerr << "ingested " << manifest.entries.size() << " scenarios -> "
            << manifest_path.string() << "\n";
  return kExitOk;
}

struct GenerateArgs {
  std::string refs_manifest;
  std::string out_dir;
  std::string layers = "1-5";
  int variants = 10;
  std::string structure = "auto";
  std::string context = "independent";
  double temperature = 1.0;
  std::uint64_t seed = 1;
  int max_repairs = 2;
  bool strict = false;
  std::string tasks_file;
  std::string system_prompt_file;
  std::string created_at;
};

int cmd_generate(const GenerateArgs& args, const CommonOptions& common) {
  const fivelm::Taxonomy taxonomy = load_taxonomy(common);
  const fivelm::Corpus refs = fivelm::load_corpus(args.refs_manifest, taxonomy);
  if (refs.scenarios.empty()) {
    throw fivelm::EmptyReference("reference corpus is empty");
  }

  fivelm::SweepConfig config;
  config.layers = parse_layers(args.layers);
  config.variants = args.variants;
  config.context = fivelm::context_mode_from_string(args.context);
  config.temperature = args.temperature;
  config.generate.max_repairs = args.max_repairs;
  config.generate.created_at = args.created_at;
  config.prompts.taxonomy = taxonomy;
  if (!args.tasks_file.empty()) {
    config.prompts.tasks = fivelm::TaskLibrary::load_file(args.tasks_file);
  }
  if (!args.system_prompt_file.empty()) {
    config.prompts.system_prompt = read_text_file(args.system_prompt_file);
  }
  if (args.structure == "auto") {
    config.structure = refs.scenarios.front().mode;
  } else {
    config.structure = fivelm::structure_mode_from_string(args.structure);
  }

  std::unique_ptr<fivelm::ChatClient> client;
  if (fivelm::detail::env_value("LLM_ENDPOINT")) {
    client = std::make_unique<fivelm::HttpChatClient>(fivelm::HttpChatClient::from_env());
  } else {
    client = std::make_unique<fivelm::MockChatClient>(args.seed, taxonomy);
    std::cerr << "LLM_ENDPOINT not set; using the seeded mock client (seed " << args.seed
              << ")\n";
  }

  const fivelm::SweepSummary summary =
      fivelm::run_generation_sweep(*client, refs.scenarios, config, args.out_dir);
  std::cout << "generated: " << summary.generated << "\n"
            << "quarantined: " << summary.quarantined << "\n"
            << "repair retries: " << summary.repair_retries << "\n"
            << "no-op edits: " << summary.noops << "\n"
            << "manifest: " << summary.manifest_path.string() << "\n";
  if (args.strict && summary.quarantined > 0) {
    std::cerr << "strict mode: " << summary.quarantined << " scenario(s) quarantined\n";
    return kExitStrictQuarantine;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string gen_manifest;
  std::string refs_manifest;
  std::string provider = "auto";
  std::string embed_cache;
  bool exclude_noops = false;
  std::string metrics = "all";
  std::string out;
};

void apply_metric_selection(const std::string& selection, fivelm::EvaluateOptions& options) {
  if (selection == "all") return;
  options.semantic = options.components = options.characteristics = options.counts = false;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "semantic") options.semantic = true;
    else if (token == "components") options.components = true;
    else if (token == "characteristics") options.characteristics = true;
    else if (token == "counts") options.counts = true;
    else
      throw fivelm::Error("unknown metric family '" + token +
                          "'; use semantic, components, characteristics, counts or all");
    token.clear();
  };
  for (char c : selection) {
    if (c == ',') flush();
    else if (!std::isspace(static_cast<unsigned char>(c))) token.push_back(c);
  }
  flush();
}

int cmd_evaluate(const EvaluateArgs& args, const CommonOptions& common) {
  const fivelm::Taxonomy taxonomy = load_taxonomy(common);
  const fivelm::Corpus gen = fivelm::load_corpus(args.gen_manifest, taxonomy);
  const fivelm::Corpus refs = fivelm::load_corpus(args.refs_manifest, taxonomy);
  auto provider = make_provider(args.provider, args.embed_cache);

  fivelm::EvaluateOptions options;
  options.exclude_noops = args.exclude_noops;
  apply_metric_selection(args.metrics, options);
  const fivelm::MetricReport report =
      fivelm::evaluate_corpora(gen.scenarios, refs.scenarios, *provider, taxonomy, options);
  write_output(report.to_json().dump(2) + "\n", args.out);
  if (!args.out.empty() && args.out != "-") {
    std::cerr << "report: " << args.out << " (" << report.rows.size() << " rows)\n";
  }
  return kExitOk;
}

int cmd_report(const std::string& in_path, const std::string& format, const std::string& out) {
  fivelm::json doc;
  try {
    doc = fivelm::json::parse(read_text_file(in_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw fivelm::MalformedDocument(std::string("report JSON: ") + e.what());
  }
  const fivelm::MetricReport report = fivelm::MetricReport::from_json(doc);
  if (format == "markdown") {
    write_output(fivelm::render_markdown(report), out);
  } else if (format == "csv") {
    write_output(fivelm::render_csv(report), out);
  } else {
    throw fivelm::Error("unknown report format '" + format + "'; use markdown or csv");
  }
  return kExitOk;
}

struct EmbedArgs {
  std::string refs_manifest;
  std::string gen_manifest;
  std::string provider = "auto";
  std::string embed_cache;
};

/// Pre-computes every embedding the evaluate command would request, writing
/// through the cache so later runs can replay offline.
int cmd_embed(const EmbedArgs& args, const CommonOptions& common) {
  if (args.embed_cache.empty()) {
    throw fivelm::ProviderUnavailable("embed requires --embed-cache");
  }
  const fivelm::Taxonomy taxonomy = load_taxonomy(common);
  const fivelm::Corpus refs = fivelm::load_corpus(args.refs_manifest, taxonomy);
  const fivelm::Corpus gen = args.gen_manifest.empty()
                                 ? refs
                                 : fivelm::load_corpus(args.gen_manifest, taxonomy);
  if (args.provider == "replay") {
    throw fivelm::ProviderUnavailable("embed fills a cache; use --provider local or remote");
  }
  auto cache = std::make_shared<fivelm::EmbeddingCache>(args.embed_cache);
  fivelm::CachedProvider cached(make_provider(args.provider, ""), cache);
  (void)fivelm::evaluate_corpora(gen.scenarios, refs.scenarios, cached, taxonomy);
  std::cerr << "cache " << args.embed_cache << ": " << cache->size() << " entries ("
            << cached.misses() << " new)\n";
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"five-layer scenario corpora: generation and evaluation toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  app.add_option("--taxonomy", common.taxonomy_file,
                 "taxonomy JSON file overriding the built-in category lists");

  auto* ingest = app.add_subcommand("ingest", "validate scenario files and write a manifest");
  std::string ingest_in;
  std::string ingest_out;
  std::string ingest_role = "reference";
  ingest->add_option("--in", ingest_in, "directory of scenario .json files")->required();
  ingest->add_option("--out", ingest_out, "manifest path (default <in>/manifest.json)");
  ingest->add_option("--role", ingest_role, "corpus role: reference or generated")
      ->check(CLI::IsMember({"reference", "generated"}));

  auto* generate = app.add_subcommand("generate", "edit reference scenarios into edge cases");
  GenerateArgs gen_args;
  generate->add_option("--refs", gen_args.refs_manifest, "reference manifest")->required();
  generate->add_option("--out", gen_args.out_dir, "output directory for the run")->required();
  generate->add_option("--layers", gen_args.layers, "layers to edit, e.g. 4 or 1,3 or 1-5");
  generate->add_option("--variants", gen_args.variants, "variants per (source, layer)")
      ->check(CLI::PositiveNumber);
  generate->add_option("--structure", gen_args.structure,
                       "unstructured|soft|hard|auto (auto follows the references)")
      ->check(CLI::IsMember({"unstructured", "soft", "hard", "auto"}));
  generate->add_option("--context", gen_args.context, "independent|shared")
      ->check(CLI::IsMember({"independent", "shared"}));
  generate->add_option("--temperature", gen_args.temperature, "sampling temperature");
  generate->add_option("--seed", gen_args.seed, "seed for the mock client");
  generate->add_option("--max-repairs", gen_args.max_repairs, "repair re-prompts per reply");
  generate->add_flag("--strict", gen_args.strict, "fail when any edit is quarantined");
  generate->add_option("--tasks", gen_args.tasks_file, "per-layer task text JSON file");
  generate->add_option("--system-prompt", gen_args.system_prompt_file, "system prompt file");
  generate->add_option("--created-at", gen_args.created_at,
                       "provenance timestamp override (ISO-8601)");

  auto* evaluate = app.add_subcommand("evaluate", "score a generated corpus against references");
  EvaluateArgs eval_args;
  evaluate->add_option("--gen", eval_args.gen_manifest, "generated manifest")->required();
  evaluate->add_option("--refs", eval_args.refs_manifest, "reference manifest")->required();
  evaluate->add_option("--provider", eval_args.provider, "local|remote|replay|auto");
  evaluate->add_option("--embed-cache", eval_args.embed_cache, "embedding cache file");
  evaluate->add_flag("--exclude-noops", eval_args.exclude_noops,
                     "drop generated scenarios identical to their source");
  evaluate->add_option("--metrics", eval_args.metrics,
                       "metric families: all or a comma list of "
                       "semantic,components,characteristics,counts");
  evaluate->add_option("--out", eval_args.out, "report JSON path (default stdout)");

  auto* report = app.add_subcommand("report", "render a report JSON as markdown or csv");
  std::string report_in;
  std::string report_format = "markdown";
  std::string report_out;
  report->add_option("--in", report_in, "report JSON from evaluate")->required();
  report->add_option("--format", report_format, "markdown|csv")
      ->check(CLI::IsMember({"markdown", "csv"}));
  report->add_option("--out", report_out, "output path (default stdout)");

  auto* embed = app.add_subcommand("embed", "pre-compute embeddings into a cache file");
  EmbedArgs embed_args;
  embed->add_option("--refs", embed_args.refs_manifest, "reference manifest")->required();
  embed->add_option("--gen", embed_args.gen_manifest, "generated manifest (default: refs)");
  embed->add_option("--provider", embed_args.provider, "local|remote|auto");
  embed->add_option("--embed-cache", embed_args.embed_cache, "cache file to fill")->required();

  CLI11_PARSE(app, argc, argv);

  if (ingest->parsed()) return cmd_ingest(ingest_in, ingest_out, ingest_role, common);
  if (generate->parsed()) return cmd_generate(gen_args, common);
  if (evaluate->parsed()) return cmd_evaluate(eval_args, common);
  if (report->parsed()) return cmd_report(report_in, report_format, report_out);
  if (embed->parsed()) return cmd_embed(embed_args, common);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const fivelm::MalformedDocument& e) {
    std::cerr << "error (malformed document): " << e.what() << "\n";
    return kExitMalformed;
  } catch (const fivelm::SchemaViolation& e) {
    std::cerr << "error (schema violation): " << e.what() << "\n";
    return kExitSchema;
  } catch (const fivelm::ChecksumMismatch& e) {
    std::cerr << "error (checksum mismatch): " << e.what() << "\n";
    return kExitChecksum;
  } catch (const fivelm::IoFailure& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return kExitIo;
  } catch (const fivelm::ProviderUnavailable& e) {
    std::cerr << "error (embedding provider): " << e.what() << "\n";
    return kExitProvider;
  } catch (const fivelm::ClientUnavailable& e) {
    std::cerr << "error (chat client): " << e.what() << "\n";
    return kExitClient;
  } catch (const fivelm::ExhaustedRepairs& e) {
    std::cerr << "error (repairs exhausted): " << e.what() << "\n";
    return kExitRepairs;
  } catch (const fivelm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitOther + 1;
  }
}
