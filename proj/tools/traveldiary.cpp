// traveldiary: batch pipeline for synthesizing personas, generating travel
// diaries (LLM backend or classical benchmark), validating them against an
// HTS, and emitting plot-data reports.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "td/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  long long seed = -1;
  std::string engine;
  std::string out_dir;
};

td::RunConfig resolve_config(const CommonOpts& opts) {
  td::RunConfig config =
      opts.config_path.empty() ? td::RunConfig{} : td::load_run_config(opts.config_path);
  if (opts.seed >= 0) config.seed = static_cast<uint64_t>(opts.seed);
  if (!opts.engine.empty()) config.engine = opts.engine;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  config.check();
  return config;
}

int fail(const std::string& stage, const std::exception& e) {
  nlohmann::json j;
  j["error"] = e.what();
  j["stage"] = stage;
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"census-grounded travel diary generation and validation"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global options after the subcommand too

  CommonOpts opts;
  app.add_option("--config", opts.config_path, "run configuration JSON file");
  app.add_option("--seed", opts.seed, "override the config seed");
  app.add_option("--engine", opts.engine, "llm | classical | both");
  app.add_option("--out", opts.out_dir, "output directory");

  auto* synth = app.add_subcommand("synthesize", "sample personas from block-group profiles");
  auto* gen = app.add_subcommand("generate", "generate diaries for synthesized personas");
  auto* val = app.add_subcommand("validate", "score diaries against the HTS");
  std::vector<std::string> diary_files;
  val->add_option("diaries", diary_files, "diary CSV files (one per engine)");
  auto* rep = app.add_subcommand("report", "emit plot-data CSVs from scores");
  std::string scores_path, personas_path;
  rep->add_option("--scores", scores_path, "scores.csv path");
  rep->add_option("--personas", personas_path, "personas.jsonl for subgroup breakdowns");

  CLI11_PARSE(app, argc, argv);

  try {
    td::RunConfig config = resolve_config(opts);
    if (synth->parsed()) {
      td::run_synthesize(config);
      std::cout << config.out_dir << "/personas.jsonl\n";
    } else if (gen->parsed()) {
      td::run_generate(config);
      if (config.engine != "classical") std::cout << config.out_dir << "/diaries_llm.csv\n";
      if (config.engine != "llm") std::cout << config.out_dir << "/diaries_classical.csv\n";
    } else if (val->parsed()) {
      if (diary_files.empty()) {
        if (config.engine != "classical") diary_files.push_back(config.out_dir + "/diaries_llm.csv");
        if (config.engine != "llm") diary_files.push_back(config.out_dir + "/diaries_classical.csv");
      }
      std::cout << td::run_validate(config, diary_files);
    } else if (rep->parsed()) {
      if (scores_path.empty()) scores_path = config.out_dir + "/scores.csv";
      if (personas_path.empty()) personas_path = config.out_dir + "/personas.jsonl";
      td::run_report(config, scores_path, personas_path);
      std::cout << config.out_dir << "/report_density.csv\n";
    }
  } catch (const std::exception& e) {
    return fail(app.get_subcommands().empty() ? "cli" : app.get_subcommands()[0]->get_name(), e);
  }
  return 0;
}
