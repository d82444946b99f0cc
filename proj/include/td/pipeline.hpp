#pragma once
// Run configuration and pipeline orchestration behind the CLI. Persona
// work parallelizes over a fixed worker count; every output file funnels
// through one writer and carries a {seed, config hash} sidecar.

#include <cstdint>
#include <string>
#include <vector>

#include "td/classical.hpp"
#include "td/llm.hpp"
#include "td/validation.hpp"

namespace td {

struct RunConfig {
  uint64_t seed = 0;
  std::string block_groups_path;
  std::string hts_path;
  std::string out_dir = "out";
  int persona_count = 1;
  std::string engine = "both";  // llm | classical | both
  int workers = 1;
  int min_cohort_size = 10;
  bool score_distance_variant = false;  // 1 - sqrt(JSD) instead of 1 - JSD
  CategorySchema schema = CategorySchema::defaults();
  GenerationConfig generation;
  // When set, generation uses MockBackend scripts instead of HTTP.
  std::string mock_responses_path;
  std::vector<std::string> covariates = FeatureBuilder::default_covariates();
  DensityTiers density_tiers;
  // Optional calibrated-model cache; fit-and-save when absent.
  std::string models_path;

  void check() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical serialized config; embedded in output sidecars.
uint64_t config_hash(const RunConfig& config);

// Deterministic batch synthesis: persona i uses RNG stream i and profile
// i mod #profiles. Pure function of (profiles, seed).
std::vector<Persona> synthesize_personas(const std::map<std::string, BlockGroupProfile>& profiles,
                                         int count, uint64_t seed, const DensityTiers& tiers);

struct GenerateOutcome {
  std::vector<Diary> diaries;              // successful, in persona order
  std::vector<GenerationFailure> failures; // llm engine only
};

GenerateOutcome generate_llm_batch(const std::vector<Persona>& personas,
                                   const std::map<std::string, BlockGroupProfile>& profiles,
                                   Backend& backend, const RunConfig& config);

GenerateOutcome generate_classical_batch(const std::vector<Persona>& personas,
                                         const std::map<std::string, BlockGroupProfile>& profiles,
                                         const ClassicalModels& models, const RunConfig& config);

// CLI entry points. Each writes its outputs under config.out_dir and a
// `<file>.meta.json` sidecar with seed and config hash.
void run_synthesize(const RunConfig& config);
void run_generate(const RunConfig& config);
// Scores every diary file one-to-cohort, writes scores.csv and
// aggregate.json; with two engines present the summary (written to
// summary.txt and returned) includes means, medians, SDs, and Welch's t.
std::string run_validate(const RunConfig& config, const std::vector<std::string>& diary_files);
// Plot-data emissions from scores.csv: score density histogram,
// employment x age subgroup means, per-level component breakdown.
void run_report(const RunConfig& config, const std::string& scores_path,
                const std::string& personas_path);

}  // namespace td
