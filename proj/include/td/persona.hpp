#pragma once
// Stochastic persona synthesis from block-group profiles. Each persona has
// its own RNG stream derived from (global seed, persona index), so batch
// output is independent of worker count and scheduling.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "td/ingestion.hpp"

namespace td {

struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic per-stream RNG. Identical (seed, stream_id) yields an
// identical draw sequence regardless of scheduling order.
class SeededSampler {
 public:
  SeededSampler(uint64_t seed, uint64_t stream_id);

  double uniform();            // [0, 1)
  uint64_t next_u64();
  // Index draw from a Distribution (must be non-empty).
  size_t categorical(const Distribution& dist);
  // Access to the raw engine for stdlib distribution adaptors.
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

EmploymentStatus sample_employment(const BlockGroupProfile& profile, SeededSampler& sampler);

std::string sample_age_bracket(const BlockGroupProfile& profile, EmploymentStatus status,
                               SeededSampler& sampler);

// Vehicle distribution cell keyed by (profile income level, density tier).
// Label "3+" collapses to integer 3.
int sample_vehicles(const BlockGroupProfile& profile, const DensityTiers& tiers,
                    SeededSampler& sampler);

// Round-half-up of the block group's mean household size, floored at 1.
int derive_household_size(const BlockGroupProfile& profile);

Persona synthesize_persona(const BlockGroupProfile& profile, const std::string& persona_id,
                           const DensityTiers& tiers, SeededSampler& sampler);

// Deterministic description of the physical environment: population
// density, employment mix, and transit accessibility, rendered verbatim.
std::string land_use_context(const BlockGroupProfile& profile);

std::string persona_to_json(const Persona& p);
Persona persona_from_json(const std::string& line);

std::string personas_to_jsonl(const std::vector<Persona>& personas);
std::vector<Persona> personas_from_jsonl_file(const std::string& path);

}  // namespace td
