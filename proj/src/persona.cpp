#include "td/persona.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace td {

using nlohmann::json;

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SeededSampler::SeededSampler(uint64_t seed, uint64_t stream_id)
    : engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

double SeededSampler::uniform() {
  // 53-bit mantissa; avoids distribution-object implementation variance
  return (engine_() >> 11) * 0x1.0p-53;
}

uint64_t SeededSampler::next_u64() { return engine_(); }

size_t SeededSampler::categorical(const Distribution& dist) {
  if (dist.is_empty() || dist.categories.empty())
    throw DomainError("categorical draw from empty distribution");
  double u = uniform();
  double cum = 0.0;
  for (size_t i = 0; i < dist.mass.size(); ++i) {
    cum += dist.mass[i];
    if (u < cum) return i;
  }
  return dist.mass.size() - 1;  // guard against rounding at cum ~ 1
}

EmploymentStatus sample_employment(const BlockGroupProfile& profile, SeededSampler& sampler) {
  return sampler.uniform() < profile.employment_rate ? EmploymentStatus::employed
                                                     : EmploymentStatus::unemployed;
}

std::string sample_age_bracket(const BlockGroupProfile& profile, EmploymentStatus status,
                               SeededSampler& sampler) {
  auto it = profile.age_distribution_by_employment.find(to_string(status));
  if (it == profile.age_distribution_by_employment.end())
    throw ConfigurationError("block group " + profile.geoid +
                             " has no age distribution for status " + to_string(status));
  return it->second.categories[sampler.categorical(it->second)];
}

int sample_vehicles(const BlockGroupProfile& profile, const DensityTiers& tiers,
                    SeededSampler& sampler) {
  const std::string key =
      profile.income_level + "|" + tiers.tier_for(profile.intersection_density);
  auto it = profile.vehicle_count_distribution.find(key);
  if (it == profile.vehicle_count_distribution.end())
    throw ConfigurationError("block group " + profile.geoid +
                             " has no vehicle distribution cell for " + key);
  const std::string& label = it->second.categories[sampler.categorical(it->second)];
  if (label == "3+") return 3;
  return std::stoi(label);
}

int derive_household_size(const BlockGroupProfile& profile) {
  int rounded = static_cast<int>(std::floor(profile.mean_household_size + 0.5));
  return std::max(1, rounded);
}

Persona synthesize_persona(const BlockGroupProfile& profile, const std::string& persona_id,
                           const DensityTiers& tiers, SeededSampler& sampler) {
  Persona p;
  p.persona_id = persona_id;
  p.geoid = profile.geoid;
  p.employment_status = sample_employment(profile, sampler);
  p.age_bracket = sample_age_bracket(profile, p.employment_status, sampler);
  p.household_vehicles = sample_vehicles(profile, tiers, sampler);
  p.income_level = profile.income_level;
  p.household_size = derive_household_size(profile);
  return p;
}

std::string land_use_context(const BlockGroupProfile& profile) {
  std::string out = "The home area has a population density of ";
  out += format_number(profile.population_density);
  out += " people per square mile, an employment mix index of ";
  out += format_number(profile.employment_mix);
  out += ", and the nearest public transit stop is ";
  out += format_number(profile.transit_access);
  out += " miles from home.";
  return out;
}

std::string persona_to_json(const Persona& p) {
  json j;
  j["persona_id"] = p.persona_id;
  j["geoid"] = p.geoid;
  j["employment_status"] = to_string(p.employment_status);
  j["age_bracket"] = p.age_bracket;
  j["household_vehicles"] = p.household_vehicles;
  j["income_level"] = p.income_level;
  j["household_size"] = p.household_size;
  return j.dump();
}

Persona persona_from_json(const std::string& line) {
  json j = json::parse(line);
  Persona p;
  p.persona_id = j.at("persona_id").get<std::string>();
  p.geoid = j.at("geoid").get<std::string>();
  p.employment_status = employment_from_string(j.at("employment_status").get<std::string>());
  p.age_bracket = j.at("age_bracket").get<std::string>();
  p.household_vehicles = j.at("household_vehicles").get<int>();
  p.income_level = j.at("income_level").get<std::string>();
  p.household_size = j.at("household_size").get<int>();
  return p;
}

std::string personas_to_jsonl(const std::vector<Persona>& personas) {
  std::string out;
  for (const auto& p : personas) {
    out += persona_to_json(p);
    out += '\n';
  }
  return out;
}

std::vector<Persona> personas_from_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open personas file: " + path);
  std::vector<Persona> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(persona_from_json(line));
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace td
