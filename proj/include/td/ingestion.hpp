#pragma once
// Loading block-group profiles and HTS person records, the 3xIQR outlier
// filter, and survey-weighted statistics. Loaders are single-threaded per
// file; loaded structures are immutable and shareable.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "td/core.hpp"

namespace td {

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thresholds (per square mile) splitting intersection density into
// {low, medium, high} tiers for vehicle-count conditioning.
struct DensityTiers {
  double medium_min = 50.0;
  double high_min = 150.0;

  std::string tier_for(double intersection_density) const;
};

struct BlockGroupProfile {
  std::string geoid;
  double employment_rate = 0.0;  // [0,1]
  // Age-bracket distribution conditioned on employment status.
  std::map<std::string, Distribution> age_distribution_by_employment;
  std::string income_level;
  double intersection_density = 0.0;
  // Keyed "<income_level>|<density tier>", values over {"0","1","2","3+"}.
  std::map<std::string, Distribution> vehicle_count_distribution;
  double mean_household_size = 1.0;
  double population_density = 0.0;
  double employment_mix = 0.0;
  double transit_access = 0.0;  // miles to nearest transit

  void check() const;  // throws LoadError on invariant violation
};

enum class EventKind { activity, trip };

struct PersonEvent {
  EventKind kind = EventKind::activity;
  Minutes start_time = 0;
  Minutes end_time = 0;
  std::optional<std::string> purpose;
  std::optional<std::string> mode;          // required for trips
  std::optional<double> distance_miles;     // required for trips
  int travelers = 1;
};

struct PersonRecord {
  std::string person_id;
  double survey_weight = 1.0;  // > 0
  Persona demographics;        // persona_id mirrors person_id
  std::vector<PersonEvent> events;  // chronologically ordered

  std::vector<PersonEvent> trips() const;  // Trip events only
  Diary trip_diary() const;                // trips as a Diary (source hts)
};

// blockgroups.json: a single JSON array of profile objects. Duplicate
// GEOIDs and invariant violations are rejected with context.
std::map<std::string, BlockGroupProfile> load_block_groups(const std::string& path);
std::string block_groups_to_json(const std::vector<BlockGroupProfile>& profiles);

// hts.jsonl: one PersonRecord object per line, events tagged with
// "kind": "Activity" | "Trip". Out-of-order events are rejected.
std::vector<PersonRecord> load_hts(const std::string& path);
std::string hts_to_jsonl(const std::vector<PersonRecord>& persons);

struct OutlierFilterResult {
  std::vector<PersonEvent> kept;
  std::vector<PersonEvent> removed;
  bool applied = false;  // false when fewer than 4 trips made quartiles unstable
};

// Removes a trip iff its distance, duration, or traveler count lies above
// Q3 + 3*IQR or below Q1 - 3*IQR, quartiles computed over the full input
// per field (single pass). Fewer than 4 trips: no-op, flagged.
OutlierFilterResult filter_outlier_trips(const std::vector<PersonEvent>& trips);

// Applies the trip outlier filter across the whole survey, pooling every
// person's trips for the quartiles. Returns the number of trips removed.
int filter_hts_outliers(std::vector<PersonRecord>& persons);

// Linear-interpolation quantile (values need not be sorted).
double quantile(std::vector<double> values, double q);

double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights);
double weighted_share(const std::vector<bool>& indicator, const std::vector<double>& weights);

}  // namespace td
