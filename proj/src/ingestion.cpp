#include "td/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace td {

using nlohmann::json;

namespace {

Distribution distribution_from_json(const json& j, const std::string& ctx) {
  if (!j.contains("categories") || !j.contains("mass"))
    throw LoadError(ctx + ": distribution needs categories and mass");
  Distribution d;
  d.categories = j.at("categories").get<std::vector<std::string>>();
  d.mass = j.at("mass").get<std::vector<double>>();
  d.empty_marker = j.value("empty", false);
  try {
    d.check();
  } catch (const SchemaError& e) {
    throw LoadError(ctx + ": " + e.what());
  }
  return d;
}

json distribution_to_json(const Distribution& d) {
  json j;
  j["categories"] = d.categories;
  j["mass"] = d.mass;
  if (d.empty_marker) j["empty"] = true;
  return j;
}

PersonEvent event_from_json(const json& j, const std::string& ctx) {
  PersonEvent e;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "Activity") {
    e.kind = EventKind::activity;
  } else if (kind == "Trip") {
    e.kind = EventKind::trip;
  } else {
    throw LoadError(ctx + ": unknown event kind: " + kind);
  }
  e.start_time = j.at("start_time").get<int>();
  e.end_time = j.at("end_time").get<int>();
  if (j.contains("purpose")) e.purpose = j.at("purpose").get<std::string>();
  if (j.contains("mode")) e.mode = j.at("mode").get<std::string>();
  if (j.contains("distance_miles")) e.distance_miles = j.at("distance_miles").get<double>();
  e.travelers = j.value("travelers", 1);
  if (e.kind == EventKind::trip) {
    if (!e.purpose || !e.mode || !e.distance_miles)
      throw LoadError(ctx + ": Trip event missing purpose, mode, or distance_miles");
  }
  if (e.end_time <= e.start_time)
    throw LoadError(ctx + ": event end_time <= start_time");
  return e;
}

json event_to_json(const PersonEvent& e) {
  json j;
  j["kind"] = e.kind == EventKind::trip ? "Trip" : "Activity";
  j["start_time"] = e.start_time;
  j["end_time"] = e.end_time;
  if (e.purpose) j["purpose"] = *e.purpose;
  if (e.mode) j["mode"] = *e.mode;
  if (e.distance_miles) j["distance_miles"] = *e.distance_miles;
  if (e.travelers != 1) j["travelers"] = e.travelers;
  return j;
}

Persona demographics_from_json(const json& j, const std::string& ctx) {
  Persona p;
  p.geoid = j.at("geoid").get<std::string>();
  p.employment_status = employment_from_string(j.at("employment_status").get<std::string>());
  p.age_bracket = j.at("age_bracket").get<std::string>();
  p.household_vehicles = j.at("household_vehicles").get<int>();
  p.income_level = j.at("income_level").get<std::string>();
  p.household_size = j.at("household_size").get<int>();
  if (p.household_size < 1) throw LoadError(ctx + ": household_size < 1");
  if (p.household_vehicles < 0) throw LoadError(ctx + ": household_vehicles < 0");
  return p;
}

}  // namespace

std::string DensityTiers::tier_for(double intersection_density) const {
  if (intersection_density < medium_min) return "low";
  if (intersection_density < high_min) return "medium";
  return "high";
}

void BlockGroupProfile::check() const {
  auto ctx = "block group " + geoid;
  if (geoid.empty()) throw LoadError("block group with empty geoid");
  if (employment_rate < 0.0 || employment_rate > 1.0)
    throw LoadError(ctx + ": employment_rate outside [0,1]: " + format_number(employment_rate));
  if (mean_household_size < 1.0)
    throw LoadError(ctx + ": mean_household_size < 1");
  for (const auto& [status, dist] : age_distribution_by_employment) {
    if (status != "employed" && status != "unemployed")
      throw LoadError(ctx + ": unknown employment key: " + status);
    try {
      dist.check();
    } catch (const SchemaError& e) {
      throw LoadError(ctx + ": age distribution (" + status + "): " + e.what());
    }
  }
  for (const auto& [key, dist] : vehicle_count_distribution) {
    try {
      dist.check();
    } catch (const SchemaError& e) {
      throw LoadError(ctx + ": vehicle distribution (" + key + "): " + e.what());
    }
  }
}

std::map<std::string, BlockGroupProfile> load_block_groups(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open block-group file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw LoadError(path + ": JSON parse error: " + e.what());
  }
  if (!doc.is_array()) throw LoadError(path + ": expected a JSON array of profiles");
  std::map<std::string, BlockGroupProfile> out;
  int index = 0;
  for (const auto& j : doc) {
    const std::string ctx = path + " profile[" + std::to_string(index++) + "]";
    BlockGroupProfile p;
    try {
      p.geoid = j.at("geoid").get<std::string>();
      p.employment_rate = j.at("employment_rate").get<double>();
      for (const auto& [status, dj] : j.at("age_distribution_by_employment").items())
        p.age_distribution_by_employment[status] =
            distribution_from_json(dj, ctx + " age(" + status + ")");
      p.income_level = j.at("income_level").get<std::string>();
      p.intersection_density = j.at("intersection_density").get<double>();
      for (const auto& [key, dj] : j.at("vehicle_count_distribution").items())
        p.vehicle_count_distribution[key] =
            distribution_from_json(dj, ctx + " vehicles(" + key + ")");
      p.mean_household_size = j.at("mean_household_size").get<double>();
      p.population_density = j.at("population_density").get<double>();
      p.employment_mix = j.at("employment_mix").get<double>();
      p.transit_access = j.at("transit_access").get<double>();
    } catch (const json::exception& e) {
      throw LoadError(ctx + ": " + e.what());
    }
    p.check();
    if (!out.emplace(p.geoid, p).second)
      throw LoadError(ctx + ": duplicate GEOID: " + p.geoid);
  }
  return out;
}

std::string block_groups_to_json(const std::vector<BlockGroupProfile>& profiles) {
  json arr = json::array();
  for (const auto& p : profiles) {
    json j;
    j["geoid"] = p.geoid;
    j["employment_rate"] = p.employment_rate;
    json ages;
    for (const auto& [status, dist] : p.age_distribution_by_employment)
      ages[status] = distribution_to_json(dist);
    j["age_distribution_by_employment"] = ages;
    j["income_level"] = p.income_level;
    j["intersection_density"] = p.intersection_density;
    json veh;
    for (const auto& [key, dist] : p.vehicle_count_distribution)
      veh[key] = distribution_to_json(dist);
    j["vehicle_count_distribution"] = veh;
    j["mean_household_size"] = p.mean_household_size;
    j["population_density"] = p.population_density;
    j["employment_mix"] = p.employment_mix;
    j["transit_access"] = p.transit_access;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::vector<PersonEvent> PersonRecord::trips() const {
  std::vector<PersonEvent> out;
  for (const auto& e : events)
    if (e.kind == EventKind::trip) out.push_back(e);
  return out;
}

Diary PersonRecord::trip_diary() const {
  Diary d;
  d.persona_id = person_id;
  d.source = DiarySource::hts;
  for (const auto& e : events) {
    if (e.kind != EventKind::trip) continue;
    TripRecord t;
    t.start_time = e.start_time;
    t.end_time = e.end_time;
    t.purpose = *e.purpose;
    t.mode = *e.mode;
    t.distance_miles = *e.distance_miles;
    d.trips.push_back(t);
  }
  return d;
}

std::vector<PersonRecord> load_hts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open HTS file: " + path);
  std::vector<PersonRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(ctx + ": JSON parse error: " + e.what());
    }
    PersonRecord r;
    try {
      r.person_id = j.at("person_id").get<std::string>();
      r.survey_weight = j.at("survey_weight").get<double>();
      r.demographics = demographics_from_json(j.at("demographics"), ctx);
      r.demographics.persona_id = r.person_id;
      int ei = 0;
      for (const auto& ej : j.at("events"))
        r.events.push_back(event_from_json(ej, ctx + " event[" + std::to_string(ei++) + "]"));
    } catch (const json::exception& e) {
      throw LoadError(ctx + ": " + e.what());
    }
    if (r.survey_weight <= 0.0) throw LoadError(ctx + ": survey_weight must be positive");
    for (size_t i = 0; i + 1 < r.events.size(); ++i)
      if (r.events[i + 1].start_time < r.events[i].start_time)
        throw LoadError(ctx + ": events out of chronological order at index " +
                        std::to_string(i + 1));
    out.push_back(std::move(r));
  }
  return out;
}

std::string hts_to_jsonl(const std::vector<PersonRecord>& persons) {
  std::string out;
  for (const auto& r : persons) {
    json j;
    j["person_id"] = r.person_id;
    j["survey_weight"] = r.survey_weight;
    json d;
    d["geoid"] = r.demographics.geoid;
    d["employment_status"] = to_string(r.demographics.employment_status);
    d["age_bracket"] = r.demographics.age_bracket;
    d["household_vehicles"] = r.demographics.household_vehicles;
    d["income_level"] = r.demographics.income_level;
    d["household_size"] = r.demographics.household_size;
    j["demographics"] = d;
    json evs = json::array();
    for (const auto& e : r.events) evs.push_back(event_to_json(e));
    j["events"] = evs;
    out += j.dump();
    out += '\n';
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty vector");
  std::sort(values.begin(), values.end());
  if (q <= 0.0) return values.front();
  if (q >= 1.0) return values.back();
  double pos = q * (values.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  double frac = pos - lo;
  if (lo + 1 >= values.size()) return values[lo];
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

namespace {

struct TripBounds {
  double dist_lo, dist_hi;
  double dur_lo, dur_hi;
  double trav_lo, trav_hi;

  bool is_outlier(const PersonEvent& t) const {
    double d = t.distance_miles.value_or(0.0);
    double u = static_cast<double>(t.end_time - t.start_time);
    double tr = static_cast<double>(t.travelers);
    return d < dist_lo || d > dist_hi || u < dur_lo || u > dur_hi ||
           tr < trav_lo || tr > trav_hi;
  }
};

TripBounds trip_bounds(const std::vector<PersonEvent>& trips) {
  auto fence = [](std::vector<double> v, double* lo, double* hi) {
    double q1 = quantile(v, 0.25);
    double q3 = quantile(std::move(v), 0.75);
    double iqr = q3 - q1;
    *lo = q1 - 3.0 * iqr;
    *hi = q3 + 3.0 * iqr;
  };
  std::vector<double> dist, dur, trav;
  for (const auto& t : trips) {
    dist.push_back(t.distance_miles.value_or(0.0));
    dur.push_back(static_cast<double>(t.end_time - t.start_time));
    trav.push_back(static_cast<double>(t.travelers));
  }
  TripBounds b{};
  fence(std::move(dist), &b.dist_lo, &b.dist_hi);
  fence(std::move(dur), &b.dur_lo, &b.dur_hi);
  fence(std::move(trav), &b.trav_lo, &b.trav_hi);
  return b;
}

}  // namespace

OutlierFilterResult filter_outlier_trips(const std::vector<PersonEvent>& trips) {
  OutlierFilterResult res;
  if (trips.size() < 4) {
    res.kept = trips;
    res.applied = false;
    return res;
  }
  TripBounds b = trip_bounds(trips);
  for (const auto& t : trips) (b.is_outlier(t) ? res.removed : res.kept).push_back(t);
  res.applied = true;
  return res;
}

int filter_hts_outliers(std::vector<PersonRecord>& persons) {
  std::vector<PersonEvent> pooled;
  for (const auto& p : persons)
    for (const auto& e : p.events)
      if (e.kind == EventKind::trip) pooled.push_back(e);
  if (pooled.size() < 4) return 0;
  TripBounds b = trip_bounds(pooled);
  int removed = 0;
  for (auto& p : persons) {
    std::vector<PersonEvent> kept;
    for (const auto& e : p.events) {
      if (e.kind == EventKind::trip && b.is_outlier(e)) {
        ++removed;
        continue;
      }
      kept.push_back(e);
    }
    p.events = std::move(kept);
  }
  return removed;
}

double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty()) throw DomainError("weighted_mean of empty input");
  if (values.size() != weights.size())
    throw DomainError("weighted_mean length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (weights[i] <= 0.0) throw DomainError("weighted_mean requires positive weights");
    num += weights[i] * values[i];
    den += weights[i];
  }
  return num / den;
}

double weighted_share(const std::vector<bool>& indicator, const std::vector<double>& weights) {
  std::vector<double> v(indicator.size());
  for (size_t i = 0; i < indicator.size(); ++i) v[i] = indicator[i] ? 1.0 : 0.0;
  return weighted_mean(v, weights);
}

}  // namespace td
