#include "td/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace td {

namespace {

// Upper bin edges in minutes; the last bin is unbounded.
constexpr double kBinEdges[] = {15, 30, 60, 120, 240};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<std::string>& CategorySchema::interval_bins() {
  static const std::vector<std::string> bins = {
      "<15 min", "15-30 min", "30-60 min", "1-2 hrs", "2-4 hrs", ">4 hrs"};
  return bins;
}

CategorySchema CategorySchema::defaults() {
  CategorySchema s;
  s.purposes = {"Home",   "Work", "School",  "Shopping", "Social/Recreation",
                "Errands", "Meal", "Medical", "Other"};
  s.modes = {"Household Vehicle Driver",
             "Household Vehicle Passenger",
             "Walk",
             "Bicycle",
             "Public Transit",
             "Ride-hail/Taxi",
             "School Bus",
             "Other"};
  return s;
}

bool CategorySchema::has_purpose(const std::string& label) const {
  return std::find(purposes.begin(), purposes.end(), label) != purposes.end();
}

bool CategorySchema::has_mode(const std::string& label) const {
  return std::find(modes.begin(), modes.end(), label) != modes.end();
}

void CategorySchema::check() const {
  auto check_list = [](const std::vector<std::string>& labels, const char* name) {
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (l.empty()) throw SchemaError(std::string("empty label in ") + name);
      if (!seen.insert(l).second)
        throw SchemaError(std::string("duplicate label in ") + name + ": " + l);
    }
    if (labels.empty()) throw SchemaError(std::string(name) + " list is empty");
  };
  check_list(purposes, "purposes");
  check_list(modes, "modes");
}

std::string to_string(EmploymentStatus s) {
  return s == EmploymentStatus::employed ? "employed" : "unemployed";
}

EmploymentStatus employment_from_string(const std::string& s) {
  if (s == "employed") return EmploymentStatus::employed;
  if (s == "unemployed") return EmploymentStatus::unemployed;
  throw SchemaError("unknown employment status: " + s);
}

std::string to_string(DiarySource s) {
  switch (s) {
    case DiarySource::llm: return "llm";
    case DiarySource::classical: return "classical";
    case DiarySource::hts: return "hts";
  }
  return "?";
}

DiarySource diary_source_from_string(const std::string& s) {
  if (s == "llm") return DiarySource::llm;
  if (s == "classical") return DiarySource::classical;
  if (s == "hts") return DiarySource::hts;
  throw SchemaError("unknown diary source: " + s);
}

Distribution Distribution::empty(std::vector<std::string> categories) {
  Distribution d;
  d.categories = std::move(categories);
  d.mass.assign(d.categories.size(), 0.0);
  d.empty_marker = true;
  return d;
}

double Distribution::mass_for(const std::string& label) const {
  for (size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == label) return mass[i];
  return 0.0;
}

void Distribution::check() const {
  if (categories.size() != mass.size())
    throw SchemaError("distribution categories/mass length mismatch");
  if (empty_marker) return;
  double total = 0.0;
  for (double m : mass) {
    if (m < 0.0) throw SchemaError("negative probability mass");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw SchemaError("distribution mass sums to " + format_number(total));
}

std::string bin_interval(double duration_minutes) {
  if (!(duration_minutes > 0.0))
    throw DomainError("bin_interval requires a positive duration, got " +
                      format_number(duration_minutes));
  const auto& bins = CategorySchema::interval_bins();
  for (size_t i = 0; i < std::size(kBinEdges); ++i)
    if (duration_minutes < kBinEdges[i]) return bins[i];
  return bins.back();
}

std::vector<std::string> diary_intervals(const Diary& diary) {
  std::vector<std::string> labels;
  for (size_t i = 0; i + 1 < diary.trips.size(); ++i) {
    Minutes gap = diary.trips[i + 1].start_time - diary.trips[i].end_time;
    if (gap > 0) labels.push_back(bin_interval(gap));
  }
  return labels;
}

Distribution distribution_from_counts(const std::map<std::string, double>& counts,
                                      const std::vector<std::string>& categories) {
  double total = 0.0;
  for (const auto& [label, count] : counts) {
    if (std::find(categories.begin(), categories.end(), label) == categories.end())
      throw SchemaError("count label not in category list: " + label);
    if (count < 0.0) throw SchemaError("negative count for label: " + label);
    total += count;
  }
  if (total <= 0.0) return Distribution::empty(categories);
  Distribution d;
  d.categories = categories;
  d.mass.reserve(categories.size());
  for (const auto& c : categories) {
    auto it = counts.find(c);
    d.mass.push_back(it == counts.end() ? 0.0 : it->second / total);
  }
  return d;
}

std::vector<std::string> validate_diary(const Diary& diary, const CategorySchema& schema) {
  std::vector<std::string> violations;
  for (size_t i = 0; i < diary.trips.size(); ++i) {
    const TripRecord& t = diary.trips[i];
    const std::string where = "trip " + std::to_string(i);
    if (t.start_time < 0 || t.start_time >= kMinutesPerDay)
      violations.push_back(where + ": start_time out of [0,1440): " +
                           std::to_string(t.start_time));
    if (t.end_time <= t.start_time)
      violations.push_back(where + ": end_time <= start_time");
    if (!schema.has_purpose(t.purpose))
      violations.push_back(where + ": unknown purpose: " + t.purpose);
    if (!schema.has_mode(t.mode))
      violations.push_back(where + ": unknown mode: " + t.mode);
    if (t.distance_miles < 0.0)
      violations.push_back(where + ": negative distance");
    if (i + 1 < diary.trips.size()) {
      if (diary.trips[i + 1].start_time < t.start_time)
        violations.push_back(where + ": trips not sorted by start_time");
      else if (diary.trips[i + 1].start_time < t.end_time)
        violations.push_back(where + ": overlaps trip " + std::to_string(i + 1));
    }
  }
  return violations;
}

std::string format_hhmm(Minutes m) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d:%02d", m / 60, m % 60);
  return buf;
}

std::optional<Minutes> parse_hhmm(const std::string& text) {
  std::string s = trim(text);
  size_t colon = s.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= s.size()) return std::nullopt;
  int h = 0, m = 0;
  auto [p1, e1] = std::from_chars(s.data(), s.data() + colon, h);
  auto [p2, e2] = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
  if (e1 != std::errc{} || e2 != std::errc{}) return std::nullopt;
  if (p1 != s.data() + colon || p2 != s.data() + s.size()) return std::nullopt;
  if (h < 0 || h > 24 || m < 0 || m > 59) return std::nullopt;
  Minutes total = h * 60 + m;
  if (total > kMinutesPerDay) return std::nullopt;  // allow 24:00 as an end time
  return total;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

const char* kDiaryCsvHeader = "start_time,end_time,purpose,mode,distance_miles";

namespace {

void append_trip_row(std::string& out, const TripRecord& t) {
  out += format_hhmm(t.start_time);
  out += ',';
  out += format_hhmm(t.end_time);
  out += ',';
  out += t.purpose;
  out += ',';
  out += t.mode;
  out += ',';
  out += format_number(t.distance_miles);
  out += '\n';
}

}  // namespace

std::string diary_to_csv(const Diary& diary) {
  std::string out = kDiaryCsvHeader;
  out += '\n';
  for (const TripRecord& t : diary.trips) append_trip_row(out, t);
  return out;
}

std::string diaries_to_csv(const std::vector<Diary>& diaries) {
  std::string out = "persona_id,";
  out += kDiaryCsvHeader;
  out += '\n';
  for (const Diary& d : diaries) {
    for (const TripRecord& t : d.trips) {
      out += d.persona_id;
      out += ',';
      append_trip_row(out, t);
    }
    if (d.trips.empty()) {
      // zero-trip diaries still appear so the persona set is preserved
      out += d.persona_id;
      out += ",,,,,\n";
    }
  }
  return out;
}

std::vector<Diary> diaries_from_csv(const std::string& text, DiarySource source) {
  std::vector<Diary> diaries;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  Diary* current = nullptr;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != std::string("persona_id,") + kDiaryCsvHeader)
        throw SchemaError("batch diary CSV: unexpected header: " + line);
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 6)
      throw SchemaError("batch diary CSV line " + std::to_string(lineno) +
                        ": expected 6 fields");
    const std::string& pid = fields[0];
    if (current == nullptr || current->persona_id != pid) {
      diaries.push_back(Diary{pid, {}, source});
      current = &diaries.back();
    }
    if (trim(fields[1]).empty()) continue;  // zero-trip marker row
    TripRecord t;
    auto st = parse_hhmm(fields[1]);
    auto et = parse_hhmm(fields[2]);
    if (!st || !et)
      throw SchemaError("batch diary CSV line " + std::to_string(lineno) +
                        ": bad time field");
    t.start_time = *st;
    t.end_time = *et;
    t.purpose = trim(fields[3]);
    t.mode = trim(fields[4]);
    t.distance_miles = std::stod(fields[5]);
    current->trips.push_back(t);
  }
  return diaries;
}

}  // namespace td
