#pragma once
// Shared data model: personas, diaries, category schemas, distributions,
// interval binning. Everything here is immutable after construction and
// safe to share across threads; all free functions are pure.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace td {

// Minutes from midnight.
using Minutes = int;

constexpr Minutes kMinutesPerDay = 1440;

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Purpose/mode/interval label lists. Lists are configuration; the defaults
// below mirror a typical HTS data dictionary.
struct CategorySchema {
  std::vector<std::string> purposes;
  std::vector<std::string> modes;

  // Six duration bins partitioning (0, inf) minutes, left-closed [lo, hi).
  static const std::vector<std::string>& interval_bins();

  static CategorySchema defaults();

  bool has_purpose(const std::string& label) const;
  bool has_mode(const std::string& label) const;
  void check() const;  // throws SchemaError on duplicate/empty labels
};

enum class EmploymentStatus { employed, unemployed };

std::string to_string(EmploymentStatus s);
EmploymentStatus employment_from_string(const std::string& s);

struct Persona {
  std::string persona_id;
  std::string geoid;
  EmploymentStatus employment_status = EmploymentStatus::unemployed;
  std::string age_bracket;
  int household_vehicles = 0;  // >= 0
  std::string income_level;
  int household_size = 1;  // >= 1
};

struct TripRecord {
  Minutes start_time = 0;  // [0, 1440)
  Minutes end_time = 0;    // > start_time
  std::string purpose;
  std::string mode;
  double distance_miles = 0.0;  // >= 0
};

enum class DiarySource { llm, classical, hts };

std::string to_string(DiarySource s);
DiarySource diary_source_from_string(const std::string& s);

struct Diary {
  std::string persona_id;
  std::vector<TripRecord> trips;  // sorted by start_time, non-overlapping
  DiarySource source = DiarySource::llm;

  int trip_count() const { return static_cast<int>(trips.size()); }
};

// Probability vector over an ordered label list. An empty Distribution
// (no observations) is a first-class marker, not a zero vector.
struct Distribution {
  std::vector<std::string> categories;
  std::vector<double> mass;
  bool empty_marker = false;

  static Distribution empty(std::vector<std::string> categories);

  bool is_empty() const { return empty_marker; }
  double mass_for(const std::string& label) const;
  void check() const;  // mass sums to 1 +- 1e-9 unless empty
};

// Returns the unique interval bin containing duration_minutes under the
// left-closed convention: 15 falls in "15-30 min". Throws DomainError for
// non-positive durations.
std::string bin_interval(double duration_minutes);

// One label per positive gap between consecutive trips. Zero-length gaps
// (back-to-back trips) are dropped. Diaries with fewer than two trips
// yield an empty list.
std::vector<std::string> diary_intervals(const Diary& diary);

// Normalizes counts into a Distribution over `categories`. A count map
// whose total is zero yields the empty marker. Labels outside `categories`
// throw SchemaError.
Distribution distribution_from_counts(const std::map<std::string, double>& counts,
                                      const std::vector<std::string>& categories);

// Reports every invariant violation (overlap, unknown category, end<=start,
// negative distance, out-of-range start) rather than only the first.
// Violations are data, not faults.
std::vector<std::string> validate_diary(const Diary& diary, const CategorySchema& schema);

// "HH:MM" <-> minutes-from-midnight. parse accepts 0:00 .. 24:00.
std::string format_hhmm(Minutes m);
std::optional<Minutes> parse_hhmm(const std::string& text);

// Shortest round-trip decimal rendering of a double ("5000", "0.45").
std::string format_number(double v);

// Diary CSV contract: header `start_time,end_time,purpose,mode,distance_miles`,
// times as 24-hour HH:MM, one trip per row. Batch files prepend persona_id.
extern const char* kDiaryCsvHeader;

std::string diary_to_csv(const Diary& diary);  // single diary, no persona_id column
std::string diaries_to_csv(const std::vector<Diary>& diaries);  // batch, persona_id column
std::vector<Diary> diaries_from_csv(const std::string& text, DiarySource source);

}  // namespace td
