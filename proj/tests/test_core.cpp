#include "doctest.h"
#include "td/core.hpp"

#include <array>
#include <random>

using namespace td;

TEST_CASE("bin_interval follows the six-bin partition") {
  CHECK(bin_interval(10) == "<15 min");
  CHECK(bin_interval(45) == "30-60 min");
  CHECK(bin_interval(300) == ">4 hrs");
  // boundaries are left-closed
  CHECK(bin_interval(15) == "15-30 min");
  CHECK(bin_interval(30) == "30-60 min");
  CHECK(bin_interval(60) == "1-2 hrs");
  CHECK(bin_interval(120) == "2-4 hrs");
  CHECK(bin_interval(240) == ">4 hrs");
  CHECK_THROWS_AS(bin_interval(0), DomainError);
  CHECK_THROWS_AS(bin_interval(-5), DomainError);
}

TEST_CASE("bin_interval partition property: exactly one bin per duration") {
  for (int d = 1; d <= 10000; ++d) {
    std::string label = bin_interval(d);
    int hits = 0;
    for (const auto& bin : CategorySchema::interval_bins())
      if (bin == label) ++hits;
    REQUIRE(hits == 1);
  }
}

namespace {

Diary make_diary(std::vector<std::array<int, 2>> times) {
  Diary d;
  d.persona_id = "p";
  for (auto [s, e] : times) d.trips.push_back({s, e, "Work", "Walk", 1.0});
  return d;
}

}  // namespace

TEST_CASE("diary_intervals gaps") {
  CHECK(diary_intervals(make_diary({{480, 510}, {720, 735}})) ==
        std::vector<std::string>{"2-4 hrs"});
  CHECK(diary_intervals(make_diary({{480, 510}})).empty());
  // back-to-back trips: zero gap dropped
  CHECK(diary_intervals(make_diary({{480, 500}, {500, 520}})).empty());
  CHECK(diary_intervals(make_diary({{480, 500}, {500, 520}, {530, 540}})) ==
        std::vector<std::string>{"<15 min"});
}

TEST_CASE("distribution_from_counts") {
  std::vector<std::string> cats = {"work", "shop", "home"};
  auto d = distribution_from_counts({{"work", 2}, {"shop", 1}, {"home", 1}}, cats);
  CHECK(d.mass_for("work") == doctest::Approx(0.5));
  CHECK(d.mass_for("shop") == doctest::Approx(0.25));
  CHECK_FALSE(d.is_empty());

  CHECK(distribution_from_counts({}, cats).is_empty());

  auto single = distribution_from_counts({{"walk", 3}}, {"walk", "drive"});
  CHECK(single.mass_for("walk") == doctest::Approx(1.0));
  CHECK(single.mass_for("drive") == doctest::Approx(0.0));

  CHECK_THROWS_AS(distribution_from_counts({{"jetpack", 1}}, cats), SchemaError);
}

TEST_CASE("distribution_from_counts mass sums to one (random maps)") {
  std::mt19937 rng(123);
  std::vector<std::string> cats = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> counts;
    for (const auto& c : cats)
      if (rng() % 2) counts[c] = static_cast<double>(rng() % 50);
    auto d = distribution_from_counts(counts, cats);
    if (d.is_empty()) continue;
    double total = 0.0;
    for (double m : d.mass) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("validate_diary reports all violations") {
  CategorySchema schema = CategorySchema::defaults();
  Diary good;
  good.trips = {{420, 450, "Work", "Walk", 1.0},
                {720, 735, "Meal", "Walk", 0.4},
                {1020, 1050, "Home", "Walk", 1.0}};
  CHECK(validate_diary(good, schema).empty());

  Diary bad_mode;
  bad_mode.trips = {{420, 450, "Work", "jetpack", 1.0}};
  auto v = validate_diary(bad_mode, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("unknown mode") != std::string::npos);

  Diary overlap;
  overlap.trips = {{480, 540, "Work", "Walk", 1.0}, {520, 560, "Home", "Walk", 1.0}};
  v = validate_diary(overlap, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("overlap") != std::string::npos);
}

TEST_CASE("hhmm round trip") {
  CHECK(format_hhmm(0) == "00:00");
  CHECK(format_hhmm(510) == "08:30");
  CHECK(parse_hhmm("8:30") == 510);
  CHECK(parse_hhmm("08:30") == 510);
  CHECK(parse_hhmm("24:00") == 1440);
  CHECK_FALSE(parse_hhmm("25:00").has_value());
  CHECK_FALSE(parse_hhmm("8:61").has_value());
  CHECK_FALSE(parse_hhmm("eight").has_value());
}

TEST_CASE("batch diary CSV round trip") {
  Diary a;
  a.persona_id = "P1";
  a.trips = {{480, 505, "Work", "Household Vehicle Driver", 5.5}};
  Diary b;
  b.persona_id = "P2";  // zero-trip diary must survive the round trip
  auto text = diaries_to_csv({a, b});
  CHECK(text.find("persona_id,start_time,end_time,purpose,mode,distance_miles") == 0);
  auto parsed = diaries_from_csv(text, DiarySource::llm);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].trips.size() == 1);
  CHECK(parsed[0].trips[0].start_time == 480);
  CHECK(parsed[0].trips[0].distance_miles == doctest::Approx(5.5));
  CHECK(parsed[1].trips.empty());
}
