#include "doctest.h"
#include "td/llm.hpp"

#include <random>

using namespace td;

namespace {

std::string fixture(const char* name) {
  return std::string(FIXTURES_DIR) + "/" + name;
}

Persona test_persona(EmploymentStatus status = EmploymentStatus::employed) {
  Persona p;
  p.persona_id = "P000001";
  p.geoid = "090010001001";
  p.employment_status = status;
  p.age_bracket = "35-54";
  p.household_vehicles = 2;
  p.income_level = "$100k or more";
  p.household_size = 2;
  return p;
}

const std::string kLandUse =
    "The home area has a population density of 4500 people per square mile, an "
    "employment mix index of 0.55, and the nearest public transit stop is 0.8 "
    "miles from home.";

}  // namespace

TEST_CASE("decoding parameters follow the employment policy") {
  GenerationConfig config;
  auto e = decoding_params(test_persona(EmploymentStatus::employed), config);
  CHECK(e.temperature == doctest::Approx(0.5));
  CHECK(e.top_p == doctest::Approx(0.9));
  auto u = decoding_params(test_persona(EmploymentStatus::unemployed), config);
  CHECK(u.temperature == doctest::Approx(0.3));
  CHECK(u.top_p == doctest::Approx(0.8));
}

TEST_CASE("prompt carries the profile, land use text, categories, and format") {
  CategorySchema schema = CategorySchema::defaults();
  std::string prompt = build_prompt(test_persona(), kLandUse, schema);
  CHECK(prompt.find("Act as") != std::string::npos);
  CHECK(prompt.find("090010001001") != std::string::npos);
  CHECK(prompt.find("employed") != std::string::npos);
  CHECK(prompt.find("35-54") != std::string::npos);
  CHECK(prompt.find("$100k or more") != std::string::npos);
  CHECK(prompt.find("2 person(s)") != std::string::npos);
  CHECK(prompt.find(kLandUse) != std::string::npos);  // verbatim
  for (const auto& label : schema.purposes) CHECK(prompt.find(label) != std::string::npos);
  for (const auto& label : schema.modes) CHECK(prompt.find(label) != std::string::npos);
  CHECK(prompt.find(kDiaryCsvHeader) != std::string::npos);
  CHECK(prompt.find("weekday") != std::string::npos);
  // identical inputs -> identical prompt
  CHECK(prompt == build_prompt(test_persona(), kLandUse, schema));
}

TEST_CASE("parser accepts a clean transcript") {
  CategorySchema schema = CategorySchema::defaults();
  std::string text =
      "start_time,end_time,purpose,mode,distance_miles\n"
      "08:00,08:25,Work,Household Vehicle Driver,6.5\n"
      "17:10,17:40,Home,Household Vehicle Driver,6.5\n";
  auto res = parse_diary_response(text, schema);
  auto* d = std::get_if<Diary>(&res);
  REQUIRE(d != nullptr);
  REQUIRE(d->trips.size() == 2);
  CHECK(d->trips[0].start_time == 480);
  CHECK(d->trips[1].purpose == "Home");
}

TEST_CASE("parser strips fences, preamble, and label noise") {
  CategorySchema schema = CategorySchema::defaults();
  std::string text =
      "Sure, here is the diary you asked for:\n"
      "```csv\n"
      "start_time,end_time,purpose,mode,distance_miles\n"
      "8:00,8:25,work,household vehicle driver,6.5 miles\n"
      "12:05,12:20,\"Meal\",Walk,0.4\n"
      "```\n"
      "Hope that helps!\n";
  auto res = parse_diary_response(text, schema);
  auto* d = std::get_if<Diary>(&res);
  REQUIRE(d != nullptr);
  REQUIRE(d->trips.size() == 2);
  CHECK(d->trips[0].purpose == "Work");  // canonical casing restored
  CHECK(d->trips[0].mode == "Household Vehicle Driver");
  CHECK(d->trips[0].distance_miles == doctest::Approx(6.5));
  CHECK(d->trips[1].purpose == "Meal");
}

TEST_CASE("parser sorts rows by start time") {
  CategorySchema schema = CategorySchema::defaults();
  std::string text =
      "start_time,end_time,purpose,mode,distance_miles\n"
      "17:10,17:40,Home,Walk,1.0\n"
      "08:00,08:25,Work,Walk,1.0\n";
  auto res = parse_diary_response(text, schema);
  auto* d = std::get_if<Diary>(&res);
  REQUIRE(d != nullptr);
  CHECK(d->trips[0].start_time == 480);
  CHECK(d->trips[1].start_time == 1030);
}

TEST_CASE("parser rejects unknown categories with row diagnostics") {
  CategorySchema schema = CategorySchema::defaults();
  std::string text =
      "start_time,end_time,purpose,mode,distance_miles\n"
      "08:00,08:25,Work,Teleport,6.5\n";
  auto res = parse_diary_response(text, schema);
  auto* f = std::get_if<ParseFailure>(&res);
  REQUIRE(f != nullptr);
  REQUIRE(f->rows.size() == 1);
  CHECK(f->rows[0].field == "mode");
  CHECK(f->rows[0].message.find("Teleport") != std::string::npos);
}

TEST_CASE("parser rejects overlapping and inverted rows via diary validation") {
  CategorySchema schema = CategorySchema::defaults();
  std::string overlap =
      "start_time,end_time,purpose,mode,distance_miles\n"
      "08:00,09:00,Work,Walk,1.0\n"
      "08:30,09:30,Home,Walk,1.0\n";
  CHECK(std::holds_alternative<ParseFailure>(parse_diary_response(overlap, schema)));
  std::string inverted =
      "start_time,end_time,purpose,mode,distance_miles\n"
      "09:00,08:00,Work,Walk,1.0\n";
  CHECK(std::holds_alternative<ParseFailure>(parse_diary_response(inverted, schema)));
}

TEST_CASE("header-only response is a valid zero-trip diary; prose is not") {
  CategorySchema schema = CategorySchema::defaults();
  std::string header_only = "start_time,end_time,purpose,mode,distance_miles\n";
  auto res = parse_diary_response(header_only, schema);
  auto* d = std::get_if<Diary>(&res);
  REQUIRE(d != nullptr);
  CHECK(d->trips.empty());
  CHECK(std::holds_alternative<ParseFailure>(
      parse_diary_response("I cannot produce a diary right now.", schema)));
  CHECK(std::holds_alternative<ParseFailure>(parse_diary_response("", schema)));
}

TEST_CASE("parser fuzz: total over random bytes, output always valid") {
  CategorySchema schema = CategorySchema::defaults();
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    size_t len = rng() % 400;
    std::string text(len, '\0');
    for (auto& c : text) c = static_cast<char>(rng() % 256);
    auto res = parse_diary_response(text, schema);
    if (auto* d = std::get_if<Diary>(&res))
      CHECK(validate_diary(*d, schema).empty());
  }
}

TEST_CASE("mock backend selects by prompt hash and scripts retries") {
  MockBackend backend({{"first", "second", "third"}});
  DecodingParams params;
  CHECK(backend.complete("p", params) == "first");
  CHECK(backend.complete("p", params) == "second");
  CHECK(backend.complete("p", params) == "third");
  CHECK(backend.complete("p", params) == "third");  // last entry repeats
  // a different prompt starts its own attempt counter
  CHECK(backend.complete("q", params) == "first");
  CHECK_THROWS_AS(MockBackend(std::vector<std::vector<std::string>>{}), ConfigurationError);
}

TEST_CASE("mock backend loads the fixture scripts") {
  MockBackend backend(fixture("mock_responses.json"));
  DecodingParams params;
  std::string r = backend.complete("any prompt", params);
  CHECK(r.find(kDiaryCsvHeader) != std::string::npos);
}

TEST_CASE("generate_diary retries past a garbage first attempt") {
  std::string good =
      std::string(kDiaryCsvHeader) + "\n08:00,08:25,Work,Walk,1.2\n";
  MockBackend backend({{"no diary today", good}});
  GenerationConfig config;
  config.max_retries = 2;
  CategorySchema schema = CategorySchema::defaults();
  auto res = generate_diary(test_persona(), kLandUse, backend, config, schema);
  auto* d = std::get_if<Diary>(&res);
  REQUIRE(d != nullptr);
  CHECK(d->persona_id == "P000001");
  CHECK(d->source == DiarySource::llm);
  REQUIRE(d->trips.size() == 1);
}

TEST_CASE("generate_diary reports a failure after exhausting retries") {
  MockBackend backend(std::vector<std::vector<std::string>>{{"still nothing useful"}});
  GenerationConfig config;
  config.max_retries = 2;
  CategorySchema schema = CategorySchema::defaults();
  auto res = generate_diary(test_persona(), kLandUse, backend, config, schema);
  auto* f = std::get_if<GenerationFailure>(&res);
  REQUIRE(f != nullptr);
  CHECK(f->persona_id == "P000001");
  CHECK(f->attempts.size() == 3);  // initial attempt + 2 retries
  CHECK(f->attempts[0].attempt == 1);
  CHECK_FALSE(f->attempts[0].error.empty());
}

TEST_CASE("http backend surfaces connection failures as TransportError") {
  GenerationConfig config;
  config.endpoint_url = "http://127.0.0.1:9";  // discard port: nothing listens
  config.request_timeout = std::chrono::milliseconds(1000);
  HttpBackend backend(config);
  DecodingParams params;
  CHECK_THROWS_AS(backend.complete("prompt", params), TransportError);
}
