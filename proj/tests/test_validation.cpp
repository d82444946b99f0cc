#include "doctest.h"
#include "td/validation.hpp"
#include "td/persona.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace td;

namespace {

std::string fixture(const char* name) {
  return std::string(FIXTURES_DIR) + "/" + name;
}

Distribution dist(std::vector<std::string> cats, std::vector<double> mass) {
  return Distribution{std::move(cats), std::move(mass), false};
}

Distribution random_dist(std::mt19937& rng, const std::vector<std::string>& cats) {
  std::vector<double> mass(cats.size());
  double total = 0.0;
  for (auto& m : mass) total += m = -std::log(std::uniform_real_distribution<>(1e-9, 1.0)(rng));
  for (auto& m : mass) m /= total;
  return dist(cats, std::move(mass));
}

PersonRecord hts_person(const std::string& id, const Persona& demo,
                        std::vector<std::array<int, 2>> trips, double weight = 1.0) {
  PersonRecord r;
  r.person_id = id;
  r.survey_weight = weight;
  r.demographics = demo;
  r.demographics.persona_id = id;
  for (auto [s, e] : trips) {
    PersonEvent ev;
    ev.kind = EventKind::trip;
    ev.start_time = s;
    ev.end_time = e;
    ev.purpose = "Work";
    ev.mode = "Walk";
    ev.distance_miles = 1.0;
    r.events.push_back(ev);
  }
  return r;
}

Persona demo(const std::string& geoid, EmploymentStatus emp, const std::string& age,
             int vehicles, const std::string& income, int hh) {
  Persona p;
  p.geoid = geoid;
  p.employment_status = emp;
  p.age_bracket = age;
  p.household_vehicles = vehicles;
  p.income_level = income;
  p.household_size = hh;
  return p;
}

}  // namespace

TEST_CASE("KL and JSD hand-computed values") {
  auto p = dist({"a", "b"}, {1.0, 0.0});
  auto q = dist({"a", "b"}, {0.5, 0.5});
  auto m = dist({"a", "b"}, {0.75, 0.25});
  CHECK(kl_divergence(p, m) == doctest::Approx(std::log2(1.0 / 0.75)).epsilon(1e-9));
  CHECK(kl_divergence(q, m) == doctest::Approx(0.2075187496).epsilon(1e-6));
  CHECK(jsd(p, q) == doctest::Approx(0.3112781245).epsilon(1e-6));
  // disjoint supports: maximal divergence
  CHECK(jsd(dist({"a"}, {1.0}), dist({"b"}, {1.0})) == doctest::Approx(1.0).epsilon(1e-9));
  // KL is undefined when mass escapes the support of B
  CHECK_THROWS_AS(kl_divergence(p, dist({"a", "b"}, {0.0, 1.0})), DomainError);
}

TEST_CASE("JSD properties over random distribution pairs") {
  std::mt19937 rng(7);
  std::vector<std::string> cats = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = random_dist(rng, cats);
    auto q = random_dist(rng, cats);
    double d = jsd(p, q);
    CHECK(d >= -1e-12);
    CHECK(d <= 1.0 + 1e-12);
    CHECK(d == doctest::Approx(jsd(q, p)).epsilon(1e-12));
    CHECK(jsd(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    // category-permutation invariance
    std::vector<size_t> perm = {4, 2, 0, 3, 1};
    std::vector<std::string> pc(cats.size());
    std::vector<double> pm(cats.size()), qm(cats.size());
    for (size_t i = 0; i < perm.size(); ++i) {
      pc[i] = cats[perm[i]];
      pm[i] = p.mass[perm[i]];
      qm[i] = q.mass[perm[i]];
    }
    CHECK(jsd(dist(pc, pm), dist(pc, qm)) == doctest::Approx(d).epsilon(1e-12));
  }
}

TEST_CASE("JSD aligns mismatched supports by union") {
  auto p = dist({"a", "b"}, {0.5, 0.5});
  auto q = dist({"b", "c"}, {0.5, 0.5});
  double d = jsd(p, q);
  CHECK(d > 0.0);
  CHECK(d < 1.0);
  auto p3 = dist({"a", "b", "c"}, {0.5, 0.5, 0.0});
  auto q3 = dist({"a", "b", "c"}, {0.0, 0.5, 0.5});
  CHECK(d == doctest::Approx(jsd(p3, q3)).epsilon(1e-12));
}

TEST_CASE("trip count score triple and edge cases") {
  CHECK(trip_count_score(4, 4.0) == 1.0);
  CHECK(trip_count_score(0, 4.0) == 0.0);
  CHECK(trip_count_score(6, 4.0) == doctest::Approx(0.5));
  CHECK(trip_count_score(9, 4.0) == 0.0);  // clamped at zero
  CHECK(trip_count_score(0, 0.0) == 1.0);
  CHECK(trip_count_score(2, 0.0) == 0.0);
}

TEST_CASE("component scores: identity, disjoint, and empty rules") {
  CategorySchema schema = CategorySchema::defaults();
  auto member = hts_person("H1", demo("g", EmploymentStatus::employed, "35-54", 2,
                                      "$100k or more", 2),
                           {{480, 505}, {1020, 1048}});
  auto cohort = build_cohort_stats({&member}, CohortLevel::full_dataset, schema);

  Diary same = member.trip_diary();
  CHECK(purpose_score(same, cohort) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mode_score(same, cohort) == doctest::Approx(1.0).epsilon(1e-12));

  Diary disjoint;
  disjoint.trips = {{480, 505, "Medical", "Bicycle", 1.0},
                    {1020, 1048, "Medical", "Bicycle", 1.0}};
  CHECK(purpose_score(disjoint, cohort) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mode_score(disjoint, cohort) == doctest::Approx(0.0).epsilon(1e-12));

  // one side empty -> 0; both sides empty -> 1
  Diary empty;
  CHECK(purpose_score(empty, cohort) == 0.0);
  auto no_trips = hts_person("H2", member.demographics, {});
  auto empty_cohort = build_cohort_stats({&no_trips}, CohortLevel::full_dataset, schema);
  CHECK(purpose_score(empty, empty_cohort) == 1.0);
  CHECK(interval_score(empty, empty_cohort) == 1.0);
}

TEST_CASE("overall realism is the mean of the four components") {
  CategorySchema schema = CategorySchema::defaults();
  auto member = hts_person("H1", demo("g", EmploymentStatus::employed, "35-54", 2,
                                      "$100k or more", 2),
                           {{480, 505}, {720, 735}, {1020, 1048}});
  auto cohort = build_cohort_stats({&member}, CohortLevel::full_dataset, schema);
  Diary d;
  d.trips = {{500, 520, "Shopping", "Walk", 1.0}, {900, 930, "Home", "Public Transit", 2.0}};
  auto score = overall_realism(d, cohort);
  double mean = (score.trip_count_score + score.purpose_score + score.interval_score +
                 score.mode_score) /
                4.0;
  CHECK(score.overall == doctest::Approx(mean).epsilon(1e-12));
  CHECK(score.cohort_size == 1);

  // distance variant: components become 1 - sqrt(JSD), so never higher
  ScoreOptions opts;
  opts.use_distance = true;
  auto alt = overall_realism(d, cohort, opts);
  CHECK(alt.purpose_score <= score.purpose_score + 1e-12);
  CHECK(alt.trip_count_score == doctest::Approx(score.trip_count_score));  // Eq.2 unchanged
}

TEST_CASE("cohort ladder hits each level in turn") {
  CategorySchema schema = CategorySchema::defaults();
  Persona target = demo("G1", EmploymentStatus::employed, "35-54", 2, "$100k or more", 2);

  auto make_hts = [&](int exact6, int drop_geoid, int drop_hh, int broad2, int other) {
    std::vector<PersonRecord> hts;
    int id = 0;
    auto add = [&](const Persona& p) {
      hts.push_back(hts_person("H" + std::to_string(id++), p, {{480, 500}}));
    };
    for (int i = 0; i < exact6; ++i) add(target);
    Persona p5 = target;
    p5.geoid = "OTHER";
    for (int i = 0; i < drop_geoid; ++i) add(p5);
    Persona p4 = p5;
    p4.household_size = 5;
    for (int i = 0; i < drop_hh; ++i) add(p4);
    Persona p2 = p4;
    p2.household_vehicles = 0;
    p2.income_level = "$25k-$49,999";
    for (int i = 0; i < broad2; ++i) add(p2);
    Persona px = demo("X", EmploymentStatus::unemployed, "65+", 1, "$25k-$49,999", 1);
    for (int i = 0; i < other; ++i) add(px);
    return hts;
  };

  {
    auto hts = make_hts(12, 0, 0, 0, 5);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::hyper_strict6);
    CHECK(c.size() == 12);
  }
  {
    // 10 exact matches: boundary holds, no fallback
    auto hts = make_hts(10, 5, 0, 0, 5);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::hyper_strict6);
    CHECK(c.size() == 10);
  }
  {
    // 9 exact matches: falls back to the 5-variable level (9 + 6 = 15)
    auto hts = make_hts(9, 6, 0, 0, 5);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::ultra_strict5);
    CHECK(c.size() == 15);
  }
  {
    auto hts = make_hts(3, 3, 6, 0, 5);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::strict4);
    CHECK(c.size() == 12);
  }
  {
    auto hts = make_hts(2, 2, 2, 6, 5);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::broad2);
    CHECK(c.size() == 12);
  }
  {
    auto hts = make_hts(1, 1, 1, 1, 30);
    CohortIndex index(hts, schema);
    auto c = index.match_cohort(target, 10);
    CHECK(c.level == CohortLevel::full_dataset);
    CHECK(c.size() == 34);
  }
  {
    std::vector<PersonRecord> empty;
    CHECK_THROWS_AS(CohortIndex(empty, schema).match_cohort(target, 10), DomainError);
  }
}

TEST_CASE("vehicle counts compare as min(count, 3) on both sides") {
  CategorySchema schema = CategorySchema::defaults();
  Persona target = demo("G1", EmploymentStatus::employed, "35-54", 5, "$100k or more", 2);
  std::vector<PersonRecord> hts;
  for (int i = 0; i < 12; ++i) {
    Persona p = target;
    p.household_vehicles = 3 + i % 4;  // 3..6, all collapse to 3
    hts.push_back(hts_person("H" + std::to_string(i), p, {{480, 500}}));
  }
  CohortIndex index(hts, schema);
  auto c = index.match_cohort(target, 10);
  CHECK(c.level == CohortLevel::hyper_strict6);
  CHECK(c.size() == 12);
}

TEST_CASE("cohort stats are survey-weighted") {
  CategorySchema schema = CategorySchema::defaults();
  Persona d1 = demo("g", EmploymentStatus::employed, "35-54", 2, "$100k or more", 2);
  auto heavy = hts_person("A", d1, {{480, 500}, {600, 620}}, 9.0);  // 2 trips
  auto light = hts_person("B", d1, {{480, 500}}, 1.0);              // 1 trip
  auto cohort = build_cohort_stats({&heavy, &light}, CohortLevel::broad2, schema);
  CHECK(cohort.mean_trip_count == doctest::Approx((9.0 * 2 + 1.0 * 1) / 10.0));
}

TEST_CASE("aggregate scores: self-comparison is perfect, disjoint is poor") {
  CategorySchema schema = CategorySchema::defaults();
  auto persons = load_hts(fixture("hts.jsonl"));
  std::vector<Diary> own;
  for (const auto& r : persons) own.push_back(r.trip_diary());
  auto self_score = aggregate_scores(own, persons, schema);
  // not exactly 1: the HTS pools are survey-weighted, generated pools are not
  CHECK(self_score.trip_count_score_agg > 0.99);
  CHECK(self_score.purpose_score_agg > 0.99);
  CHECK(self_score.mode_score_agg > 0.99);
  CHECK(self_score.overall_agg ==
        doctest::Approx((self_score.trip_count_score_agg + self_score.purpose_score_agg +
                         self_score.interval_score_agg + self_score.mode_score_agg) /
                        4.0).epsilon(1e-12));

  std::vector<Diary> junk;
  for (int i = 0; i < 100; ++i) {
    Diary d;
    d.persona_id = "J" + std::to_string(i);
    for (int k = 0; k < 9; ++k)
      d.trips.push_back({k * 150, k * 150 + 10, "Medical", "Bicycle", 1.0});
    junk.push_back(d);
  }
  auto junk_score = aggregate_scores(junk, persons, schema);
  CHECK(junk_score.overall_agg < self_score.overall_agg);
}

TEST_CASE("regularized incomplete beta against quadrature") {
  // I_x(a,b) via trapezoid integration of the beta density
  auto quad = [](double a, double b, double x) {
    const int n = 200000;
    double logB = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double sum = 0.0, h = x / n;
    for (int i = 0; i <= n; ++i) {
      double t = i * h;
      // std::pow(0, 0) == 1 covers the a == 1 endpoint
      double f = std::pow(t, a - 1) * std::pow(1 - t, b - 1) / std::exp(logB);
      sum += (i == 0 || i == n) ? f / 2 : f;
    }
    return sum * h;
  };
  // quadrature only for smooth integrands (a, b >= 1)
  for (auto [a, b, x] : {std::array<double, 3>{2.0, 3.0, 0.4},
                         std::array<double, 3>{5.0, 1.5, 0.9},
                         std::array<double, 3>{1.0, 4.0, 0.25}})
    CHECK(regularized_incomplete_beta(a, b, x) == doctest::Approx(quad(a, b, x)).epsilon(1e-6));
  // a = b = 1/2 has the arcsine-law closed form
  CHECK(regularized_incomplete_beta(0.5, 0.5, 0.7) ==
        doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(0.7))).epsilon(1e-9));
  CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("student t CDF sanity") {
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-12));
  // df=1 is the Cauchy distribution: F(1) = 3/4
  CHECK(student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(student_t_cdf(-2.0, 10.0) + student_t_cdf(2.0, 10.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // large df approaches the normal CDF
  CHECK(student_t_cdf(1.96, 1e6) == doctest::Approx(0.975).epsilon(1e-3));
}

TEST_CASE("Welch's t-test oracle and guards") {
  auto r = welch_t_test({1, 2, 3}, {4, 5, 6});
  CHECK(r.t == doctest::Approx(-3.6742346142).epsilon(1e-9));
  CHECK(r.df == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(r.p_two_sided == doctest::Approx(0.0213).epsilon(1e-2));

  auto same = welch_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(same.t == doctest::Approx(0.0));
  CHECK(same.p_two_sided == doctest::Approx(1.0));

  CHECK_THROWS_AS(welch_t_test({1}, {1, 2}), DomainError);
  // zero variance on both sides: identical constants degenerate to t=0,
  // different constants have no defined statistic
  auto constant = welch_t_test({2, 2}, {2, 2});
  CHECK(constant.t == 0.0);
  CHECK(constant.p_two_sided == 1.0);
  CHECK_THROWS_AS(welch_t_test({1, 1}, {2, 2}), DomainError);
}

TEST_CASE("end-to-end one-to-cohort scoring against the fixture HTS") {
  CategorySchema schema = CategorySchema::defaults();
  auto persons = load_hts(fixture("hts.jsonl"));
  filter_hts_outliers(persons);
  CohortIndex index(persons, schema);
  // scoring a survey member's own diary against its cohort stays in [0,1]
  for (int i = 0; i < 30; ++i) {
    const auto& r = persons[static_cast<size_t>(i * 5)];
    auto cohort = index.match_cohort(r.demographics, 10);
    CHECK(cohort.size() >= 10);
    auto s = overall_realism(r.trip_diary(), cohort);
    CHECK(s.overall >= 0.0);
    CHECK(s.overall <= 1.0);
  }
}
