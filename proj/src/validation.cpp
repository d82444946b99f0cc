#include "td/validation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace td {

namespace {

// Union support with zero fill, preserving first-seen order.
void align_supports(const Distribution& a, const Distribution& b,
                    std::vector<std::string>* categories, std::vector<double>* pa,
                    std::vector<double>* pb) {
  for (const auto& c : a.categories)
    if (std::find(categories->begin(), categories->end(), c) == categories->end())
      categories->push_back(c);
  for (const auto& c : b.categories)
    if (std::find(categories->begin(), categories->end(), c) == categories->end())
      categories->push_back(c);
  for (const auto& c : *categories) {
    pa->push_back(a.mass_for(c));
    pb->push_back(b.mass_for(c));
  }
}

double component_divergence(const Distribution& diary_dist, const Distribution& cohort_dist,
                            const ScoreOptions& opts) {
  if (diary_dist.is_empty() && cohort_dist.is_empty()) return 1.0;
  if (diary_dist.is_empty() != cohort_dist.is_empty()) return 0.0;
  double d = jsd(cohort_dist, diary_dist);
  if (opts.use_distance) d = std::sqrt(d);
  return 1.0 - d;
}

Distribution diary_interval_dist(const Diary& diary) {
  std::map<std::string, double> counts;
  for (const auto& label : diary_intervals(diary)) counts[label] += 1.0;
  return distribution_from_counts(counts, CategorySchema::interval_bins());
}

std::string trip_count_bin(int n) {
  return n >= 10 ? "10+" : std::to_string(n);
}

std::vector<std::string> trip_count_categories() {
  std::vector<std::string> cats;
  for (int i = 0; i < 10; ++i) cats.push_back(std::to_string(i));
  cats.push_back("10+");
  return cats;
}

}  // namespace

double kl_divergence(const Distribution& a, const Distribution& b) {
  std::vector<std::string> cats;
  std::vector<double> pa, pb;
  align_supports(a, b, &cats, &pa, &pb);
  double kl = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i] <= 0.0) continue;
    if (pb[i] <= 0.0)
      throw DomainError("kl_divergence: support violation at category " + cats[i]);
    kl += pa[i] * std::log2(pa[i] / pb[i]);
  }
  return std::max(0.0, kl);
}

double jsd(const Distribution& p, const Distribution& q) {
  std::vector<std::string> cats;
  std::vector<double> pp, qq;
  align_supports(p, q, &cats, &pp, &qq);
  Distribution pa{cats, pp, false};
  Distribution qa{cats, qq, false};
  Distribution mid{cats, {}, false};
  mid.mass.resize(cats.size());
  for (size_t i = 0; i < cats.size(); ++i) mid.mass[i] = 0.5 * (pp[i] + qq[i]);
  double v = 0.5 * kl_divergence(pa, mid) + 0.5 * kl_divergence(qa, mid);
  return std::clamp(v, 0.0, 1.0);
}

std::string to_string(CohortLevel level) {
  switch (level) {
    case CohortLevel::hyper_strict6: return "HyperStrict6";
    case CohortLevel::ultra_strict5: return "UltraStrict5";
    case CohortLevel::strict4: return "Strict4";
    case CohortLevel::broad2: return "Broad2";
    case CohortLevel::full_dataset: return "FullDataset";
  }
  return "?";
}

double trip_count_score(int n_generated, double mu_cohort) {
  if (mu_cohort <= 0.0) return n_generated == 0 ? 1.0 : 0.0;
  double rel = std::abs(n_generated - mu_cohort) / mu_cohort;
  return 1.0 - std::min(1.0, rel);
}

namespace {

// Normalized counts over the diary's own observed labels; jsd aligns the
// union of supports, so labels absent from the cohort pool still score.
Distribution normalized_counts(const std::map<std::string, double>& counts) {
  Distribution q;
  double total = 0.0;
  for (const auto& [label, c] : counts) {
    q.categories.push_back(label);
    q.mass.push_back(c);
    total += c;
  }
  if (total <= 0.0) return Distribution::empty({});
  for (double& m : q.mass) m /= total;
  return q;
}

}  // namespace

double purpose_score(const Diary& diary, const CohortStats& cohort, const ScoreOptions& opts) {
  std::map<std::string, double> counts;
  for (const auto& t : diary.trips) counts[t.purpose] += 1.0;
  return component_divergence(normalized_counts(counts), cohort.purpose_dist, opts);
}

double interval_score(const Diary& diary, const CohortStats& cohort, const ScoreOptions& opts) {
  Distribution q = diary_interval_dist(diary);
  return component_divergence(q, cohort.interval_dist, opts);
}

double mode_score(const Diary& diary, const CohortStats& cohort, const ScoreOptions& opts) {
  std::map<std::string, double> counts;
  for (const auto& t : diary.trips) counts[t.mode] += 1.0;
  return component_divergence(normalized_counts(counts), cohort.mode_dist, opts);
}

RealismScore overall_realism(const Diary& diary, const CohortStats& cohort,
                             const ScoreOptions& opts) {
  RealismScore s;
  s.trip_count_score = trip_count_score(diary.trip_count(), cohort.mean_trip_count);
  s.purpose_score = purpose_score(diary, cohort, opts);
  s.interval_score = interval_score(diary, cohort, opts);
  s.mode_score = mode_score(diary, cohort, opts);
  s.overall = (s.trip_count_score + s.purpose_score + s.interval_score + s.mode_score) / 4.0;
  s.cohort_level = cohort.level;
  s.cohort_size = cohort.size();
  return s;
}

namespace {

int vehicles_key(int count) { return std::min(count, 3); }

std::string key_for_level(const Persona& p, int level) {
  // level 0: age|emp|veh|income|geoid|hh, 1: -geoid, 2: -hh, 3: age|emp
  std::string k = p.age_bracket + "|" + to_string(p.employment_status);
  if (level <= 2) k += "|" + std::to_string(vehicles_key(p.household_vehicles)) + "|" + p.income_level;
  if (level == 0) k += "|" + p.geoid;
  if (level <= 1) k += "|" + std::to_string(p.household_size);
  return k;
}

}  // namespace

CohortIndex::CohortIndex(const std::vector<PersonRecord>& hts, const CategorySchema& schema)
    : hts_(hts), schema_(schema), levels_(4) {
  for (const auto& person : hts_) {
    for (int level = 0; level < 4; ++level)
      levels_[level][key_for_level(person.demographics, level)].push_back(&person);
  }
}

CohortStats build_cohort_stats(std::vector<const PersonRecord*> members, CohortLevel level,
                               const CategorySchema& schema) {
  if (members.empty()) throw DomainError("cohort with no members");
  double wsum = 0.0, trip_sum = 0.0;
  std::map<std::string, double> purpose_counts, mode_counts, interval_counts;
  for (const PersonRecord* p : members) {
    double w = p->survey_weight;
    wsum += w;
    Diary d = p->trip_diary();
    trip_sum += w * d.trip_count();
    for (const auto& t : d.trips) {
      purpose_counts[t.purpose] += w;
      mode_counts[t.mode] += w;
    }
    for (const auto& label : diary_intervals(d)) interval_counts[label] += w;
  }
  CohortStats stats;
  stats.members = std::move(members);
  stats.level = level;
  stats.mean_trip_count = trip_sum / wsum;
  stats.purpose_dist = distribution_from_counts(purpose_counts, schema.purposes);
  stats.mode_dist = distribution_from_counts(mode_counts, schema.modes);
  stats.interval_dist =
      distribution_from_counts(interval_counts, CategorySchema::interval_bins());
  return stats;
}

CohortStats CohortIndex::match_cohort(const Persona& persona, int min_size) const {
  if (hts_.empty()) throw DomainError("match_cohort: empty HTS");
  static const CohortLevel kLevels[4] = {CohortLevel::hyper_strict6,
                                         CohortLevel::ultra_strict5, CohortLevel::strict4,
                                         CohortLevel::broad2};
  for (int level = 0; level < 4; ++level) {
    auto it = levels_[level].find(key_for_level(persona, level));
    if (it == levels_[level].end()) continue;
    std::set<std::string> unique_ids;
    for (const PersonRecord* p : it->second) unique_ids.insert(p->person_id);
    // "fewer than 10 unique individuals" triggers fallback; exactly
    // min_size matches does not.
    if (static_cast<int>(unique_ids.size()) >= min_size)
      return build_cohort_stats(it->second, kLevels[level], schema_);
  }
  std::vector<const PersonRecord*> all;
  all.reserve(hts_.size());
  for (const auto& p : hts_) all.push_back(&p);
  return build_cohort_stats(std::move(all), CohortLevel::full_dataset, schema_);
}

AggregateScore aggregate_scores(const std::vector<Diary>& generated,
                                const std::vector<PersonRecord>& hts,
                                const CategorySchema& schema, const ScoreOptions& opts) {
  if (generated.empty()) throw DomainError("aggregate_scores: no generated diaries");
  if (hts.empty()) throw DomainError("aggregate_scores: empty HTS");

  auto cats = trip_count_categories();
  std::map<std::string, double> q_trips, q_purpose, q_mode, q_interval;
  for (const auto& d : generated) {
    q_trips[trip_count_bin(d.trip_count())] += 1.0;
    for (const auto& t : d.trips) {
      q_purpose[t.purpose] += 1.0;
      q_mode[t.mode] += 1.0;
    }
    for (const auto& label : diary_intervals(d)) q_interval[label] += 1.0;
  }
  std::map<std::string, double> p_trips, p_purpose, p_mode, p_interval;
  for (const auto& person : hts) {
    double w = person.survey_weight;
    Diary d = person.trip_diary();
    p_trips[trip_count_bin(d.trip_count())] += w;
    for (const auto& t : d.trips) {
      p_purpose[t.purpose] += w;
      p_mode[t.mode] += w;
    }
    for (const auto& label : diary_intervals(d)) p_interval[label] += w;
  }

  auto component = [&](const std::map<std::string, double>& q_counts,
                       const std::map<std::string, double>& p_counts,
                       const std::vector<std::string>& categories) {
    Distribution q = distribution_from_counts(q_counts, categories);
    Distribution p = distribution_from_counts(p_counts, categories);
    return component_divergence(q, p, opts);
  };

  AggregateScore s;
  s.trip_count_score_agg = component(q_trips, p_trips, cats);
  s.purpose_score_agg = component(q_purpose, p_purpose, schema.purposes);
  s.mode_score_agg = component(q_mode, p_mode, schema.modes);
  s.interval_score_agg = component(q_interval, p_interval, CategorySchema::interval_bins());
  s.overall_agg = (s.trip_count_score_agg + s.purpose_score_agg + s.interval_score_agg +
                   s.mode_score_agg) /
                  4.0;
  return s;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Continued fraction (Lentz), standard formulation.
  auto betacf = [](double a, double b, double x) {
    const int kMaxIter = 300;
    const double kEps = 1e-14, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
      int m2 = 2 * m;
      double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < kFpMin) d = kFpMin;
      c = 1.0 + aa / c;
      if (std::abs(c) < kFpMin) c = kFpMin;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < kFpMin) d = kFpMin;
      c = 1.0 + aa / c;
      if (std::abs(c) < kFpMin) c = kFpMin;
      d = 1.0 / d;
      double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
  };
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log(1.0 - x) + a * std::log(x)) *
                   betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  double x = df / (df + t * t);
  double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

WelchResult welch_t_test(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b) {
  auto stats = [](const std::vector<double>& s) {
    if (s.size() < 2) throw DomainError("welch_t_test: sample smaller than 2");
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= s.size();
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= (s.size() - 1);
    return std::pair<double, double>{mean, var};
  };
  auto [ma, va] = stats(sample_a);
  auto [mb, vb] = stats(sample_b);
  double na = static_cast<double>(sample_a.size());
  double nb = static_cast<double>(sample_b.size());
  double se2 = va / na + vb / nb;
  if (se2 <= 0.0) {
    if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
    throw DomainError("welch_t_test: both samples have zero variance");
  }
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
  r.p_two_sided = 2.0 * (1.0 - student_t_cdf(std::abs(r.t), r.df));
  r.p_two_sided = std::clamp(r.p_two_sided, 0.0, 1.0);
  return r;
}

}  // namespace td
