#pragma once
// One-to-cohort and aggregate realism scoring: base-2 Jensen-Shannon
// divergence, the four component scores, the 6/5/4/2/all cohort fallback
// ladder, and Welch's t-test. All operations are pure; the cohort index is
// built once and read-only afterwards.

#include <map>
#include <string>
#include <vector>

#include "td/core.hpp"
#include "td/ingestion.hpp"

namespace td {

// Sum over A(x) * log2(A(x)/B(x)) with 0*log(0/.) = 0. Throws DomainError
// when some A(x) > 0 has B(x) = 0 (unreachable via jsd's midpoint).
double kl_divergence(const Distribution& a, const Distribution& b);

// Base-2 JSD in [0,1]; supports are aligned by union with zero fill.
double jsd(const Distribution& p, const Distribution& q);

enum class CohortLevel { hyper_strict6, ultra_strict5, strict4, broad2, full_dataset };

std::string to_string(CohortLevel level);

struct CohortStats {
  std::vector<const PersonRecord*> members;
  CohortLevel level = CohortLevel::full_dataset;
  double mean_trip_count = 0.0;  // survey-weighted
  Distribution purpose_dist;     // survey-weighted pools over members
  Distribution mode_dist;
  Distribution interval_dist;

  int size() const { return static_cast<int>(members.size()); }
};

struct RealismScore {
  double trip_count_score = 0.0;
  double purpose_score = 0.0;
  double interval_score = 0.0;
  double mode_score = 0.0;
  double overall = 0.0;  // mean of the four components
  CohortLevel cohort_level = CohortLevel::full_dataset;
  int cohort_size = 0;
};

struct AggregateScore {
  double trip_count_score_agg = 0.0;
  double purpose_score_agg = 0.0;
  double interval_score_agg = 0.0;
  double mode_score_agg = 0.0;
  double overall_agg = 0.0;
};

struct ScoreOptions {
  // false: component scores use 1 - JSD (divergence, the default);
  // true: 1 - sqrt(JSD) (distance, for parity with sqrt-returning libraries).
  bool use_distance = false;
};

// 1 - min(1, |n - mu| / mu). mu = 0: n = 0 scores 1, n > 0 scores 0.
double trip_count_score(int n_generated, double mu_cohort);

// 1 - divergence between the diary's distribution on the given dimension
// and the cohort pool. Both empty -> 1; exactly one empty -> 0.
double purpose_score(const Diary& diary, const CohortStats& cohort,
                     const ScoreOptions& opts = {});
double interval_score(const Diary& diary, const CohortStats& cohort,
                      const ScoreOptions& opts = {});
double mode_score(const Diary& diary, const CohortStats& cohort,
                  const ScoreOptions& opts = {});

RealismScore overall_realism(const Diary& diary, const CohortStats& cohort,
                             const ScoreOptions& opts = {});

// Read-only index over the HTS for the fallback ladder. Vehicle counts
// compare as min(count, 3) on both sides.
class CohortIndex {
 public:
  CohortIndex(const std::vector<PersonRecord>& hts, const CategorySchema& schema);

  // Tries 6-variable match, then drops GEOID, then household size, then
  // everything but age+employment, then the full dataset; returns the
  // first level with >= min_size unique persons (FullDataset always
  // succeeds). Throws DomainError on an empty HTS.
  CohortStats match_cohort(const Persona& persona, int min_size = 10) const;

 private:
  const std::vector<PersonRecord>& hts_;
  const CategorySchema& schema_;
  // One lookup table per ladder level, keyed by the joined match key.
  std::vector<std::map<std::string, std::vector<const PersonRecord*>>> levels_;
};

CohortStats build_cohort_stats(std::vector<const PersonRecord*> members, CohortLevel level,
                               const CategorySchema& schema);

// Pools all generated diaries into global Q distributions (trip-count
// histogram over {0..9,10+}, purposes, modes, intervals) against the
// survey-weighted HTS pools P; each component is 1 - JSD (Eq.-style),
// overall is their mean.
AggregateScore aggregate_scores(const std::vector<Diary>& generated,
                                const std::vector<PersonRecord>& hts,
                                const CategorySchema& schema, const ScoreOptions& opts = {});

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite df; p from the
// Student-t CDF evaluated numerically. Throws DomainError for samples
// smaller than 2, or zero variance in both groups with unequal means (two
// identical constant samples compare as t=0, p=1).
WelchResult welch_t_test(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b);

// Regularized incomplete beta function (used by the t CDF); exposed for
// verification against quadrature.
double regularized_incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);

}  // namespace td
