#pragma once
// Classical benchmark: survey-weighted NB2 trip generation, multinomial
// logit purpose/mode models, empirical time tables, and diary generation
// for the shared persona set. Calibration is single-threaded and
// deterministic; generation parallelizes with per-persona samplers.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "td/ingestion.hpp"
#include "td/persona.hpp"

namespace td {

enum class FitOutcome { converged, max_iterations, separation, degenerate };

std::string to_string(FitOutcome o);
FitOutcome fit_outcome_from_string(const std::string& s);

struct FitStatus {
  FitOutcome outcome = FitOutcome::max_iterations;
  int iterations = 0;
  double final_grad_norm = 0.0;
  bool alpha_at_bound = false;  // NB only: log-dispersion hit its box bound
  std::vector<double> objective_history;  // accepted iterates, non-decreasing
};

// Named covariate construction shared by calibration and prediction. The
// covariate set is configuration; densities are rescaled so magnitudes
// stay O(1) for the optimizers.
class FeatureBuilder {
 public:
  // `covariates` from: employed, vehicles, household_size, age_brackets,
  // population_density, employment_mix, intersection_density. The
  // intercept is always present and first. `age_brackets` expands into an
  // indicator per non-reference bracket of `bracket_list`.
  FeatureBuilder(std::vector<std::string> covariates, std::vector<std::string> bracket_list);

  static std::vector<std::string> default_covariates();

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& covariates() const { return covariates_; }
  const std::vector<std::string>& brackets() const { return brackets_; }
  int dim() const { return static_cast<int>(names_.size()); }

  Eigen::VectorXd build(const Persona& persona, const BlockGroupProfile* profile) const;

 private:
  std::vector<std::string> covariates_;
  std::vector<std::string> brackets_;
  std::vector<std::string> names_;
};

struct NBModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd beta;
  double alpha = 1.0;  // dispersion, > 0 (variance mu + alpha*mu^2)
  FitStatus status;

  double mean_for(const Eigen::VectorXd& features) const;
};

struct MNLModel {
  std::vector<std::string> categories;  // first category is the zero-fixed reference
  std::vector<std::string> feature_names;
  // dim() x categories matrix, column 0 identically zero.
  Eigen::MatrixXd beta;
  FitStatus status;
};

// Weighted NB2 log-likelihood and its analytic gradient in (beta, log
// alpha); exposed so tests can check the gradient against finite
// differences.
double nb_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& beta, double log_alpha);
Eigen::VectorXd nb_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& beta,
                            double log_alpha);

// Weighted multinomial log-likelihood over flattened coefficients for
// categories 1..K-1 (reference fixed at zero), plus analytic gradient.
double mnl_loglik(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                  const Eigen::VectorXd& w, const Eigen::MatrixXd& beta);
Eigen::VectorXd mnl_gradient(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                             const Eigen::VectorXd& w, const Eigen::MatrixXd& beta);

// Maximizes the survey-weighted NB2 log-likelihood: Fisher scoring on beta
// with step halving, Newton on log alpha, converged at joint gradient
// max-norm < 1e-6 or 200 iterations.
NBModel fit_negative_binomial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& w,
                              std::vector<std::string> feature_names);

// Maximizes the weighted multinomial log-likelihood by damped Newton with
// analytic gradient/Hessian; converged at gradient max-norm < 1e-6 or 500
// iterations. Categories never observed yield a degenerate status.
MNLModel fit_mnl(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                 const Eigen::VectorXd& w, std::vector<std::string> categories,
                 std::vector<std::string> feature_names);

// NB2 probability mass at a single count.
double nb_pmf(double mu, double alpha, int count);

// Distribution over {"0", .., "max_count-1", "max_count+"} with tail mass
// lumped into the top bin.
Distribution nb_trip_count_distribution(const NBModel& model, const Eigen::VectorXd& features,
                                        int max_count);

// Draw from the NB2 pmf via the gamma-Poisson mixture.
int nb_sample_count(const NBModel& model, const Eigen::VectorXd& features,
                    SeededSampler& sampler);

Distribution mnl_probabilities(const MNLModel& model, const Eigen::VectorXd& features);

// Survey-weighted empirical histogram with inverse-CDF sampling.
class WeightedEmpirical {
 public:
  WeightedEmpirical() = default;
  WeightedEmpirical(std::vector<double> values, std::vector<double> weights);

  bool empty() const { return values_.empty(); }
  double sample(SeededSampler& sampler) const;
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> values_;   // sorted unique
  std::vector<double> weights_;  // aligned, positive
  std::vector<double> cumulative_;
};

// Departure-time / duration / distance histograms from HTS trips, each
// trip weighted by its person's survey weight.
struct TimeTables {
  WeightedEmpirical departure_minutes;
  WeightedEmpirical duration_minutes;
  WeightedEmpirical distance_miles;
};

TimeTables build_time_tables(const std::vector<PersonRecord>& persons);

struct ClassicalModels {
  FeatureBuilder features;
  NBModel trip_count;
  MNLModel purpose;
  MNLModel mode;
  TimeTables tables;
};

// Calibrates all three models plus time tables on the HTS (person-level
// covariates; trip-level rows reuse the person's features and weight).
ClassicalModels calibrate_classical(const std::vector<PersonRecord>& persons,
                                    const std::map<std::string, BlockGroupProfile>& profiles,
                                    const std::vector<std::string>& covariates);

// n ~ NB2; per trip purpose/mode from the MNLs and times/distances from
// the empirical tables, with bounded re-draws then clamping so the result
// always passes validate_diary.
Diary generate_classical_diary(const Persona& persona, const BlockGroupProfile* profile,
                               const ClassicalModels& models, SeededSampler& sampler);

std::string classical_models_to_json(const ClassicalModels& models);
ClassicalModels classical_models_from_json(const std::string& text);

}  // namespace td
