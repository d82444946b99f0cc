#include "td/classical.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace td {

using nlohmann::json;

namespace {

constexpr double kGradTol = 1e-6;
constexpr double kSeparationNorm = 50.0;
constexpr double kLogAlphaLo = -10.0;
constexpr double kLogAlphaHi = 10.0;

double digamma(double x) {
  // Recurrence to x >= 6, then asymptotic series.
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
  return result;
}

}  // namespace

std::string to_string(FitOutcome o) {
  switch (o) {
    case FitOutcome::converged: return "converged";
    case FitOutcome::max_iterations: return "max_iterations";
    case FitOutcome::separation: return "separation";
    case FitOutcome::degenerate: return "degenerate";
  }
  return "?";
}

FitOutcome fit_outcome_from_string(const std::string& s) {
  if (s == "converged") return FitOutcome::converged;
  if (s == "max_iterations") return FitOutcome::max_iterations;
  if (s == "separation") return FitOutcome::separation;
  if (s == "degenerate") return FitOutcome::degenerate;
  throw SchemaError("unknown fit outcome: " + s);
}

FeatureBuilder::FeatureBuilder(std::vector<std::string> covariates,
                               std::vector<std::string> bracket_list)
    : covariates_(std::move(covariates)), brackets_(std::move(bracket_list)) {
  names_.push_back("intercept");
  for (const auto& c : covariates_) {
    if (c == "age_brackets") {
      // first bracket is the reference
      for (size_t i = 1; i < brackets_.size(); ++i) names_.push_back("age:" + brackets_[i]);
    } else if (c == "employed" || c == "vehicles" || c == "household_size" ||
               c == "population_density" || c == "employment_mix" ||
               c == "intersection_density") {
      names_.push_back(c);
    } else {
      throw ConfigurationError("unknown covariate: " + c);
    }
  }
}

std::vector<std::string> FeatureBuilder::default_covariates() {
  return {"age_brackets", "employed", "vehicles", "household_size",
          "population_density", "employment_mix", "intersection_density"};
}

Eigen::VectorXd FeatureBuilder::build(const Persona& persona,
                                      const BlockGroupProfile* profile) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
  int k = 0;
  x[k++] = 1.0;
  for (const auto& c : covariates_) {
    if (c == "age_brackets") {
      for (size_t i = 1; i < brackets_.size(); ++i)
        x[k++] = persona.age_bracket == brackets_[i] ? 1.0 : 0.0;
    } else if (c == "employed") {
      x[k++] = persona.employment_status == EmploymentStatus::employed ? 1.0 : 0.0;
    } else if (c == "vehicles") {
      x[k++] = static_cast<double>(persona.household_vehicles);
    } else if (c == "household_size") {
      x[k++] = static_cast<double>(persona.household_size);
    } else {
      if (profile == nullptr)
        throw ConfigurationError("covariate " + c + " needs a block-group profile for geoid " +
                                 persona.geoid);
      // rescaled so optimizer inputs stay O(1)
      if (c == "population_density") x[k++] = profile->population_density / 1000.0;
      else if (c == "employment_mix") x[k++] = profile->employment_mix;
      else x[k++] = profile->intersection_density / 100.0;
    }
  }
  return x;
}

double NBModel::mean_for(const Eigen::VectorXd& features) const {
  return std::exp(beta.dot(features));
}

double nb_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& beta, double log_alpha) {
  const double r = std::exp(-log_alpha);  // 1/alpha
  Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double mu = std::exp(eta[i]);
    double yi = y[i];
    double log_r_mu = std::log(r + mu);
    ll += w[i] * (std::lgamma(yi + r) - std::lgamma(r) - std::lgamma(yi + 1.0) +
                  r * (std::log(r) - log_r_mu) + yi * (eta[i] - log_r_mu));
  }
  return ll;
}

Eigen::VectorXd nb_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& beta,
                            double log_alpha) {
  const double r = std::exp(-log_alpha);
  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(beta.size() + 1);
  double g_logalpha = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double mu = std::exp(eta[i]);
    double yi = y[i];
    double denom = r + mu;
    grad.head(beta.size()) += w[i] * (yi - mu) * r / denom * X.row(i).transpose();
    double dl_dr = digamma(yi + r) - digamma(r) + std::log(r) + 1.0 - std::log(denom) -
                   (yi + r) / denom;
    g_logalpha += w[i] * dl_dr * (-r);  // dr/dlogalpha = -r
  }
  grad[beta.size()] = g_logalpha;
  return grad;
}

NBModel fit_negative_binomial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& w,
                              std::vector<std::string> feature_names) {
  if (X.rows() < 2) throw DomainError("fit_negative_binomial needs at least 2 rows");
  NBModel model;
  model.feature_names = std::move(feature_names);

  const double wsum = w.sum();
  const double wmean = w.dot(y) / wsum;
  if (wmean <= 0.0) {
    // All counts zero: mu -> 0 and the intercept is unbounded below.
    model.beta = Eigen::VectorXd::Zero(X.cols());
    model.beta[0] = std::log(1e-8);
    model.alpha = 1.0;
    model.status.outcome = FitOutcome::degenerate;
    return model;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  beta[0] = std::log(wmean);
  double log_alpha = 0.0;
  FitStatus status;
  double ll = nb_loglik(X, y, w, beta, log_alpha);
  status.objective_history.push_back(ll);

  for (int iter = 0; iter < 200; ++iter) {
    status.iterations = iter + 1;

    // Fisher scoring step for beta at fixed alpha.
    const double r = std::exp(-log_alpha);
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(X.cols());
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double mu = std::exp(eta[i]);
      double denom = r + mu;
      g_beta += w[i] * (y[i] - mu) * r / denom * X.row(i).transpose();
      info += w[i] * mu * r / denom * X.row(i).transpose() * X.row(i);
    }
    Eigen::VectorXd step =
        (info + 1e-10 * Eigen::MatrixXd::Identity(X.cols(), X.cols())).ldlt().solve(g_beta);
    double scale = 1.0;
    for (int h = 0; h < 40; ++h) {
      double cand = nb_loglik(X, y, w, beta + scale * step, log_alpha);
      if (cand >= ll) {
        beta += scale * step;
        ll = cand;
        break;
      }
      scale *= 0.5;
    }

    // Newton step on log alpha (numeric second derivative of the analytic
    // first derivative).
    auto dll_dla = [&](double la) {
      return nb_gradient(X, y, w, beta, la)[X.cols()];
    };
    double g_la = dll_dla(log_alpha);
    double h_eps = 1e-4;
    double hess = (dll_dla(log_alpha + h_eps) - dll_dla(log_alpha - h_eps)) / (2 * h_eps);
    double la_step = hess < -1e-12 ? -g_la / hess : (g_la > 0 ? 0.5 : -0.5);
    la_step = std::clamp(la_step, -2.0, 2.0);
    scale = 1.0;
    for (int h = 0; h < 40; ++h) {
      double cand_la = std::clamp(log_alpha + scale * la_step, kLogAlphaLo, kLogAlphaHi);
      double cand = nb_loglik(X, y, w, beta, cand_la);
      if (cand >= ll) {
        log_alpha = cand_la;
        ll = cand;
        break;
      }
      scale *= 0.5;
    }
    status.objective_history.push_back(ll);

    if (beta.norm() > kSeparationNorm) {
      status.outcome = FitOutcome::separation;
      break;
    }
    Eigen::VectorXd grad = nb_gradient(X, y, w, beta, log_alpha);
    status.final_grad_norm = grad.lpNorm<Eigen::Infinity>();

    // Near the optimum the block updates stall: likelihood differences fall
    // below double resolution before the gradient reaches tolerance. Switch
    // to a joint Newton step on (beta, log alpha) judged by gradient-norm
    // decrease, which stays informative at that scale.
    // When the dispersion sits on its box bound, only the beta block of
    // the gradient can (and must) reach tolerance.
    const bool at_bound = log_alpha <= kLogAlphaLo || log_alpha >= kLogAlphaHi;
    const int d = static_cast<int>(X.cols());
    const int active = at_bound ? d : d + 1;
    double gate = at_bound ? grad.head(d).lpNorm<Eigen::Infinity>()
                           : status.final_grad_norm;
    if (gate < 1e-2 && gate >= kGradTol) {
      Eigen::MatrixXd J(d + 1, active);
      const double fd = 1e-5;
      for (int j = 0; j < active; ++j) {
        Eigen::VectorXd bp = beta, bm = beta;
        double lap = log_alpha, lam = log_alpha;
        if (j < d) {
          bp[j] += fd;
          bm[j] -= fd;
        } else {
          lap += fd;
          lam -= fd;
        }
        J.col(j) = (nb_gradient(X, y, w, bp, lap) - nb_gradient(X, y, w, bm, lam)) / (2 * fd);
      }
      Eigen::VectorXd delta =
          J.topRows(active).fullPivLu().solve(-grad.head(active));
      double s = 1.0;
      for (int h = 0; h < 30; ++h) {
        Eigen::VectorXd nb = beta + s * delta.head(d);
        double nla = at_bound ? log_alpha
                              : std::clamp(log_alpha + s * delta[d], kLogAlphaLo, kLogAlphaHi);
        Eigen::VectorXd ng = nb_gradient(X, y, w, nb, nla);
        double ng_gate = at_bound ? ng.head(d).lpNorm<Eigen::Infinity>()
                                  : ng.lpNorm<Eigen::Infinity>();
        if (ng_gate < gate) {
          beta = nb;
          log_alpha = nla;
          grad = ng;
          status.final_grad_norm = ng.lpNorm<Eigen::Infinity>();
          ll = std::max(ll, nb_loglik(X, y, w, beta, log_alpha));
          status.objective_history.back() = ll;
          break;
        }
        s *= 0.5;
      }
    }
    status.alpha_at_bound = log_alpha <= kLogAlphaLo || log_alpha >= kLogAlphaHi;
    double beta_grad_norm = grad.head(X.cols()).lpNorm<Eigen::Infinity>();
    if (status.final_grad_norm < kGradTol ||
        (status.alpha_at_bound && beta_grad_norm < kGradTol)) {
      status.outcome = FitOutcome::converged;
      break;
    }
  }

  model.beta = beta;
  model.alpha = std::exp(log_alpha);
  model.status = std::move(status);
  return model;
}

double mnl_loglik(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                  const Eigen::VectorXd& w, const Eigen::MatrixXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd util = beta.transpose() * X.row(i).transpose();
    double maxu = util.maxCoeff();
    double lse = maxu + std::log((util.array() - maxu).exp().sum());
    ll += w[i] * (util[choice[i]] - lse);
  }
  return ll;
}

Eigen::VectorXd mnl_gradient(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                             const Eigen::VectorXd& w, const Eigen::MatrixXd& beta) {
  const int F = static_cast<int>(X.cols());
  const int K = static_cast<int>(beta.cols());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(F * (K - 1));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd util = beta.transpose() * X.row(i).transpose();
    double maxu = util.maxCoeff();
    Eigen::VectorXd p = (util.array() - maxu).exp();
    p /= p.sum();
    for (int c = 1; c < K; ++c) {
      double coeff = (choice[i] == c ? 1.0 : 0.0) - p[c];
      grad.segment((c - 1) * F, F) += w[i] * coeff * X.row(i).transpose();
    }
  }
  return grad;
}

MNLModel fit_mnl(const Eigen::MatrixXd& X, const std::vector<int>& choice,
                 const Eigen::VectorXd& w, std::vector<std::string> categories,
                 std::vector<std::string> feature_names) {
  const int F = static_cast<int>(X.cols());
  const int K = static_cast<int>(categories.size());
  MNLModel model;
  model.categories = std::move(categories);
  model.feature_names = std::move(feature_names);
  model.beta = Eigen::MatrixXd::Zero(F, K);
  if (K < 2) throw DomainError("fit_mnl needs at least 2 categories");

  // Every category must actually occur; otherwise the fit is degenerate
  // (its utilities diverge to -inf).
  std::vector<double> observed(K, 0.0);
  for (size_t i = 0; i < choice.size(); ++i) observed[choice[i]] += w[i];
  for (int c = 0; c < K; ++c) {
    if (observed[c] <= 0.0) {
      model.status.outcome = FitOutcome::degenerate;
      return model;
    }
  }

  FitStatus status;
  double ll = mnl_loglik(X, choice, w, model.beta);
  status.objective_history.push_back(ll);

  for (int iter = 0; iter < 500; ++iter) {
    status.iterations = iter + 1;
    Eigen::VectorXd grad = mnl_gradient(X, choice, w, model.beta);
    status.final_grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (status.final_grad_norm < kGradTol) {
      status.outcome = FitOutcome::converged;
      break;
    }

    // Newton direction from the analytic Hessian.
    const int D = F * (K - 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(D, D);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      Eigen::VectorXd util = model.beta.transpose() * X.row(i).transpose();
      double maxu = util.maxCoeff();
      Eigen::VectorXd p = (util.array() - maxu).exp();
      p /= p.sum();
      Eigen::MatrixXd xx = X.row(i).transpose() * X.row(i);
      for (int a = 1; a < K; ++a)
        for (int b = 1; b < K; ++b) {
          double s = p[a] * ((a == b ? 1.0 : 0.0) - p[b]);
          H.block((a - 1) * F, (b - 1) * F, F, F) -= w[i] * s * xx;
        }
    }
    Eigen::VectorXd step =
        (H - 1e-10 * Eigen::MatrixXd::Identity(D, D)).ldlt().solve(-grad);

    bool accepted = false;
    // Near the optimum likelihood differences fall below double
    // resolution and step-halving degenerates into a microscopic creep;
    // there the full Newton step is judged by gradient-norm decrease
    // (provided the likelihood does not measurably regress).
    if (status.final_grad_norm < 1e-2) {
      Eigen::MatrixXd cand_beta = model.beta;
      for (int c = 1; c < K; ++c) cand_beta.col(c) += step.segment((c - 1) * F, F);
      double cand = mnl_loglik(X, choice, w, cand_beta);
      Eigen::VectorXd cand_grad = mnl_gradient(X, choice, w, cand_beta);
      if (cand_grad.lpNorm<Eigen::Infinity>() < status.final_grad_norm &&
          cand >= ll - 1e-9 * (1.0 + std::abs(ll))) {
        model.beta = cand_beta;
        ll = std::max(ll, cand);
        accepted = true;
      }
    }
    double scale = 1.0;
    for (int h = 0; h < 40 && !accepted; ++h) {
      Eigen::MatrixXd cand_beta = model.beta;
      for (int c = 1; c < K; ++c) cand_beta.col(c) += scale * step.segment((c - 1) * F, F);
      double cand = mnl_loglik(X, choice, w, cand_beta);
      if (cand >= ll) {
        model.beta = cand_beta;
        ll = cand;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    status.objective_history.push_back(ll);
    if (!accepted) {
      status.outcome = FitOutcome::max_iterations;
      break;
    }
    if (model.beta.norm() > kSeparationNorm) {
      status.outcome = FitOutcome::separation;
      break;
    }
  }

  model.status = std::move(status);
  return model;
}

double nb_pmf(double mu, double alpha, int count) {
  if (count < 0) return 0.0;
  if (mu <= 0.0) return count == 0 ? 1.0 : 0.0;
  double r = 1.0 / alpha;
  double log_r_mu = std::log(r + mu);
  double lp = std::lgamma(count + r) - std::lgamma(r) - std::lgamma(count + 1.0) +
              r * (std::log(r) - log_r_mu) + count * (std::log(mu) - log_r_mu);
  return std::exp(lp);
}

Distribution nb_trip_count_distribution(const NBModel& model, const Eigen::VectorXd& features,
                                        int max_count) {
  double mu = model.mean_for(features);
  Distribution d;
  double cum = 0.0;
  for (int k = 0; k < max_count; ++k) {
    d.categories.push_back(std::to_string(k));
    double p = nb_pmf(mu, model.alpha, k);
    d.mass.push_back(p);
    cum += p;
  }
  d.categories.push_back(std::to_string(max_count) + "+");
  d.mass.push_back(std::max(0.0, 1.0 - cum));
  return d;
}

int nb_sample_count(const NBModel& model, const Eigen::VectorXd& features,
                    SeededSampler& sampler) {
  double mu = model.mean_for(features);
  if (mu <= 0.0) return 0;
  double r = 1.0 / model.alpha;
  std::gamma_distribution<double> gamma(r, mu / r);
  double lambda = gamma(sampler.engine());
  std::poisson_distribution<int> poisson(std::max(lambda, 1e-12));
  return poisson(sampler.engine());
}

Distribution mnl_probabilities(const MNLModel& model, const Eigen::VectorXd& features) {
  Eigen::VectorXd util = model.beta.transpose() * features;
  double maxu = util.maxCoeff();
  Eigen::VectorXd p = (util.array() - maxu).exp();
  p /= p.sum();
  Distribution d;
  d.categories = model.categories;
  d.mass.assign(p.data(), p.data() + p.size());
  return d;
}

WeightedEmpirical::WeightedEmpirical(std::vector<double> values, std::vector<double> weights) {
  if (values.size() != weights.size())
    throw DomainError("WeightedEmpirical length mismatch");
  std::vector<size_t> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  for (size_t idx : order) {
    if (weights[idx] <= 0.0) throw DomainError("WeightedEmpirical needs positive weights");
    if (!values_.empty() && values_.back() == values[idx]) {
      weights_.back() += weights[idx];
    } else {
      values_.push_back(values[idx]);
      weights_.push_back(weights[idx]);
    }
  }
  double cum = 0.0;
  for (double wv : weights_) {
    cum += wv;
    cumulative_.push_back(cum);
  }
}

double WeightedEmpirical::sample(SeededSampler& sampler) const {
  if (values_.empty()) throw DomainError("sampling from empty WeightedEmpirical");
  double u = sampler.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  size_t i = std::min<size_t>(it - cumulative_.begin(), values_.size() - 1);
  return values_[i];
}

TimeTables build_time_tables(const std::vector<PersonRecord>& persons) {
  std::vector<double> dep, dur, dist, wts;
  for (const auto& p : persons) {
    for (const auto& e : p.events) {
      if (e.kind != EventKind::trip) continue;
      dep.push_back(static_cast<double>(e.start_time));
      dur.push_back(static_cast<double>(e.end_time - e.start_time));
      dist.push_back(e.distance_miles.value_or(0.0));
      wts.push_back(p.survey_weight);
    }
  }
  if (dep.empty()) throw DomainError("build_time_tables: HTS contains no trips");
  TimeTables t;
  t.departure_minutes = WeightedEmpirical(dep, wts);
  t.duration_minutes = WeightedEmpirical(dur, wts);
  t.distance_miles = WeightedEmpirical(dist, wts);
  return t;
}

ClassicalModels calibrate_classical(const std::vector<PersonRecord>& persons,
                                    const std::map<std::string, BlockGroupProfile>& profiles,
                                    const std::vector<std::string>& covariates) {
  if (persons.empty()) throw DomainError("calibrate_classical: empty HTS");

  std::set<std::string> bracket_set;
  for (const auto& p : persons) bracket_set.insert(p.demographics.age_bracket);
  std::vector<std::string> brackets(bracket_set.begin(), bracket_set.end());

  FeatureBuilder fb(covariates, brackets);
  auto profile_for = [&](const std::string& geoid) -> const BlockGroupProfile* {
    auto it = profiles.find(geoid);
    return it == profiles.end() ? nullptr : &it->second;
  };

  const Eigen::Index n = static_cast<Eigen::Index>(persons.size());
  Eigen::MatrixXd X(n, fb.dim());
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = persons[i];
    X.row(i) = fb.build(p.demographics, profile_for(p.demographics.geoid)).transpose();
    y[i] = static_cast<double>(p.trips().size());
    w[i] = p.survey_weight;
  }

  // Trip-level rows for the choice models: person covariates, one row per trip.
  std::set<std::string> purpose_set, mode_set;
  for (const auto& p : persons)
    for (const auto& e : p.events)
      if (e.kind == EventKind::trip) {
        purpose_set.insert(*e.purpose);
        mode_set.insert(*e.mode);
      }
  std::vector<std::string> purposes(purpose_set.begin(), purpose_set.end());
  std::vector<std::string> modes(mode_set.begin(), mode_set.end());

  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<int>(std::find(v.begin(), v.end(), s) - v.begin());
  };

  std::vector<int> purpose_choice, mode_choice;
  std::vector<double> trip_w;
  std::vector<Eigen::VectorXd> trip_x;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& e : persons[i].events) {
      if (e.kind != EventKind::trip) continue;
      trip_x.push_back(X.row(i).transpose());
      trip_w.push_back(w[i]);
      purpose_choice.push_back(index_of(purposes, *e.purpose));
      mode_choice.push_back(index_of(modes, *e.mode));
    }
  }
  Eigen::MatrixXd Xt(static_cast<Eigen::Index>(trip_x.size()), fb.dim());
  Eigen::VectorXd wt(static_cast<Eigen::Index>(trip_w.size()));
  for (size_t i = 0; i < trip_x.size(); ++i) {
    Xt.row(static_cast<Eigen::Index>(i)) = trip_x[i].transpose();
    wt[static_cast<Eigen::Index>(i)] = trip_w[i];
  }

  ClassicalModels models{
      fb,
      fit_negative_binomial(X, y, w, fb.names()),
      fit_mnl(Xt, purpose_choice, wt, purposes, fb.names()),
      fit_mnl(Xt, mode_choice, wt, modes, fb.names()),
      build_time_tables(persons)};
  return models;
}

Diary generate_classical_diary(const Persona& persona, const BlockGroupProfile* profile,
                               const ClassicalModels& models, SeededSampler& sampler) {
  Diary diary;
  diary.persona_id = persona.persona_id;
  diary.source = DiarySource::classical;

  Eigen::VectorXd x = models.features.build(persona, profile);
  int n = nb_sample_count(models.trip_count, x, sampler);
  if (n <= 0) return diary;

  Distribution purpose_probs = mnl_probabilities(models.purpose, x);
  Distribution mode_probs = mnl_probabilities(models.mode, x);

  struct Draft {
    int start, dur;
  };
  std::vector<Draft> drafts;
  const int kRedraws = 20;
  for (int attempt = 0; attempt < kRedraws; ++attempt) {
    drafts.clear();
    for (int i = 0; i < n; ++i) {
      int start = static_cast<int>(models.tables.departure_minutes.sample(sampler));
      int dur = std::max(1, static_cast<int>(models.tables.duration_minutes.sample(sampler)));
      drafts.push_back({start, dur});
    }
    std::sort(drafts.begin(), drafts.end(),
              [](const Draft& a, const Draft& b) { return a.start < b.start; });
    bool ok = true;
    for (int i = 0; i + 1 < n; ++i)
      if (drafts[i].start + drafts[i].dur > drafts[i + 1].start) ok = false;
    if (ok && drafts.back().start + drafts.back().dur <= kMinutesPerDay) break;
  }

  // Clamp whatever survived the re-draw budget into a valid day.
  int prev_end = 0;
  for (const Draft& d : drafts) {
    int start = std::max(d.start, prev_end);
    if (start >= kMinutesPerDay) break;  // no room left in the day
    int end = std::min(start + d.dur, kMinutesPerDay);
    if (end <= start) continue;
    TripRecord t;
    t.start_time = start;
    t.end_time = end;
    t.purpose = purpose_probs.categories[sampler.categorical(purpose_probs)];
    t.mode = mode_probs.categories[sampler.categorical(mode_probs)];
    t.distance_miles = models.tables.distance_miles.sample(sampler);
    diary.trips.push_back(std::move(t));
    prev_end = end;
  }
  return diary;
}

namespace {

json fit_status_to_json(const FitStatus& s) {
  json j;
  j["outcome"] = to_string(s.outcome);
  j["iterations"] = s.iterations;
  j["final_grad_norm"] = s.final_grad_norm;
  j["alpha_at_bound"] = s.alpha_at_bound;
  return j;
}

FitStatus fit_status_from_json(const json& j) {
  FitStatus s;
  s.outcome = fit_outcome_from_string(j.at("outcome").get<std::string>());
  s.iterations = j.at("iterations").get<int>();
  s.final_grad_norm = j.at("final_grad_norm").get<double>();
  s.alpha_at_bound = j.at("alpha_at_bound").get<bool>();
  return s;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

json empirical_to_json(const WeightedEmpirical& e) {
  json j;
  j["values"] = e.values();
  j["weights"] = e.weights();
  return j;
}

WeightedEmpirical empirical_from_json(const json& j) {
  return WeightedEmpirical(j.at("values").get<std::vector<double>>(),
                           j.at("weights").get<std::vector<double>>());
}

json mnl_to_json(const MNLModel& m) {
  json j;
  j["categories"] = m.categories;
  j["feature_names"] = m.feature_names;
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.beta.cols(); ++c) cols.push_back(vector_to_json(m.beta.col(c)));
  j["beta"] = cols;
  j["status"] = fit_status_to_json(m.status);
  return j;
}

MNLModel mnl_from_json(const json& j) {
  MNLModel m;
  m.categories = j.at("categories").get<std::vector<std::string>>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const auto& cols = j.at("beta");
  m.beta = Eigen::MatrixXd::Zero(cols.empty() ? 0 : cols[0].size(), cols.size());
  for (size_t c = 0; c < cols.size(); ++c)
    m.beta.col(static_cast<Eigen::Index>(c)) = vector_from_json(cols[c]);
  m.status = fit_status_from_json(j.at("status"));
  return m;
}

}  // namespace

std::string classical_models_to_json(const ClassicalModels& models) {
  json j;
  j["covariates"] = models.features.covariates();
  j["age_brackets"] = models.features.brackets();
  json nb;
  nb["feature_names"] = models.trip_count.feature_names;
  nb["beta"] = vector_to_json(models.trip_count.beta);
  nb["alpha"] = models.trip_count.alpha;
  nb["status"] = fit_status_to_json(models.trip_count.status);
  j["trip_count"] = nb;
  j["purpose"] = mnl_to_json(models.purpose);
  j["mode"] = mnl_to_json(models.mode);
  json tables;
  tables["departure_minutes"] = empirical_to_json(models.tables.departure_minutes);
  tables["duration_minutes"] = empirical_to_json(models.tables.duration_minutes);
  tables["distance_miles"] = empirical_to_json(models.tables.distance_miles);
  j["time_tables"] = tables;
  return j.dump(2) + "\n";
}

ClassicalModels classical_models_from_json(const std::string& text) {
  json j = json::parse(text);
  FeatureBuilder fb(j.at("covariates").get<std::vector<std::string>>(),
                    j.at("age_brackets").get<std::vector<std::string>>());
  NBModel nb;
  nb.feature_names = j.at("trip_count").at("feature_names").get<std::vector<std::string>>();
  nb.beta = vector_from_json(j.at("trip_count").at("beta"));
  nb.alpha = j.at("trip_count").at("alpha").get<double>();
  nb.status = fit_status_from_json(j.at("trip_count").at("status"));
  TimeTables tables;
  tables.departure_minutes = empirical_from_json(j.at("time_tables").at("departure_minutes"));
  tables.duration_minutes = empirical_from_json(j.at("time_tables").at("duration_minutes"));
  tables.distance_miles = empirical_from_json(j.at("time_tables").at("distance_miles"));
  return ClassicalModels{std::move(fb), std::move(nb), mnl_from_json(j.at("purpose")),
                         mnl_from_json(j.at("mode")), std::move(tables)};
}

}  // namespace td
