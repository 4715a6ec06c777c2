#ifndef RUINWALK_DISTS_HPP
#define RUINWALK_DISTS_HPP

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ruinwalk/rng.hpp"

namespace ruinwalk {

enum class DistKind {
  Pareto,        // tail (1 + x/sigma)^-alpha on [0, inf), alpha > 1
  Lognormal,     // log X ~ N(mu, sigma^2)
  WeibullHeavy,  // tail exp(-(x/scale)^beta), beta in (0,1)
  DiscretePower, // pmf ~ (x+1)^-(alpha+1) on {0,...,cutoff}, alpha > 1
  Exponential,   // tail exp(-rate x)
  Deterministic, // point mass
  GammaLight,    // Gamma(shape, rate)
};

const char* dist_kind_name(DistKind k);

class TailModel;

// Scale function e(x) used to normalise exceedance times: e(x) = x for
// regularly varying tails, e(x) = Fbar_I(x)/Fbar(x) otherwise.  Values are
// memoised on a log-spaced grid (512 knots) because e(x) sits inside the
// simulation loops; evaluation off the grid falls back to the exact form.
class ScaleFunction {
 public:
  double operator()(double x) const;
  double exact(double x) const;
  bool closed_form() const { return closed_form_; }

 private:
  friend class TailModel;
  ScaleFunction(std::function<double(double)> eval, bool closed_form,
                int knots);
  struct Memo;
  std::function<double(double)> eval_;
  bool closed_form_ = false;
  int knots_ = 512;
  std::shared_ptr<Memo> memo_;
};

// Limit law G of (integrated-tail ratio) scaling: Gbar(t) = lim
// Fbar_I(x + t e(x)) / Fbar_I(x).
struct LimitLawG {
  enum class Kind { ParetoTail, StdExp, Numeric };
  Kind kind = Kind::StdExp;
  double exponent = 0.0;  // ParetoTail: Gbar(t) = (1+t)^-exponent
  std::vector<std::pair<double, double>> grid;  // Numeric: (t, Gbar(t))

  static LimitLawG pareto_tail(double exponent);
  static LimitLawG std_exp();
  static LimitLawG numeric(std::vector<std::pair<double, double>> grid);

  double tail(double t) const;
  double cdf(double t) const { return 1.0 - tail(t); }
  double density(double t) const;
  double quantile(double p) const;
  double sample(Philox& rng) const;
};

struct InsensitivityReport {
  double max_deviation = 0.0;  // sup over grid of |Fbar(x+h(x))/Fbar(x) - 1|
  double final_deviation = 0.0;  // deviation at the largest grid point
  double worst_x = 0.0;
  bool pass = false;  // max_deviation <= caller tolerance
};

struct SelfNeglectReport {
  double sup_ratio = 0.0;  // sup over grid of e(x + e(x)) / e(x)
  double slope = 0.0;      // LS slope of the ratio against log x
  bool bounded = false;
};

class TailModel {
 public:
  static TailModel pareto(double alpha, double sigma);
  static TailModel lognormal(double mu, double sigma);
  static TailModel weibull_heavy(double beta, double scale);
  static TailModel discrete_power(double alpha, double cutoff = 1e7);
  static TailModel exponential(double rate);
  static TailModel deterministic(double value);
  static TailModel gamma_light(double shape, double rate);

  DistKind kind() const { return kind_; }
  bool heavy() const;
  bool discrete() const {
    return kind_ == DistKind::DiscretePower || kind_ == DistKind::Deterministic;
  }
  double param(int i) const { return p_[i]; }

  double tail(double x) const;  // P(X > x), exact closed form
  double cdf(double x) const { return 1.0 - tail(x); }
  double density(double x) const;
  double mean() const;

  // min(1, \int_x^inf tail(y) dy).  Closed form for Pareto / Exponential /
  // Deterministic and (via tail sums) DiscretePower; adaptive quadrature
  // with relative tolerance 1e-8 otherwise.
  double integrated_tail(double x) const;

  double quantile(double p) const;
  // x such that tail(x) = t; the workhorse for sampling (numerically stable
  // deep in the tail where 1-p loses precision).
  double quantile_from_tail(double t) const;

  double sample(Philox& rng) const;
  double conditional_tail_sample(double u, Philox& rng) const;

  ScaleFunction scale_function() const;
  LimitLawG limit_law() const;

  InsensitivityReport check_insensitivity(
      const std::function<double(double)>& h, const std::vector<double>& grid,
      double tol) const;

  nlohmann::json to_json() const;
  static TailModel from_json(const nlohmann::json& j);

  bool operator==(const TailModel& o) const {
    return kind_ == o.kind_ && p_[0] == o.p_[0] && p_[1] == o.p_[1];
  }

 private:
  TailModel(DistKind kind, double p0, double p1);
  void validate() const;

  DistKind kind_;
  double p_[2];
  // DiscretePower keeps a short cached cdf so sampling stays O(log n); the
  // far tail (beyond the cache) is resolved with closed-form tail sums.
  std::shared_ptr<const std::vector<double>> dp_cdf_;
  double dp_norm_ = 0.0;       // normalising constant c
  double dp_zeta_cut_ = 0.0;   // zeta(s, cutoff+2)
  double dp_zeta1_cut_ = 0.0;  // zeta(s-1, cutoff+2)
};

SelfNeglectReport check_weak_self_neglect(const ScaleFunction& e,
                                          const std::vector<double>& grid);

// Hurwitz zeta sum_{k>=m} k^-s for s > 1, by Euler-Maclaurin.
double hurwitz_zeta(double s, double m);

// Adaptive Gauss-Kronrod on (a, inf); throws with the achieved error bound
// if the requested relative tolerance is not met.
double integrate_upper_tail(const std::function<double(double)>& f, double a,
                            double rel_tol = 1e-8);

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace ruinwalk

#endif  // RUINWALK_DISTS_HPP
