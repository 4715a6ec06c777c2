#ifndef RUINWALK_LIMITS_HPP
#define RUINWALK_LIMITS_HPP

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ruinwalk/dists.hpp"
#include "ruinwalk/models.hpp"

namespace ruinwalk {

// A scalar distribution with a CDF and a sampler: the closed-form limit laws
// the empirical statistics are compared against.
class ScalarLaw {
 public:
  virtual ~ScalarLaw() = default;
  virtual double cdf(double t) const = 0;
  virtual double sample(Philox& rng) const = 0;
  double tail(double t) const { return 1.0 - cdf(t); }
  // generic numeric inverse (bisection); laws with closed forms may override
  virtual double quantile(double p) const;
};

using LawPtr = std::shared_ptr<const ScalarLaw>;

LawPtr law_of_w(LimitLawG g);                 // W ~ G
LawPtr scaled_law(double c, LimitLawG g);     // c * W

// W* of the heavy-cycle-length regime: P(W* <= t) =
// (1/c) int_{(1/t+1)/m}^inf f_Lambda(l) (l m - 1)^alpha dl for
// t <= 1/(lambda0 m - 1), and 1 beyond.
LawPtr wstar_bg(TailModel lambda_law, double claim_mean, double lambda0,
                double alpha);

// mixture limits of tau at linear / superlinear within-cycle growth:
//   mix i:    W mu/a + d (1+W) W*
//   mix ii:   W*
//   power:    d (1+W)^beta W*
LawPtr cor71_mix_i(double d, double mu, double a, LimitLawG g, LawPtr wstar);
LawPtr cor71_mix_ii(LawPtr wstar);
LawPtr cor71_power(double d, double beta, LimitLawG g, LawPtr wstar);

// Joint law of the normalised pair (W, W') with P(W>u, W'>v) = Gbar(u+v);
// both marginals are G.
struct QuadrupleLaw {
  LimitLawG g;
  double joint_tail(double u, double v) const { return g.tail(u + v); }
  const LimitLawG& marginal() const { return g; }
  std::pair<double, double> sample_pair(Philox& rng) const;
};

// Bjork-Grandell heavy-cycle-length constants: c = E[(Lambda m - 1)^alpha;
// Lambda > lambda0] and c1 = c / ((alpha-1)(E R - m E(Lambda R))).
std::pair<double, double> bg_constants(const BjorkGrandellModel& model,
                                       double alpha);
double bg_tail_constant(const TailModel& lambda, double lambda0, double m,
                        double alpha);

struct GrowthBoundReport {
  bool feasible = false;
  double er_truncated = 0.0;          // E R on the truncated support
  std::vector<double> decade_sums;    // per-decade contributions to E R
  bool er_converges = false;          // decade contributions shrinking
  bool bound_holds = false;           // k(y) < k(1) Fbar(1) / Fbar(y)
  bool recursion_ok = false;          // t_{x+1} recovered from k-differences
  double witness_x = 0.0;             // first violation, if any
  double k1 = 0.0;                    // k(1) = E[R | xi > 1]
};

// Feasibility of within-cycle passage growth phi for a discrete power-law
// increment distribution.
GrowthBoundReport growth_bound_check(const TailModel& f,
                                     const std::function<double(double)>& phi);

class EmpiricalDistribution {
 public:
  static EmpiricalDistribution from_values(std::vector<double> values);
  static EmpiricalDistribution from_weighted(std::vector<double> values,
                                             std::vector<double> weights);

  double cdf(double t) const;
  double quantile(double p) const;
  size_t size() const { return values_.size(); }
  double ess() const;
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> values_;   // ascending
  std::vector<double> weights_;  // normalised, aligned with values_
  std::vector<double> cum_;      // cumulative weights
};

double ks_distance(const EmpiricalDistribution& emp,
                   const std::function<double(double)>& cdf);
double ks_distance(const EmpiricalDistribution& emp, const ScalarLaw& law);
double ks_two_sample(const EmpiricalDistribution& a,
                     const EmpiricalDistribution& b);

struct TrendVerdict {
  bool pass = false;
  double final_stat = 0.0;
  double slope = 0.0;  // LS slope of the statistic against log x
};

// pass iff the last statistic is below the threshold and the least-squares
// trend against log x is decreasing
TrendVerdict trend_check(const std::vector<std::pair<double, double>>& series,
                         double threshold);

}  // namespace ruinwalk

#endif  // RUINWALK_LIMITS_HPP
