#include "ruinwalk/limits.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace ruinwalk {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("ruinwalk: " + msg);
}

class WLaw : public ScalarLaw {
 public:
  explicit WLaw(LimitLawG g) : g_(std::move(g)) {}
  double cdf(double t) const override { return g_.cdf(t); }
  double sample(Philox& rng) const override { return g_.sample(rng); }

 private:
  LimitLawG g_;
};

class ScaledLaw : public ScalarLaw {
 public:
  ScaledLaw(double c, LimitLawG g) : c_(c), g_(std::move(g)) {
    if (!(c_ > 0.0)) fail("scaled_law: scale must be positive");
  }
  double cdf(double t) const override { return g_.cdf(t / c_); }
  double sample(Philox& rng) const override { return c_ * g_.sample(rng); }

 private:
  double c_;
  LimitLawG g_;
};

class WStarBGLaw : public ScalarLaw {
 public:
  WStarBGLaw(TailModel lambda_law, double m, double lambda0, double alpha)
      : lambda_(std::move(lambda_law)), m_(m), lambda0_(lambda0), alpha_(alpha) {
    if (!(lambda0_ * m_ > 1.0)) fail("wstar_bg: need lambda0 * m > 1");
    t_max_ = 1.0 / (lambda0_ * m_ - 1.0);
    if (lambda_.kind() == DistKind::Deterministic) {
      double lc = lambda_.param(0);
      if (!(lc > lambda0_)) fail("wstar_bg: degenerate lambda below lambda0");
      atom_ = 1.0 / (lc * m_ - 1.0);
      c_ = std::pow(lc * m_ - 1.0, alpha_);
      return;
    }
    c_ = integrate_upper_tail(
        [this](double l) {
          return lambda_.density(l) * std::pow(l * m_ - 1.0, alpha_);
        },
        lambda0_);
    if (!(c_ > 0.0)) fail("wstar_bg: no mass above lambda0");
  }

  double constant() const { return c_; }

  // quadrature only at grid construction; queries interpolate the cache
  double cdf(double t) const override {
    if (t <= 0.0) return 0.0;
    if (atom_ > 0.0) return t >= atom_ ? 1.0 : 0.0;
    if (t >= t_max_) return 1.0;
    build_grid();
    double pos = t / t_max_ * (grid_t_.size() - 1);
    size_t i = std::min<size_t>(grid_t_.size() - 2, static_cast<size_t>(pos));
    double w = pos - static_cast<double>(i);
    return grid_cdf_[i] * (1.0 - w) + grid_cdf_[i + 1] * w;
  }

  double sample(Philox& rng) const override {
    if (atom_ > 0.0) {
      rng.next_double();
      return atom_;
    }
    build_grid();
    double u = rng.next_double();
    // inverse interpolation on the cached cdf grid
    auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
    size_t j = std::min<size_t>(grid_cdf_.size() - 1,
                                static_cast<size_t>(it - grid_cdf_.begin()));
    if (j == 0) return grid_t_[0];
    double w = (u - grid_cdf_[j - 1]) /
               std::max(grid_cdf_[j] - grid_cdf_[j - 1], 1e-300);
    return grid_t_[j - 1] + w * (grid_t_[j] - grid_t_[j - 1]);
  }

 private:
  double exact_cdf(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= t_max_) return 1.0;
    double lower = (1.0 / t + 1.0) / m_;
    if (lambda_.tail(lower) < 1e-280) return 0.0;  // past the support probe
    double v = integrate_upper_tail(
        [this](double l) {
          return lambda_.density(l) * std::pow(l * m_ - 1.0, alpha_);
        },
        lower);
    return std::min(1.0, v / c_);
  }

  void build_grid() const {
    std::call_once(grid_once_, [this] {
      const int n = 513;
      grid_t_.resize(n);
      grid_cdf_.resize(n);
      for (int i = 0; i < n; ++i) {
        grid_t_[i] = t_max_ * i / (n - 1);
        grid_cdf_[i] = exact_cdf(grid_t_[i]);
      }
      grid_cdf_.front() = 0.0;
      grid_cdf_.back() = 1.0;
      for (size_t i = 1; i < grid_cdf_.size(); ++i)
        grid_cdf_[i] = std::max(grid_cdf_[i], grid_cdf_[i - 1]);
    });
  }

  TailModel lambda_;
  double m_, lambda0_, alpha_;
  double t_max_ = 0.0;
  double c_ = 0.0;
  double atom_ = 0.0;  // degenerate-lambda point mass location
  mutable std::once_flag grid_once_;
  mutable std::vector<double> grid_t_, grid_cdf_;
};

// numeric CDF of h(W, W*) for independent W ~ G (with density) and W*
class MixLaw : public ScalarLaw {
 public:
  // value = coef(w) * wstar + offset(w)
  MixLaw(LimitLawG g, LawPtr wstar, std::function<double(double)> coef,
         std::function<double(double)> offset)
      : g_(std::move(g)), wstar_(std::move(wstar)), coef_(std::move(coef)),
        offset_(std::move(offset)) {}

  double cdf(double t) const override {
    return integrate_upper_tail(
        [this, t](double w) {
          double c = coef_(w);
          double arg = (t - offset_(w)) / c;
          return g_.density(w) * wstar_->cdf(arg);
        },
        0.0, 1e-7);
  }

  double sample(Philox& rng) const override {
    double w = g_.sample(rng);
    double ws = wstar_->sample(rng);
    return coef_(w) * ws + offset_(w);
  }

 private:
  LimitLawG g_;
  LawPtr wstar_;
  std::function<double(double)> coef_, offset_;
};

}  // namespace

double ScalarLaw::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) fail("law quantile: p outside (0,1)");
  double lo = 0.0, hi = 1.0;
  while (cdf(hi) < p && hi < 1e15) hi *= 2.0;
  while (cdf(lo) > p && lo > -1e15) lo = lo == 0.0 ? -1.0 : lo * 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi));
       ++it) {
    double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LawPtr law_of_w(LimitLawG g) { return std::make_shared<WLaw>(std::move(g)); }

LawPtr scaled_law(double c, LimitLawG g) {
  return std::make_shared<ScaledLaw>(c, std::move(g));
}

LawPtr wstar_bg(TailModel lambda_law, double claim_mean, double lambda0,
                double alpha) {
  return std::make_shared<WStarBGLaw>(std::move(lambda_law), claim_mean,
                                      lambda0, alpha);
}

LawPtr cor71_mix_i(double d, double mu, double a, LimitLawG g, LawPtr wstar) {
  if (d == 0.0) return scaled_law(mu / a, std::move(g));
  double scale = mu / a;
  return std::make_shared<MixLaw>(
      std::move(g), std::move(wstar),
      [d](double w) { return d * (1.0 + w); },
      [scale](double w) { return w * scale; });
}

LawPtr cor71_mix_ii(LawPtr wstar) { return wstar; }

LawPtr cor71_power(double d, double beta, LimitLawG g, LawPtr wstar) {
  if (!(d > 0.0)) fail("cor71_power: d must be positive");
  return std::make_shared<MixLaw>(
      std::move(g), std::move(wstar),
      [d, beta](double w) { return d * std::pow(1.0 + w, beta); },
      [](double) { return 0.0; });
}

std::pair<double, double> QuadrupleLaw::sample_pair(Philox& rng) const {
  if (g.kind == LimitLawG::Kind::StdExp) {
    // Gbar(u+v) = e^{-(u+v)}: independent unit exponentials
    return {-std::log(rng.next_double()), -std::log(rng.next_double())};
  }
  if (g.kind == LimitLawG::Kind::ParetoTail) {
    // (E1/Gamma, E2/Gamma) with Gamma ~ Gamma(exponent):
    // P(W>u, W'>v) = E[e^{-Gamma(u+v)}] = (1+u+v)^{-exponent}
    double e1 = -std::log(rng.next_double());
    double e2 = -std::log(rng.next_double());
    double gdraw = boost::math::gamma_p_inv(g.exponent, rng.next_double());
    return {e1 / gdraw, e2 / gdraw};
  }
  fail("QuadrupleLaw: sampling needs a closed-form G");
}

double bg_tail_constant(const TailModel& lambda, double lambda0, double m,
                        double alpha) {
  if (lambda.kind() == DistKind::Deterministic) {
    double lc = lambda.param(0);
    return lc > lambda0 ? std::pow(lc * m - 1.0, alpha) : 0.0;
  }
  if (!(lambda.tail(lambda0) > 0.0)) return 0.0;
  return integrate_upper_tail(
      [&](double l) { return lambda.density(l) * std::pow(l * m - 1.0, alpha); },
      lambda0);
}

std::pair<double, double> bg_constants(const BjorkGrandellModel& model,
                                       double alpha) {
  double m = model.claim_mean();
  double denom = model.mean_r() - m * model.mean_lambda_r();
  if (!(denom > 0.0))
    fail("bg_constants: E R - m E(Lambda R) must be positive (net profit)");
  double c = bg_tail_constant(model.lambda_law(), model.lambda0(), m, alpha);
  double c1 = c / ((alpha - 1.0) * denom);
  return {c, c1};
}

GrowthBoundReport growth_bound_check(const TailModel& f,
                                     const std::function<double(double)>& phi) {
  if (f.kind() != DistKind::DiscretePower)
    fail("growth_bound_check: F must be discrete_power");
  const long long cut = static_cast<long long>(f.param(1));
  for (double x : {1.0, 2.0, 10.0})
    if (!(phi(x) > 0.0) || phi(2 * x) < phi(x))
      fail("growth_bound_check: phi must be positive nondecreasing");

  GrowthBoundReport rep;
  // one downward pass accumulates S(x) = sum_{j>x} phi(j) f_j at the marks
  std::vector<long long> marks;  // geometric grid for k(x) and the bound
  for (long long x = 1; x < cut; x *= 2) marks.push_back(x);
  std::vector<double> suffix(marks.size(), 0.0);
  std::vector<double> small_suffix(66, 0.0);  // S(x) for x = 0..65

  int n_decades = static_cast<int>(std::floor(std::log10(double(cut)))) + 1;
  rep.decade_sums.assign(n_decades, 0.0);

  double acc = 0.0;
  size_t mark_i = marks.size();
  for (long long j = cut; j >= 1; --j) {
    double term = phi(static_cast<double>(j)) * f.density(static_cast<double>(j));
    acc += term;
    // after adding term j, acc = sum_{i >= j} = S(j-1)
    if (mark_i > 0 && marks[mark_i - 1] == j - 1) {
      suffix[mark_i - 1] = acc;
      --mark_i;
    }
    if (j - 1 < static_cast<long long>(small_suffix.size()))
      small_suffix[j - 1] = acc;
    rep.decade_sums[static_cast<int>(std::floor(std::log10(double(j))))] += term;
  }
  rep.er_truncated = acc + 1.0 * f.density(0.0);  // t_0 = 1 cycle for X = 0

  // convergence evidence: the last decades contribute geometrically less
  rep.er_converges = true;
  int used = 0;
  for (int d = n_decades - 1; d >= 1 && used < 3; --d, ++used) {
    if (rep.decade_sums[d] > 0.6 * rep.decade_sums[d - 1] &&
        rep.decade_sums[d] > 1e-12 * rep.er_truncated) {
      rep.er_converges = false;
      rep.witness_x = std::pow(10.0, d);
    }
  }

  // bound (k(y) < k(1) Fbar(1) / Fbar(y)) on the geometric grid, y >= 2
  rep.k1 = small_suffix[1] / f.tail(1.0);
  rep.bound_holds = true;
  double k1f1 = small_suffix[1];  // k(1) Fbar(1) = S(1)
  for (size_t i = 0; i < marks.size(); ++i) {
    double y = static_cast<double>(marks[i]);
    if (y < 2.0) continue;
    double fy = f.tail(y);
    if (!(fy > 0.0)) continue;
    double ky = suffix[i] / fy;
    if (!(ky < k1f1 / fy * (1.0 + 1e-9))) {
      rep.bound_holds = false;
      if (rep.witness_x == 0.0) rep.witness_x = y;
      break;
    }
  }

  // recursion consistency: t_{x+1} = (S(x) - S(x+1))/f_{x+1} for small x
  rep.recursion_ok = true;
  for (long long x = 1; x + 1 < static_cast<long long>(small_suffix.size());
       ++x) {
    double fx1 = f.density(static_cast<double>(x + 1));
    double t_rec = (small_suffix[x] - small_suffix[x + 1]) / fx1;
    double want = phi(static_cast<double>(x + 1));
    if (!(t_rec > 0.0) || std::abs(t_rec - want) > 1e-6 * std::max(1.0, want)) {
      rep.recursion_ok = false;
      break;
    }
  }

  rep.feasible = rep.er_converges && rep.bound_holds && rep.recursion_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// EmpiricalDistribution / KS

EmpiricalDistribution EmpiricalDistribution::from_values(
    std::vector<double> values) {
  std::vector<double> w(values.size(), 1.0);
  return from_weighted(std::move(values), std::move(w));
}

EmpiricalDistribution EmpiricalDistribution::from_weighted(
    std::vector<double> values, std::vector<double> weights) {
  if (values.empty() || values.size() != weights.size())
    fail("empirical distribution: empty or mismatched values/weights");
  std::vector<size_t> idx(values.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  EmpiricalDistribution e;
  e.values_.reserve(values.size());
  e.weights_.reserve(values.size());
  double total = 0.0;
  for (size_t i : idx) {
    if (!std::isfinite(values[i]) || !(weights[i] >= 0.0))
      fail("empirical distribution: non-finite value or negative weight");
    total += weights[i];
  }
  if (!(total > 0.0)) fail("empirical distribution: zero total weight");
  double acc = 0.0;
  for (size_t i : idx) {
    e.values_.push_back(values[i]);
    e.weights_.push_back(weights[i] / total);
    acc += weights[i] / total;
    e.cum_.push_back(acc);
  }
  e.cum_.back() = 1.0;
  return e;
}

double EmpiricalDistribution::cdf(double t) const {
  auto it = std::upper_bound(values_.begin(), values_.end(), t);
  if (it == values_.begin()) return 0.0;
  return cum_[static_cast<size_t>(it - values_.begin()) - 1];
}

double EmpiricalDistribution::quantile(double p) const {
  auto it = std::lower_bound(cum_.begin(), cum_.end(), p);
  size_t j = std::min<size_t>(values_.size() - 1,
                              static_cast<size_t>(it - cum_.begin()));
  return values_[j];
}

double EmpiricalDistribution::ess() const {
  double s2 = 0.0;
  for (double w : weights_) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

double ks_distance(const EmpiricalDistribution& emp,
                   const std::function<double(double)>& cdf) {
  double d = 0.0, prev = 0.0;
  const auto& v = emp.values();
  for (size_t i = 0; i < v.size(); ++i) {
    double F = cdf(v[i]);
    double Fn = emp.cdf(v[i]);
    d = std::max({d, std::abs(Fn - F), std::abs(prev - F)});
    prev = Fn;
  }
  return d;
}

double ks_distance(const EmpiricalDistribution& emp, const ScalarLaw& law) {
  return ks_distance(emp, [&law](double t) { return law.cdf(t); });
}

double ks_two_sample(const EmpiricalDistribution& a,
                     const EmpiricalDistribution& b) {
  double d = 0.0;
  size_t i = 0, j = 0;
  double Fa = 0.0, Fb = 0.0;
  const auto& va = a.values();
  const auto& vb = b.values();
  while (i < va.size() || j < vb.size()) {
    double t;
    if (j >= vb.size() || (i < va.size() && va[i] <= vb[j])) t = va[i];
    else t = vb[j];
    while (i < va.size() && va[i] <= t) Fa = a.cdf(va[i++]);
    while (j < vb.size() && vb[j] <= t) Fb = b.cdf(vb[j++]);
    d = std::max(d, std::abs(Fa - Fb));
  }
  return d;
}

TrendVerdict trend_check(const std::vector<std::pair<double, double>>& series,
                         double threshold) {
  if (series.size() < 3) fail("trend_check: need at least 3 grid points");
  for (size_t i = 1; i < series.size(); ++i)
    if (!(series[i].first > series[i - 1].first))
      fail("trend_check: x grid must be increasing");
  TrendVerdict v;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = static_cast<double>(series.size());
  for (const auto& [x, ks] : series) {
    double lx = std::log(x);
    sx += lx; sy += ks; sxx += lx * lx; sxy += lx * ks;
  }
  v.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  v.final_stat = series.back().second;
  v.pass = v.final_stat <= threshold && v.slope < 0.0;
  return v;
}

}  // namespace ruinwalk
