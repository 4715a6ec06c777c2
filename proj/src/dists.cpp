#include "ruinwalk/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

namespace ruinwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void bad_arg(const std::string& msg) {
  throw std::invalid_argument("ruinwalk: " + msg);
}

long long dp_cutoff_ll(double cutoff) { return static_cast<long long>(cutoff); }

}  // namespace

const char* dist_kind_name(DistKind k) {
  switch (k) {
    case DistKind::Pareto: return "pareto";
    case DistKind::Lognormal: return "lognormal";
    case DistKind::WeibullHeavy: return "weibull_heavy";
    case DistKind::DiscretePower: return "discrete_power";
    case DistKind::Exponential: return "exponential";
    case DistKind::Deterministic: return "deterministic";
    case DistKind::GammaLight: return "gamma_light";
  }
  return "?";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(Z > z) without the cancellation of 1 - normal_cdf(z) deep in the tail.
static double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) bad_arg("normal_quantile: p outside (0,1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double hurwitz_zeta(double s, double m) {
  if (!(s > 1.0) || !(m >= 1.0)) bad_arg("hurwitz_zeta needs s>1, m>=1");
  // Sum the first few terms directly, close the remainder by
  // Euler-Maclaurin at M; the B_8 term is far below double precision here.
  double M = m + 12.0;
  double sum = 0.0;
  for (double k = m; k < M; k += 1.0) sum += std::pow(k, -s);
  double Ms = std::pow(M, -s);
  sum += M * Ms / (s - 1.0);       // M^{1-s}/(s-1)
  sum += 0.5 * Ms;
  double t = s * Ms / M;           // s M^{-s-1}
  sum += t / 12.0;
  t *= (s + 1.0) * (s + 2.0) / (M * M);
  sum -= t / 720.0;
  t *= (s + 3.0) * (s + 4.0) / (M * M);
  sum += t / 30240.0;
  return sum;
}

double integrate_upper_tail(const std::function<double(double)>& f, double a,
                            double rel_tol) {
  boost::math::quadrature::exp_sinh<double> integ;
  double err = 0.0, l1 = 0.0;
  double v = integ.integrate(f, a, kInf, rel_tol * 1e-2, &err, &l1);
  double scale = std::max(std::abs(v), 1e-300);
  if (err > 100.0 * rel_tol * scale) {
    std::ostringstream os;
    os << "ruinwalk: tail quadrature did not converge at rel_tol=" << rel_tol
       << " (achieved error bound " << err << ", value " << v << ")";
    throw std::runtime_error(os.str());
  }
  return v;
}

// ---------------------------------------------------------------------------
// ScaleFunction

struct ScaleFunction::Memo {
  std::once_flag built;
  std::vector<double> logx;
  std::vector<double> loge;
  double lo = 0.0, hi = 0.0;
};

ScaleFunction::ScaleFunction(std::function<double(double)> eval,
                             bool closed_form, int knots)
    : eval_(std::move(eval)), closed_form_(closed_form), knots_(knots),
      memo_(closed_form ? nullptr : std::make_shared<Memo>()) {}

double ScaleFunction::exact(double x) const { return eval_(x); }

double ScaleFunction::operator()(double x) const {
  if (closed_form_) return eval_(x);
  Memo& m = *memo_;
  std::call_once(m.built, [&] {
    // Upper end of the grid: keep clear of tail underflow.
    double hi = 1.0;
    while (hi < 1e12) {
      double probe;
      try {
        probe = eval_(hi * 2.0);
      } catch (const std::runtime_error&) {
        break;
      }
      if (!(probe > 0.0) || !std::isfinite(probe)) break;
      hi *= 2.0;
    }
    m.lo = 1e-2;
    m.hi = hi;
    m.logx.resize(knots_);
    m.loge.resize(knots_);
    double llo = std::log(m.lo), lhi = std::log(m.hi);
    for (int i = 0; i < knots_; ++i) {
      double lx = llo + (lhi - llo) * i / (knots_ - 1);
      m.logx[i] = lx;
      m.loge[i] = std::log(eval_(std::exp(lx)));
    }
  });
  if (!(x >= m.lo) || x >= m.hi) return eval_(x);
  double lx = std::log(x);
  auto it = std::upper_bound(m.logx.begin(), m.logx.end(), lx);
  size_t j = std::min<size_t>(m.logx.size() - 1,
                              static_cast<size_t>(it - m.logx.begin()));
  size_t i = j - 1;
  double w = (lx - m.logx[i]) / (m.logx[j] - m.logx[i]);
  return std::exp(m.loge[i] * (1.0 - w) + m.loge[j] * w);
}

// ---------------------------------------------------------------------------
// LimitLawG

LimitLawG LimitLawG::pareto_tail(double exponent) {
  if (!(exponent > 0.0)) bad_arg("LimitLawG exponent must be positive");
  LimitLawG g;
  g.kind = Kind::ParetoTail;
  g.exponent = exponent;
  return g;
}

LimitLawG LimitLawG::std_exp() {
  LimitLawG g;
  g.kind = Kind::StdExp;
  return g;
}

LimitLawG LimitLawG::numeric(std::vector<std::pair<double, double>> grid) {
  if (grid.empty() || grid.front().first != 0.0 || grid.front().second != 1.0)
    bad_arg("numeric limit law grid must start at (0,1)");
  LimitLawG g;
  g.kind = Kind::Numeric;
  g.grid = std::move(grid);
  return g;
}

double LimitLawG::tail(double t) const {
  if (t <= 0.0) return 1.0;
  switch (kind) {
    case Kind::ParetoTail: return std::pow(1.0 + t, -exponent);
    case Kind::StdExp: return std::exp(-t);
    case Kind::Numeric: {
      if (t >= grid.back().first) return grid.back().second;
      auto it = std::upper_bound(
          grid.begin(), grid.end(), t,
          [](double v, const std::pair<double, double>& p) { return v < p.first; });
      auto j = it, i = it - 1;
      double w = (t - i->first) / (j->first - i->first);
      return i->second * (1.0 - w) + j->second * w;
    }
  }
  return 0.0;
}

double LimitLawG::density(double t) const {
  if (t < 0.0) return 0.0;
  switch (kind) {
    case Kind::ParetoTail: return exponent * std::pow(1.0 + t, -exponent - 1.0);
    case Kind::StdExp: return std::exp(-t);
    case Kind::Numeric: bad_arg("no density for numeric limit law");
  }
  return 0.0;
}

double LimitLawG::quantile(double p) const {
  if (!(p >= 0.0 && p < 1.0)) bad_arg("limit law quantile: p outside [0,1)");
  double t = 1.0 - p;
  switch (kind) {
    case Kind::ParetoTail: return std::pow(t, -1.0 / exponent) - 1.0;
    case Kind::StdExp: return -std::log(t);
    case Kind::Numeric: {
      if (t <= grid.back().second) return grid.back().first;
      for (size_t i = 1; i < grid.size(); ++i) {
        if (grid[i].second <= t) {
          double w = (grid[i - 1].second - t) /
                     (grid[i - 1].second - grid[i].second);
          return grid[i - 1].first + w * (grid[i].first - grid[i - 1].first);
        }
      }
      return grid.back().first;
    }
  }
  return 0.0;
}

double LimitLawG::sample(Philox& rng) const {
  return quantile(1.0 - rng.next_double());
}

// ---------------------------------------------------------------------------
// TailModel

TailModel::TailModel(DistKind kind, double p0, double p1) : kind_(kind) {
  p_[0] = p0;
  p_[1] = p1;
  validate();
  if (kind_ == DistKind::DiscretePower) {
    double s = p_[0] + 1.0;
    long long cut = dp_cutoff_ll(p_[1]);
    dp_zeta_cut_ = hurwitz_zeta(s, static_cast<double>(cut) + 2.0);
    dp_zeta1_cut_ = hurwitz_zeta(s - 1.0, static_cast<double>(cut) + 2.0);
    dp_norm_ = 1.0 / (hurwitz_zeta(s, 1.0) - dp_zeta_cut_);
    long long ncache = std::min<long long>(cut + 1, 4096);
    auto cdf = std::make_shared<std::vector<double>>();
    cdf->reserve(ncache);
    double acc = 0.0;
    for (long long k = 0; k < ncache; ++k) {
      acc += dp_norm_ * std::pow(static_cast<double>(k + 1), -s);
      cdf->push_back(acc);
    }
    dp_cdf_ = std::move(cdf);
  }
}

void TailModel::validate() const {
  switch (kind_) {
    case DistKind::Pareto:
      if (!(p_[0] > 1.0)) bad_arg("pareto needs alpha > 1 (finite mean)");
      if (!(p_[1] > 0.0)) bad_arg("pareto needs sigma > 0");
      break;
    case DistKind::Lognormal:
      if (!std::isfinite(p_[0])) bad_arg("lognormal mu must be finite");
      if (!(p_[1] > 0.0)) bad_arg("lognormal needs sigma > 0");
      break;
    case DistKind::WeibullHeavy:
      if (!(p_[0] > 0.0 && p_[0] < 1.0))
        bad_arg("weibull_heavy needs beta in (0,1)");
      if (!(p_[1] > 0.0)) bad_arg("weibull_heavy needs scale > 0");
      break;
    case DistKind::DiscretePower:
      if (!(p_[0] > 1.0)) bad_arg("discrete_power needs alpha > 1");
      if (!(p_[1] >= 10.0 && p_[1] <= 1e12))
        bad_arg("discrete_power cutoff out of range [10, 1e12]");
      break;
    case DistKind::Exponential:
      if (!(p_[0] > 0.0)) bad_arg("exponential needs rate > 0");
      break;
    case DistKind::Deterministic:
      if (!std::isfinite(p_[0])) bad_arg("deterministic value must be finite");
      break;
    case DistKind::GammaLight:
      if (!(p_[0] > 0.0 && p_[1] > 0.0))
        bad_arg("gamma_light needs shape > 0, rate > 0");
      break;
  }
}

TailModel TailModel::pareto(double a, double s) {
  return TailModel(DistKind::Pareto, a, s);
}
TailModel TailModel::lognormal(double mu, double s) {
  return TailModel(DistKind::Lognormal, mu, s);
}
TailModel TailModel::weibull_heavy(double b, double s) {
  return TailModel(DistKind::WeibullHeavy, b, s);
}
TailModel TailModel::discrete_power(double a, double cut) {
  return TailModel(DistKind::DiscretePower, a, std::floor(cut));
}
TailModel TailModel::exponential(double r) {
  return TailModel(DistKind::Exponential, r, 0.0);
}
TailModel TailModel::deterministic(double v) {
  return TailModel(DistKind::Deterministic, v, 0.0);
}
TailModel TailModel::gamma_light(double k, double r) {
  return TailModel(DistKind::GammaLight, k, r);
}

bool TailModel::heavy() const {
  switch (kind_) {
    case DistKind::Pareto:
    case DistKind::Lognormal:
    case DistKind::WeibullHeavy:
    case DistKind::DiscretePower:
      return true;
    default:
      return false;
  }
}

double TailModel::tail(double x) const {
  switch (kind_) {
    case DistKind::Pareto:
      return x <= 0.0 ? 1.0 : std::pow(1.0 + x / p_[1], -p_[0]);
    case DistKind::Lognormal:
      return x <= 0.0 ? 1.0 : normal_tail((std::log(x) - p_[0]) / p_[1]);
    case DistKind::WeibullHeavy:
      return x <= 0.0 ? 1.0 : std::exp(-std::pow(x / p_[1], p_[0]));
    case DistKind::DiscretePower: {
      if (x < 0.0) return 1.0;
      long long cut = dp_cutoff_ll(p_[1]);
      if (x >= static_cast<double>(cut)) return 0.0;
      double m = std::floor(x) + 1.0;  // smallest support point > x
      double s = p_[0] + 1.0;
      return dp_norm_ * (hurwitz_zeta(s, m + 1.0) - dp_zeta_cut_);
    }
    case DistKind::Exponential:
      return x <= 0.0 ? 1.0 : std::exp(-p_[0] * x);
    case DistKind::Deterministic:
      return x < p_[0] ? 1.0 : 0.0;
    case DistKind::GammaLight:
      return x <= 0.0 ? 1.0 : boost::math::gamma_q(p_[0], p_[1] * x);
  }
  return 0.0;
}

double TailModel::density(double x) const {
  switch (kind_) {
    case DistKind::Pareto:
      return x < 0.0 ? 0.0 : (p_[0] / p_[1]) * std::pow(1.0 + x / p_[1], -p_[0] - 1.0);
    case DistKind::Lognormal: {
      if (x <= 0.0) return 0.0;
      double z = (std::log(x) - p_[0]) / p_[1];
      return std::exp(-0.5 * z * z) / (x * p_[1] * std::sqrt(2.0 * M_PI));
    }
    case DistKind::WeibullHeavy: {
      if (x <= 0.0) return 0.0;
      double u = std::pow(x / p_[1], p_[0]);
      return p_[0] / x * u * std::exp(-u);
    }
    case DistKind::DiscretePower: {
      // point mass at integer x
      double k = std::round(x);
      if (k < 0 || k > p_[1] || std::abs(k - x) > 1e-9) return 0.0;
      return dp_norm_ * std::pow(k + 1.0, -(p_[0] + 1.0));
    }
    case DistKind::Exponential:
      return x < 0.0 ? 0.0 : p_[0] * std::exp(-p_[0] * x);
    case DistKind::GammaLight:
      return x <= 0.0 ? 0.0
                      : boost::math::gamma_p_derivative(p_[0], p_[1] * x) * p_[1];
    case DistKind::Deterministic:
      bad_arg("deterministic distribution has no density");
  }
  return 0.0;
}

double TailModel::mean() const {
  switch (kind_) {
    case DistKind::Pareto: return p_[1] / (p_[0] - 1.0);
    case DistKind::Lognormal: return std::exp(p_[0] + 0.5 * p_[1] * p_[1]);
    case DistKind::WeibullHeavy:
      return p_[1] * boost::math::tgamma(1.0 + 1.0 / p_[0]);
    case DistKind::DiscretePower: {
      double s = p_[0] + 1.0;
      double z1 = hurwitz_zeta(s - 1.0, 1.0) - dp_zeta1_cut_;
      double z0 = hurwitz_zeta(s, 1.0) - dp_zeta_cut_;
      return dp_norm_ * (z1 - z0);
    }
    case DistKind::Exponential: return 1.0 / p_[0];
    case DistKind::Deterministic: return p_[0];
    case DistKind::GammaLight: return p_[0] / p_[1];
  }
  return 0.0;
}

double TailModel::integrated_tail(double x) const {
  if (!std::isfinite(x)) bad_arg("integrated_tail: x must be finite");
  if (x < 0.0) return std::min(1.0, integrated_tail(0.0) - x);
  double v = 0.0;
  switch (kind_) {
    case DistKind::Pareto:
      v = p_[1] / (p_[0] - 1.0) * std::pow(1.0 + x / p_[1], 1.0 - p_[0]);
      break;
    case DistKind::Exponential:
      v = std::exp(-p_[0] * x) / p_[0];
      break;
    case DistKind::Deterministic:
      v = std::max(0.0, p_[0] - x);
      break;
    case DistKind::DiscretePower: {
      // E(X - x)^+ via closed-form tail sums on the truncated support
      long long cut = dp_cutoff_ll(p_[1]);
      if (x >= static_cast<double>(cut)) return 0.0;
      double m = std::floor(x) + 1.0;
      double s = p_[0] + 1.0;
      double sum_j = dp_norm_ * ((hurwitz_zeta(s - 1.0, m + 1.0) - dp_zeta1_cut_) -
                                 (hurwitz_zeta(s, m + 1.0) - dp_zeta_cut_));
      v = sum_j - x * tail(x);
      break;
    }
    default:
      v = integrate_upper_tail([this](double y) { return tail(y); }, x);
      break;
  }
  return std::min(1.0, v);
}

double TailModel::quantile_from_tail(double t) const {
  if (!(t > 0.0 && t <= 1.0)) bad_arg("quantile_from_tail: t outside (0,1]");
  switch (kind_) {
    case DistKind::Pareto:
      return p_[1] * (std::pow(t, -1.0 / p_[0]) - 1.0);
    case DistKind::Lognormal:
      return std::exp(p_[0] + p_[1] * std::sqrt(2.0) * boost::math::erfc_inv(2.0 * t));
    case DistKind::WeibullHeavy:
      return p_[1] * std::pow(-std::log(t), 1.0 / p_[0]);
    case DistKind::DiscretePower: {
      long long cut = dp_cutoff_ll(p_[1]);
      const std::vector<double>& cdf = *dp_cdf_;
      double p = 1.0 - t;
      if (p <= cdf.back()) {
        auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
        return static_cast<double>(it - cdf.begin());
      }
      // Deep tail: binary search on the closed-form tail.
      long long lo = static_cast<long long>(cdf.size()) - 1, hi = cut;
      while (lo < hi) {  // find smallest k with tail(k) <= t
        long long mid = lo + (hi - lo) / 2;
        if (tail(static_cast<double>(mid)) <= t)
          hi = mid;
        else
          lo = mid + 1;
      }
      return static_cast<double>(lo);
    }
    case DistKind::Exponential:
      return -std::log(t) / p_[0];
    case DistKind::Deterministic:
      return p_[0];
    case DistKind::GammaLight:
      return boost::math::gamma_q_inv(p_[0], t) / p_[1];
  }
  return 0.0;
}

double TailModel::quantile(double p) const {
  if (!(p >= 0.0 && p < 1.0)) bad_arg("quantile: p outside [0,1)");
  return quantile_from_tail(1.0 - p);
}

double TailModel::sample(Philox& rng) const {
  return quantile_from_tail(rng.next_double());
}

double TailModel::conditional_tail_sample(double u, Philox& rng) const {
  double t0 = tail(u);
  if (!(t0 > 0.0)) {
    std::ostringstream os;
    os << "ruinwalk: conditional_tail_sample: empty conditioning event, tail("
       << u << ") = 0 for " << dist_kind_name(kind_);
    throw std::runtime_error(os.str());
  }
  return quantile_from_tail(t0 * rng.next_double());
}

ScaleFunction TailModel::scale_function() const {
  if (!heavy())
    bad_arg(std::string("scale_function: light-tailed kind ") +
            dist_kind_name(kind_) + " rejected");
  if (kind_ == DistKind::Pareto)
    return ScaleFunction([](double x) { return x; }, /*closed_form=*/true, 0);
  TailModel self = *this;
  return ScaleFunction(
      [self](double x) {
        double fb = self.tail(x);
        if (!(fb > 0.0))
          throw std::runtime_error(
              "ruinwalk: scale function evaluated past tail underflow");
        return self.integrated_tail(x) / fb;
      },
      /*closed_form=*/false, 512);
}

LimitLawG TailModel::limit_law() const {
  switch (kind_) {
    case DistKind::Pareto:
    case DistKind::DiscretePower:
      // Exponent alpha-1: apply the integrated-tail ratio with e(x)=x,
      // Fbar_I(x) ~ const * x^{1-alpha}, so the ratio tends to (1+t)^{1-alpha}.
      return LimitLawG::pareto_tail(p_[0] - 1.0);
    case DistKind::Lognormal:
    case DistKind::WeibullHeavy:
      return LimitLawG::std_exp();
    default:
      bad_arg(std::string("limit_law: light-tailed kind ") +
              dist_kind_name(kind_) + " rejected");
  }
}

InsensitivityReport TailModel::check_insensitivity(
    const std::function<double(double)>& h, const std::vector<double>& grid,
    double tol) const {
  InsensitivityReport rep;
  for (double x : grid) {
    double hv = h(x);
    if (hv < 0.0) bad_arg("check_insensitivity: h must be nonnegative");
    double base = tail(x);
    if (!(base > 0.0)) continue;
    double dev = std::abs(tail(x + hv) / base - 1.0);
    rep.final_deviation = dev;
    if (dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.worst_x = x;
    }
  }
  rep.pass = rep.max_deviation <= tol;
  return rep;
}

SelfNeglectReport check_weak_self_neglect(const ScaleFunction& e,
                                          const std::vector<double>& grid) {
  if (grid.size() < 2) bad_arg("check_weak_self_neglect: need >= 2 grid points");
  SelfNeglectReport rep;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = 0, mean_r = 0;
  for (double x : grid) {
    double ex = e(x);
    double r = e(x + ex) / ex;
    rep.sup_ratio = std::max(rep.sup_ratio, r);
    double lx = std::log(x);
    sx += lx; sy += r; sxx += lx * lx; sxy += lx * r;
    n += 1; mean_r += r;
  }
  mean_r /= n;
  rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double span = std::log(grid.back()) - std::log(grid.front());
  // bounded: the ratio grows by less than ~1% of its mean per e-fold of x
  rep.bounded = rep.slope <= 0.01 * mean_r / std::max(span, 1.0) + 1e-12;
  return rep;
}

nlohmann::json TailModel::to_json() const {
  nlohmann::json params;
  switch (kind_) {
    case DistKind::Pareto: params = {{"alpha", p_[0]}, {"sigma", p_[1]}}; break;
    case DistKind::Lognormal: params = {{"mu", p_[0]}, {"sigma", p_[1]}}; break;
    case DistKind::WeibullHeavy: params = {{"beta", p_[0]}, {"scale", p_[1]}}; break;
    case DistKind::DiscretePower: params = {{"alpha", p_[0]}, {"cutoff", p_[1]}}; break;
    case DistKind::Exponential: params = {{"rate", p_[0]}}; break;
    case DistKind::Deterministic: params = {{"value", p_[0]}}; break;
    case DistKind::GammaLight: params = {{"shape", p_[0]}, {"rate", p_[1]}}; break;
  }
  return {{"kind", dist_kind_name(kind_)}, {"params", params}};
}

TailModel TailModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const nlohmann::json& p = j.at("params");
  if (kind == "pareto")
    return pareto(p.at("alpha").get<double>(), p.at("sigma").get<double>());
  if (kind == "lognormal")
    return lognormal(p.at("mu").get<double>(), p.at("sigma").get<double>());
  if (kind == "weibull_heavy")
    return weibull_heavy(p.at("beta").get<double>(), p.at("scale").get<double>());
  if (kind == "discrete_power")
    return discrete_power(p.at("alpha").get<double>(),
                          p.value("cutoff", 1e7));
  if (kind == "exponential") return exponential(p.at("rate").get<double>());
  if (kind == "deterministic")
    return deterministic(p.at("value").get<double>());
  if (kind == "gamma_light")
    return gamma_light(p.at("shape").get<double>(), p.at("rate").get<double>());
  bad_arg("unknown distribution kind '" + kind + "'");
}

}  // namespace ruinwalk
