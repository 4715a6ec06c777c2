#include "ruinwalk/models.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

namespace ruinwalk {

namespace {

[[noreturn]] void bad_model(const std::string& msg) {
  throw std::invalid_argument("ruinwalk: " + msg);
}

// E X^alpha for a nonnegative light-tailed law (Breiman constants).
double moment(const TailModel& m, double alpha) {
  switch (m.kind()) {
    case DistKind::Exponential:
      return boost::math::tgamma(1.0 + alpha) / std::pow(m.param(0), alpha);
    case DistKind::GammaLight:
      return boost::math::tgamma(m.param(0) + alpha) /
             (boost::math::tgamma(m.param(0)) * std::pow(m.param(1), alpha));
    case DistKind::Deterministic:
      return std::pow(m.param(0), alpha);
    default:
      // E X^alpha = int_0^inf alpha x^(alpha-1) P(X > x) dx for X >= 0
      return integrate_upper_tail(
          [&m, alpha](double x) {
            return alpha * std::pow(x, alpha - 1.0) * m.tail(x);
          },
          0.0);
  }
}

// partial expectation E[Lambda; Lambda > c] for a density-kind law
double partial_mean_above(const TailModel& m, double c) {
  if (m.kind() == DistKind::Deterministic)
    return m.param(0) > c ? m.param(0) : 0.0;
  return integrate_upper_tail(
      [&m](double x) { return x * m.density(x); }, std::max(c, 0.0));
}

std::vector<double> stationary_distribution(
    const std::vector<std::vector<double>>& P) {
  const size_t n = P.size();
  // Solve pi^T P = pi^T with sum(pi) = 1 by Gaussian elimination on
  // A = (P^T - I) with the last equation replaced by the normalisation.
  std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) A[i][j] = P[j][i] - (i == j ? 1.0 : 0.0);
  }
  for (size_t j = 0; j < n; ++j) A[n - 1][j] = 1.0;
  A[n - 1][n] = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    if (std::abs(A[col][col]) < 1e-14) bad_model("singular transition matrix");
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = A[r][col] / A[col][col];
      for (size_t j = col; j <= n; ++j) A[r][j] -= f * A[col][j];
    }
  }
  std::vector<double> pi(n);
  for (size_t i = 0; i < n; ++i) pi[i] = A[i][n] / A[i][i];
  for (double p : pi)
    if (p < -1e-10) bad_model("transition matrix has no positive stationary law");
  return pi;
}

void check_chain(const std::vector<std::vector<double>>& P, int y0,
                 size_t n_laws) {
  const size_t n = P.size();
  if (n == 0 || n != n_laws) bad_model("modulator size mismatch");
  if (y0 < 0 || static_cast<size_t>(y0) >= n) bad_model("y0 out of range");
  for (const auto& row : P) {
    if (row.size() != n) bad_model("transition matrix not square");
    double s = 0.0;
    for (double p : row) {
      if (p < 0.0) bad_model("negative transition probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) bad_model("transition rows must sum to 1");
  }
  // strong connectivity (regeneration at y0 must be reachable from anywhere)
  auto reach = [&](bool forward) {
    std::vector<bool> seen(n, false);
    std::queue<size_t> q;
    q.push(0);
    seen[0] = true;
    while (!q.empty()) {
      size_t u = q.front();
      q.pop();
      for (size_t v = 0; v < n; ++v) {
        double p = forward ? P[u][v] : P[v][u];
        if (p > 0.0 && !seen[v]) {
          seen[v] = true;
          q.push(v);
        }
      }
    }
    return seen;
  };
  auto fwd = reach(true), bwd = reach(false);
  for (size_t i = 0; i < n; ++i)
    if (!fwd[i] || !bwd[i]) bad_model("transition matrix not irreducible");
}

// numeric tail coefficient c(y) = lim Fbar_y / Fbar_ref, anchored at two
// reference tail levels
double fit_tail_coefficient(const StateLaw& law, const TailModel& ref) {
  double x1 = ref.quantile_from_tail(1e-6);
  double x2 = ref.quantile_from_tail(1e-9);
  double r1 = law.tail(x1) / ref.tail(x1);
  double r2 = law.tail(x2) / ref.tail(x2);
  if (r2 < 1e-4) return 0.0;  // lighter-tailed state
  if (std::abs(r1 / r2 - 1.0) > 0.05)
    bad_model("state law tail is not asymptotically proportional to the reference");
  return r2;
}

}  // namespace

// ---------------------------------------------------------------------------
// CyclePath

void CyclePath::finalize() {
  double z = 0.0, t = 0.0, sup = 0.0;
  for (const Piece& p : pieces_) {
    double z_end = z + p.slope * p.dt;
    sup = std::max({sup, z, z_end, z_end + p.jump});
    z = z_end + p.jump;
    t += p.dt;
  }
  R_ = t;
  xi_ = z;
  xi_star_ = sup;
}

FirstPassage CyclePath::first_passage(double level) const {
  double z = 0.0, t = 0.0;
  if (level < 0.0) return {true, 0.0, pieces_.empty() ? -1 : 0, false};
  for (int i = 0; i < static_cast<int>(pieces_.size()); ++i) {
    const Piece& p = pieces_[i];
    double z_end = z + p.slope * p.dt;
    if (p.slope > 0.0 && z_end > level && z <= level) {
      return {true, t + (level - z) / p.slope, i, false};
    }
    t += p.dt;
    z = z_end + p.jump;
    if (z > level) return {true, t, i, true};
  }
  return {false, R_, -1, false};
}

// ---------------------------------------------------------------------------
// StateLaw

double StateLaw::draw(Philox& rng) const {
  double j = 0.0;
  if (heavy_prob >= 1.0) {
    j = jump.sample(rng);
  } else if (heavy_prob > 0.0) {
    if (rng.next_double() < heavy_prob) j = jump.sample(rng);
    else rng.next_double();  // keep the per-step draw count fixed
  }
  return j - shift;
}

nlohmann::json StateLaw::to_json() const {
  return {{"heavy_prob", heavy_prob}, {"jump", jump.to_json()}, {"shift", shift}};
}

StateLaw StateLaw::from_json(const nlohmann::json& j) {
  StateLaw s{j.value("heavy_prob", 1.0), TailModel::from_json(j.at("jump")),
             j.value("shift", 0.0)};
  if (s.heavy_prob < 0.0 || s.heavy_prob > 1.0)
    bad_model("heavy_prob outside [0,1]");
  return s;
}

// ---------------------------------------------------------------------------
// check_conditions (shared)

ConditionReport ProcessModel::check_conditions(
    const TailModel& reference, const std::vector<double>& grid) const {
  if (grid.size() < 4) bad_model("check_conditions: need >= 4 grid points");
  ConditionReport rep;
  std::vector<StateLaw> laws = state_laws();
  size_t tail_window = std::max<size_t>(2, grid.size() / 4);

  auto fit_ratio = [&](auto&& tail_fn, double& dev) {
    double logsum = 0.0;
    double rmin = 1e300, rmax = 0.0;
    size_t cnt = 0;
    for (size_t i = grid.size() - tail_window; i < grid.size(); ++i) {
      double fb = reference.tail(grid[i]);
      if (!(fb > 0.0)) continue;
      double r = tail_fn(grid[i]) / fb;
      if (r <= 0.0) return 0.0;
      logsum += std::log(r);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      ++cnt;
    }
    if (cnt == 0) return 0.0;
    dev = std::max(dev, rmax / rmin - 1.0);
    return std::exp(logsum / cnt);
  };

  if (!laws.empty()) {
    for (const StateLaw& law : laws) {
      for (double x : grid) {
        double fb = reference.tail(x);
        if (!(fb > 0.0)) continue;
        double r = law.tail(x) / fb;
        rep.c1_worst = std::max(rep.c1_worst, r);
      }
      rep.c2_hat.push_back(fit_ratio([&](double x) { return law.tail(x); },
                                     rep.c2_dev));
    }
    rep.c1_pass = rep.c1_worst <= 1.0 + 1e-9;
  } else {
    rep.c2_hat.push_back(
        fit_ratio([&](double x) { return increment_tail(x); }, rep.c2_dev));
    rep.c1_worst = rep.c2_hat[0];
  }
  rep.c2_pass = rep.c2_dev <= 0.15;

  TheoreticalParams tp = theoretical_params();
  rep.c4_redundant = tp.kappa < 0.0;
  // condition (6.1)-style lightness of the cycle length with c = 2
  std::vector<double> ratios;
  for (double x : grid) {
    double fb = reference.tail(x);
    if (!(fb > 0.0)) continue;
    ratios.push_back(cycle_length_tail(x / 2.0) / fb);
  }
  if (ratios.size() >= 2) {
    rep.c4_final_ratio = ratios.back();
    double mid = ratios[ratios.size() / 2];
    // o(Fbar) needs decay toward 0, not mere decrease to a positive limit
    rep.c4_pass = ratios.back() < 0.5 * mid || ratios.back() < 1e-9;
  }
  rep.pass = rep.c1_pass && rep.c2_pass && rep.c4_pass;
  return rep;
}

// ---------------------------------------------------------------------------
// IidWalkModel

IidWalkModel::IidWalkModel(StateLaw law) : law_(std::move(law)) {
  if (!(law_.mean() < 0.0))
    bad_model("iid_walk: increment mean must be negative (got " +
              std::to_string(law_.mean()) + ")");
}

void IidWalkModel::generate_cycle(Philox& rng, CyclePath& out) const {
  out.clear();
  out.add(1.0, 0.0, law_.draw(rng));
  out.finalize();
}

TheoreticalParams IidWalkModel::theoretical_params() const {
  TheoreticalParams tp;
  tp.a = -law_.mean();
  tp.mu = 1.0;
  tp.C = 1.0;
  tp.kappa = law_.mean();
  tp.pi = {1.0};
  tp.c_y = {law_.heavy_prob};
  tp.b_const = law_.heavy_prob / tp.a;
  tp.cycle_drift = tp.a;
  return tp;
}

ConditionalCycle IidWalkModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  double g = level + law_.shift;
  double fb = law_.jump.tail(g);
  if (!(fb > 0.0) || law_.heavy_prob <= 0.0) return {};
  double j = law_.jump.conditional_tail_sample(g, rng);
  out.clear();
  out.add(1.0, 0.0, j - law_.shift);
  out.finalize();
  return {true, std::log(law_.heavy_prob * fb), 0};
}

nlohmann::json IidWalkModel::to_json() const {
  return {{"kind", kind_name()}, {"params", {{"law", law_.to_json()}}}};
}

// ---------------------------------------------------------------------------
// RegenerativeModel

RegenerativeModel::RegenerativeModel(TailModel cycle_length, StateLaw jump,
                                     double drain)
    : len_(std::move(cycle_length)), jump_(std::move(jump)), drain_(drain) {
  if (!(drain_ > 0.0)) bad_model("regenerative: drain rate must be positive");
  if (len_.heavy())
    bad_model("regenerative: cycle length must be light-tailed");
  // cycle increment xi = B*J - shift - drain*R
  if (!(drain_ * len_.mean() - jump_.mean() > 0.0))
    bad_model("regenerative: cycle drift must be negative");
}

void RegenerativeModel::generate_cycle(Philox& rng, CyclePath& out) const {
  double r = len_.sample(rng);
  double u = rng.next_double();
  double j = jump_.draw(rng);
  out.clear();
  out.add(u * r, -drain_, j);
  out.add((1.0 - u) * r, -drain_, 0.0);
  out.finalize();
}

TheoreticalParams RegenerativeModel::theoretical_params() const {
  TheoreticalParams tp;
  tp.a = drain_ * len_.mean() - jump_.mean();
  tp.mu = len_.mean();
  tp.C = 1.0;
  tp.kappa = -tp.a;
  tp.pi = {1.0};
  tp.c_y = {jump_.heavy_prob};
  tp.b_const = jump_.heavy_prob / tp.a;
  tp.cycle_drift = tp.a;
  return tp;
}

ConditionalCycle RegenerativeModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  if (jump_.heavy_prob <= 0.0) return {};
  double r = len_.sample(rng);
  double u = rng.next_double();
  double g = level + jump_.shift + drain_ * u * r;
  double fb = jump_.jump.tail(g);
  if (!(fb > 0.0)) return {};
  double j = jump_.jump.conditional_tail_sample(g, rng);
  out.clear();
  out.add(u * r, -drain_, j - jump_.shift);
  out.add((1.0 - u) * r, -drain_, 0.0);
  out.finalize();
  return {true, std::log(jump_.heavy_prob * fb), 0};
}

nlohmann::json RegenerativeModel::to_json() const {
  return {{"kind", kind_name()},
          {"params",
           {{"cycle_length", len_.to_json()},
            {"jump", jump_.to_json()},
            {"drain", drain_}}}};
}

// ---------------------------------------------------------------------------
// ModulatedWalkModel

ModulatedWalkModel::ModulatedWalkModel(std::vector<std::vector<double>> P,
                                       std::vector<StateLaw> laws, int y0,
                                       std::optional<TailModel> reference)
    : P_(std::move(P)),
      laws_(std::move(laws)),
      y0_(y0),
      ref_(reference ? *reference : laws_.at(0).jump) {
  check_chain(P_, y0_, laws_.size());
  pi_ = stationary_distribution(P_);
  double a = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y) a -= pi_[y] * laws_[y].mean();
  if (!(a > 0.0)) bad_model("modulated_walk: stationary drift must be negative");
  row_deterministic_.resize(P_.size());
  for (size_t y = 0; y < P_.size(); ++y) {
    int ones = 0;
    for (double p : P_[y]) ones += (p == 1.0);
    row_deterministic_[y] = (ones == 1);
  }
}

int ModulatedWalkModel::next_state(int y, Philox& rng) const {
  const auto& row = P_[y];
  if (row_deterministic_[y]) {
    for (size_t v = 0; v < row.size(); ++v)
      if (row[v] == 1.0) return static_cast<int>(v);
  }
  double u = rng.next_double(), acc = 0.0;
  for (size_t v = 0; v < row.size(); ++v) {
    acc += row[v];
    if (u < acc) return static_cast<int>(v);
  }
  return static_cast<int>(row.size()) - 1;
}

std::pair<double, int> ModulatedWalkModel::modulated_step(int y,
                                                          Philox& rng) const {
  if (y < 0 || y >= n_states()) bad_model("modulated_step: state out of range");
  double inc = laws_[y].draw(rng);
  return {inc, next_state(y, rng)};
}

void ModulatedWalkModel::generate_cycle(Philox& rng, CyclePath& out) const {
  out.clear();
  int y = y0_;
  do {
    out.add(1.0, 0.0, laws_[y].draw(rng));
    y = next_state(y, rng);
  } while (y != y0_);
  out.finalize();
}

TheoreticalParams ModulatedWalkModel::theoretical_params() const {
  TheoreticalParams tp;
  tp.pi = pi_;
  tp.kappa = -1e300;
  double a = 0.0, C = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y) {
    double ay = laws_[y].mean();
    tp.kappa = std::max(tp.kappa, ay);
    a -= pi_[y] * ay;
    tp.c_y.push_back(fit_tail_coefficient(laws_[y], ref_));
    C += pi_[y] * tp.c_y.back();
  }
  tp.a = a;
  tp.C = C;
  tp.mu = 1.0 / pi_[y0_];  // mean return time to y0
  tp.b_const = C / a;
  tp.cycle_drift = a * tp.mu;
  return tp;
}

double ModulatedWalkModel::increment_tail(double v) const {
  // per-cycle tail ~ sum over expected visits of the per-state tails
  double s = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y)
    s += pi_[y] / pi_[y0_] * laws_[y].tail(v);
  return std::min(1.0, s);
}

double ModulatedWalkModel::cycle_length_tail(double x) const {
  // no closed form for the return-time law; fixed-seed empirical tail
  std::call_once(len_once_, [this] {
    Philox rng(0xC1C1E5u, 0);
    CyclePath c;
    len_sample_.resize(50000);
    for (double& v : len_sample_) {
      generate_cycle(rng, c);
      v = c.R();
    }
    std::sort(len_sample_.begin(), len_sample_.end());
  });
  auto it = std::upper_bound(len_sample_.begin(), len_sample_.end(), x);
  return static_cast<double>(len_sample_.end() - it) / len_sample_.size();
}

ConditionalCycle ModulatedWalkModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  // state sequence first, then the big-jump step index
  std::vector<int> states;
  int y = y0_;
  do {
    states.push_back(y);
    y = next_state(y, rng);
  } while (y != y0_);
  const int R = static_cast<int>(states.size());
  const int k = 1 + static_cast<int>(rng.next_below(R));
  const StateLaw& big = laws_[states[k - 1]];
  if (big.heavy_prob <= 0.0) return {};
  out.clear();
  double z = 0.0, logw = std::log(static_cast<double>(R));
  for (int j = 1; j <= R; ++j) {
    double inc;
    if (j == k) {
      double g = level - z + big.shift;
      double fb = big.jump.tail(g);
      if (!(fb > 0.0)) return {};
      inc = big.jump.conditional_tail_sample(g, rng) - big.shift;
      logw += std::log(big.heavy_prob * fb);
    } else {
      inc = laws_[states[j - 1]].draw(rng);
    }
    out.add(1.0, 0.0, inc);
    z += inc;
  }
  out.finalize();
  return {true, logw, k - 1};
}

nlohmann::json ModulatedWalkModel::to_json() const {
  nlohmann::json state_laws = nlohmann::json::array();
  for (const auto& l : laws_) state_laws.push_back(l.to_json());
  return {{"kind", kind_name()},
          {"params", {{"y0", y0_}, {"reference", ref_.to_json()}}},
          {"modulator", {{"P", P_}, {"state_laws", state_laws}}}};
}

// ---------------------------------------------------------------------------
// ModulatedRegenModel

ModulatedRegenModel::ModulatedRegenModel(std::vector<std::vector<double>> P,
                                         std::vector<SubPathLaw> laws, int y0,
                                         std::optional<TailModel> reference)
    : P_(std::move(P)),
      laws_(std::move(laws)),
      y0_(y0),
      ref_(reference ? *reference : laws_.at(0).jump.jump) {
  check_chain(P_, y0_, laws_.size());
  pi_ = stationary_distribution(P_);
  double a = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y) {
    if (laws_[y].duration.heavy())
      bad_model("modulated_regenerative: sub-path durations must be light");
    if (!(laws_[y].drain >= 0.0)) bad_model("negative drain rate");
    if (laws_[y].jump.shift != 0.0)
      bad_model("modulated_regenerative: jump shift unsupported, use drain");
    a -= pi_[y] * (laws_[y].jump.mean() - laws_[y].drain * laws_[y].duration.mean());
  }
  if (!(a > 0.0))
    bad_model("modulated_regenerative: stationary drift must be negative");
  row_deterministic_.resize(P_.size());
  for (size_t y = 0; y < P_.size(); ++y) {
    int ones = 0;
    for (double p : P_[y]) ones += (p == 1.0);
    row_deterministic_[y] = (ones == 1);
  }
}

int ModulatedRegenModel::next_state(int y, Philox& rng) const {
  const auto& row = P_[y];
  if (row_deterministic_[y]) {
    for (size_t v = 0; v < row.size(); ++v)
      if (row[v] == 1.0) return static_cast<int>(v);
  }
  double u = rng.next_double(), acc = 0.0;
  for (size_t v = 0; v < row.size(); ++v) {
    acc += row[v];
    if (u < acc) return static_cast<int>(v);
  }
  return static_cast<int>(row.size()) - 1;
}

std::vector<StateLaw> ModulatedRegenModel::state_laws() const {
  std::vector<StateLaw> out;
  for (const auto& l : laws_) out.push_back(l.jump);
  return out;
}

void ModulatedRegenModel::generate_cycle(Philox& rng, CyclePath& out) const {
  out.clear();
  int y = y0_;
  do {
    const SubPathLaw& l = laws_[y];
    double d = l.duration.sample(rng);
    double u = rng.next_double();
    out.add(u * d, -l.drain, l.jump.draw(rng));
    out.add((1.0 - u) * d, -l.drain, 0.0);
    y = next_state(y, rng);
  } while (y != y0_);
  out.finalize();
}

TheoreticalParams ModulatedRegenModel::theoretical_params() const {
  TheoreticalParams tp;
  tp.pi = pi_;
  tp.kappa = -1e300;
  double a = 0.0, C = 0.0, mu_time = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y) {
    const SubPathLaw& l = laws_[y];
    double ay = l.jump.mean() - l.drain * l.duration.mean();
    tp.kappa = std::max(tp.kappa, ay);
    a -= pi_[y] * ay;
    tp.c_y.push_back(fit_tail_coefficient(l.jump, ref_));
    C += pi_[y] * tp.c_y.back();
    mu_time += pi_[y] * l.duration.mean();
  }
  tp.a = a;
  tp.C = C;
  tp.mu = mu_time / pi_[y0_];         // mean block duration in real time
  tp.b_const = C / a;
  tp.cycle_drift = a / pi_[y0_];      // -E[block increment]
  return tp;
}

double ModulatedRegenModel::increment_tail(double v) const {
  double s = 0.0;
  for (size_t y = 0; y < laws_.size(); ++y)
    s += pi_[y] / pi_[y0_] * laws_[y].jump.tail(v);
  return std::min(1.0, s);
}

double ModulatedRegenModel::cycle_length_tail(double x) const {
  std::call_once(len_once_, [this] {
    Philox rng(0xC1C1E6u, 0);
    CyclePath c;
    len_sample_.resize(50000);
    for (double& v : len_sample_) {
      generate_cycle(rng, c);
      v = c.R();
    }
    std::sort(len_sample_.begin(), len_sample_.end());
  });
  auto it = std::upper_bound(len_sample_.begin(), len_sample_.end(), x);
  return static_cast<double>(len_sample_.end() - it) / len_sample_.size();
}

ConditionalCycle ModulatedRegenModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  std::vector<int> states;
  int y = y0_;
  do {
    states.push_back(y);
    y = next_state(y, rng);
  } while (y != y0_);
  const int R = static_cast<int>(states.size());
  const int k = 1 + static_cast<int>(rng.next_below(R));
  const SubPathLaw& big = laws_[states[k - 1]];
  if (big.jump.heavy_prob <= 0.0) return {};
  out.clear();
  double z = 0.0, logw = std::log(static_cast<double>(R));
  int crossing_piece = -1;
  for (int j = 1; j <= R; ++j) {
    const SubPathLaw& l = laws_[states[j - 1]];
    double d = l.duration.sample(rng);
    double u = rng.next_double();
    double jumpv;
    if (j == k) {
      double g = level - (z - l.drain * u * d);
      double fb = l.jump.jump.tail(g);
      if (!(fb > 0.0)) return {};
      jumpv = l.jump.jump.conditional_tail_sample(g, rng);
      logw += std::log(l.jump.heavy_prob * fb);
      crossing_piece = static_cast<int>(out.pieces().size());
    } else {
      jumpv = l.jump.draw(rng);
    }
    out.add(u * d, -l.drain, jumpv);
    out.add((1.0 - u) * d, -l.drain, 0.0);
    z += jumpv - l.drain * d;
  }
  out.finalize();
  return {true, logw, crossing_piece};
}

nlohmann::json ModulatedRegenModel::to_json() const {
  nlohmann::json state_laws = nlohmann::json::array();
  for (const auto& l : laws_)
    state_laws.push_back({{"jump", l.jump.to_json()},
                          {"duration", l.duration.to_json()},
                          {"drain", l.drain}});
  return {{"kind", kind_name()},
          {"params", {{"y0", y0_}, {"reference", ref_.to_json()}}},
          {"modulator", {{"P", P_}, {"state_laws", state_laws}}}};
}

// ---------------------------------------------------------------------------
// BjorkGrandellModel

BjorkGrandellModel::BjorkGrandellModel(Case c, TailModel lambda_law,
                                       TailModel r_law, TailModel claims)
    : case_(c),
      lambda_(std::move(lambda_law)),
      r_heavy_(std::move(r_law)),
      r_light_(r_heavy_),
      claims_(std::move(claims)) {
  if (case_ == Case::HeavyCycleLength)
    bad_model("bjork_grandell: heavy cycle length needs the (lambda0, r_heavy, r_light) constructor");
  if (case_ == Case::HeavyClaims && !claims_.heavy())
    bad_model("bjork_grandell heavy_claims: claim law must be heavy");
  if (case_ == Case::HeavyLambda &&
      lambda_.kind() != DistKind::Pareto)
    bad_model("bjork_grandell heavy_lambda: lambda law must be pareto");
  double drift = claim_mean() * mean_lambda_r() - mean_r();
  if (!(drift < 0.0)) bad_model("bjork_grandell: net profit condition fails");
}

BjorkGrandellModel::BjorkGrandellModel(TailModel lambda_law, double lambda0,
                                       TailModel r_heavy, TailModel r_light,
                                       TailModel claims)
    : case_(Case::HeavyCycleLength),
      lambda_(std::move(lambda_law)),
      r_heavy_(std::move(r_heavy)),
      r_light_(std::move(r_light)),
      claims_(std::move(claims)),
      lambda0_(lambda0) {
  if (!(lambda0_ * claim_mean() > 1.0))
    bad_model("bjork_grandell: need lambda0 * m > 1");
  if (r_heavy_.kind() != DistKind::Pareto)
    bad_model("bjork_grandell heavy_cycle_length: r_heavy must be pareto");
  if (r_light_.heavy()) bad_model("bjork_grandell: r_light must be light");
  if (!(lambda_.tail(lambda0_) > 0.0))
    bad_model("bjork_grandell: lambda never exceeds lambda0");
  double drift = claim_mean() * mean_lambda_r() - mean_r();
  if (!(drift < 0.0)) bad_model("bjork_grandell: net profit condition fails");
}

double BjorkGrandellModel::mean_r() const {
  if (case_ != Case::HeavyCycleLength) return r_heavy_.mean();
  double ph = lambda_.tail(lambda0_);
  return r_heavy_.mean() * ph + r_light_.mean() * (1.0 - ph);
}

double BjorkGrandellModel::mean_lambda_r() const {
  if (case_ != Case::HeavyCycleLength) return lambda_.mean() * r_heavy_.mean();
  double above = partial_mean_above(lambda_, lambda0_);
  double below = lambda_.mean() - above;
  return r_heavy_.mean() * above + r_light_.mean() * below;
}

double BjorkGrandellModel::draw_r_given_lambda(double lambda,
                                               Philox& rng) const {
  if (case_ != Case::HeavyCycleLength) return r_heavy_.sample(rng);
  return lambda > lambda0_ ? r_heavy_.sample(rng) : r_light_.sample(rng);
}

void BjorkGrandellModel::generate_cycle(Philox& rng, CyclePath& out) const {
  double lambda = lambda_.sample(rng);
  double r = draw_r_given_lambda(lambda, rng);
  out.clear();
  double t = 0.0;
  while (true) {
    double gap = -std::log(rng.next_double()) / lambda;
    if (t + gap >= r) break;
    t += gap;
    out.add(gap, -1.0, claims_.sample(rng));
  }
  out.add(r - t, -1.0, 0.0);
  out.finalize();
}

TheoreticalParams BjorkGrandellModel::theoretical_params() const {
  TheoreticalParams tp;
  tp.mu = mean_r();
  tp.a = tp.mu - claim_mean() * mean_lambda_r();
  tp.C = 1.0;
  tp.kappa = -tp.a;
  tp.pi = {1.0};
  tp.cycle_drift = tp.a;
  double m = claim_mean();
  switch (case_) {
    case Case::HeavyClaims:
      tp.c_y = {mean_lambda_r()};
      tp.b_const = mean_lambda_r() / tp.a;
      break;
    case Case::HeavyLambda: {
      double alpha = lambda_.param(0);
      double c = std::pow(m, alpha) * moment(r_heavy_, alpha);
      tp.c_y = {c};
      tp.b_const = c / tp.a;
      break;
    }
    case Case::HeavyCycleLength: {
      double alpha = r_heavy_.param(0);
      double c = integrate_upper_tail(
          [this, m, alpha](double l) {
            return lambda_.density(l) * std::pow(l * m - 1.0, alpha);
          },
          lambda0_);
      tp.c_y = {c};
      tp.b_const = c / tp.a;
      break;
    }
  }
  return tp;
}

TailModel BjorkGrandellModel::reference_tail() const {
  switch (case_) {
    case Case::HeavyClaims: return claims_;
    case Case::HeavyLambda: return lambda_;
    case Case::HeavyCycleLength: return r_heavy_;
  }
  return claims_;
}

double BjorkGrandellModel::increment_tail(double v) const {
  if (v <= 0.0) return 1.0;
  double m = claim_mean();
  switch (case_) {
    case Case::HeavyClaims:
      return std::min(1.0, mean_lambda_r() * claims_.tail(v));
    case Case::HeavyLambda: {
      double alpha = lambda_.param(0);
      return std::min(1.0, std::pow(m, alpha) * moment(r_heavy_, alpha) *
                               lambda_.tail(v));
    }
    case Case::HeavyCycleLength: {
      double alpha = r_heavy_.param(0);
      double c = std::pow(std::max(lambda0_ * m - 1.0, 0.5), alpha);
      return std::min(1.0, c * r_heavy_.tail(v));
    }
  }
  return 0.0;
}

double BjorkGrandellModel::cycle_length_tail(double x) const {
  if (case_ != Case::HeavyCycleLength) return r_heavy_.tail(x);
  double ph = lambda_.tail(lambda0_);
  return ph * r_heavy_.tail(x) + (1.0 - ph) * r_light_.tail(x);
}

ConditionalCycle BjorkGrandellModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  out.clear();
  double logw = 0.0;
  switch (case_) {
    case Case::HeavyClaims: {
      double lambda = lambda_.sample(rng);
      double r = draw_r_given_lambda(lambda, rng);
      // arrival epochs first
      std::vector<double> gaps;
      double t = 0.0;
      while (true) {
        double gap = -std::log(rng.next_double()) / lambda;
        if (t + gap >= r) break;
        t += gap;
        gaps.push_back(gap);
      }
      const int n = static_cast<int>(gaps.size());
      if (n == 0) return {};
      const int k = 1 + static_cast<int>(rng.next_below(n));
      double z = 0.0, tt = 0.0;
      for (int i = 1; i <= n; ++i) {
        tt += gaps[i - 1];
        double before = z - tt;  // path value just before claim i
        double claim;
        if (i == k) {
          double g = level - before;
          double fb = claims_.tail(g);
          if (!(fb > 0.0)) return {};
          claim = claims_.conditional_tail_sample(g, rng);
          logw += std::log(static_cast<double>(n) * fb);
        } else {
          claim = claims_.sample(rng);
        }
        out.add(gaps[i - 1], -1.0, claim);
        z += claim;
      }
      out.add(r - tt, -1.0, 0.0);
      out.finalize();
      return {true, logw, k - 1};
    }
    case Case::HeavyLambda: {
      double r = r_heavy_.sample(rng);
      double g = (level / r + 1.0) / claim_mean();
      double fb = lambda_.tail(g);
      if (!(fb > 0.0)) return {};
      double lambda = lambda_.conditional_tail_sample(g, rng);
      logw = std::log(fb);
      double t = 0.0;
      while (true) {
        double gap = -std::log(rng.next_double()) / lambda;
        if (t + gap >= r) break;
        t += gap;
        out.add(gap, -1.0, claims_.sample(rng));
      }
      out.add(r - t, -1.0, 0.0);
      out.finalize();
      return {true, logw, -2};  // any in-cycle crossing acceptable
    }
    case Case::HeavyCycleLength: {
      double fb0 = lambda_.tail(lambda0_);
      double lambda = lambda_.conditional_tail_sample(lambda0_, rng);
      double g = level / (lambda * claim_mean() - 1.0);
      double fbr = r_heavy_.tail(g);
      if (!(fbr > 0.0)) return {};
      double r = r_heavy_.conditional_tail_sample(g, rng);
      logw = std::log(fb0) + std::log(fbr);
      double t = 0.0;
      while (true) {
        double gap = -std::log(rng.next_double()) / lambda;
        if (t + gap >= r) break;
        t += gap;
        out.add(gap, -1.0, claims_.sample(rng));
      }
      out.add(r - t, -1.0, 0.0);
      out.finalize();
      return {true, logw, -2};
    }
  }
  return {};
}

nlohmann::json BjorkGrandellModel::to_json() const {
  const char* cs = case_ == Case::HeavyClaims      ? "heavy_claims"
                   : case_ == Case::HeavyLambda    ? "heavy_lambda"
                                                   : "heavy_cycle_length";
  nlohmann::json p = {{"case", cs},
                      {"lambda", lambda_.to_json()},
                      {"claims", claims_.to_json()}};
  if (case_ == Case::HeavyCycleLength) {
    p["lambda0"] = lambda0_;
    p["r_heavy"] = r_heavy_.to_json();
    p["r_light"] = r_light_.to_json();
  } else {
    p["r"] = r_heavy_.to_json();
  }
  return {{"kind", kind_name()}, {"params", p}};
}

// ---------------------------------------------------------------------------
// FluidTwoStageModel

FluidTwoStageModel::FluidTwoStageModel(double a1, TailModel r2)
    : a1_(a1), r2_(std::move(r2)) {
  if (!(a1_ > 0.0)) bad_model("fluid_two_stage: a1 must be positive");
  if (!(r2_.mean() < a1_))
    bad_model("fluid_two_stage: need E R2 < a1 for negative drift");
}

void FluidTwoStageModel::generate_cycle(Philox& rng, CyclePath& out) const {
  double r2 = r2_.sample(rng);
  out.clear();
  out.add(a1_, -1.0, 0.0);
  out.add(r2, 1.0, 0.0);
  out.finalize();
}

TheoreticalParams FluidTwoStageModel::theoretical_params() const {
  TheoreticalParams tp;
  double a2 = r2_.mean();
  tp.a = a1_ - a2;
  tp.mu = a1_ + a2;
  tp.C = 1.0;
  tp.kappa = -tp.a;
  tp.pi = {1.0};
  tp.c_y = {1.0};
  tp.b_const = 1.0 / tp.a;
  tp.cycle_drift = tp.a;
  return tp;
}

ConditionalCycle FluidTwoStageModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  double g = level + a1_;
  double fb = r2_.tail(g);
  if (!(fb > 0.0)) return {};
  double r2 = r2_.conditional_tail_sample(g, rng);
  out.clear();
  out.add(a1_, -1.0, 0.0);
  out.add(r2, 1.0, 0.0);
  out.finalize();
  return {true, std::log(fb), 1};
}

nlohmann::json FluidTwoStageModel::to_json() const {
  return {{"kind", kind_name()},
          {"params", {{"a1", a1_}, {"r2", r2_.to_json()}}}};
}

// ---------------------------------------------------------------------------
// RateConstructionModel

RateConstructionModel::RateConstructionModel(TailModel f, double beta,
                                             std::optional<double> b)
    : f_(std::move(f)), beta_(beta) {
  if (f_.kind() != DistKind::DiscretePower)
    bad_model("rate_construction: F must be discrete_power");
  if (!(beta_ > 0.0)) bad_model("rate_construction: beta must be positive");
  double f0 = f_.density(0.0);
  double mean_pos = f_.mean();  // E[X; X>0] = E X since X >= 0
  b_ = b ? *b : 2.0 * mean_pos / f0;
  if (!(b_ * f0 > mean_pos))
    bad_model("rate_construction: need b > E[X; X>0]/f_0 for negative drift");
}

void RateConstructionModel::cycle_for_draw(double x, CyclePath& out) const {
  out.clear();
  if (x <= 0.0) {
    out.add(1.0, 0.0, -b_);
  } else {
    double r = phi(x);
    if (r <= 1.0) {
      out.add(1.0, 0.0, x);
    } else {
      out.add(r - 1.0, 0.0, x);  // flat until the jump at step phi(x)-1
      out.add(1.0, 0.0, 0.0);
    }
  }
  out.finalize();
}

void RateConstructionModel::generate_cycle(Philox& rng, CyclePath& out) const {
  cycle_for_draw(f_.sample(rng), out);
}

double RateConstructionModel::mean_cycle_length() const {
  std::call_once(mu_once_, [this] {
    long long cut = static_cast<long long>(f_.param(1));
    double acc = 0.0;
    for (long long k = cut; k >= 1; --k)  // sum small terms first
      acc += phi(static_cast<double>(k)) * f_.density(static_cast<double>(k));
    mu_cached_ = acc + f_.density(0.0);
  });
  return mu_cached_;
}

TheoreticalParams RateConstructionModel::theoretical_params() const {
  TheoreticalParams tp;
  double f0 = f_.density(0.0);
  double mean_pos = f_.mean();
  tp.a = b_ * f0 - mean_pos;
  tp.mu = mean_cycle_length();
  tp.C = 1.0;
  tp.kappa = -tp.a;
  tp.pi = {1.0};
  tp.c_y = {1.0};
  tp.b_const = 1.0 / tp.a;
  tp.cycle_drift = tp.a;
  return tp;
}

double RateConstructionModel::cycle_length_tail(double x) const {
  if (x < 1.0) return 1.0;
  return f_.tail(std::pow(x, 1.0 / beta_));
}

ConditionalCycle RateConstructionModel::conditional_crossing_cycle(
    double level, Philox& rng, CyclePath& out) const {
  double fb = f_.tail(level);
  if (!(fb > 0.0)) return {};
  double x = f_.conditional_tail_sample(level, rng);
  cycle_for_draw(x, out);
  return {true, std::log(fb), 0};
}

nlohmann::json RateConstructionModel::to_json() const {
  return {{"kind", kind_name()},
          {"params", {{"f", f_.to_json()}, {"beta", beta_}, {"b", b_}}}};
}

// ---------------------------------------------------------------------------
// polymorphic JSON

ModelPtr ProcessModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const nlohmann::json& p = j.at("params");
  if (kind == "iid_walk")
    return std::make_shared<IidWalkModel>(StateLaw::from_json(p.at("law")));
  if (kind == "regenerative")
    return std::make_shared<RegenerativeModel>(
        TailModel::from_json(p.at("cycle_length")),
        StateLaw::from_json(p.at("jump")), p.at("drain").get<double>());
  if (kind == "modulated_walk" || kind == "modulated_regenerative") {
    const nlohmann::json& mod = j.at("modulator");
    auto P = mod.at("P").get<std::vector<std::vector<double>>>();
    int y0 = p.value("y0", 0);
    std::optional<TailModel> ref;
    if (p.contains("reference")) ref = TailModel::from_json(p.at("reference"));
    if (kind == "modulated_walk") {
      std::vector<StateLaw> laws;
      for (const auto& lj : mod.at("state_laws"))
        laws.push_back(StateLaw::from_json(lj));
      return std::make_shared<ModulatedWalkModel>(std::move(P), std::move(laws),
                                                  y0, ref);
    }
    std::vector<ModulatedRegenModel::SubPathLaw> laws;
    for (const auto& lj : mod.at("state_laws"))
      laws.push_back({StateLaw::from_json(lj.at("jump")),
                      TailModel::from_json(lj.at("duration")),
                      lj.at("drain").get<double>()});
    return std::make_shared<ModulatedRegenModel>(std::move(P), std::move(laws),
                                                 y0, ref);
  }
  if (kind == "bjork_grandell") {
    const std::string cs = p.at("case").get<std::string>();
    TailModel lambda = TailModel::from_json(p.at("lambda"));
    TailModel claims = TailModel::from_json(p.at("claims"));
    if (cs == "heavy_cycle_length")
      return std::make_shared<BjorkGrandellModel>(
          lambda, p.at("lambda0").get<double>(),
          TailModel::from_json(p.at("r_heavy")),
          TailModel::from_json(p.at("r_light")), claims);
    auto c = cs == "heavy_claims" ? BjorkGrandellModel::Case::HeavyClaims
                                  : BjorkGrandellModel::Case::HeavyLambda;
    return std::make_shared<BjorkGrandellModel>(
        c, lambda, TailModel::from_json(p.at("r")), claims);
  }
  if (kind == "fluid_two_stage")
    return std::make_shared<FluidTwoStageModel>(
        p.at("a1").get<double>(), TailModel::from_json(p.at("r2")));
  if (kind == "rate_construction")
    return std::make_shared<RateConstructionModel>(
        TailModel::from_json(p.at("f")), p.at("beta").get<double>(),
        p.contains("b") ? std::optional<double>(p.at("b").get<double>())
                        : std::nullopt);
  bad_model("unknown model kind '" + kind + "'");
}

}  // namespace ruinwalk
