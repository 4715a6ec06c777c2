#ifndef RUINWALK_MODELS_HPP
#define RUINWALK_MODELS_HPP

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ruinwalk/dists.hpp"
#include "ruinwalk/rng.hpp"

namespace ruinwalk {

// One segment of a within-cycle path: a linear piece of duration dt and
// slope `slope`, followed by an instantaneous jump at its right endpoint.
// Lattice walks use dt=1, slope=0 pieces; a flat run of k steps compresses
// to a single dt=k piece, which keeps e.g. long deterministic cycles O(1).
struct Piece {
  double dt = 0.0;
  double slope = 0.0;
  double jump = 0.0;
};

struct FirstPassage {
  bool hit = false;
  double t = 0.0;   // crossing time; cycle length R when !hit
  int piece = -1;   // index of the crossing piece
  bool at_jump = false;
};

// One regenerative cycle, start value 0.  xi_star is the supremum of the
// path over (0, R]; with the jump-at-piece-end convention a cycle with no
// upward movement has xi_star = 0.
class CyclePath {
 public:
  CyclePath() = default;

  void clear() { pieces_.clear(); }
  void add(double dt, double slope, double jump) {
    pieces_.push_back({dt, slope, jump});
  }
  void finalize();  // computes R, xi, xi_star

  double R() const { return R_; }
  double xi() const { return xi_; }
  double xi_star() const { return xi_star_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  // First t with path(t) > level (strict crossing), or {false, R} if the
  // level is never exceeded.
  FirstPassage first_passage(double level) const;

 private:
  std::vector<Piece> pieces_;
  double R_ = 0.0;
  double xi_ = 0.0;
  double xi_star_ = 0.0;
};

// Composite increment xi = B*J - shift with B ~ Bernoulli(heavy_prob):
// the building block for walk increments and modulated state laws.
struct StateLaw {
  double heavy_prob = 1.0;
  TailModel jump;
  double shift = 0.0;

  double mean() const { return heavy_prob * jump.mean() - shift; }
  double tail(double x) const {  // P(xi > x) for x >= -shift
    return heavy_prob * jump.tail(x + shift);
  }
  double draw(Philox& rng) const;

  nlohmann::json to_json() const;
  static StateLaw from_json(const nlohmann::json& j);
};

struct TheoreticalParams {
  double a = 0.0;      // positive drift magnitude (per step for modulated kinds)
  double mu = 0.0;     // mean cycle length E R
  double C = 1.0;      // tail-coefficient integral, in [0,1]
  double kappa = 0.0;  // sup_y a_y
  std::vector<double> pi;
  std::vector<double> c_y;
  double b_const = 0.0;     // P(M > x) ~ b_const * Fbar_I(x)
  double cycle_drift = 0.0; // -E[cycle increment] (= a unless modulated)
};

struct ConditionReport {
  bool c1_pass = true;      // domination Fbar_y <= Fbar
  double c1_worst = 0.0;    // worst Fbar_y/Fbar over grid
  std::vector<double> c2_hat;  // fitted c(y) from tail ratios
  double c2_dev = 0.0;      // max ratio drift over the fit window
  bool c2_pass = true;
  bool c4_redundant = false;   // kappa < 0
  double c4_final_ratio = 0.0; // P(2 R > x)/Fbar(x) at grid end
  bool c4_pass = true;
  bool pass = true;
};

// Proposal draw for the single-big-jump sampler: a cycle guaranteed (or in
// the Bjork-Grandell cases, engineered) to cross `level`, with the log of
// the density ratio original/proposal restricted to this cycle.
struct ConditionalCycle {
  bool ok = false;
  double log_weight = 0.0;
  int crossing_piece = -1;  // where the designated mechanism crosses
};

class ProcessModel {
 public:
  virtual ~ProcessModel() = default;
  virtual const char* kind_name() const = 0;

  virtual void generate_cycle(Philox& rng, CyclePath& out) const = 0;
  CyclePath generate_cycle(Philox& rng) const {
    CyclePath c;
    generate_cycle(rng, c);
    return c;
  }

  virtual TheoreticalParams theoretical_params() const = 0;
  virtual TailModel reference_tail() const = 0;

  // P(cycle increment > v): closed form where available, an asymptotically
  // proportional surrogate otherwise (only proposal variance depends on it).
  virtual double increment_tail(double v) const = 0;

  // Tail of the cycle length distribution (condition (C4)/(6.1) checks).
  virtual double cycle_length_tail(double x) const = 0;

  virtual ConditionalCycle conditional_crossing_cycle(double level,
                                                      Philox& rng,
                                                      CyclePath& out) const = 0;

  ConditionReport check_conditions(const TailModel& reference,
                                   const std::vector<double>& grid) const;

  virtual nlohmann::json to_json() const = 0;
  static std::shared_ptr<const ProcessModel> from_json(const nlohmann::json& j);

 protected:
  // per-state (C1)/(C2) hooks with a one-state default
  virtual std::vector<StateLaw> state_laws() const { return {}; }
};

using ModelPtr = std::shared_ptr<const ProcessModel>;

// Random walk with i.i.d. increments xi = B*J - shift; every step is a
// length-1 cycle.
class IidWalkModel : public ProcessModel {
 public:
  explicit IidWalkModel(StateLaw law);
  const char* kind_name() const override { return "iid_walk"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return law_.jump; }
  double increment_tail(double v) const override { return law_.tail(v); }
  double cycle_length_tail(double x) const override { return x < 1.0 ? 1.0 : 0.0; }
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;
  const StateLaw& law() const { return law_; }

 protected:
  std::vector<StateLaw> state_laws() const override { return {law_}; }

 private:
  StateLaw law_;
};

// Continuous-time regenerative cycle: length R ~ cycle_length (light), a
// single heavy jump B*J at a uniform epoch U*R, linear drain at rate c.
class RegenerativeModel : public ProcessModel {
 public:
  RegenerativeModel(TailModel cycle_length, StateLaw jump, double drain);
  const char* kind_name() const override { return "regenerative"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return jump_.jump; }
  double increment_tail(double v) const override { return jump_.tail(v); }
  double cycle_length_tail(double x) const override { return len_.tail(x); }
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;

 protected:
  std::vector<StateLaw> state_laws() const override { return {jump_}; }

 private:
  TailModel len_;
  StateLaw jump_;
  double drain_;
};

// Discrete-time random walk modulated by a finite Markov chain; cycles are
// regeneration blocks between visits to state y0.
class ModulatedWalkModel : public ProcessModel {
 public:
  ModulatedWalkModel(std::vector<std::vector<double>> P,
                     std::vector<StateLaw> laws, int y0,
                     std::optional<TailModel> reference = std::nullopt);
  const char* kind_name() const override { return "modulated_walk"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return ref_; }
  double increment_tail(double v) const override;
  double cycle_length_tail(double x) const override;
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;

  int n_states() const { return static_cast<int>(laws_.size()); }
  // one modulated transition: increment from F_y, then the chain moves
  std::pair<double, int> modulated_step(int y, Philox& rng) const;
  const std::vector<double>& stationary() const { return pi_; }

 protected:
  std::vector<StateLaw> state_laws() const override { return laws_; }

 private:
  int next_state(int y, Philox& rng) const;
  std::vector<std::vector<double>> P_;
  std::vector<StateLaw> laws_;
  int y0_;
  TailModel ref_;
  std::vector<double> pi_;
  std::vector<bool> row_deterministic_;
  mutable std::once_flag len_once_;
  mutable std::vector<double> len_sample_;
};

// As ModulatedWalkModel, but each transition emits a continuous sub-path:
// duration D from a per-state law, drain at a per-state rate, and a heavy
// jump B*J at a uniform epoch of the sub-path.
class ModulatedRegenModel : public ProcessModel {
 public:
  struct SubPathLaw {
    StateLaw jump;
    TailModel duration;
    double drain = 0.0;
  };
  ModulatedRegenModel(std::vector<std::vector<double>> P,
                      std::vector<SubPathLaw> laws, int y0,
                      std::optional<TailModel> reference = std::nullopt);
  const char* kind_name() const override { return "modulated_regenerative"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return ref_; }
  double increment_tail(double v) const override;
  double cycle_length_tail(double x) const override;
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;

 protected:
  std::vector<StateLaw> state_laws() const override;

 private:
  int next_state(int y, Philox& rng) const;
  std::vector<std::vector<double>> P_;
  std::vector<SubPathLaw> laws_;
  int y0_;
  TailModel ref_;
  std::vector<double> pi_;
  std::vector<bool> row_deterministic_;
  mutable std::once_flag len_once_;
  mutable std::vector<double> len_sample_;
};

// Bjork-Grandell risk cycle: draw (R, Lambda), Poisson(Lambda) claim
// arrivals on [0,R] with i.i.d. claims from H, premium drain at rate 1.
class BjorkGrandellModel : public ProcessModel {
 public:
  enum class Case { HeavyClaims, HeavyLambda, HeavyCycleLength };

  // HeavyClaims / HeavyLambda: R and Lambda independent.
  BjorkGrandellModel(Case c, TailModel lambda_law, TailModel r_law,
                     TailModel claims);
  // HeavyCycleLength: R | Lambda is r_heavy above lambda0, r_light below.
  BjorkGrandellModel(TailModel lambda_law, double lambda0, TailModel r_heavy,
                     TailModel r_light, TailModel claims);

  const char* kind_name() const override { return "bjork_grandell"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override;
  double increment_tail(double v) const override;
  double cycle_length_tail(double x) const override;
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;

  Case bg_case() const { return case_; }
  double claim_mean() const { return claims_.mean(); }
  double lambda0() const { return lambda0_; }
  const TailModel& lambda_law() const { return lambda_; }
  const TailModel& heavy_r_law() const { return r_heavy_; }
  double mean_r() const;
  double mean_lambda_r() const;

 private:
  double draw_r_given_lambda(double lambda, Philox& rng) const;
  Case case_;
  TailModel lambda_;
  TailModel r_heavy_;   // == r law for cases i/ii
  TailModel r_light_;   // case iii only
  TailModel claims_;
  double lambda0_ = 0.0;
};

// Two-stage fluid cycle: deterministic down-slope of length a1, then an
// up-slope of random length R2.
class FluidTwoStageModel : public ProcessModel {
 public:
  FluidTwoStageModel(double a1, TailModel r2);
  const char* kind_name() const override { return "fluid_two_stage"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return r2_; }
  double increment_tail(double v) const override { return r2_.tail(v + a1_); }
  double cycle_length_tail(double x) const override { return r2_.tail(x - a1_); }
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;
  double a1() const { return a1_; }

 private:
  double a1_;
  TailModel r2_;
};

// Lattice construction with prescribed within-cycle passage growth: draw X;
// X = 0 gives a one-step cycle of increment -b, X = x > 0 gives a cycle of
// length phi(x) that stays at 0 and jumps to x at step phi(x) - 1.
class RateConstructionModel : public ProcessModel {
 public:
  // phi(x) = ceil(x^beta); b defaults to 2 E[X; X>0] / f_0.
  RateConstructionModel(TailModel discrete_power, double beta,
                        std::optional<double> b = std::nullopt);
  const char* kind_name() const override { return "rate_construction"; }
  void generate_cycle(Philox& rng, CyclePath& out) const override;
  using ProcessModel::generate_cycle;
  TheoreticalParams theoretical_params() const override;
  TailModel reference_tail() const override { return f_; }
  double increment_tail(double v) const override {
    return v < 0.0 ? 1.0 : f_.tail(v);
  }
  double cycle_length_tail(double x) const override;
  ConditionalCycle conditional_crossing_cycle(double level, Philox& rng,
                                              CyclePath& out) const override;
  nlohmann::json to_json() const override;

  double phi(double x) const { return std::max(1.0, std::ceil(std::pow(x, beta_))); }
  double b() const { return b_; }
  double beta() const { return beta_; }
  // cycle implied by a drawn X (deterministic given X)
  void cycle_for_draw(double x, CyclePath& out) const;

 private:
  double mean_cycle_length() const;
  TailModel f_;
  double beta_;
  double b_;
  mutable std::once_flag mu_once_;
  mutable double mu_cached_ = 0.0;
};

}  // namespace ruinwalk

#endif  // RUINWALK_MODELS_HPP
