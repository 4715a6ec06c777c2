#ifndef RUINWALK_EXCEED_HPP
#define RUINWALK_EXCEED_HPP

#include <cmath>
#include <limits>
#include <string>

#include "ruinwalk/models.hpp"

namespace ruinwalk {

// Truncation of the infinite-horizon event {M > x}: a path is declared
// no-hit once the boundary walk drops below -barrier_mult * x, and
// inconclusive if max_cycles elapse first.
struct StopRule {
  double barrier_mult = 4.0;
  long long max_cycles = 10000000;

  // max_cycles scaled to the level: ~100x the typical barrier passage time
  static StopRule standard(double x, double cycle_drift,
                           double barrier_mult = 4.0);
};

enum class PathOutcome { Hit, NoHit, Inconclusive };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExceedanceRecord {
  PathOutcome outcome = PathOutcome::NoHit;
  double tau = kNaN;          // first-exceedance time on the process clock
  long long tau_rw = -1;      // min{n : Z(T_n) > x}; -1 if not attained
  long long tau_hat_rw = -1;  // min{n : Z(T_{n-1}) + xi*_n > x}
  double T_pre = kNaN;        // T_{tau_rw - 1}
  double t_in_cycle = kNaN;   // within-cycle passage time in cycle tau_hat_rw
  double Z_before = kNaN;     // Z(T_{tau_rw - 1})
  double overshoot = kNaN;    // Z(tau) - x; 0 for continuous crossings
  double max_dev = kNaN;      // max_{m < tau_rw} |Z_m + m * cycle_drift| / tau_rw
  double weight = 1.0;
  long long steps_run = 0;    // simulated cycle count

  bool hit() const { return outcome == PathOutcome::Hit; }
};

ExceedanceRecord run_path(const ProcessModel& model, double x,
                          const StopRule& rule, Philox& rng,
                          const TheoreticalParams& tp);
ExceedanceRecord run_path(const ProcessModel& model, double x,
                          const StopRule& rule, Philox& rng);

struct Quadruple {
  double q1;  // a * tau_rw / e(x)
  double q2;  // Z_before / e(x)
  double q3;  // max_dev
  double q4;  // overshoot / e(x)
};

// Theorem-style normalised quadruple; rejects non-hit records and records
// whose boundary-walk exceedance was never attained.
Quadruple quadruple(const ExceedanceRecord& rec, double x, double a, double e_x);

struct Decomposition {
  double T_pre_over_e;    // T_{tau_rw-1} / e(x)
  double mean_cycle_len;  // T_{tau_rw-1} / (tau_rw - 1); NaN when tau_rw < 2
  double t_in_over_e;     // t_in_cycle / e(x)
};

Decomposition decomposition_stats(const ExceedanceRecord& rec, double e_x);

// Asymptotic bound on the fraction of true hits missed by the barrier:
// Fbar_I((1+s) x) / Fbar_I(x).
double missed_mass_bound(const TailModel& reference, double x, double s);

// CSV streaming of records (header fixed by the external interface)
std::string record_csv_header();
std::string record_csv_line(const ExceedanceRecord& rec);

}  // namespace ruinwalk

#endif  // RUINWALK_EXCEED_HPP
