#include "ruinwalk/exceed.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace ruinwalk {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("ruinwalk: " + msg);
}

// path value just after a jump crossing (continuous crossings sit exactly at
// the level, overshoot 0)
double jump_crossing_value(const CyclePath& c, const FirstPassage& fp) {
  double z = 0.0;
  for (int i = 0; i <= fp.piece; ++i) {
    const Piece& p = c.pieces()[i];
    z += p.slope * p.dt + p.jump;
  }
  return z;
}

}  // namespace

StopRule StopRule::standard(double x, double cycle_drift,
                            double barrier_mult) {
  StopRule r;
  r.barrier_mult = barrier_mult;
  double expect = (1.0 + r.barrier_mult) * std::max(x, 1.0) /
                  std::max(cycle_drift, 1e-9);
  r.max_cycles = static_cast<long long>(
      std::clamp(100.0 * expect, 1e4, 1e7));
  return r;
}

ExceedanceRecord run_path(const ProcessModel& model, double x,
                          const StopRule& rule, Philox& rng,
                          const TheoreticalParams& tp) {
  if (!(x > 0.0)) fail("run_path: level x must be positive");
  if (!(rule.barrier_mult > 0.0) || rule.max_cycles < 1)
    fail("run_path: invalid stop rule");

  ExceedanceRecord rec;
  const double barrier = -rule.barrier_mult * x;
  const double drift = tp.cycle_drift;

  CyclePath cycle;
  double Z = 0.0, T = 0.0;
  double maxdev_run = 0.0;  // max_{m <= n} |Z_m + m*drift| over boundaries seen
  bool hit_found = false;
  long long n = 0;

  while (n < rule.max_cycles) {
    ++n;
    model.generate_cycle(rng, cycle);

    if (!hit_found) {
      double level = x - Z;
      if (cycle.xi_star() > level) {
        FirstPassage fp = cycle.first_passage(level);
        hit_found = true;
        rec.outcome = PathOutcome::Hit;
        rec.tau_hat_rw = n;
        rec.t_in_cycle = fp.t;
        rec.tau = T + fp.t;
        rec.overshoot = fp.at_jump
                            ? jump_crossing_value(cycle, fp) + Z - x
                            : 0.0;
      }
    }

    double Z_prev = Z;
    Z += cycle.xi();
    T += cycle.R();

    if (hit_found && rec.tau_rw < 0 && Z > x) {
      rec.tau_rw = n;
      rec.T_pre = T - cycle.R();
      rec.Z_before = Z_prev;
      rec.max_dev = maxdev_run / static_cast<double>(n);
      break;
    }
    maxdev_run = std::max(maxdev_run,
                          std::abs(Z + static_cast<double>(n) * drift));
    if (Z < barrier) break;
  }

  rec.steps_run = n;
  if (!hit_found) {
    rec.outcome = (Z < barrier) ? PathOutcome::NoHit : PathOutcome::Inconclusive;
  }
  return rec;
}

ExceedanceRecord run_path(const ProcessModel& model, double x,
                          const StopRule& rule, Philox& rng) {
  return run_path(model, x, rule, rng, model.theoretical_params());
}

Quadruple quadruple(const ExceedanceRecord& rec, double x, double a,
                    double e_x) {
  (void)x;
  if (!rec.hit()) fail("quadruple: record is not a hit");
  if (rec.tau_rw < 1)
    fail("quadruple: boundary-walk exceedance not attained on this path");
  return {a * static_cast<double>(rec.tau_rw) / e_x, rec.Z_before / e_x,
          rec.max_dev, rec.overshoot / e_x};
}

Decomposition decomposition_stats(const ExceedanceRecord& rec, double e_x) {
  if (!rec.hit()) fail("decomposition_stats: record is not a hit");
  Decomposition d;
  d.T_pre_over_e = rec.T_pre / e_x;
  d.mean_cycle_len = rec.tau_rw >= 2
                         ? rec.T_pre / static_cast<double>(rec.tau_rw - 1)
                         : kNaN;
  d.t_in_over_e = rec.t_in_cycle / e_x;
  return d;
}

double missed_mass_bound(const TailModel& reference, double x, double s) {
  double denom = reference.integrated_tail(x);
  if (!(denom > 0.0)) return 0.0;
  return reference.integrated_tail((1.0 + s) * x) / denom;
}

std::string record_csv_header() {
  return "hit,tau,tau_rw,tau_hat_rw,T_pre,t_in_cycle,Z_before,overshoot,"
         "max_dev,weight,steps_run";
}

std::string record_csv_line(const ExceedanceRecord& r) {
  char buf[512];
  auto num = [](double v, char* out, size_t cap) {
    if (std::isnan(v)) { out[0] = '\0'; return; }
    snprintf(out, cap, "%.17g", v);
  };
  char tau[32], tpre[32], tin[32], zb[32], ov[32], md[32], w[32];
  num(r.tau, tau, sizeof tau);
  num(r.T_pre, tpre, sizeof tpre);
  num(r.t_in_cycle, tin, sizeof tin);
  num(r.Z_before, zb, sizeof zb);
  num(r.overshoot, ov, sizeof ov);
  num(r.max_dev, md, sizeof md);
  num(r.weight, w, sizeof w);
  char trw[24] = "", thrw[24] = "";
  if (r.tau_rw >= 0) snprintf(trw, sizeof trw, "%lld", r.tau_rw);
  if (r.tau_hat_rw >= 0) snprintf(thrw, sizeof thrw, "%lld", r.tau_hat_rw);
  int hit_flag = r.hit() ? 1 : (r.outcome == PathOutcome::Inconclusive ? -1 : 0);
  snprintf(buf, sizeof buf, "%d,%s,%s,%s,%s,%s,%s,%s,%s,%s,%lld", hit_flag, tau,
           trw, thrw, tpre, tin, zb, ov, md, w, r.steps_run);
  return buf;
}

}  // namespace ruinwalk
