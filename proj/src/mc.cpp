#include "ruinwalk/mc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <omp.h>

namespace ruinwalk {

namespace {

constexpr std::uint64_t kTagEstimate = 0xE571;
constexpr std::uint64_t kTagCrudeCond = 0xC0D1;
constexpr std::uint64_t kTagBigJump = 0xB160;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("ruinwalk: " + msg);
}

void check_cfg(const RunConfig& cfg) {
  if (cfg.n_paths < 1) fail("n_paths must be >= 1");
  if (cfg.workers < 1) fail("workers must be >= 1");
}

// Deterministic path-parallel driver: fn(i, rng) for i in [0, n), with one
// rng stream per global path index (offset + i).  The parallel engine writes
// into fixed slots, so worker count and scheduling never change the result.
template <typename Fn>
void for_each_path(long long n, std::uint64_t seed, std::uint64_t offset,
                   int workers, Engine engine, Fn&& fn) {
  if (engine == Engine::Serial) {
    for (long long i = 0; i < n; ++i) {
      Philox rng(seed, offset + static_cast<std::uint64_t>(i));
      fn(i, rng);
    }
    return;
  }
#pragma omp parallel for schedule(dynamic, 64) num_threads(workers)
  for (long long i = 0; i < n; ++i) {
    Philox rng(seed, offset + static_cast<std::uint64_t>(i));
    fn(i, rng);
  }
}

}  // namespace

nlohmann::json EstimatorResult::to_json() const {
  nlohmann::json j{{"x", x},
                   {"p_hat", p_hat},
                   {"stderr", stderr_},
                   {"ci95", {ci_lo, ci_hi}},
                   {"asymptote", asymptote},
                   {"ratio", ratio},
                   {"n_paths", n_paths},
                   {"n_hits", n_hits},
                   {"n_inconclusive", n_inconclusive},
                   {"ess", ess},
                   {"missed_mass_bound", missed_mass_bound}};
  if (!note.empty()) j["note"] = note;
  return j;
}

EstimatorResult estimate_ruin_prob(const ProcessModel& model, double x,
                                   const RunConfig& cfg) {
  check_cfg(cfg);
  const TheoreticalParams tp = model.theoretical_params();
  const TailModel ref = model.reference_tail();
  const std::uint64_t seed = mix_seed(cfg.seed, kTagEstimate);

  std::vector<unsigned char> outcome(cfg.n_paths);
  for_each_path(cfg.n_paths, seed, 0, cfg.workers, cfg.engine,
                [&](long long i, Philox& rng) {
                  ExceedanceRecord rec = run_path(model, x, cfg.stop, rng, tp);
                  outcome[i] = static_cast<unsigned char>(rec.outcome);
                });

  EstimatorResult res;
  res.x = x;
  res.n_paths = cfg.n_paths;
  for (unsigned char o : outcome) {
    res.n_hits += (o == static_cast<unsigned char>(PathOutcome::Hit));
    res.n_inconclusive +=
        (o == static_cast<unsigned char>(PathOutcome::Inconclusive));
  }
  long long n_valid = cfg.n_paths - res.n_inconclusive;
  if (n_valid == 0) fail("estimate_ruin_prob: every path was inconclusive");
  res.p_hat = static_cast<double>(res.n_hits) / n_valid;
  res.stderr_ = std::sqrt(res.p_hat * (1.0 - res.p_hat) / n_valid);
  res.ci_lo = std::max(0.0, res.p_hat - 1.96 * res.stderr_);
  res.ci_hi = std::min(1.0, res.p_hat + 1.96 * res.stderr_);
  res.asymptote = tp.b_const * ref.integrated_tail(x);
  res.ratio = res.asymptote > 0.0 ? res.p_hat / res.asymptote : 0.0;
  res.ess = static_cast<double>(n_valid);
  res.missed_mass_bound = missed_mass_bound(ref, x, cfg.stop.barrier_mult);
  if (cfg.sampler == SamplerKind::Crude && res.asymptote < 1e-6)
    res.note = "crude sampling at asymptote < 1e-6: hits will be rare";
  return res;
}

std::vector<ExceedanceRecord> conditional_sample_crude(
    const ProcessModel& model, double x, const RunConfig& cfg,
    long long target_hits) {
  check_cfg(cfg);
  if (target_hits <= 0) return {};
  const TheoreticalParams tp = model.theoretical_params();
  const std::uint64_t seed = mix_seed(cfg.seed, kTagCrudeCond);
  const long long chunk = 8192;

  std::vector<ExceedanceRecord> hits;
  std::vector<ExceedanceRecord> slots(chunk);
  for (long long base = 0; base < cfg.n_paths; base += chunk) {
    const long long m = std::min(chunk, cfg.n_paths - base);
    for_each_path(m, seed, static_cast<std::uint64_t>(base), cfg.workers,
                  cfg.engine, [&](long long i, Philox& rng) {
                    slots[i] = run_path(model, x, cfg.stop, rng, tp);
                  });
    for (long long i = 0; i < m; ++i) {
      if (slots[i].hit()) {
        hits.push_back(slots[i]);
        if (static_cast<long long>(hits.size()) >= target_hits) return hits;
      }
    }
  }
  return hits;  // budget exhausted: partial sample
}

std::vector<double> big_jump_index_weights(const ProcessModel& model, double x,
                                           long long horizon) {
  const TheoreticalParams tp = model.theoretical_params();
  horizon = std::min<long long>(horizon, 4000000);
  std::vector<double> w(static_cast<size_t>(horizon));
  for (long long n = 1; n <= horizon; ++n)
    w[n - 1] = model.increment_tail(x + static_cast<double>(n) * tp.cycle_drift);
  return w;
}

std::vector<ExceedanceRecord> big_jump_sampler(const ProcessModel& model,
                                               double x, const RunConfig& cfg,
                                               long long target_hits) {
  check_cfg(cfg);
  if (target_hits <= 0) return {};
  const TheoreticalParams tp = model.theoretical_params();
  const std::uint64_t seed = mix_seed(cfg.seed, kTagBigJump);

  std::vector<double> w = big_jump_index_weights(model, x, cfg.stop.max_cycles);
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) fail("big_jump_sampler: degenerate proposal, all w_n = 0");
  const double total = acc;
  const double barrier = -cfg.stop.barrier_mult * x;

  // one proposal trial; returns outcome=Hit on acceptance with the
  // unnormalised log weight stored in `weight`
  auto trial = [&](Philox& rng, ExceedanceRecord& rec) {
    rec = ExceedanceRecord{};
    rec.outcome = PathOutcome::NoHit;
    double u = rng.next_double() * total;
    long long n = 1 + (std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (n > static_cast<long long>(w.size())) n = static_cast<long long>(w.size());

    CyclePath cycle;
    double Z = 0.0, T = 0.0, maxdev_run = 0.0;
    for (long long m = 1; m < n; ++m) {
      model.generate_cycle(rng, cycle);
      if (cycle.xi_star() > x - Z) return;  // crossing before the chosen cycle
      Z += cycle.xi();
      T += cycle.R();
      if (Z < barrier) return;
      maxdev_run = std::max(maxdev_run,
                            std::abs(Z + static_cast<double>(m) * tp.cycle_drift));
    }
    const double level = x - Z;
    ConditionalCycle cc = model.conditional_crossing_cycle(level, rng, cycle);
    if (!cc.ok) return;
    FirstPassage fp = cycle.first_passage(level);
    if (!fp.hit) return;
    if (cc.crossing_piece >= 0 && fp.piece != cc.crossing_piece) return;

    rec.outcome = PathOutcome::Hit;
    rec.tau_hat_rw = n;
    rec.t_in_cycle = fp.t;
    rec.tau = T + fp.t;
    rec.overshoot = 0.0;
    if (fp.at_jump) {
      double z = 0.0;
      for (int i = 0; i <= fp.piece; ++i) {
        const Piece& p = cycle.pieces()[i];
        z += p.slope * p.dt + p.jump;
      }
      rec.overshoot = z + Z - x;
    }
    rec.weight = cc.log_weight - std::log(w[n - 1]);  // log dP/dQ up to a constant

    // chase the boundary-walk exceedance for tau_rw
    double prevZ = Z, prevT = T;  // boundary m-1 values
    Z += cycle.xi();
    T += cycle.R();
    long long m = n;
    while (true) {
      if (Z > x) {
        rec.tau_rw = m;
        rec.T_pre = prevT;
        rec.Z_before = prevZ;
        rec.max_dev = maxdev_run / static_cast<double>(m);
        break;
      }
      maxdev_run = std::max(maxdev_run,
                            std::abs(Z + static_cast<double>(m) * tp.cycle_drift));
      if (Z < barrier || m >= cfg.stop.max_cycles) break;  // tau_rw unattained
      ++m;
      prevZ = Z;
      prevT = T;
      model.generate_cycle(rng, cycle);
      Z += cycle.xi();
      T += cycle.R();
    }
    rec.steps_run = m;
  };

  const long long chunk = 4096;
  std::vector<ExceedanceRecord> accepted;
  std::vector<ExceedanceRecord> slots(chunk);
  long long budget = std::max(cfg.n_paths, 4 * target_hits);
  bool done = false;
  for (long long base = 0; base < budget && !done; base += chunk) {
    const long long m = std::min(chunk, budget - base);
    for_each_path(m, seed, static_cast<std::uint64_t>(base), cfg.workers,
                  cfg.engine,
                  [&](long long i, Philox& rng) { trial(rng, slots[i]); });
    for (long long i = 0; i < m && !done; ++i) {
      if (slots[i].hit()) {
        accepted.push_back(slots[i]);
        done = static_cast<long long>(accepted.size()) >= target_hits;
      }
    }
  }
  // self-normalise the log weights over the batch
  if (!accepted.empty()) {
    double mx = accepted[0].weight;
    for (const auto& r : accepted) mx = std::max(mx, r.weight);
    double sum = 0.0;
    for (auto& r : accepted) {
      r.weight = std::exp(r.weight - mx);
      sum += r.weight;
    }
    for (auto& r : accepted) r.weight /= sum;
  }
  return accepted;
}

double effective_sample_size(const std::vector<ExceedanceRecord>& records) {
  double s2 = 0.0;
  for (const auto& r : records) s2 += r.weight * r.weight;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

}  // namespace ruinwalk
