#ifndef RUINWALK_MC_HPP
#define RUINWALK_MC_HPP

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ruinwalk/exceed.hpp"
#include "ruinwalk/models.hpp"

namespace ruinwalk {

enum class SamplerKind { Crude, BigJump };

// Serial is the reference implementation; Parallel runs the identical
// per-path computation under OpenMP.  Outputs are bit-identical: every path
// owns a counter-based rng stream addressed by its index, and merges are
// order-independent.
enum class Engine { Serial, Parallel };

struct RunConfig {
  long long n_paths = 100000;
  std::uint64_t seed = 1;
  StopRule stop;
  SamplerKind sampler = SamplerKind::Crude;
  int workers = 1;
  Engine engine = Engine::Parallel;
};

struct EstimatorResult {
  double x = 0.0;
  double p_hat = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  long long n_paths = 0, n_hits = 0, n_inconclusive = 0;
  double asymptote = 0.0;  // b_const * Fbar_I(x)
  double ratio = 0.0;      // p_hat / asymptote
  double ess = 0.0;
  double missed_mass_bound = 0.0;
  std::string note;

  nlohmann::json to_json() const;
};

// Crude binomial estimate of P(M > x) with the reference asymptote attached.
// Throws if every path is inconclusive.
EstimatorResult estimate_ruin_prob(const ProcessModel& model, double x,
                                   const RunConfig& cfg);

// Runs paths until `target_hits` hit records are collected (weights 1), or
// the n_paths budget is exhausted (partial sample returned).
std::vector<ExceedanceRecord> conditional_sample_crude(const ProcessModel& model,
                                                       double x,
                                                       const RunConfig& cfg,
                                                       long long target_hits);

// Single-big-jump importance sampler targeting the conditional path law
// given {M > x} on single-jump exceedance paths; records carry
// self-normalised weights (summing to 1 over the batch).
std::vector<ExceedanceRecord> big_jump_sampler(const ProcessModel& model,
                                               double x, const RunConfig& cfg,
                                               long long target_hits);

// Effective sample size of self-normalised weights: 1 / sum w_i^2.
double effective_sample_size(const std::vector<ExceedanceRecord>& records);

// Proposal index weights w_n ~ P(xi > x + n a), n = 1..horizon (unnormalised).
std::vector<double> big_jump_index_weights(const ProcessModel& model, double x,
                                           long long horizon);

}  // namespace ruinwalk

#endif  // RUINWALK_MC_HPP
