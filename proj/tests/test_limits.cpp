#include <doctest.h>

#include <cmath>

#include "ruinwalk/limits.hpp"
#include "ruinwalk/mc.hpp"

using namespace ruinwalk;

namespace {

EmpiricalDistribution self_sample(const ScalarLaw& law, int n,
                                  std::uint64_t seed) {
  Philox rng(seed, 0);
  std::vector<double> v(n);
  for (double& x : v) x = law.sample(rng);
  return EmpiricalDistribution::from_values(std::move(v));
}

}  // namespace

TEST_CASE("scaled law closed form") {
  // W std exponential, law of W/2: tail at 1 is e^{-2}
  auto law = scaled_law(0.5, LimitLawG::std_exp());
  CHECK(law->tail(1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(law->cdf(0.0) == doctest::Approx(0.0));
}

TEST_CASE("quadruple law joint tail and marginals") {
  QuadrupleLaw q{LimitLawG::std_exp()};
  CHECK(q.joint_tail(1.0, 1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(q.marginal().tail(1.0) == doctest::Approx(std::exp(-1.0)));

  QuadrupleLaw qp{LimitLawG::pareto_tail(1.5)};
  CHECK(qp.joint_tail(0.5, 0.5) == doctest::Approx(std::pow(2.0, -1.5)));

  // sampled pair reproduces the joint tail on a grid
  for (const auto& ql : {q, qp}) {
    Philox rng(3, 1);
    const int n = 200000;
    std::vector<std::pair<double, double>> pairs(n);
    for (auto& pr : pairs) pr = ql.sample_pair(rng);
    for (double u : {0.25, 0.5, 1.0}) {
      for (double v : {0.25, 0.5, 1.0}) {
        int cnt = 0;
        for (const auto& pr : pairs) cnt += (pr.first > u && pr.second > v);
        double want = ql.joint_tail(u, v);
        CHECK(static_cast<double>(cnt) / n ==
              doctest::Approx(want).epsilon(0.02));
      }
    }
  }
}

TEST_CASE("wstar law of the heavy-cycle-length regime") {
  // degenerate Lambda: point mass at 1/(lc m - 1)
  auto atom = wstar_bg(TailModel::deterministic(3.0), 1.0, 2.0, 2.5);
  CHECK(atom->cdf(0.49) == 0.0);
  CHECK(atom->cdf(0.51) == 1.0);

  auto law = wstar_bg(TailModel::lognormal(0.3, 0.6), 1.0, 2.0, 2.5);
  // reaches 1 exactly at t = 1/(lambda0 m - 1) = 1
  CHECK(law->cdf(1.0) == doctest::Approx(1.0));
  CHECK(law->cdf(2.0) == 1.0);
  CHECK(law->cdf(0.0) == 0.0);
  // nondecreasing
  double prev = 0.0;
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    double c = law->cdf(t);
    CHECK(c >= prev - 1e-12);
    prev = c;
  }
  // sampler consistency
  auto emp = self_sample(*law, 100000, 17);
  CHECK(ks_distance(emp, *law) < 1.36 / std::sqrt(100000.0) * 1.7);
}

TEST_CASE("cor71 mixtures") {
  LimitLawG g = LimitLawG::pareto_tail(1.5);
  auto ws = wstar_bg(TailModel::lognormal(0.3, 0.6), 1.0, 2.0, 2.5);

  // d = 0 degenerates exactly to the scaled law
  auto mix0 = cor71_mix_i(0.0, 2.0, 0.5, g, ws);
  auto scaled = scaled_law(4.0, g);
  for (double t : {0.1, 0.5, 1.0, 3.0, 10.0})
    CHECK(mix0->cdf(t) == doctest::Approx(scaled->cdf(t)).epsilon(1e-12));

  // sampling / cdf consistency for the genuine mixture and the power law
  auto mix = cor71_mix_i(1.0, 1.0, 1.0, g, ws);
  auto emp = self_sample(*mix, 25000, 5);
  CHECK(ks_distance(emp, *mix) < 1.36 / std::sqrt(25000.0) * 2.5);

  auto pw = cor71_power(1.0, 2.0, g, ws);
  auto emp2 = self_sample(*pw, 25000, 6);
  CHECK(ks_distance(emp2, *pw) < 1.36 / std::sqrt(25000.0) * 2.5);

  // mix ii is the wstar law itself
  CHECK(cor71_mix_ii(ws)->cdf(0.7) == doctest::Approx(ws->cdf(0.7)));
}

TEST_CASE("bg constants") {
  // degenerate Lambda = 3 > lambda0, m = 1: c = (3-1)^alpha exactly
  CHECK(bg_tail_constant(TailModel::deterministic(3.0), 2.0, 1.0, 2.5) ==
        doctest::Approx(std::pow(2.0, 2.5)));
  // Lambda supported below lambda0: c = 0
  CHECK(bg_tail_constant(TailModel::deterministic(1.5), 10.0, 1.0, 2.5) == 0.0);
  CHECK(bg_tail_constant(TailModel::lognormal(-1.0, 0.3), 40.0, 1.0, 2.5) ==
        doctest::Approx(0.0));

  // generic case-iii preset: c1 ties c to the net-profit margin
  BjorkGrandellModel m(TailModel::lognormal(-0.7, 0.8), 2.0,
                       TailModel::pareto(2.5, 1.5),
                       TailModel::exponential(1.0),
                       TailModel::exponential(1.0));
  auto [c, c1] = bg_constants(m, 2.5);
  CHECK(c > 0.0);
  double denom = m.mean_r() - m.claim_mean() * m.mean_lambda_r();
  CHECK(denom > 0.0);
  CHECK(c1 == doctest::Approx(c / (1.5 * denom)));
  // the degenerate-expectation spot check against direct quadrature
  double direct = bg_tail_constant(TailModel::lognormal(-0.7, 0.8), 2.0, 1.0, 2.5);
  CHECK(c == doctest::Approx(direct));
}

TEST_CASE("growth bound check") {
  // alpha = 3, beta = 2: feasible
  TailModel f3 = TailModel::discrete_power(3.0, 1000000);
  auto rep = growth_bound_check(
      f3, [](double x) { return std::ceil(x * x); });
  CHECK(rep.feasible);
  CHECK(rep.er_converges);
  CHECK(rep.bound_holds);
  CHECK(rep.recursion_ok);
  CHECK(rep.er_truncated > 1.0);
  // decade contributions decay
  auto& ds = rep.decade_sums;
  CHECK(ds[ds.size() - 1] < ds[ds.size() - 2]);

  // alpha = 2, beta = 3: E R diverges with the truncation
  TailModel f2 = TailModel::discrete_power(2.0, 1000000);
  auto rep2 = growth_bound_check(
      f2, [](double x) { return std::ceil(x * x * x); });
  CHECK_FALSE(rep2.feasible);
  CHECK_FALSE(rep2.er_converges);
  CHECK(rep2.witness_x > 0.0);

  // phi == 1: k(x) = 1 everywhere, trivially feasible
  auto rep3 = growth_bound_check(f3, [](double) { return 1.0; });
  CHECK(rep3.feasible);
  CHECK(rep3.k1 == doctest::Approx(1.0));
}

TEST_CASE("ks distances") {
  // exact draws from the law: KS below the 95% critical value (w.h.p.)
  auto law = law_of_w(LimitLawG::pareto_tail(1.5));
  auto emp = self_sample(*law, 100000, 42);
  CHECK(ks_distance(emp, *law) < 1.36 / std::sqrt(100000.0));

  // identical samples: two-sample distance 0
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  auto e1 = EmpiricalDistribution::from_values(v);
  auto e2 = EmpiricalDistribution::from_values(v);
  CHECK(ks_two_sample(e1, e2) == 0.0);

  // point mass at the median: KS = 1/2
  auto med = EmpiricalDistribution::from_values(
      std::vector<double>(1000, law_of_w(LimitLawG::std_exp())->cdf(0.0) +
                                    std::log(2.0)));
  CHECK(ks_distance(med, *law_of_w(LimitLawG::std_exp())) ==
        doctest::Approx(0.5));

  // weighted two-sample: weighting half the points to zero shifts the cdf
  auto ew = EmpiricalDistribution::from_weighted({1.0, 2.0, 3.0, 4.0},
                                                 {1.0, 1.0, 0.0, 0.0});
  CHECK(ks_two_sample(ew, e1) == doctest::Approx(0.5));
  CHECK(ew.ess() == doctest::Approx(2.0));
}

TEST_CASE("weighted empirical guards") {
  CHECK_THROWS_AS(EmpiricalDistribution::from_values({}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      EmpiricalDistribution::from_weighted({1.0, 2.0}, {0.0, 0.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      EmpiricalDistribution::from_weighted({1.0}, {1.0, 2.0}),
      std::invalid_argument);
}

TEST_CASE("trend checks") {
  auto v = trend_check({{10.0, 0.3}, {100.0, 0.15}, {1000.0, 0.07}}, 0.1);
  CHECK(v.pass);
  CHECK(v.final_stat == doctest::Approx(0.07));
  CHECK(v.slope < 0.0);

  auto flat = trend_check({{10.0, 0.3}, {100.0, 0.3}, {1000.0, 0.3}}, 0.5);
  CHECK_FALSE(flat.pass);

  auto late = trend_check({{10.0, 0.3}, {100.0, 0.2}, {1000.0, 0.15}}, 0.1);
  CHECK_FALSE(late.pass);  // decreasing but final above threshold

  CHECK_THROWS_AS(trend_check({{1.0, 0.1}, {2.0, 0.1}}, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(trend_check({{2.0, 0.1}, {1.0, 0.1}, {3.0, 0.1}}, 0.5),
                  std::invalid_argument);
}

TEST_CASE("sampler equivalence: big-jump matches crude conditional laws") {
  auto m = std::make_shared<IidWalkModel>(
      StateLaw{1.0, TailModel::pareto(2.5, 1.0), 5.0 / 3.0});
  double x = 15.0;
  RunConfig cfg;
  cfg.seed = 21;
  cfg.n_paths = 3000000;
  cfg.stop = StopRule::standard(x, 1.0);
  auto crude = conditional_sample_crude(*m, x, cfg, 2500);
  auto big = big_jump_sampler(*m, x, cfg, 2500);
  REQUIRE(crude.size() == 2500);
  REQUIRE(big.size() == 2500);

  auto pull = [](const std::vector<ExceedanceRecord>& rs, auto&& get) {
    std::vector<double> v, w;
    for (const auto& r : rs) {
      if (r.tau_rw < 1) continue;
      v.push_back(get(r));
      w.push_back(r.weight);
    }
    return EmpiricalDistribution::from_weighted(std::move(v), std::move(w));
  };
  auto tau_c = pull(crude, [](const ExceedanceRecord& r) { return r.tau; });
  auto tau_b = pull(big, [](const ExceedanceRecord& r) { return r.tau; });
  CHECK(ks_two_sample(tau_c, tau_b) < 0.08);

  auto ov_c = pull(crude, [](const ExceedanceRecord& r) { return r.overshoot; });
  auto ov_b = pull(big, [](const ExceedanceRecord& r) { return r.overshoot; });
  CHECK(ks_two_sample(ov_c, ov_b) < 0.08);
}
