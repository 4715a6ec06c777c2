#include <doctest.h>

#include <cmath>

#include "ruinwalk/models.hpp"

#include <nlohmann/json.hpp>

using namespace ruinwalk;

namespace {

StateLaw pareto_minus(double alpha, double sigma, double shift, double q = 1.0) {
  return StateLaw{q, TailModel::pareto(alpha, sigma), shift};
}

double empirical_mean_xi(const ProcessModel& m, int n, std::uint64_t seed) {
  Philox rng(seed, 0);
  CyclePath c;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    m.generate_cycle(rng, c);
    s += c.xi();
  }
  return s / n;
}

}  // namespace

TEST_CASE("cycle path bookkeeping on hand-built paths") {
  CyclePath c;
  c.add(2.0, -1.0, 0.0);  // down to -2
  c.add(5.0, 1.0, 0.0);   // up to 3
  c.finalize();
  CHECK(c.R() == 7.0);
  CHECK(c.xi() == doctest::Approx(3.0));
  CHECK(c.xi_star() == doctest::Approx(3.0));
  auto fp = c.first_passage(1.0);
  CHECK(fp.hit);
  CHECK(fp.t == doctest::Approx(5.0));  // 2 down + 3 up from -2 to 1
  CHECK(fp.piece == 1);
  CHECK_FALSE(fp.at_jump);
  auto none = c.first_passage(3.5);
  CHECK_FALSE(none.hit);
  CHECK(none.t == 7.0);

  // all-down cycle: xi_star clamps at the start limit 0
  CyclePath d;
  d.add(1.0, 0.0, -2.0);
  d.finalize();
  CHECK(d.xi() == -2.0);
  CHECK(d.xi_star() == 0.0);
  CHECK_FALSE(d.first_passage(0.0).hit);

  // jump crossing: time is the jump epoch
  CyclePath e;
  e.add(1.5, 0.0, 4.0);
  e.add(1.0, 0.0, 0.0);
  e.finalize();
  auto fj = e.first_passage(2.0);
  CHECK(fj.hit);
  CHECK(fj.t == 1.5);
  CHECK(fj.at_jump);
  CHECK(fj.piece == 0);
}

TEST_CASE("first passage is monotone in the level") {
  Philox rng(5, 0);
  auto model = RegenerativeModel(TailModel::exponential(1.0),
                                 pareto_minus(2.5, 1.0, 0.0), 5.0 / 3.0);
  CyclePath c;
  for (int i = 0; i < 2000; ++i) {
    model.generate_cycle(rng, c);
    double l1 = 0.5 * c.xi_star(), l2 = c.xi_star() * 0.9 + 0.1;
    if (l2 < l1) std::swap(l1, l2);
    auto f1 = c.first_passage(l1), f2 = c.first_passage(l2);
    CHECK(f1.t <= f2.t + 1e-12);
    // hit iff the supremum clears the level
    CHECK(f1.hit == (c.xi_star() > l1));
    CHECK(f2.hit == (c.xi_star() > l2));
  }
}

TEST_CASE("fluid two-stage geometry") {
  // deterministic stage-2 shorter than stage 1: the path never rises above 0
  FluidTwoStageModel model(2.0, TailModel::deterministic(1.0));
  Philox rng(1, 0);
  CyclePath c = model.generate_cycle(rng);
  CHECK(c.R() == doctest::Approx(3.0));
  CHECK(c.xi() == doctest::Approx(-1.0));
  CHECK(c.xi_star() == 0.0);
  CHECK_FALSE(c.first_passage(0.5).hit);

  // crossing case, exercised through the conditional sampler: r2 > x + a1,
  // crossing time a1 + (x + a1)
  FluidTwoStageModel heavy(2.0, TailModel::pareto(2.0, 1.0));
  CyclePath cc;
  auto cond = heavy.conditional_crossing_cycle(1.0, rng, cc);
  REQUIRE(cond.ok);
  auto fp = cc.first_passage(1.0);
  CHECK(fp.hit);
  CHECK(fp.t == doctest::Approx(2.0 + (1.0 + 2.0)));
  CHECK(cc.pieces()[1].dt > 1.0 + 2.0);  // r2 > x + a1
}

TEST_CASE("fluid theoretical params") {
  FluidTwoStageModel model(3.0, TailModel::pareto(2.0, 1.0));  // E R2 = 1
  auto tp = model.theoretical_params();
  CHECK(tp.a == doctest::Approx(2.0));   // a1 - a2
  CHECK(tp.mu == doctest::Approx(4.0));  // a1 + a2
  CHECK(tp.b_const == doctest::Approx(0.5));
  CHECK_THROWS_AS(FluidTwoStageModel(0.5, TailModel::pareto(2.0, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("rate construction cycles") {
  RateConstructionModel model(TailModel::discrete_power(3.0, 100000), 2.0);
  CyclePath c;
  model.cycle_for_draw(0.0, c);
  CHECK(c.R() == 1.0);
  CHECK(c.xi() == doctest::Approx(-model.b()));
  CHECK(c.xi_star() == 0.0);

  model.cycle_for_draw(7.0, c);
  CHECK(c.R() == doctest::Approx(49.0));  // phi(7) = 49
  CHECK(c.xi() == doctest::Approx(7.0));
  CHECK(c.xi_star() == doctest::Approx(7.0));
  auto fp = c.first_passage(3.0);
  CHECK(fp.hit);
  CHECK(fp.t == doctest::Approx(48.0));  // jump lands at step phi-1

  // default b = 2 E[X;X>0]/f0 makes the drift exactly -E[X;X>0]
  auto tp = model.theoretical_params();
  TailModel f = TailModel::discrete_power(3.0, 100000);
  CHECK(tp.a == doctest::Approx(f.mean()).epsilon(1e-9));
  CHECK(tp.mu > 1.0);

  CHECK_THROWS_AS(RateConstructionModel(TailModel::discrete_power(3.0, 1000),
                                        2.0, 0.01),
                  std::invalid_argument);
}

TEST_CASE("rate construction drift matches the closed form") {
  RateConstructionModel model(TailModel::discrete_power(3.0, 10000), 1.5);
  TailModel f = TailModel::discrete_power(3.0, 10000);
  double want = f.mean() - model.b() * f.density(0.0);  // sum x f_x - b f_0
  const int n = 400000;
  double got = empirical_mean_xi(model, n, 99);
  CHECK(want < 0.0);
  // 5 standard errors; xi has finite variance for alpha = 3... use a wide band
  CHECK(std::abs(got - want) < 0.05);
}

TEST_CASE("iid walk: guards, params, cycles") {
  CHECK_THROWS_AS(IidWalkModel(StateLaw{1.0, TailModel::deterministic(1.0), 0.0}),
                  std::invalid_argument);

  IidWalkModel m(pareto_minus(2.0, 1.0, 3.0));  // E xi = 1 - 3 = -2
  auto tp = m.theoretical_params();
  CHECK(tp.a == doctest::Approx(2.0));
  CHECK(tp.mu == 1.0);
  CHECK(tp.C == 1.0);
  CHECK(tp.b_const == doctest::Approx(0.5));

  double mean = empirical_mean_xi(m, 1000000, 7);
  CHECK(mean == doctest::Approx(-2.0).epsilon(0.01));
}

TEST_CASE("modulated step law") {
  // permutation chain alternates deterministically
  ModulatedWalkModel m({{0.0, 1.0}, {1.0, 0.0}},
                       {StateLaw{1.0, TailModel::deterministic(0.0), 1.0},
                        StateLaw{1.0, TailModel::deterministic(0.0), 2.0}},
                       0, TailModel::pareto(2.5, 1.0));
  Philox rng(3, 0);
  int y = 0;
  for (int i = 0; i < 10; ++i) {
    auto [inc, next] = m.modulated_step(y, rng);
    CHECK(inc == (y == 0 ? -1.0 : -2.0));
    CHECK(next == 1 - y);
    y = next;
  }

  // shifted Pareto state: empirical mean = mean(J) - shift
  ModulatedWalkModel m2({{1.0}}, {pareto_minus(2.0, 1.0, 3.0)}, 0);
  Philox rng2(11, 4);
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += m2.modulated_step(0, rng2).first;
  CHECK(s / n == doctest::Approx(-2.0).epsilon(0.005));
}

TEST_CASE("single-state modulated walk degenerates to the iid walk") {
  StateLaw law = pareto_minus(2.5, 1.0, 2.0);
  IidWalkModel iid(law);
  ModulatedWalkModel mod({{1.0}}, {law}, 0);
  Philox r1(42, 9), r2(42, 9);
  CyclePath c1, c2;
  for (int i = 0; i < 5000; ++i) {
    iid.generate_cycle(r1, c1);
    mod.generate_cycle(r2, c2);
    REQUIRE(c1.R() == c2.R());
    REQUIRE(c1.xi() == c2.xi());
    REQUIRE(c1.xi_star() == c2.xi_star());
  }
}

TEST_CASE("modulated walk params") {
  // symmetric two-state chain with a_1 = -1, a_2 = -3
  ModulatedWalkModel m({{0.5, 0.5}, {0.5, 0.5}},
                       {pareto_minus(2.5, 1.0, 1.0 + 2.0 / 3.0),
                        pareto_minus(2.5, 1.0, 3.0 + 2.0 / 3.0)},
                       0);
  auto tp = m.theoretical_params();
  CHECK(tp.pi[0] == doctest::Approx(0.5));
  CHECK(tp.a == doctest::Approx(2.0));
  CHECK(tp.mu == doctest::Approx(2.0));  // return time = 1/pi(y0)
  CHECK(tp.C == doctest::Approx(1.0).epsilon(0.01));
  CHECK(tp.kappa == doctest::Approx(-1.0));
  CHECK(tp.cycle_drift == doctest::Approx(4.0));

  // mixture state: c(y) = heavy_prob
  ModulatedWalkModel m3({{0.5, 0.5}, {0.5, 0.5}},
                        {pareto_minus(2.5, 1.0, 1.0),
                         pareto_minus(2.5, 1.0, 1.0, 0.5)},
                        0);
  auto tp3 = m3.theoretical_params();
  CHECK(tp3.c_y[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(tp3.c_y[1] == doctest::Approx(0.5).epsilon(0.01));
  CHECK(tp3.C == doctest::Approx(0.75).epsilon(0.01));

  // non-irreducible chain rejected
  CHECK_THROWS_AS(ModulatedWalkModel({{1.0, 0.0}, {0.5, 0.5}},
                                     {pareto_minus(2.5, 1.0, 2.0),
                                      pareto_minus(2.5, 1.0, 2.0)},
                                     0),
                  std::invalid_argument);
}

TEST_CASE("modulated walk cycle mean matches pi-weighted drift") {
  ModulatedWalkModel m({{0.2, 0.8}, {0.6, 0.4}},
                       {pareto_minus(2.5, 1.0, 2.0),
                        pareto_minus(2.5, 1.0, 1.0, 0.5)},
                       0);
  auto tp = m.theoretical_params();
  double want = -tp.cycle_drift;
  double got = empirical_mean_xi(m, 400000, 13);
  CHECK(got == doctest::Approx(want).epsilon(0.02));
}

TEST_CASE("bjork-grandell cycles") {
  // no arrivals => pure premium drain
  BjorkGrandellModel m(BjorkGrandellModel::Case::HeavyClaims,
                       TailModel::deterministic(0.5),
                       TailModel::exponential(1.0),
                       TailModel::pareto(2.5, 1.0));
  Philox rng(17, 0);
  CyclePath c;
  bool saw_empty = false, saw_claims = false;
  for (int i = 0; i < 200 && !(saw_empty && saw_claims); ++i) {
    m.generate_cycle(rng, c);
    if (c.pieces().size() == 1) {
      saw_empty = true;
      CHECK(c.xi() == doctest::Approx(-c.R()));
      CHECK(c.xi_star() == 0.0);
    } else {
      saw_claims = true;
      CHECK(c.xi_star() >= c.xi());
    }
  }
  CHECK(saw_empty);
  CHECK(saw_claims);

  // Wald identity: E xi = m E(R Lambda) - E R
  double want = (2.0 / 3.0) * 0.5 * 1.0 - 1.0;
  double got = empirical_mean_xi(m, 400000, 23);
  CHECK(got == doctest::Approx(want).epsilon(0.02));

  // net-profit guard
  CHECK_THROWS_AS(
      BjorkGrandellModel(BjorkGrandellModel::Case::HeavyClaims,
                         TailModel::deterministic(2.0),
                         TailModel::exponential(1.0),
                         TailModel::pareto(2.5, 1.0)),
      std::invalid_argument);
}

TEST_CASE("bjork-grandell case iii params") {
  BjorkGrandellModel m(TailModel::lognormal(-0.7, 0.8), 2.0,
                       TailModel::pareto(2.5, 1.5),
                       TailModel::exponential(1.0),
                       TailModel::exponential(1.0));
  auto tp = m.theoretical_params();
  CHECK(tp.a > 0.0);
  CHECK(tp.mu == doctest::Approx(m.mean_r()));
  // Wald check through the simulator
  double want = m.claim_mean() * m.mean_lambda_r() - m.mean_r();
  double got = empirical_mean_xi(m, 400000, 31);
  CHECK(got == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("condition checks") {
  std::vector<double> grid;
  for (int i = 0; i < 24; ++i) grid.push_back(4.0 * std::pow(1.6, i));

  // all states equal to the reference: c = 1, pass
  ModulatedWalkModel m({{0.5, 0.5}, {0.5, 0.5}},
                       {pareto_minus(2.5, 1.0, 2.0), pareto_minus(2.5, 1.0, 2.0)},
                       0);
  auto rep = m.check_conditions(TailModel::pareto(2.5, 1.0), grid);
  CHECK(rep.c1_pass);
  CHECK(rep.c2_hat[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rep.c2_hat[1] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rep.c4_pass);
  CHECK(rep.pass);

  // mixture state fits c = 0.5
  ModulatedWalkModel m2({{0.5, 0.5}, {0.5, 0.5}},
                        {pareto_minus(2.5, 1.0, 2.0),
                         pareto_minus(2.5, 1.0, 1.0, 0.5)},
                        0);
  auto rep2 = m2.check_conditions(TailModel::pareto(2.5, 1.0), grid);
  CHECK(rep2.c2_hat[1] == doctest::Approx(0.5).epsilon(0.01));

  // fluid with cycle length as heavy as the reference: (6.1) fails
  FluidTwoStageModel fluid(3.0, TailModel::pareto(2.0, 1.0));
  auto rep3 = fluid.check_conditions(TailModel::pareto(2.0, 1.0), grid);
  CHECK_FALSE(rep3.c4_pass);
  CHECK_FALSE(rep3.pass);

  // iid walk: unit cycles are trivially light
  IidWalkModel iid(pareto_minus(2.5, 1.0, 2.0));
  auto rep4 = iid.check_conditions(TailModel::pareto(2.5, 1.0), grid);
  CHECK(rep4.c4_pass);
  CHECK(rep4.c4_redundant);
}

TEST_CASE("model json round trips") {
  std::vector<ModelPtr> models;
  models.push_back(std::make_shared<IidWalkModel>(pareto_minus(2.5, 1.0, 5.0 / 3.0)));
  models.push_back(std::make_shared<RegenerativeModel>(
      TailModel::exponential(1.0), pareto_minus(2.5, 1.0, 0.0), 5.0 / 3.0));
  models.push_back(std::make_shared<ModulatedWalkModel>(
      std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}},
      std::vector<StateLaw>{pareto_minus(2.5, 1.0, 2.0),
                            pareto_minus(2.5, 1.0, 1.0, 0.5)},
      0, TailModel::pareto(2.5, 1.0)));
  models.push_back(std::make_shared<FluidTwoStageModel>(
      3.0, TailModel::weibull_heavy(0.5, 1.0)));
  models.push_back(std::make_shared<RateConstructionModel>(
      TailModel::discrete_power(3.0, 100000), 2.0));
  models.push_back(std::make_shared<BjorkGrandellModel>(
      TailModel::lognormal(-0.7, 0.8), 2.0, TailModel::pareto(2.5, 1.5),
      TailModel::exponential(1.0), TailModel::exponential(1.0)));
  for (const auto& m : models) {
    auto back = ProcessModel::from_json(m->to_json());
    CHECK(back->to_json() == m->to_json());
  }
}

TEST_CASE("conditional crossing cycles cross and carry finite weights") {
  std::vector<ModelPtr> models;
  models.push_back(std::make_shared<IidWalkModel>(pareto_minus(2.5, 1.0, 5.0 / 3.0)));
  models.push_back(std::make_shared<RegenerativeModel>(
      TailModel::exponential(1.0), pareto_minus(2.5, 1.0, 0.0), 5.0 / 3.0));
  models.push_back(std::make_shared<ModulatedWalkModel>(
      std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}},
      std::vector<StateLaw>{pareto_minus(2.5, 1.0, 2.0),
                            pareto_minus(2.5, 1.0, 1.0, 0.5)},
      0, TailModel::pareto(2.5, 1.0)));
  models.push_back(std::make_shared<FluidTwoStageModel>(
      3.0, TailModel::pareto(2.0, 1.0)));
  models.push_back(std::make_shared<RateConstructionModel>(
      TailModel::discrete_power(3.0, 100000), 2.0));
  Philox rng(8, 2);
  CyclePath c;
  for (const auto& m : models) {
    int crossings = 0;
    for (int i = 0; i < 500; ++i) {
      double level = 5.0 + 20.0 * rng.next_double();
      auto cc = m->conditional_crossing_cycle(level, rng, c);
      if (!cc.ok) continue;
      CHECK(std::isfinite(cc.log_weight));
      auto fp = c.first_passage(level);
      CHECK(fp.hit);
      if (cc.crossing_piece >= 0 && fp.piece == cc.crossing_piece) ++crossings;
      if (cc.crossing_piece == -2 && fp.hit) ++crossings;
    }
    CHECK(crossings > 400);  // designated mechanism usually achieves passage
  }
}
