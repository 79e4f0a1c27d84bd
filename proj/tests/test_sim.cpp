#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qswitch/sim.hpp"

using namespace qswitch;
using numerics::vec_norm_inf;

namespace {

const SwitchedSystem& example() {
  static const SwitchedSystem sys = fixture::example_system();
  return sys;
}

const Certificate& example_cert() {
  static const Certificate cert = certify(example(), fixture::example_params(11, 256));
  return cert;
}

const QuantizerConfig kQ{11, 0.1, 1.0};

SwitchingSignal example_signal(std::uint64_t seed = 7) {
  return random_signal(SignalGenerator{seed, {1, 5.8}, 2.6, 20.0, 1}, 0.5, {1, 2});
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST_CASE("propagate") {
  const Vec x = v2(1.0, -2.0), xi = v2(0.5, 0.25);
  auto [x0, xi0] = propagate(example(), x, xi, 1, 2, 0.0);
  CHECK(x0 == x);
  CHECK(xi0 == xi);
  CHECK_THROWS((void)propagate(example(), x, xi, 1, 1, -0.1));

  auto [xs, xis] = propagate(example(), x, x, 1, 1, 0.7);
  CHECK(oracle::rel_err(xs, oracle::taylor_exp(fixture::mode1().closed_loop(), 0.7) * x) <= 1e-12);
  CHECK(oracle::rel_err(xis, xs) <= 1e-12);

  auto [xz, xiz] = propagate(example(), x, Vec::Zero(2), 2, std::nullopt, 0.5);
  CHECK(oracle::rel_err(xz, oracle::taylor_exp(fixture::mode2().A, 0.5) * x) <= 1e-12);
  CHECK(xiz.norm() == 0.0);
}

TEST_CASE("mismatch propagation agrees with RK4") {
  const ModeDef m1 = fixture::mode1(), m2 = fixture::mode2();
  std::mt19937_64 rng(8);
  for (auto [plant, ctrl] : {std::pair{1, 2}, std::pair{2, 1}, std::pair{1, 1}}) {
    const ModeDef& P = plant == 1 ? m1 : m2;
    const ModeDef& C = ctrl == 1 ? m1 : m2;
    const Vec x = oracle::random_matrix(rng, 2, 1, 3.0).col(0);
    const Vec xi = oracle::random_matrix(rng, 2, 1, 3.0).col(0);
    auto [xe, xie] = propagate(example(), x, xi, plant, ctrl, 0.5);
    Vec z(4);
    z << x, xi;
    const Vec zr = oracle::rk4(
        [&](const Vec& s) -> Vec {
          Vec d(4);
          d.head(2) = P.A * s.head(2) + P.B * (C.K * s.tail(2));
          d.tail(2) = C.closed_loop() * s.tail(2);
          return d;
        },
        z, 0.5, 1e-4);
    CHECK((xe - zr.head(2)).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK((xie - zr.tail(2)).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("lyapunov_value") {
  const ModeCert& c = example_cert().mode(1);
  CHECK(lyapunov_value(example_cert(), 1, Vec::Zero(2), 0.0) == 0.0);
  CHECK(lyapunov_value(example_cert(), 1, Vec::Zero(2), 2.0) == doctest::Approx(4.0 * c.rho_p));
  const Vec x = v2(0.3, -1.1);
  CHECK(lyapunov_value(example_cert(), 1, 3.0 * x, 0.0) == doctest::Approx(9.0 * lyapunov_value(example_cert(), 1, x, 0.0)));
}

TEST_CASE("example scenario timing and convergence") {
  const SimConfig cfg{v2(-3.0, 3.0), example_signal(), 20.0, std::nullopt, false};
  REQUIRE(cfg.signal.events().front().time > 1.0);
  const TrajectoryLog log = run(example(), cfg, kQ, example_cert());
  REQUIRE(log.summary.zoom_out_end.has_value());
  CHECK(*log.summary.zoom_out_end == 1.0);
  REQUIRE(log.summary.first_nonzero_u.has_value());
  CHECK(*log.summary.first_nonzero_u == 2.0);
  CHECK(log.summary.final_state_norm < 0.1 * cfg.x0.norm());
  CHECK(log.summary.e_dominance_ok);
  CHECK(log.summary.cycle_contraction_ok);
  CHECK(log.records.size() == 41);
  CHECK(log.records.back().t == 20.0);
}

TEST_CASE("switch-free runs decay geometrically") {
  const SwitchedSystem sys({fixture::mode1()}, 0.5);
  CertParams p;
  p.per_mode[1] = {Mat::Identity(2, 2), 1.124, 47.0};
  const Certificate cert = certify(sys, p);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x0 = oracle::random_matrix(rng, 2, 1, 10.0).col(0);
    const SimConfig cfg{x0, SwitchingSignal(1, {}, 40.0), 40.0, std::nullopt, false};
    const TrajectoryLog log = run(sys, cfg, kQ, cert);
    const InvariantReport rep = check_invariants(log, cert);
    CHECK(rep.ok());
    CHECK(rep.switch_checks == 0);
    CHECK(rep.no_switch_checks > 10);
    CHECK(log.summary.final_state_norm < 1e-3);

    // V(k0 + j eta) <= nu^j V(k0) from the first cycle start on.
    const SampleRecord* first = nullptr;
    int j = 0;
    for (const SampleRecord& r : log.records) {
      if (r.transition == Transition::CycleStart) first = &r;
      if (r.transition == Transition::NoSwitchEnd && first) {
        ++j;
        CHECK(r.V <= std::pow(cert.nu, j) * first->V * (1.0 + 1e-9));
      }
    }
  }
}

TEST_CASE("check_invariants fault injection") {
  const SimConfig cfg{v2(-3.0, 3.0), example_signal(), 20.0, std::nullopt, false};
  TrajectoryLog log = run(example(), cfg, kQ, example_cert());
  const InvariantReport clean = check_invariants(log, example_cert());
  CHECK(clean.ok());
  CHECK(clean.switch_checks > 0);

  // Shrink one post-zoom-out bound below the actual error.
  for (SampleRecord& r : log.records) {
    if (r.is_sample && r.ctrl_mode && r.e_inf > 0.0) {
      r.E = 0.5 * r.e_inf;
      break;
    }
  }
  const InvariantReport bad = check_invariants(log, example_cert());
  CHECK_FALSE(bad.e_dominance_ok);
  REQUIRE(bad.first_violation.has_value());
  CHECK(bad.first_violation->find("E-dominance") != std::string::npos);
}

TEST_CASE("intersample logging does not change the trajectory") {
  const SwitchingSignal sig = example_signal(3);
  SimConfig a{v2(2.0, -1.0), sig, 17.3, 0.1, true};
  SimConfig b = a;
  b.substep = 0.05;
  SimConfig c = a;
  c.record_intersample = false;
  const TrajectoryLog la = run(example(), a, kQ, example_cert());
  const TrajectoryLog lb = run(example(), b, kQ, example_cert());
  const TrajectoryLog lc = run(example(), c, kQ, example_cert());
  CHECK((la.x_end - lb.x_end).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((la.x_end - lc.x_end).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(lb.records.size() > la.records.size());
  for (std::size_t i = 1; i < la.records.size(); ++i) CHECK(la.records[i].t >= la.records[i - 1].t);
}

TEST_CASE("switch exactly at a sampling instant") {
  const SwitchingSignal sig(1, {{4.0, 2}, {11.0, 1}}, 20.0);
  const TrajectoryLog log = run(example(), {v2(1.0, 1.0), sig, 20.0, std::nullopt, false}, kQ, example_cert());
  for (const SampleRecord& r : log.records) {
    if (r.t == 4.0) {
      CHECK(r.plant_mode == 2);
      CHECK(r.symbol->mode == 2);
    }
  }
  CHECK(check_invariants(log, example_cert()).ok());
}

TEST_CASE("runs are deterministic and CSVs match byte for byte") {
  const SimConfig cfg{v2(-3.0, 3.0), example_signal(), 20.0, 0.1, true};
  std::ostringstream a, b, sa, sb;
  write_trajectory_csv(run(example(), cfg, kQ, example_cert()), a);
  const TrajectoryLog l2 = run(example(), cfg, kQ, example_cert());
  write_trajectory_csv(l2, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("t,x1,x2,xi1,xi2,e_inf,E,plant_mode,ctrl_mode,stage,V\n", 0) == 0);
  write_symbol_csv(l2, 0.5, sa);
  CHECK(sa.str().rfind("k,t,mode,payload_kind,payload_value\n0,0,1,bit,", 0) == 0);
}

TEST_CASE("batch runs: serial and parallel agree, E-dominance holds") {
  std::mt19937_64 rng(5);
  std::vector<BatchJob> jobs;
  for (int i = 0; i < 200; ++i) {
    const Vec x0 = oracle::random_matrix(rng, 2, 1, 10.0).col(0);
    SignalGenerator g{rng(), {1 + i % 2, example_cert().tau_a_min}, 0.5 + (i % 3), 30.0, std::nullopt};
    jobs.push_back({x0, g, 30.0});
  }
  const auto ser = run_batch(example(), kQ, example_cert(), jobs, Exec::Serial);
  const auto par = run_batch(example(), kQ, example_cert(), jobs, Exec::Parallel);
  REQUIRE(ser.size() == par.size());
  for (std::size_t i = 0; i < ser.size(); ++i) {
    CHECK_FALSE(ser[i].error.has_value());
    CHECK(ser[i].report.ok());
    CHECK(ser[i].peak_state_inf == par[i].peak_state_inf);
    CHECK(ser[i].summary.final_state_norm == par[i].summary.final_state_norm);
  }
}

TEST_CASE("empirical stability ladder") {
  StabilityOptions opt;
  opt.scales = {0.0};
  opt.trials = 3;
  opt.generator = {0, {1, example_cert().tau_a_min}, 2.6, 20.0, std::nullopt};
  const StabilityReport zero = empirical_lyapunov_stability(example(), kQ, example_cert(), opt);
  REQUIRE(zero.peaks.size() == 1);
  CHECK(zero.peaks[0] == 0.0);

  opt.scales = {1.0, 0.1, 0.01};
  opt.trials = 5;
  const StabilityReport rep = empirical_lyapunov_stability(example(), kQ, example_cert(), opt);
  CHECK(rep.ok());
  opt.epsilon *= 2.0;
  CHECK(empirical_lyapunov_stability(example(), kQ, example_cert(), opt).ok());
}
