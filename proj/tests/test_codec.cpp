#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qswitch/sim.hpp"

using namespace qswitch;
using numerics::op_norm_inf;
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

std::shared_ptr<const ProtocolTables> example_tables() {
  static const auto t = std::make_shared<const ProtocolTables>(example(), example_cert(), QuantizerConfig{11, 0.1, 1.0});
  return t;
}

Vec scalar(double v) { return (Vec(1) << v).finished(); }

// Drives a codec through a zero-output zoom-out window in `mode`; the next
// sample opens the first zoom-in cycle.
void finish_window(Codec& c, ModeId mode) {
  const int eta = c.tables().mode(mode).eta_p;
  for (int i = 0; i < eta; ++i) (void)c.encode_sample(Vec::Zero(c.tables().p()), mode);
  REQUIRE(c.state().stage == Stage::ZoomIn);
}

// Single-mode system with identity output, N = 3.
struct IdentityCase {
  SwitchedSystem sys;
  Certificate cert;
  std::shared_ptr<const ProtocolTables> tables;
};

IdentityCase identity_case(const Mat& A) {
  const ModeDef m{1, A, Mat::Identity(2, 2), Mat::Identity(2, 2), -Mat::Identity(2, 2)};
  SwitchedSystem sys({m}, 0.5);
  CertParams p;
  p.N = 3;
  Certificate cert = certify(sys, p);
  auto tables = std::make_shared<const ProtocolTables>(sys, cert, QuantizerConfig{3, 0.1, 1.0});
  return {std::move(sys), std::move(cert), std::move(tables)};
}

}  // namespace

TEST_CASE("mu growth law") {
  const QuantizerConfig q{11, 0.1, 1.0};
  CHECK(mu(0, q, example()) == 0.1);
  CHECK(mu(1, q, example()) == doctest::Approx(0.1 * std::exp(3.0)).epsilon(1e-14));
  CHECK(mu(1, q, example()) == doctest::Approx(2.0086).epsilon(1e-4));
  for (int n = 0; n < 20; ++n) CHECK(mu(n + 1, q, example()) > mu(n, q, example()));
  CHECK(mu(3, QuantizerConfig{11, 0.1, 2.0}, example()) > mu(3, q, example()));
  CHECK(example_tables()->mu(4) == mu(4, q, example()));
}

TEST_CASE("tables validate the quantizer") {
  CHECK_THROWS_AS(ProtocolTables(example(), example_cert(), QuantizerConfig{10, 0.1, 1.0}), ConfigError);
  CHECK_THROWS_AS(ProtocolTables(example(), example_cert(), QuantizerConfig{11, 0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(ProtocolTables(example(), example_cert(), QuantizerConfig{13, 0.1, 1.0}), ConfigError);
  CHECK(example_tables()->box_count() == 11);
}

TEST_CASE("zoom-out overflow bits") {
  Codec c(example_tables());
  CHECK(c.control_input(0.0).norm() == 0.0);
  CHECK(c.encode_sample(scalar(0.1), 1).value == 0);  // boundary is inside
  CHECK(c.state().window_zeros == 1);
  CHECK(c.encode_sample(scalar(-10.0), 1).value == 1);
  CHECK(c.state().window_zeros == 0);
  CHECK(c.state().xi.norm() == 0.0);
  CHECK(c.encode_sample(scalar(1e-3), 1).value == 0);
  CHECK(c.encode_sample(scalar(1e-3), 2).value == 0);  // mode change restarts the window
  CHECK(c.state().window_zeros == 1);
  CHECK(c.state().stage == Stage::ZoomOut);
  CHECK(c.encode_sample(scalar(1e-3), 2).value == 0);
  CHECK(c.state().stage == Stage::ZoomIn);
  CHECK(c.state().last == Transition::ZoomOutDone);
  CHECK(c.state().k0 == 5);
  CHECK(c.state().E > 0.0);
  CHECK(c.control_input(2.0).norm() == 0.0);
}

TEST_CASE("finish_zoom_out bound") {
  Codec c(example_tables());
  finish_window(c, 1);
  const auto& t = example_tables()->mode(1);
  const double E_n0 = t.W_dagger_inf * example_tables()->mu(1);
  CHECK(c.state().E == doctest::Approx(std::exp(3.0 * 0.5) * op_norm_inf(numerics::mat_exp(fixture::mode1().A, 0.5)) * E_n0));

  const IdentityCase ic = identity_case(Mat::Zero(2, 2));
  Codec z(ic.tables);
  CHECK(z.tables().mode(1).eta_p == 1);
  (void)z.encode_sample(Vec::Zero(2), 1);
  CHECK(z.state().E == doctest::Approx(0.1));
}

TEST_CASE("zoom-in quantizer geometry") {
  Codec c(example_tables());
  finish_window(c, 1);
  const Symbol s = c.encode_sample(scalar(0.0), 1);  // xi = 0, so yhat = 0
  CHECK(s.kind == PayloadKind::BoxIndex);
  CHECK(s.value == 6);
  CHECK(c.state().last == Transition::CycleStart);
  CHECK(c.quantize(scalar(0.0)) == 6);
  CHECK(c.box_center(6)(0) == 0.0);

  c.corrupt_error_bound(0.5);  // r = ||C1||_inf * 0.5 = 1 at l = 0
  CHECK(c.box_center(1)(0) == doctest::Approx(-10.0 / 11.0));
  CHECK(c.box_center(11)(0) == doctest::Approx(10.0 / 11.0));
  CHECK(c.quantize(scalar(1.0)) == 11);
  CHECK(c.quantize(scalar(-1.0)) == 1);
  // A box boundary goes to the lower-index box.
  CHECK(c.quantize(scalar(1.0 / 11.0)) == 6);
  CHECK(c.quantize(scalar(1.0 / 11.0 + 1e-12)) == 7);
  CHECK_THROWS_AS((void)c.quantize(scalar(1.01)), OverflowError);
  CHECK_THROWS_AS((void)c.box_center(0), ProtocolError);
  CHECK_THROWS_AS((void)c.box_center(12), ProtocolError);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double y = u(rng);
    CHECK(std::abs(y - c.box_center(c.quantize(scalar(y)))(0)) <= 1.0 / 11.0 + 1e-15);
  }
}

TEST_CASE("mixed-radix box index for two outputs") {
  const IdentityCase ic = identity_case(-Mat::Identity(2, 2));
  Codec c(ic.tables);
  (void)c.encode_sample(Vec::Zero(2), 1);
  REQUIRE(c.state().stage == Stage::ZoomIn);
  (void)c.encode_sample(Vec::Zero(2), 1);
  c.corrupt_error_bound(1.0);  // r = ||I||_inf * 1 at l = 0
  // Digits (2, 1): first coordinate in the top third, second in the middle.
  CHECK(c.quantize((Vec(2) << 0.8, 0.0).finished()) == 6);
  const Vec center = c.box_center(6);
  CHECK(center(0) == doctest::Approx(2.0 / 3.0));
  CHECK(center(1) == doctest::Approx(0.0));
  CHECK(ic.tables->box_count() == 9);
}

TEST_CASE("payload kind must match the stage") {
  Codec c(example_tables());
  CHECK_THROWS_AS(c.decode_symbol({1, PayloadKind::BoxIndex, 3}), ProtocolError);
  Codec d(example_tables());
  CHECK_THROWS_AS(d.decode_symbol({1, PayloadKind::OverflowBit, 2}), ProtocolError);
  Codec e(example_tables());
  finish_window(e, 1);
  CHECK_THROWS_AS(e.decode_symbol({1, PayloadKind::OverflowBit, 0}), ProtocolError);
}

TEST_CASE("encoder and decoder stay in lockstep on random streams") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Codec enc(example_tables()), dec(example_tables());
    ModeId mode = 1;
    for (int k = 0; k < 200; ++k) {
      if (u(rng) > 0.8) mode = 3 - mode;
      // Outputs stay inside the hypercube: probe once, then retry from the center.
      Codec probe = enc;
      Symbol sym;
      try {
        sym = probe.encode_sample(scalar(5.0 * u(rng)), mode);
        enc = probe;
      } catch (const OverflowError&) {
        const CodecState& st = probe.state();
        const auto& t = example_tables()->mode(*st.cycle_mode);
        const double r = t.r_gain[static_cast<std::size_t>(st.l)] * st.E;
        const double yhat = (t.C * st.xi)(0);
        sym = enc.encode_sample(scalar(yhat + 0.99 * r * u(rng)), mode);
      }
      dec.decode_symbol(sym);
      REQUIRE(enc.state() == dec.state());
    }
  }
}

TEST_CASE("cycle reconstruction meets the contraction bound") {
  const auto tables = example_tables();
  const ModeCert& c1 = example_cert().mode(1);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Codec c(tables);
    finish_window(c, 1);
    const double E0 = c.state().E;
    const double ts = 0.5;
    // Any state consistent with |x - 0|_inf <= E0.
    Vec x = (Vec(2) << u(rng), u(rng)).finished() * E0;
    Vec xi = Vec::Zero(2);
    for (int l = 0; l < c1.eta_p; ++l) {
      (void)c.encode_sample(fixture::mode1().C * x, 1);
      std::tie(x, xi) = propagate(example(), x, c.state().xi, 1, 1, ts);
    }
    (void)c.encode_sample(fixture::mode1().C * x, 1);
    REQUIRE(c.state().last == Transition::NoSwitchEnd);
    CHECK(c.state().E == doctest::Approx(c1.theta_p * E0).epsilon(1e-15));
    worst = std::max(worst, vec_norm_inf(x - c.state().xi) / (c1.theta_p * E0));
  }
  CHECK(worst <= 1.0 + 1e-9);
}

TEST_CASE("exact estimate is a fixed point of reconstruction") {
  Codec c(example_tables());
  finish_window(c, 1);
  // x = xi = 0 and y on the predicted centers.
  (void)c.encode_sample(scalar(0.0), 1);
  (void)c.encode_sample(scalar(0.0), 1);
  (void)c.encode_sample(scalar(0.0), 1);
  CHECK(c.state().last == Transition::NoSwitchEnd);
  CHECK(c.state().xi.norm() == 0.0);
}

TEST_CASE("switch update bounds the error") {
  const auto tables = example_tables();
  const PairCert& pc = example_cert().pair(1, 2);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + trial % 2;
    const double tau = 0.5 * phase(rng);
    Codec c(tables);
    finish_window(c, 1);
    const double E0 = c.state().E;
    Vec x = (Vec(2) << u(rng), u(rng)).finished() * E0;
    Vec xi = Vec::Zero(2);
    for (int l = 0; l < k; ++l) {
      (void)c.encode_sample(fixture::mode1().C * x, 1);
      if (l < k - 1) {
        std::tie(x, xi) = propagate(example(), x, c.state().xi, 1, 1, 0.5);
      } else {
        std::tie(x, xi) = propagate(example(), x, c.state().xi, 1, 1, tau);
        std::tie(x, xi) = propagate(example(), x, xi, 2, 1, 0.5 - tau);
      }
    }
    (void)c.encode_sample(fixture::mode2().C * x, 2);
    REQUIRE(c.state().last == Transition::SwitchUpdate);
    CHECK(c.state().switch_offset == k);
    // xi(k0) = 0, so only the gamma' term remains.
    CHECK(c.state().E == doctest::Approx(pc.gamma_prime_bar[static_cast<std::size_t>(k - 1)] * E0).epsilon(1e-15));
    CHECK(c.state().cycle_mode == 2);
    worst = std::max(worst, vec_norm_inf(x - c.state().xi) / c.state().E);
  }
  CHECK(worst <= 1.0 + 1e-9);
}

TEST_CASE("control input follows the estimate") {
  Codec c(example_tables());
  CHECK(c.control_input(0.3).norm() == 0.0);
  finish_window(c, 1);
  (void)c.encode_sample(scalar(0.0), 1);
  CHECK(c.control_input(1.0).norm() == 0.0);

  Codec d(example_tables());
  finish_window(d, 1);
  (void)d.encode_sample(scalar(20.0), 1);
  (void)d.encode_sample(scalar(10.0), 1);
  (void)d.encode_sample(scalar(0.5), 1);
  REQUIRE(d.state().last == Transition::NoSwitchEnd);
  const double t0 = static_cast<double>(d.state().k0) * 0.5;
  const Vec u0 = d.control_input(t0);
  CHECK((u0 - fixture::mode1().K * d.state().xi_k0).norm() <= 1e-14);
  CHECK(u0.norm() > 0.0);
}

TEST_CASE("switch to an unknown mode is a configuration error") {
  Codec c(example_tables());
  finish_window(c, 1);
  (void)c.encode_sample(scalar(0.0), 1);
  CHECK_THROWS_AS(c.cycle_switch_update(9, 1), ConfigError);
}
