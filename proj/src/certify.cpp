#include "qswitch/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qswitch {

using numerics::cross_gramian;
using numerics::mat_exp;
using numerics::op_norm_2;
using numerics::op_norm_inf;
using numerics::shifted_cross_gramian;

namespace {
std::string mode_name(ModeId id) { return "mode " + std::to_string(id); }
}  // namespace

const ModeCert& Certificate::mode(ModeId id) const {
  for (const ModeCert& m : modes) {
    if (m.id == id) return m;
  }
  throw ConfigError("certificate has no " + mode_name(id));
}

const PairCert& Certificate::pair(ModeId p, ModeId q) const {
  for (const PairCert& pc : pairs) {
    if (pc.p == p && pc.q == q) return pc;
  }
  throw ConfigError("certificate has no pair (" + std::to_string(p) + ", " + std::to_string(q) + ")");
}

double data_rate_lhs(const ModeDef& mode, double tau_s) {
  const int eta = eta_of_mode(mode, tau_s);
  const Mat Wd = numerics::pinv_left(stack_W(mode, tau_s, eta));
  const double recon = op_norm_inf(mat_exp(mode.A, eta * tau_s) * Wd);
  double spread = 0.0;
  for (int k = 0; k < eta; ++k) spread = std::max(spread, op_norm_inf(mode.C * mat_exp(mode.A, k * tau_s)));
  return recon * spread;
}

AdmissibleN min_admissible_N(const SwitchedSystem& sys) {
  double worst = 0.0;
  for (const ModeDef& md : sys.modes()) worst = std::max(worst, data_rate_lhs(md, sys.tau_s()));
  const int n_int = static_cast<int>(std::floor(worst)) + 1;
  int n_odd = std::max(3, n_int);
  if (n_odd % 2 == 0) ++n_odd;
  return {n_int, n_odd};
}

ClosedLoopMaps closed_loop_maps(const ModeDef& mode, double tau_s, int eta) {
  const Mat F = mode.closed_loop();
  const double span = eta * tau_s;
  return {mat_exp(F, span), cross_gramian(F, mode.B * mode.K, mode.A, span)};
}

ModeCert mode_cert(const ModeDef& mode, const Mat& Q, double kappa, std::optional<double> rho, int N,
                   double tau_s) {
  const std::string who = mode_name(mode.id);
  if (!(kappa > 1.0)) throw ConfigError(who + ": kappa_p must exceed 1");
  if (N < 3 || N % 2 == 0) throw ConfigError("N must be an odd integer >= 3");
  const int n = static_cast<int>(mode.A.rows());
  if (Q.rows() != n || Q.cols() != n) throw DimensionError(who + ": Q_p must be n x n");

  ModeCert c;
  c.id = mode.id;
  c.eta_p = eta_of_mode(mode, tau_s);
  c.W_dagger = numerics::pinv_left(stack_W(mode, tau_s, c.eta_p));
  c.lhs4 = data_rate_lhs(mode, tau_s);
  c.theta_p = c.lhs4 / N;
  if (!(c.theta_p < 1.0)) {
    std::ostringstream os;
    os << who << ": data rate insufficient (theta_p = " << c.theta_p << " >= 1; need N > " << c.lhs4 << ")";
    throw InfeasibleError(os.str());
  }

  auto maps = closed_loop_maps(mode, tau_s, c.eta_p);
  c.Abar = std::move(maps.Abar);
  c.Bbar = std::move(maps.Bbar);
  c.Q_p = Q;
  c.kappa_p = kappa;

  const auto [q_min, q_max] = numerics::eig_extremes_sym(Q);
  (void)q_max;
  if (!(q_min > 0.0)) throw ConfigError(who + ": Q_p must be positive definite");

  c.P_p = numerics::dlyap(c.Abar, Q);
  std::tie(c.lambda_min_P, c.lambda_max_P) = numerics::eig_extremes_sym(c.P_p);

  c.alpha_p = q_min / kappa;
  const double cross = op_norm_2(c.Abar.transpose() * c.P_p * c.Bbar);
  const double diag = op_norm_2(c.Bbar.transpose() * c.P_p * c.Bbar);
  c.beta_p = n * (kappa / (kappa - 1.0) * cross * cross / q_min + diag);

  const double rho_floor = c.beta_p / (1.0 - c.theta_p * c.theta_p);
  c.rho_p = rho.value_or(2.0 * rho_floor);
  if (!(c.rho_p > rho_floor)) {
    std::ostringstream os;
    os << who << ": rho_p = " << c.rho_p << " violates rho_p > beta_p/(1 - theta_p^2) = " << rho_floor;
    throw InfeasibleError(os.str());
  }

  c.nu_p = std::max(1.0 - c.alpha_p / c.lambda_max_P, c.beta_p / c.rho_p + c.theta_p * c.theta_p);
  return c;
}

PairKernel::PairKernel(const SwitchedSystem& sys, ModeId p, ModeId q) : tau_s_(sys.tau_s()) {
  if (p == q) throw std::invalid_argument("pair_cert: p and q must differ");
  const ModeDef& mp = sys.mode(p);
  const ModeDef& mq = sys.mode(q);
  Ap_ = mp.A;
  Aq_ = mq.A;
  Fp_ = mp.closed_loop();
  BpKp_ = mp.B * mp.K;
  BqKp_ = mq.B * mp.K;
  H_ = (mq.A - mp.A) + (mq.B - mp.B) * mp.K;
  sqrt_n_ = std::sqrt(static_cast<double>(sys.n()));
}

TauSample PairKernel::at(int k, double tau) const {
  const double lead = (k - 1) * tau_s_;  // whole samples elapsed before the switch interval
  const Mat lead_flow = mat_exp(Fp_, lead);
  const Mat plant_q = mat_exp(Aq_, tau_s_ - tau);

  TauSample s;
  s.delta = op_norm_inf(shifted_cross_gramian(Aq_, H_, Fp_, tau, tau_s_) * lead_flow);
  s.gamma_prime = op_norm_inf(plant_q * mat_exp(Ap_, lead + tau));

  const Mat M2 = shifted_cross_gramian(Aq_, BqKp_, Fp_, tau, tau_s_) * lead_flow;
  s.alpha = op_norm_2(plant_q * mat_exp(Fp_, lead + tau) + M2);
  // x(k0+k) picks up -(plant_q * CG + M2) e(k0): the pre-switch flow carries -B_p K_p e.
  s.beta = sqrt_n_ * op_norm_2(plant_q * cross_gramian(Fp_, BpKp_, Ap_, lead + tau) + M2);
  return s;
}

TauSample tau_grid_maxima(const PairKernel& kernel, int k, int grid_points, double tau_s, Exec exec) {
  if (grid_points < 1) throw std::invalid_argument("grid_points must be >= 1");
  double d = 0.0, g = 0.0, a = 0.0, b = 0.0;
  const double h = tau_s / grid_points;

  if (exec == Exec::Serial) {
    for (int i = 0; i <= grid_points; ++i) {
      const TauSample s = kernel.at(k, i == grid_points ? tau_s : i * h);
      d = std::max(d, s.delta);
      g = std::max(g, s.gamma_prime);
      a = std::max(a, s.alpha);
      b = std::max(b, s.beta);
    }
  } else {
#pragma omp parallel for schedule(static) reduction(max : d, g, a, b)
    for (int i = 0; i <= grid_points; ++i) {
      const TauSample s = kernel.at(k, i == grid_points ? tau_s : i * h);
      d = std::max(d, s.delta);
      g = std::max(g, s.gamma_prime);
      a = std::max(a, s.alpha);
      b = std::max(b, s.beta);
    }
  }
  return {d, g, a, b};
}

double nu_bar_of_pair(const PairCert& pair, int k, const ModeCert& cert_p, const ModeCert& cert_q) {
  const std::size_t i = static_cast<std::size_t>(k - 1);
  const double a = pair.alpha_bar.at(i), d = pair.delta_bar.at(i);
  const double b = pair.beta_bar.at(i), g = pair.gamma_bar.at(i);
  const double state_term = 2.0 * (cert_q.lambda_max_P * a * a + cert_q.rho_p * d * d) / cert_p.lambda_min_P;
  const double bound_term = 2.0 * (cert_q.lambda_max_P * b * b + cert_q.rho_p * g * g) / cert_p.rho_p;
  return std::max(state_term, bound_term);
}

PairCert pair_cert(const SwitchedSystem& sys, const std::vector<ModeCert>& certs, ModeId p, ModeId q,
                   int grid_points, double safety_factor, Exec exec) {
  if (p == q) throw std::invalid_argument("pair_cert: p and q must differ");
  if (grid_points < 2) throw std::invalid_argument("pair_cert: grid_points must be >= 2");
  auto find = [&](ModeId id) -> const ModeCert& {
    for (const ModeCert& c : certs) {
      if (c.id == id) return c;
    }
    throw ConfigError("pair_cert: missing certificate for " + mode_name(id));
  };
  const ModeCert& cp = find(p);
  const ModeCert& cq = find(q);

  const PairKernel kernel(sys, p, q);
  PairCert pc;
  pc.p = p;
  pc.q = q;
  pc.H_pq = kernel.H();
  for (int k = 1; k <= cp.eta_p; ++k) {
    const TauSample mx = tau_grid_maxima(kernel, k, grid_points, sys.tau_s(), exec);
    pc.delta_bar.push_back(safety_factor * mx.delta);
    pc.gamma_prime_bar.push_back(safety_factor * mx.gamma_prime);
    pc.gamma_bar.push_back(pc.delta_bar.back() + pc.gamma_prime_bar.back());
    pc.alpha_bar.push_back(safety_factor * mx.alpha);
    pc.beta_bar.push_back(safety_factor * mx.beta);
  }
  for (int k = 1; k <= cp.eta_p; ++k) pc.nu_bar.push_back(nu_bar_of_pair(pc, k, cp, cq));
  return pc;
}

GlobalRates global_rates(const std::vector<ModeCert>& modes, const std::vector<PairCert>& pairs) {
  GlobalRates r{0.0, std::nullopt};
  for (const ModeCert& m : modes) r.nu = std::max(r.nu, m.nu_p);
  for (const PairCert& pc : pairs) {
    for (double v : pc.nu_bar) r.nu_bar = std::max(r.nu_bar.value_or(0.0), v);
  }
  return r;
}

double min_adt(double nu, std::optional<double> nu_bar, int eta, double tau_s) {
  if (!(nu < 1.0) || !(nu > 0.0)) throw InfeasibleError("infeasible certificate: nu must lie in (0, 1)");
  const double floor = eta * tau_s;
  if (!nu_bar || *nu_bar <= 1.0) return floor;
  return (1.0 + std::log(*nu_bar) / std::log(1.0 / nu)) * floor;
}

int zoom_out_window_count(const ADTParams& adt, int eta, double tau_s) {
  const double tau0 = eta * tau_s;
  if (!(adt.tau_a > tau0)) throw ConfigError("zoom-out condition tau_a > eta*tau_s violated");
  const double bound = adt.tau_a / (adt.tau_a - tau0) * (adt.N0 - tau0 / adt.tau_a);
  // Strictly greater; nudge exact algebraic integers that round slightly high.
  const double rounded = std::round(bound);
  const double b = std::abs(bound - rounded) <= 1e-9 * std::max(1.0, std::abs(bound)) ? rounded : bound;
  return static_cast<int>(std::floor(b)) + 1;
}

Certificate certify(const SwitchedSystem& sys, const CertParams& params, Exec exec) {
  Certificate cert;
  cert.N = params.N;
  cert.grid_points = params.grid_points;
  cert.safety_factor = params.safety_factor;
  cert.tau_s = sys.tau_s();
  if (!(params.safety_factor >= 1.0)) throw ConfigError("safety_factor must be >= 1");

  for (const auto& [id, mp] : params.per_mode) {
    if (!sys.has_mode(id)) throw ConfigError("certification parameters given for unknown " + mode_name(id));
  }

  for (const ModeDef& md : sys.modes()) {
    ModeParams mp;
    if (auto it = params.per_mode.find(md.id); it != params.per_mode.end()) mp = it->second;
    const Mat Q = mp.Q.value_or(Mat::Identity(sys.n(), sys.n()));
    cert.modes.push_back(mode_cert(md, Q, mp.kappa.value_or(2.0), mp.rho, params.N, sys.tau_s()));
  }
  cert.eta = 0;
  for (const ModeCert& m : cert.modes) cert.eta = std::max(cert.eta, m.eta_p);

  for (const ModeDef& a : sys.modes()) {
    for (const ModeDef& b : sys.modes()) {
      if (a.id == b.id) continue;
      cert.pairs.push_back(pair_cert(sys, cert.modes, a.id, b.id, params.grid_points, params.safety_factor, exec));
    }
  }

  const GlobalRates rates = global_rates(cert.modes, cert.pairs);
  cert.nu = rates.nu;
  cert.nu_bar = rates.nu_bar;
  cert.tau_a_min = min_adt(cert.nu, cert.nu_bar, cert.eta, sys.tau_s());
  return cert;
}

}  // namespace qswitch
