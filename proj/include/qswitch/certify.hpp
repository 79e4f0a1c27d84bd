#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qswitch/model.hpp"

namespace qswitch {

/// Certificate parameters are infeasible (data rate too low, rho too small, ...).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModeCert {
  ModeId id{};
  int eta_p{};
  Mat W_dagger;
  double lhs4{};  // data-rate left-hand side
  double theta_p{};
  Mat Abar;
  Mat Bbar;
  Mat Q_p;
  double kappa_p{};
  double rho_p{};
  Mat P_p;
  double lambda_min_P{};
  double lambda_max_P{};
  double alpha_p{};
  double beta_p{};
  double nu_p{};
};

struct PairCert {
  ModeId p{}, q{};
  Mat H_pq;
  // Indexed by k - 1, k = 1 .. eta_p.
  std::vector<double> delta_bar;
  std::vector<double> gamma_prime_bar;
  std::vector<double> gamma_bar;
  std::vector<double> alpha_bar;
  std::vector<double> beta_bar;
  std::vector<double> nu_bar;
};

/// Per-mode user choices; unset fields fall back to Q = I, kappa = 2,
/// rho = 2 beta / (1 - theta^2).
struct ModeParams {
  std::optional<Mat> Q;
  std::optional<double> kappa;
  std::optional<double> rho;
};

struct CertParams {
  int N = 11;
  std::map<ModeId, ModeParams> per_mode;
  int grid_points = 1024;
  double safety_factor = 1.0;
};

struct Certificate {
  std::vector<ModeCert> modes;
  std::vector<PairCert> pairs;
  int eta{};
  double nu{};
  std::optional<double> nu_bar;  // absent when only one mode exists
  double tau_a_min{};
  int N{};
  int grid_points{};
  double safety_factor{1.0};
  double tau_s{};

  [[nodiscard]] const ModeCert& mode(ModeId id) const;
  [[nodiscard]] const PairCert& pair(ModeId p, ModeId q) const;
};

/// ||e^{A eta tau_s} W^dagger||_inf * max_{0<=k<eta} ||C e^{A k tau_s}||_inf
double data_rate_lhs(const ModeDef& mode, double tau_s);

struct AdmissibleN {
  int N_int;  // smallest integer > max_p LHS
  int N_odd;  // smallest odd integer >= max(3, N_int)
};
AdmissibleN min_admissible_N(const SwitchedSystem& sys);

struct ClosedLoopMaps {
  Mat Abar;  // e^{(A+BK) eta tau_s}
  Mat Bbar;  // \int_0^{eta tau_s} e^{(A+BK)(eta tau_s - t)} B K e^{A t} dt
};
ClosedLoopMaps closed_loop_maps(const ModeDef& mode, double tau_s, int eta);

/// Lyapunov pair and decrease rate for one mode. Throws InfeasibleError when
/// theta_p >= 1 or rho_p <= beta_p / (1 - theta_p^2). rho = nullopt selects
/// the default 2 beta / (1 - theta^2).
ModeCert mode_cert(const ModeDef& mode, const Mat& Q, double kappa, std::optional<double> rho, int N,
                   double tau_s);

/// Values of the four tau-dependent norms at one grid point.
struct TauSample {
  double delta{}, gamma_prime{}, alpha{}, beta{};
};

/// Evaluates the switch-interval norms for mode pair (p -> q) and cycle
/// offset k at intra-sample switch phase tau in [0, tau_s].
class PairKernel {
 public:
  PairKernel(const SwitchedSystem& sys, ModeId p, ModeId q);
  [[nodiscard]] TauSample at(int k, double tau) const;
  [[nodiscard]] const Mat& H() const { return H_; }

 private:
  Mat Ap_, Aq_, Fp_, BpKp_, BqKp_, H_;
  double tau_s_;
  double sqrt_n_;
};

/// Max of each TauSample component over the closed uniform grid
/// {0, tau_s/G, ..., tau_s}. Parallel and serial paths return identical values.
TauSample tau_grid_maxima(const PairKernel& kernel, int k, int grid_points, double tau_s, Exec exec);

double nu_bar_of_pair(const PairCert& pair, int k, const ModeCert& cert_p, const ModeCert& cert_q);

PairCert pair_cert(const SwitchedSystem& sys, const std::vector<ModeCert>& certs, ModeId p, ModeId q,
                   int grid_points, double safety_factor = 1.0, Exec exec = Exec::Parallel);

struct GlobalRates {
  double nu;
  std::optional<double> nu_bar;
};
GlobalRates global_rates(const std::vector<ModeCert>& modes, const std::vector<PairCert>& pairs);

/// (1 + log nu_bar / log(1/nu)) eta tau_s, or eta tau_s when nu_bar <= 1 or absent.
double min_adt(double nu, std::optional<double> nu_bar, int eta, double tau_s);

/// Smallest integer m > tau_a/(tau_a - tau0) * (N0 - tau0/tau_a), tau0 = eta tau_s.
int zoom_out_window_count(const ADTParams& adt, int eta, double tau_s);

Certificate certify(const SwitchedSystem& sys, const CertParams& params, Exec exec = Exec::Parallel);

}  // namespace qswitch
