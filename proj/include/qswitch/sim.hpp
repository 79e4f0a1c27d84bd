#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qswitch/codec.hpp"

namespace qswitch {

struct SimConfig {
  Vec x0;
  SwitchingSignal signal;
  double t_end{};
  std::optional<double> substep;  // intersample row spacing
  bool record_intersample{false};
};

struct SampleRecord {
  double t{};
  bool is_sample{true};  // false for intersample rows
  std::int64_t k{};      // sample index (of the interval start for intersample rows)
  Vec x, xi;
  double e_inf{};
  double E{};  // NaN where no bound applies (zoom-out, intersample)
  ModeId plant_mode{};
  std::optional<ModeId> ctrl_mode;
  Stage stage{Stage::ZoomOut};
  std::optional<Symbol> symbol;
  double V{};  // x'P x + rho E^2 for the controller mode; NaN outside zoom-in samples

  // Cycle bookkeeping copied from the codec at this sample.
  Transition transition{Transition::None};
  int switch_offset{0};
  std::optional<ModeId> previous_mode;
  std::int64_t previous_k0{0};
};

struct TrajectorySummary {
  std::optional<double> zoom_out_end;
  std::optional<double> first_nonzero_u;
  double final_state_norm{};  // |x(t_end)|_2
  bool e_dominance_ok{true};
  bool cycle_contraction_ok{true};
};

struct TrajectoryLog {
  std::vector<SampleRecord> records;
  TrajectorySummary summary;
  Vec x_end;
  double t_end{};
};

struct InvariantReport {
  std::int64_t samples_checked{0};
  std::int64_t no_switch_checks{0};
  std::int64_t switch_checks{0};
  bool e_dominance_ok{true};
  bool cycle_contraction_ok{true};
  std::optional<std::string> first_violation;
  double worst_e_ratio{0.0};      // max e_inf / E
  double worst_cycle_ratio{0.0};  // max V_new / (nu V_old)
  double worst_switch_ratio{0.0}; // max V_new / (nu_bar V_old)

  [[nodiscard]] bool ok() const { return e_dominance_ok && cycle_contraction_ok; }
};

/// Exact flow of [x; xi] over dt with constant modes. ctrl = nullopt means
/// zoom-out (u = 0, xi frozen at its value).
std::pair<Vec, Vec> propagate(const SwitchedSystem& sys, const Vec& x, const Vec& xi, ModeId plant,
                              std::optional<ModeId> ctrl, double dt);

double lyapunov_value(const Certificate& cert, ModeId mode, const Vec& x, double E);

/// Runs encoder, decoder and plant in closed loop. Throws OverflowError with
/// sample and mode context, ProtocolError if encoder and decoder diverge.
TrajectoryLog run(const SwitchedSystem& sys, const SimConfig& cfg, const QuantizerConfig& qcfg,
                  const Certificate& cert);

/// As run, but reuses prebuilt protocol tables (batch use).
TrajectoryLog run(const SwitchedSystem& sys, const SimConfig& cfg, const std::shared_ptr<const ProtocolTables>& tables,
                  const Certificate& cert);

InvariantReport check_invariants(const TrajectoryLog& log, const Certificate& cert);

struct BatchJob {
  Vec x0;
  SignalGenerator generator;
  double t_end{};
  std::optional<double> substep;  // when set, peaks also cover intersample rows
};

struct BatchResult {
  InvariantReport report;
  TrajectorySummary summary;
  double peak_state_inf{};  // max over samples of |x|_inf
  std::optional<std::string> error;
};

/// Independent closed-loop runs; Parallel and Serial return identical results.
std::vector<BatchResult> run_batch(const SwitchedSystem& sys, const QuantizerConfig& qcfg, const Certificate& cert,
                                   const std::vector<BatchJob>& jobs, Exec exec = Exec::Parallel);

struct StabilityReport {
  std::vector<double> scales;  // descending
  std::vector<double> peaks;   // max over trials of max_t |x(t)|_inf
  bool monotone{true};
  bool reaches_epsilon{false};
  std::optional<std::string> failure;
  // epsilon is reported, not gated on: the verdict is monotonicity alone.
  [[nodiscard]] bool ok() const { return monotone && !failure; }
};

struct StabilityOptions {
  double epsilon{0.1};
  std::vector<double> scales{1.0, 0.1, 0.01};
  int trials{20};
  std::uint64_t seed{1};
  SignalGenerator generator;  // seed is replaced per trial
  double t_end{20.0};
  double direction_box{3.0};  // directions uniform in [-box, box]^n
  double slack{0.05};
  double substep{0.05};  // intersample spacing used for the peak of |x(t)|_inf
};

StabilityReport empirical_lyapunov_stability(const SwitchedSystem& sys, const QuantizerConfig& qcfg,
                                             const Certificate& cert, const StabilityOptions& opt,
                                             Exec exec = Exec::Parallel);

void write_trajectory_csv(const TrajectoryLog& log, std::ostream& os);
void write_symbol_csv(const TrajectoryLog& log, double tau_s, std::ostream& os);

std::string stage_name(Stage s);
std::string payload_name(PayloadKind k);

}  // namespace qswitch
