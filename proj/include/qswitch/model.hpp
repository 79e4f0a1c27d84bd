#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qswitch/numerics.hpp"

namespace qswitch {

using ModeId = int;

/// Rejected configuration: bad dimensions, duplicate ids, malformed signals.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// One subsystem x' = A x + B u, y = C x with its given gain u = K x.
struct ModeDef {
  ModeId id{};
  Mat A;
  Mat B;
  Mat C;
  Mat K;

  /// A + B K
  [[nodiscard]] Mat closed_loop() const { return A + B * K; }
};

class SwitchedSystem {
 public:
  SwitchedSystem(std::vector<ModeDef> modes, double tau_s);

  [[nodiscard]] const std::vector<ModeDef>& modes() const { return modes_; }
  [[nodiscard]] const ModeDef& mode(ModeId id) const;
  [[nodiscard]] std::size_t index_of(ModeId id) const;
  [[nodiscard]] bool has_mode(ModeId id) const;
  [[nodiscard]] std::vector<ModeId> mode_ids() const;

  [[nodiscard]] double tau_s() const { return tau_s_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] int p() const { return p_; }
  /// max_p ||A_p||_inf
  [[nodiscard]] double max_A_inf() const { return max_A_inf_; }

 private:
  std::vector<ModeDef> modes_;
  double tau_s_;
  int n_{}, m_{}, p_{};
  double max_A_inf_{};
};

struct SwitchEvent {
  double time;  // seconds
  ModeId mode;  // mode active from `time` on
};

/// Right-continuous piecewise-constant mode schedule on [0, horizon].
class SwitchingSignal {
 public:
  SwitchingSignal(ModeId sigma0, std::vector<SwitchEvent> events, double horizon);

  [[nodiscard]] ModeId sigma0() const { return sigma0_; }
  [[nodiscard]] const std::vector<SwitchEvent>& events() const { return events_; }
  [[nodiscard]] double horizon() const { return horizon_; }

  /// sigma(t); at an event time returns the new mode.
  [[nodiscard]] ModeId mode_at(double t) const;

  /// Number of switching times in (s, t].
  [[nodiscard]] int count_switches(double s, double t) const;

  /// Event times strictly inside (a, b).
  [[nodiscard]] std::vector<SwitchEvent> events_in_open(double a, double b) const;

 private:
  ModeId sigma0_;
  std::vector<SwitchEvent> events_;
  double horizon_;
};

struct ADTParams {
  int N0 = 1;
  double tau_a = 1.0;  // seconds
};

struct Issue {
  std::string subject;  // e.g. "mode 2" or "dwell"
  std::string message;
  std::optional<std::pair<double, double>> witness;
};

struct ValidationReport {
  std::vector<Issue> issues;
  [[nodiscard]] bool ok() const { return issues.empty(); }
  [[nodiscard]] std::string to_string() const;
};

/// Hurwitz check of A_p + B_p K_p and rank check of the n-block discrete
/// observability matrix of (C_p, e^{A_p tau_s}), per mode.
ValidationReport validate_system(const SwitchedSystem& sys);

/// Rows C e^{A l tau_s}, l = 0 .. eta-1.
Mat stack_W(const ModeDef& mode, double tau_s, int eta);

/// Smallest eta >= 1 with rank(stack_W) = n; throws NumericalError past eta = n.
int eta_of_mode(const ModeDef& mode, double tau_s);

/// Dwell-time (every gap, including from t = 0, >= tau_s) and pairwise ADT
/// check. Pass `adt = std::nullopt` to check dwell time only.
ValidationReport validate_signal(const SwitchingSignal& signal, double tau_s,
                                 const std::optional<ADTParams>& adt);

struct SignalGenerator {
  std::uint64_t seed = 0;
  ADTParams adt;
  double dwell_min = 1.0;
  double horizon = 10.0;
  std::optional<ModeId> sigma0;  // random when unset
};

/// Constructive random schedule: every gap >= dwell_min, then advanced to the
/// earliest time meeting all ADT constraints. Deterministic in the seed.
SwitchingSignal random_signal(const SignalGenerator& gen, double tau_s,
                              const std::vector<ModeId>& modes);

}  // namespace qswitch
