#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "qswitch/certify.hpp"

namespace qswitch {

/// Quantizer overflow during zoom-in: the measured output left the hypercube.
/// Signals an inadmissible switching signal or a broken invariant.
struct OverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed symbol stream (payload kind or range mismatch).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuantizerConfig {
  int N = 11;  // odd, >= 3
  double mu0 = 0.1;
  double chi = 1.0;
};

enum class Stage { ZoomOut, ZoomIn };
enum class PayloadKind { OverflowBit, BoxIndex };

struct Symbol {
  ModeId mode{};
  PayloadKind kind{PayloadKind::OverflowBit};
  std::int64_t value{};  // bit in {0,1} or box index in [1, N^p]

  bool operator==(const Symbol&) const = default;
};

/// What the most recent sample did to the cycle bookkeeping.
enum class Transition {
  None,          // zoom-out sample, or an interior zoom-in sample
  ZoomOutDone,   // window completed at this sample; zoom-in starts at the next one
  CycleStart,    // first zoom-in cycle opened at this sample
  NoSwitchEnd,   // previous cycle completed without a switch and was reconstructed
  SwitchUpdate,  // a switch was detected at this sample
};

struct CodecState {
  Stage stage{Stage::ZoomOut};
  std::int64_t k{0};  // samples consumed so far (index of the next sample)
  Vec xi;             // estimate at the last consumed sample
  double E{0.0};      // error bound at the cycle start k0
  std::int64_t k0{0};
  std::optional<ModeId> cycle_mode;
  int l{0};  // samples into the current cycle at the last consumed sample
  Vec xi_k0;
  std::vector<Vec> centers;  // decoded box centers of the current cycle

  std::int64_t window_start{0};
  std::optional<ModeId> window_mode;
  int window_zeros{0};

  Transition last{Transition::None};
  int switch_offset{0};  // k of the last SwitchUpdate
  std::optional<ModeId> previous_mode;
  double previous_E{0.0};
  std::int64_t previous_k0{0};

  bool operator==(const CodecState& other) const;
};

/// Immutable per-mode and per-pair constants shared by encoder and decoder.
class ProtocolTables {
 public:
  struct ModeTable {
    int eta_p{};
    double theta_p{};
    Mat C, K, F;
    Mat W_dagger;
    Mat exp_A_eta;              // e^{A eta_p tau_s}
    std::vector<Mat> flow;      // e^{F l tau_s}, l = 0 .. eta_p
    std::vector<double> r_gain; // ||C e^{A l tau_s}||_inf, l = 0 .. eta_p-1
    std::vector<double> e_gain; // ||e^{A l tau_s}||_inf, l = 0 .. eta_p-1
    double W_dagger_inf{};
    double zoom_out_gain{};     // ||e^{A (eta_p-1) tau_s}||_inf
  };
  struct PairTable {
    std::vector<double> delta_bar, gamma_prime_bar;
  };

  ProtocolTables(const SwitchedSystem& sys, const Certificate& cert, const QuantizerConfig& q);

  [[nodiscard]] const ModeTable& mode(ModeId id) const;
  [[nodiscard]] const PairTable& pair(ModeId p, ModeId q) const;
  [[nodiscard]] double mu(std::int64_t n) const;
  [[nodiscard]] const QuantizerConfig& quantizer() const { return q_; }
  [[nodiscard]] double tau_s() const { return tau_s_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int p() const { return p_; }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] double interval_growth() const { return interval_growth_; }
  [[nodiscard]] std::int64_t box_count() const { return box_count_; }

 private:
  std::map<ModeId, ModeTable> modes_;
  std::map<std::pair<ModeId, ModeId>, PairTable> pairs_;
  QuantizerConfig q_;
  double tau_s_{};
  double max_A_inf_{};
  double interval_growth_{};  // e^{max ||A||_inf tau_s}
  int n_{}, p_{}, m_{};
  std::int64_t box_count_{};
};

/// mu_n = e^{(1+chi) max_p ||A_p||_inf n tau_s} mu0
double mu(std::int64_t n, const QuantizerConfig& cfg, const SwitchedSystem& sys);

/// One side of the link. Encoder and decoder are two instances that apply
/// the same transitions; feeding both the same symbols keeps them identical.
class Codec {
 public:
  explicit Codec(std::shared_ptr<const ProtocolTables> tables);

  /// Encoder side: consumes y(k tau_s) and sigma(k tau_s), returns the symbol.
  Symbol encode_sample(const Vec& y, ModeId sigma_k);
  /// Decoder side.
  void decode_symbol(const Symbol& sym);

  /// u(t) for t in the interval following the last consumed sample.
  [[nodiscard]] Vec control_input(double t) const;

  /// Rigorous bound on |x - xi|_inf at the last consumed sample (zoom-in only).
  [[nodiscard]] double error_bound() const;

  [[nodiscard]] const CodecState& state() const { return state_; }
  [[nodiscard]] const ProtocolTables& tables() const { return *tables_; }

  // Individual transitions, normally triggered from decode/encode.
  void finish_zoom_out(ModeId window_mode);
  void cycle_end_reconstruct();
  void cycle_switch_update(ModeId q, int k);

  /// Box index for y in the current zoom-in hypercube.
  [[nodiscard]] std::int64_t quantize(const Vec& y) const;
  /// Center of box `index` in the current zoom-in hypercube.
  [[nodiscard]] Vec box_center(std::int64_t index) const;

  /// Test hook: overwrite the cycle bound (fault injection).
  void corrupt_error_bound(double E) { state_.E = E; }

 private:
  void begin_sample(ModeId sigma_k);
  void accept(const Symbol& sym);
  void start_cycle(ModeId mode, const Vec& xi_k0, double E);
  [[nodiscard]] double half_width() const;
  [[nodiscard]] Vec output_prediction() const;

  std::shared_ptr<const ProtocolTables> tables_;
  CodecState state_;
};

}  // namespace qswitch
