#include "qswitch/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qswitch {

using numerics::mat_exp;
using numerics::op_norm_inf;
using numerics::vec_norm_inf;

namespace {

bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && (a.size() == 0 || a == b); }

constexpr double kOverflowSlack = 1e-9;

}  // namespace

bool CodecState::operator==(const CodecState& o) const {
  if (centers.size() != o.centers.size()) return false;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (!same(centers[i], o.centers[i])) return false;
  }
  return stage == o.stage && k == o.k && same(xi, o.xi) && E == o.E && k0 == o.k0 && cycle_mode == o.cycle_mode &&
         l == o.l && same(xi_k0, o.xi_k0) && window_start == o.window_start && window_mode == o.window_mode &&
         window_zeros == o.window_zeros && last == o.last && switch_offset == o.switch_offset &&
         previous_mode == o.previous_mode && previous_E == o.previous_E && previous_k0 == o.previous_k0;
}

ProtocolTables::ProtocolTables(const SwitchedSystem& sys, const Certificate& cert, const QuantizerConfig& q)
    : q_(q), tau_s_(sys.tau_s()), max_A_inf_(sys.max_A_inf()), n_(sys.n()), p_(sys.p()), m_(sys.m()) {
  if (q.N < 3 || q.N % 2 == 0) throw ConfigError("quantizer N must be an odd integer >= 3");
  if (!(q.mu0 > 0.0) || !(q.chi > 0.0)) throw ConfigError("quantizer mu0 and chi must be positive");
  if (cert.N != q.N) throw ConfigError("certificate was computed for a different N");

  box_count_ = 1;
  for (int i = 0; i < p_; ++i) {
    if (box_count_ > std::numeric_limits<std::int64_t>::max() / q.N) throw ConfigError("N^p overflows box indices");
    box_count_ *= q.N;
  }
  interval_growth_ = std::exp(max_A_inf_ * tau_s_);

  for (const ModeDef& md : sys.modes()) {
    const ModeCert& mc = cert.mode(md.id);
    ModeTable t;
    t.eta_p = mc.eta_p;
    t.theta_p = mc.theta_p;
    t.C = md.C;
    t.K = md.K;
    t.F = md.closed_loop();
    t.W_dagger = mc.W_dagger;
    t.W_dagger_inf = op_norm_inf(mc.W_dagger);
    t.exp_A_eta = mat_exp(md.A, mc.eta_p * tau_s_);
    for (int l = 0; l <= mc.eta_p; ++l) t.flow.push_back(mat_exp(t.F, l * tau_s_));
    for (int l = 0; l < mc.eta_p; ++l) {
      const Mat eAl = mat_exp(md.A, l * tau_s_);
      t.r_gain.push_back(op_norm_inf(md.C * eAl));
      t.e_gain.push_back(op_norm_inf(eAl));
    }
    t.zoom_out_gain = op_norm_inf(mat_exp(md.A, (mc.eta_p - 1) * tau_s_));
    modes_.emplace(md.id, std::move(t));
  }
  for (const PairCert& pc : cert.pairs) {
    pairs_.emplace(std::make_pair(pc.p, pc.q), PairTable{pc.delta_bar, pc.gamma_prime_bar});
  }
}

const ProtocolTables::ModeTable& ProtocolTables::mode(ModeId id) const {
  auto it = modes_.find(id);
  if (it == modes_.end()) throw ConfigError("mode " + std::to_string(id) + " is not in the certificate");
  return it->second;
}

const ProtocolTables::PairTable& ProtocolTables::pair(ModeId p, ModeId q) const {
  auto it = pairs_.find({p, q});
  if (it == pairs_.end()) {
    throw ConfigError("pair (" + std::to_string(p) + ", " + std::to_string(q) + ") is not in the certificate");
  }
  return it->second;
}

double ProtocolTables::mu(std::int64_t n) const {
  return std::exp((1.0 + q_.chi) * max_A_inf_ * static_cast<double>(n) * tau_s_) * q_.mu0;
}

double mu(std::int64_t n, const QuantizerConfig& cfg, const SwitchedSystem& sys) {
  return std::exp((1.0 + cfg.chi) * sys.max_A_inf() * static_cast<double>(n) * sys.tau_s()) * cfg.mu0;
}

Codec::Codec(std::shared_ptr<const ProtocolTables> tables) : tables_(std::move(tables)) {
  state_.xi = Vec::Zero(tables_->n());
  state_.xi_k0 = Vec::Zero(tables_->n());
}

void Codec::start_cycle(ModeId mode, const Vec& xi_k0, double E) {
  state_.cycle_mode = mode;
  state_.k0 = state_.k;
  state_.xi_k0 = xi_k0;
  state_.E = E;
  state_.centers.clear();
  state_.l = 0;
}

void Codec::finish_zoom_out(ModeId window_mode) {
  const ProtocolTables::ModeTable& t = tables_->mode(window_mode);
  // The window's last sample is the one being consumed now.
  const double E_n0 = t.W_dagger_inf * tables_->mu(state_.k);
  state_.E = tables_->interval_growth() * t.zoom_out_gain * E_n0;
  state_.stage = Stage::ZoomIn;
  state_.cycle_mode.reset();
  state_.k0 = state_.k + 1;
  state_.xi = Vec::Zero(tables_->n());
  state_.xi_k0 = Vec::Zero(tables_->n());
  state_.centers.clear();
  state_.l = 0;
  state_.window_zeros = 0;
  state_.window_mode.reset();
  state_.last = Transition::ZoomOutDone;
}

void Codec::cycle_end_reconstruct() {
  const ModeId p = *state_.cycle_mode;
  const ProtocolTables::ModeTable& t = tables_->mode(p);
  if (static_cast<int>(state_.centers.size()) != t.eta_p) {
    throw ProtocolError("cycle_end_reconstruct: expected " + std::to_string(t.eta_p) + " box centers");
  }
  const int pdim = tables_->p();
  Vec residual(t.eta_p * pdim);
  for (int l = 0; l < t.eta_p; ++l) {
    residual.segment(l * pdim, pdim) = state_.centers[l] - t.C * (t.flow[l] * state_.xi_k0);
  }
  const Vec e_hat = t.W_dagger * residual;
  const Vec xi_new = t.flow[t.eta_p] * state_.xi_k0 + t.exp_A_eta * e_hat;
  start_cycle(p, xi_new, t.theta_p * state_.E);
}

void Codec::cycle_switch_update(ModeId q, int k) {
  const ModeId p = *state_.cycle_mode;
  const ProtocolTables::ModeTable& t = tables_->mode(p);
  (void)tables_->mode(q);
  if (k < 1 || k > t.eta_p) throw ProtocolError("cycle_switch_update: switch offset outside [1, eta_p]");
  const ProtocolTables::PairTable& pt = tables_->pair(p, q);
  const std::size_t i = static_cast<std::size_t>(k - 1);
  const Vec xi_new = t.flow[k] * state_.xi_k0;
  const double E_new = pt.delta_bar[i] * vec_norm_inf(state_.xi_k0) + pt.gamma_prime_bar[i] * state_.E;
  state_.switch_offset = k;
  start_cycle(q, xi_new, E_new);
}

void Codec::begin_sample(ModeId sigma_k) {
  state_.last = Transition::None;
  if (state_.stage != Stage::ZoomIn) return;

  if (!state_.cycle_mode) {
    start_cycle(sigma_k, Vec::Zero(tables_->n()), state_.E);
    state_.last = Transition::CycleStart;
  } else {
    const int l = static_cast<int>(state_.k - state_.k0);
    const int eta_p = tables_->mode(*state_.cycle_mode).eta_p;
    if (sigma_k != *state_.cycle_mode || l == eta_p) {
      state_.previous_mode = state_.cycle_mode;
      state_.previous_E = state_.E;
      state_.previous_k0 = state_.k0;
      if (sigma_k != *state_.cycle_mode) {
        cycle_switch_update(sigma_k, l);
        state_.last = Transition::SwitchUpdate;
      } else {
        cycle_end_reconstruct();
        state_.last = Transition::NoSwitchEnd;
      }
    }
  }
  state_.l = static_cast<int>(state_.k - state_.k0);
  state_.xi = tables_->mode(*state_.cycle_mode).flow[state_.l] * state_.xi_k0;
}

void Codec::accept(const Symbol& sym) {
  if (state_.stage == Stage::ZoomOut) {
    if (sym.kind != PayloadKind::OverflowBit || (sym.value != 0 && sym.value != 1)) {
      throw ProtocolError("zoom-out expects an overflow bit at sample " + std::to_string(state_.k));
    }
    if (sym.value == 1) {
      state_.window_zeros = 0;
      state_.window_mode.reset();
    } else if (state_.window_zeros == 0 || state_.window_mode != sym.mode) {
      state_.window_start = state_.k;
      state_.window_mode = sym.mode;
      state_.window_zeros = 1;
    } else {
      ++state_.window_zeros;
    }
    if (state_.window_zeros > 0 && state_.window_zeros == tables_->mode(*state_.window_mode).eta_p) {
      finish_zoom_out(*state_.window_mode);
    }
  } else {
    if (sym.kind != PayloadKind::BoxIndex) {
      throw ProtocolError("zoom-in expects a box index at sample " + std::to_string(state_.k));
    }
    state_.centers.push_back(box_center(sym.value));
  }
  ++state_.k;
}

double Codec::half_width() const {
  const ProtocolTables::ModeTable& t = tables_->mode(*state_.cycle_mode);
  return t.r_gain[static_cast<std::size_t>(state_.l)] * state_.E;
}

Vec Codec::output_prediction() const { return tables_->mode(*state_.cycle_mode).C * state_.xi; }

std::int64_t Codec::quantize(const Vec& y) const {
  const int N = tables_->quantizer().N;
  const double r = half_width();
  const Vec offset = y - output_prediction();
  const double dev = vec_norm_inf(offset);
  if (!(dev <= r * (1.0 + kOverflowSlack) + 1e-300)) {
    std::ostringstream os;
    os << "quantizer overflow at sample " << state_.k << " (mode " << *state_.cycle_mode << "): |y - yhat|_inf = "
       << dev << " > r = " << r;
    throw OverflowError(os.str());
  }
  std::int64_t index = 1;
  std::int64_t radix = 1;
  for (Eigen::Index i = 0; i < offset.size(); ++i) {
    std::int64_t d = (N - 1) / 2;
    if (r > 0.0) {
      // Box boundaries go to the lower-index box.
      const double v = (offset(i) + r) * N / (2.0 * r);
      d = static_cast<std::int64_t>(std::ceil(v)) - 1;
      d = std::clamp<std::int64_t>(d, 0, N - 1);
    }
    index += d * radix;
    radix *= N;
  }
  return index;
}

Vec Codec::box_center(std::int64_t index) const {
  if (index < 1 || index > tables_->box_count()) {
    throw ProtocolError("box index " + std::to_string(index) + " outside [1, N^p]");
  }
  const int N = tables_->quantizer().N;
  const double r = half_width();
  const Vec yhat = output_prediction();
  Vec c(yhat.size());
  std::int64_t rest = index - 1;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const auto d = static_cast<double>(rest % N);
    rest /= N;
    c(i) = yhat(i) + (2.0 * d + 1.0 - N) * r / N;
  }
  return c;
}

Symbol Codec::encode_sample(const Vec& y, ModeId sigma_k) {
  if (y.size() != tables_->p()) throw DimensionError("encode_sample: output has wrong dimension");
  begin_sample(sigma_k);
  Symbol sym{sigma_k, PayloadKind::OverflowBit, 0};
  if (state_.stage == Stage::ZoomOut) {
    sym.value = vec_norm_inf(y) <= tables_->mu(state_.k) ? 0 : 1;
  } else {
    sym.kind = PayloadKind::BoxIndex;
    sym.value = quantize(y);
  }
  accept(sym);
  return sym;
}

void Codec::decode_symbol(const Symbol& sym) {
  begin_sample(sym.mode);
  accept(sym);
}

Vec Codec::control_input(double t) const {
  if (state_.stage == Stage::ZoomOut || !state_.cycle_mode) return Vec::Zero(tables_->m());
  const ProtocolTables::ModeTable& tab = tables_->mode(*state_.cycle_mode);
  const double since = t - static_cast<double>(state_.k0) * tables_->tau_s();
  return tab.K * (mat_exp(tab.F, since) * state_.xi_k0);
}

double Codec::error_bound() const {
  if (state_.stage == Stage::ZoomOut || !state_.cycle_mode) return std::numeric_limits<double>::quiet_NaN();
  return tables_->mode(*state_.cycle_mode).e_gain[static_cast<std::size_t>(state_.l)] * state_.E;
}

}  // namespace qswitch
