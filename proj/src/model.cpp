#include "qswitch/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace qswitch {

namespace {
std::string mode_name(ModeId id) { return "mode " + std::to_string(id); }

// Uniform double in [0, 1) from the top 53 bits; keeps sequences independent
// of the standard library's distribution implementation.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

constexpr double kAdtTolerance = 1e-9;
}  // namespace

SwitchedSystem::SwitchedSystem(std::vector<ModeDef> modes, double tau_s)
    : modes_(std::move(modes)), tau_s_(tau_s) {
  if (modes_.empty()) throw ConfigError("switched system needs at least one mode");
  if (!(tau_s_ > 0.0) || !std::isfinite(tau_s_)) throw ConfigError("tau_s must be positive");

  const ModeDef& first = modes_.front();
  n_ = static_cast<int>(first.A.rows());
  m_ = static_cast<int>(first.B.cols());
  p_ = static_cast<int>(first.C.rows());
  if (n_ < 1 || m_ < 1 || p_ < 1) throw DimensionError("mode matrices must be non-empty");

  std::set<ModeId> ids;
  for (const ModeDef& md : modes_) {
    const std::string who = mode_name(md.id);
    if (!ids.insert(md.id).second) throw ConfigError("duplicate mode id " + std::to_string(md.id));
    if (md.A.rows() != n_ || md.A.cols() != n_) throw DimensionError(who + ": A must be n x n");
    if (md.B.rows() != n_ || md.B.cols() != m_) throw DimensionError(who + ": B must be n x m");
    if (md.C.rows() != p_ || md.C.cols() != n_) throw DimensionError(who + ": C must be p x n");
    if (md.K.rows() != m_ || md.K.cols() != n_) throw DimensionError(who + ": K must be m x n");
    if (!md.A.allFinite() || !md.B.allFinite() || !md.C.allFinite() || !md.K.allFinite()) {
      throw ConfigError(who + ": non-finite entries");
    }
    max_A_inf_ = std::max(max_A_inf_, numerics::op_norm_inf(md.A));
  }
}

const ModeDef& SwitchedSystem::mode(ModeId id) const { return modes_[index_of(id)]; }

std::size_t SwitchedSystem::index_of(ModeId id) const {
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].id == id) return i;
  }
  throw ConfigError("unknown mode id " + std::to_string(id));
}

bool SwitchedSystem::has_mode(ModeId id) const {
  return std::any_of(modes_.begin(), modes_.end(), [id](const ModeDef& m) { return m.id == id; });
}

std::vector<ModeId> SwitchedSystem::mode_ids() const {
  std::vector<ModeId> ids;
  ids.reserve(modes_.size());
  for (const ModeDef& m : modes_) ids.push_back(m.id);
  return ids;
}

SwitchingSignal::SwitchingSignal(ModeId sigma0, std::vector<SwitchEvent> events, double horizon)
    : sigma0_(sigma0), events_(std::move(events)), horizon_(horizon) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ConfigError("signal horizon must be positive");
  ModeId prev = sigma0_;
  double prev_t = 0.0;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const SwitchEvent& ev = events_[i];
    if (!(ev.time > prev_t) || ev.time > horizon_) {
      throw ConfigError("switch times must be strictly increasing within (0, horizon]; offending event " +
                        std::to_string(i));
    }
    if (ev.mode == prev) {
      throw ConfigError("event " + std::to_string(i) + " does not change the mode");
    }
    prev = ev.mode;
    prev_t = ev.time;
  }
}

ModeId SwitchingSignal::mode_at(double t) const {
  if (t < 0.0 || t > horizon_) throw std::out_of_range("mode_at: t outside [0, horizon]");
  // Last event with time <= t.
  auto it = std::upper_bound(events_.begin(), events_.end(), t,
                             [](double v, const SwitchEvent& e) { return v < e.time; });
  return it == events_.begin() ? sigma0_ : std::prev(it)->mode;
}

int SwitchingSignal::count_switches(double s, double t) const {
  if (!(s < t)) throw std::invalid_argument("count_switches: requires s < t");
  int count = 0;
  for (const SwitchEvent& e : events_) {
    if (e.time > s && e.time <= t) ++count;
  }
  return count;
}

std::vector<SwitchEvent> SwitchingSignal::events_in_open(double a, double b) const {
  std::vector<SwitchEvent> out;
  for (const SwitchEvent& e : events_) {
    if (e.time > a && e.time < b) out.push_back(e);
  }
  return out;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (const Issue& i : issues) {
    os << i.subject << ": " << i.message;
    if (i.witness) os << " [witness (" << i.witness->first << ", " << i.witness->second << ")]";
    os << '\n';
  }
  return os.str();
}

Mat stack_W(const ModeDef& mode, double tau_s, int eta) {
  if (eta < 1) throw std::invalid_argument("stack_W: eta must be >= 1");
  const Eigen::Index p = mode.C.rows();
  Mat W(eta * p, mode.C.cols());
  const Mat step = numerics::mat_exp(mode.A, tau_s);
  Mat block = mode.C;
  for (int l = 0; l < eta; ++l) {
    W.middleRows(l * p, p) = block;
    block = block * step;
  }
  return W;
}

int eta_of_mode(const ModeDef& mode, double tau_s) {
  const int n = static_cast<int>(mode.A.rows());
  for (int eta = 1; eta <= n; ++eta) {
    if (numerics::rank(stack_W(mode, tau_s, eta)) == n) return eta;
  }
  throw NumericalError(mode_name(mode.id) + " unobservable at this sampling rate");
}

ValidationReport validate_system(const SwitchedSystem& sys) {
  ValidationReport report;
  for (const ModeDef& md : sys.modes()) {
    const Eigen::VectorXcd ev = numerics::eigenvalues(md.closed_loop());
    if (!(ev.real().array() < 0.0).all()) {
      std::ostringstream os;
      os << "A + B K is not Hurwitz (max real part " << ev.real().maxCoeff() << ")";
      report.issues.push_back({mode_name(md.id), os.str(), std::nullopt});
    }
    const Mat W = stack_W(md, sys.tau_s(), sys.n());
    if (numerics::rank(W) < sys.n()) {
      report.issues.push_back({mode_name(md.id),
                               "(C, e^{A tau_s}) is not observable (pathological sampling or unobservable pair)",
                               std::nullopt});
    }
  }
  return report;
}

ValidationReport validate_signal(const SwitchingSignal& signal, double tau_s,
                                 const std::optional<ADTParams>& adt) {
  ValidationReport report;
  const auto& ev = signal.events();

  double prev = 0.0;
  for (const SwitchEvent& e : ev) {
    if (e.time - prev < tau_s * (1.0 - kAdtTolerance)) {
      std::ostringstream os;
      os << "gap " << (e.time - prev) << " s is shorter than the sampling period " << tau_s << " s";
      report.issues.push_back({"dwell", os.str(), std::make_pair(prev, e.time)});
    }
    prev = e.time;
  }

  if (adt) {
    if (adt->N0 < 1 || !(adt->tau_a > 0.0)) {
      report.issues.push_back({"adt", "requires N0 >= 1 and tau_a > 0", std::nullopt});
      return report;
    }
    // N_sigma(t, s) peaks with s just below T_i and t = T_j: j - i + 1 switches.
    for (std::size_t i = 0; i < ev.size(); ++i) {
      for (std::size_t j = i; j < ev.size(); ++j) {
        const double count = static_cast<double>(j - i + 1);
        const double allowed = adt->N0 + (ev[j].time - ev[i].time) / adt->tau_a;
        if (count > allowed + kAdtTolerance) {
          std::ostringstream os;
          os << count << " switches in (" << ev[i].time << "-, " << ev[j].time << "] exceed N0 + (t-s)/tau_a = "
             << allowed;
          report.issues.push_back({"adt", os.str(), std::make_pair(ev[i].time, ev[j].time)});
        }
      }
    }
  }
  return report;
}

SwitchingSignal random_signal(const SignalGenerator& gen, double tau_s, const std::vector<ModeId>& modes) {
  if (modes.empty()) throw ConfigError("random_signal: no modes");
  if (gen.adt.N0 < 1 || !(gen.adt.tau_a > 0.0)) throw ConfigError("random_signal: requires N0 >= 1 and tau_a > 0");
  if (!(gen.dwell_min > 0.0)) throw ConfigError("random_signal: dwell_min must be positive");
  if (!(gen.horizon > 0.0)) throw ConfigError("random_signal: horizon must be positive");

  std::mt19937_64 rng(gen.seed);
  ModeId current;
  if (gen.sigma0) {
    if (std::find(modes.begin(), modes.end(), *gen.sigma0) == modes.end()) {
      throw ConfigError("random_signal: sigma0 is not a known mode");
    }
    current = *gen.sigma0;
  } else {
    current = modes[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(modes.size()))];
  }
  const ModeId sigma0 = current;

  std::vector<SwitchEvent> events;
  if (modes.size() < 2) return SwitchingSignal(sigma0, events, gen.horizon);

  const double min_gap = std::max(gen.dwell_min, tau_s);
  double last = 0.0;
  while (true) {
    double t = last + min_gap + uniform01(rng) * gen.adt.tau_a;
    // Earliest time where every window ending at t obeys the ADT bound.
    const std::size_t j = events.size();
    for (std::size_t i = 0; i < j; ++i) {
      const double needed = static_cast<double>(j - i + 1 - gen.adt.N0);
      if (needed > 0.0) t = std::max(t, events[i].time + needed * gen.adt.tau_a * (1.0 + kAdtTolerance));
    }
    if (t > gen.horizon) break;

    const auto others = static_cast<double>(modes.size() - 1);
    auto pick = static_cast<std::size_t>(uniform01(rng) * others);
    std::vector<ModeId> candidates;
    for (ModeId m : modes) {
      if (m != current) candidates.push_back(m);
    }
    current = candidates[pick];
    events.push_back({t, current});
    last = t;
  }
  return SwitchingSignal(sigma0, std::move(events), gen.horizon);
}

}  // namespace qswitch
