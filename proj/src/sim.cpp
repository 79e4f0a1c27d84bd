#include "qswitch/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

namespace qswitch {

using numerics::mat_exp;
using numerics::vec_norm_inf;

namespace {

constexpr double kRelSlack = 1e-9;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

SampleRecord make_row(double t, std::int64_t k, const Vec& x, const Vec& xi, ModeId plant,
                      const std::optional<ModeId>& ctrl) {
  SampleRecord r;
  r.t = t;
  r.k = k;
  r.x = x;
  r.xi = xi;
  r.e_inf = vec_norm_inf(x - xi);
  r.E = kNaN;
  r.V = kNaN;
  r.plant_mode = plant;
  r.ctrl_mode = ctrl;
  r.stage = ctrl ? Stage::ZoomIn : Stage::ZoomOut;
  return r;
}

}  // namespace

std::string stage_name(Stage s) { return s == Stage::ZoomIn ? "zoom_in" : "zoom_out"; }
std::string payload_name(PayloadKind k) { return k == PayloadKind::BoxIndex ? "box" : "bit"; }

std::pair<Vec, Vec> propagate(const SwitchedSystem& sys, const Vec& x, const Vec& xi, ModeId plant,
                              std::optional<ModeId> ctrl, double dt) {
  if (dt < 0.0) throw std::invalid_argument("propagate: negative dt");
  const int n = sys.n();
  if (x.size() != n || xi.size() != n) throw DimensionError("propagate: state has wrong dimension");
  if (dt == 0.0) return {x, xi};

  const ModeDef& pm = sys.mode(plant);
  Mat M = Mat::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = pm.A;
  if (ctrl) {
    const ModeDef& cm = sys.mode(*ctrl);
    M.topRightCorner(n, n) = pm.B * cm.K;
    M.bottomRightCorner(n, n) = cm.closed_loop();
  }
  Vec z(2 * n);
  z << x, xi;
  const Vec z1 = mat_exp(M, dt) * z;
  return {z1.head(n), z1.tail(n)};
}

double lyapunov_value(const Certificate& cert, ModeId mode, const Vec& x, double E) {
  const ModeCert& mc = cert.mode(mode);
  return x.dot(mc.P_p * x) + mc.rho_p * E * E;
}

TrajectoryLog run(const SwitchedSystem& sys, const SimConfig& cfg, const QuantizerConfig& qcfg,
                  const Certificate& cert) {
  return run(sys, cfg, std::make_shared<const ProtocolTables>(sys, cert, qcfg), cert);
}

TrajectoryLog run(const SwitchedSystem& sys, const SimConfig& cfg, const std::shared_ptr<const ProtocolTables>& tables,
                  const Certificate& cert) {
  const double ts = sys.tau_s();
  if (cfg.x0.size() != sys.n()) throw DimensionError("x0 has wrong dimension");
  if (!(cfg.t_end > 0.0) || cfg.t_end > cfg.signal.horizon() * (1.0 + 1e-12)) {
    throw ConfigError("t_end must lie in (0, signal horizon]");
  }
  if (cfg.record_intersample && !(cfg.substep && *cfg.substep > 0.0)) {
    throw ConfigError("substep must be positive when recording intersample rows");
  }
  for (const SwitchEvent& e : cfg.signal.events()) {
    if (!sys.has_mode(e.mode)) throw ConfigError("signal uses unknown mode " + std::to_string(e.mode));
  }
  if (!sys.has_mode(cfg.signal.sigma0())) throw ConfigError("signal uses unknown mode");

  Codec enc(tables), dec(tables);
  TrajectoryLog log;
  log.t_end = cfg.t_end;
  Vec x = cfg.x0;
  Vec xi = Vec::Zero(sys.n());
  const double t_stop = std::min(cfg.t_end, cfg.signal.horizon());
  const auto last_k = static_cast<std::int64_t>(std::floor(t_stop / ts * (1.0 + 1e-12)));

  for (std::int64_t k = 0; k <= last_k; ++k) {
    const double t = static_cast<double>(k) * ts;
    const ModeId sigma = cfg.signal.mode_at(std::min(t, cfg.signal.horizon()));
    const Vec y = sys.mode(sigma).C * x;

    Symbol sym;
    try {
      sym = enc.encode_sample(y, sigma);
    } catch (const OverflowError& err) {
      std::ostringstream os;
      os << err.what() << "; t = " << t << ", plant mode " << sigma;
      throw OverflowError(os.str());
    }
    dec.decode_symbol(sym);
    if (!(enc.state() == dec.state())) {
      throw ProtocolError("encoder and decoder states diverged at sample " + std::to_string(k));
    }

    const CodecState& st = dec.state();
    if (st.last == Transition::ZoomOutDone) log.summary.zoom_out_end = static_cast<double>(st.k0) * ts;
    const std::optional<ModeId> ctrl = st.stage == Stage::ZoomIn ? st.cycle_mode : std::nullopt;
    xi = st.xi;

    SampleRecord rec = make_row(t, k, x, xi, sigma, ctrl);
    rec.symbol = sym;
    rec.transition = st.last;
    rec.switch_offset = st.switch_offset;
    rec.previous_mode = st.previous_mode;
    rec.previous_k0 = st.previous_k0;
    if (ctrl) {
      rec.E = dec.error_bound();
      rec.V = lyapunov_value(cert, *ctrl, x, rec.E);
    }
    log.records.push_back(std::move(rec));

    if (!log.summary.first_nonzero_u && dec.control_input(t).lpNorm<Eigen::Infinity>() > 0.0) {
      log.summary.first_nonzero_u = t;
    }

    const double t_next = std::min(static_cast<double>(k + 1) * ts, t_stop);
    if (!(t_next > t)) break;

    // Piecewise-constant plant mode on [t, t_next).
    std::vector<double> cuts{t};
    for (const SwitchEvent& e : cfg.signal.events_in_open(t, t_next)) cuts.push_back(e.time);
    cuts.push_back(t_next);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double a = cuts[s], b = cuts[s + 1];
      const ModeId plant = cfg.signal.mode_at(a);
      if (cfg.record_intersample) {
        const double h = *cfg.substep;
        for (std::int64_t j = (s == 0 ? 1 : 0);; ++j) {
          const double tj = a + static_cast<double>(j) * h;
          if (tj >= b - 1e-12 * ts) break;
          auto [xj, xij] = propagate(sys, x, xi, plant, ctrl, tj - a);
          SampleRecord row = make_row(tj, k, xj, xij, plant, ctrl);
          row.is_sample = false;
          log.records.push_back(std::move(row));
        }
      }
      std::tie(x, xi) = propagate(sys, x, xi, plant, ctrl, b - a);
    }
  }

  log.x_end = x;
  log.summary.final_state_norm = x.norm();
  const InvariantReport rep = check_invariants(log, cert);
  log.summary.e_dominance_ok = rep.e_dominance_ok;
  log.summary.cycle_contraction_ok = rep.cycle_contraction_ok;
  return log;
}

InvariantReport check_invariants(const TrajectoryLog& log, const Certificate& cert) {
  InvariantReport rep;
  std::map<std::int64_t, std::size_t> at;
  auto violate = [&rep](const std::string& what) {
    if (!rep.first_violation) rep.first_violation = what;
  };

  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const SampleRecord& r = log.records[i];
    if (!r.is_sample) continue;
    at[r.k] = i;
    if (!r.ctrl_mode) continue;

    ++rep.samples_checked;
    if (r.E > 0.0) rep.worst_e_ratio = std::max(rep.worst_e_ratio, r.e_inf / r.E);
    if (!(r.e_inf <= r.E * (1.0 + kRelSlack))) {
      rep.e_dominance_ok = false;
      std::ostringstream os;
      os << "E-dominance violated at sample " << r.k << " (t = " << r.t << ", plant mode " << r.plant_mode
         << ", controller mode " << *r.ctrl_mode << "): |e|_inf = " << r.e_inf << " > E = " << r.E;
      violate(os.str());
    }

    if (r.transition != Transition::NoSwitchEnd && r.transition != Transition::SwitchUpdate) continue;
    auto it = at.find(r.previous_k0);
    if (it == at.end() || !r.previous_mode) continue;
    const SampleRecord& prev = log.records[it->second];
    const ModeId p = *r.previous_mode;
    const ModeId q = *r.ctrl_mode;

    double bound = 0.0;
    std::string label;
    if (r.transition == Transition::NoSwitchEnd) {
      ++rep.no_switch_checks;
      bound = cert.mode(p).nu_p;
      label = "no-switch cycle contraction";
      if (bound * prev.V > 0.0) rep.worst_cycle_ratio = std::max(rep.worst_cycle_ratio, r.V / (bound * prev.V));
    } else {
      ++rep.switch_checks;
      const PairCert& pc = cert.pair(p, q);
      bound = pc.nu_bar.at(static_cast<std::size_t>(r.switch_offset - 1));
      label = "switch jump bound";
      if (bound * prev.V > 0.0) rep.worst_switch_ratio = std::max(rep.worst_switch_ratio, r.V / (bound * prev.V));
    }
    if (!(r.V <= bound * prev.V * (1.0 + kRelSlack))) {
      rep.cycle_contraction_ok = false;
      std::ostringstream os;
      os << label << " violated at sample " << r.k << " (t = " << r.t << ", modes " << p << " -> " << q
         << ", cycle start " << r.previous_k0 << "): V = " << r.V << " > " << bound << " * " << prev.V;
      violate(os.str());
    }
  }
  return rep;
}

std::vector<BatchResult> run_batch(const SwitchedSystem& sys, const QuantizerConfig& qcfg, const Certificate& cert,
                                   const std::vector<BatchJob>& jobs, Exec exec) {
  const auto tables = std::make_shared<const ProtocolTables>(sys, cert, qcfg);
  const std::vector<ModeId> ids = sys.mode_ids();
  std::vector<BatchResult> out(jobs.size());

  auto one = [&](std::size_t i) {
    BatchResult& res = out[i];
    try {
      const BatchJob& job = jobs[i];
      SimConfig cfg{job.x0, random_signal(job.generator, sys.tau_s(), ids), job.t_end, job.substep,
                    job.substep.has_value()};
      const TrajectoryLog log = run(sys, cfg, tables, cert);
      res.report = check_invariants(log, cert);
      res.summary = log.summary;
      for (const SampleRecord& r : log.records) res.peak_state_inf = std::max(res.peak_state_inf, vec_norm_inf(r.x));
      res.peak_state_inf = std::max(res.peak_state_inf, vec_norm_inf(log.x_end));
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  };

  const auto count = static_cast<std::int64_t>(jobs.size());
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }
  return out;
}

StabilityReport empirical_lyapunov_stability(const SwitchedSystem& sys, const QuantizerConfig& qcfg,
                                             const Certificate& cert, const StabilityOptions& opt, Exec exec) {
  StabilityReport rep;
  rep.scales = opt.scales;
  std::sort(rep.scales.begin(), rep.scales.end(), std::greater<>());

  // The same directions and signals are reused at every scale.
  std::mt19937_64 rng(opt.seed);
  std::vector<Vec> dirs;
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < opt.trials; ++t) {
    Vec d(sys.n());
    for (int i = 0; i < sys.n(); ++i) d(i) = (2.0 * uniform01(rng) - 1.0) * opt.direction_box;
    dirs.push_back(d);
    seeds.push_back(rng());
  }

  std::vector<BatchJob> jobs;
  for (double s : rep.scales) {
    for (int t = 0; t < opt.trials; ++t) {
      SignalGenerator g = opt.generator;
      g.seed = seeds[static_cast<std::size_t>(t)];
      jobs.push_back({dirs[static_cast<std::size_t>(t)] * s, g, opt.t_end, opt.substep});
    }
  }
  const std::vector<BatchResult> res = run_batch(sys, qcfg, cert, jobs, exec);

  for (std::size_t si = 0; si < rep.scales.size(); ++si) {
    double peak = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      const BatchResult& r = res[si * static_cast<std::size_t>(opt.trials) + static_cast<std::size_t>(t)];
      if (r.error && !rep.failure) rep.failure = "scale " + fmt17(rep.scales[si]) + ": " + *r.error;
      peak = std::max(peak, r.peak_state_inf);
    }
    rep.peaks.push_back(peak);
    if (peak < opt.epsilon) rep.reaches_epsilon = true;
    if (si > 0 && peak > rep.peaks[si - 1] * (1.0 + opt.slack)) rep.monotone = false;
  }
  return rep;
}

void write_trajectory_csv(const TrajectoryLog& log, std::ostream& os) {
  const Eigen::Index n = log.records.empty() ? 0 : log.records.front().x.size();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",xi" << i;
  os << ",e_inf,E,plant_mode,ctrl_mode,stage,V\n";
  for (const SampleRecord& r : log.records) {
    os << fmt17(r.t);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(r.x(i));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(r.xi(i));
    os << ',' << fmt17(r.e_inf) << ',' << fmt17(r.E) << ',' << r.plant_mode << ',';
    if (r.ctrl_mode) os << *r.ctrl_mode;
    os << ',' << stage_name(r.stage) << ',' << fmt17(r.V) << '\n';
  }
}

void write_symbol_csv(const TrajectoryLog& log, double tau_s, std::ostream& os) {
  os << "k,t,mode,payload_kind,payload_value\n";
  for (const SampleRecord& r : log.records) {
    if (!r.is_sample || !r.symbol) continue;
    os << r.k << ',' << fmt17(static_cast<double>(r.k) * tau_s) << ',' << r.symbol->mode << ','
       << payload_name(r.symbol->kind) << ',' << r.symbol->value << '\n';
  }
}

}  // namespace qswitch
