#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "qswitch/config.hpp"

namespace qswitch::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
  std::optional<int> grid;
  std::optional<std::uint64_t> seed;
  bool quiet{false};
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
}

RunConfig load(const std::string& path, const Globals& g) {
  RunConfig cfg = load_config(path);
  if (g.grid) {
    if (*g.grid < 2) throw ConfigError("--grid must be >= 2");
    cfg.certification.grid_points = *g.grid;
  }
  if (g.seed && cfg.signal && cfg.signal->generator) cfg.signal->generator->seed = *g.seed;
  return cfg;
}

void require_valid_system(const SwitchedSystem& sys) {
  const ValidationReport rep = validate_system(sys);
  if (!rep.ok()) throw ConfigError("system validation failed:\n" + rep.to_string());
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : "absent"; }

void print_certificate(const Certificate& cert, const SwitchedSystem& sys, std::ostream& out) {
  const AdmissibleN an = min_admissible_N(sys);
  out << std::left << std::setw(6) << "mode" << std::setw(7) << "eta_p" << std::setw(14) << "lhs" << std::setw(14)
      << "theta_p" << std::setw(14) << "nu_p" << '\n';
  for (const ModeCert& m : cert.modes) {
    out << std::left << std::setw(6) << m.id << std::setw(7) << m.eta_p << std::setw(14) << m.lhs4 << std::setw(14)
        << m.theta_p << std::setw(14) << m.nu_p << '\n';
  }
  out << "nu=" << format_number(cert.nu) << '\n'
      << "nu_bar=" << opt_number(cert.nu_bar) << '\n'
      << "tau_a_min=" << format_number(cert.tau_a_min) << '\n'
      << "N=" << cert.N << '\n'
      << "N_int=" << an.N_int << '\n'
      << "N_odd=" << an.N_odd << '\n';
}

int cmd_certify(const std::string& config, const std::string& out_path, const Globals& g, std::ostream& out) {
  RunConfig cfg = load(config, g);
  require_valid_system(cfg.system);
  const Certificate cert = certify(cfg.system, cfg.certification);
  write_file(out_path, certificate_to_json(cert, cfg.system).dump(2) + "\n");
  if (!g.quiet) print_certificate(cert, cfg.system, out);
  return kOk;
}

int bits_per_sample(const SwitchedSystem& sys, int N) {
  const int payload = static_cast<int>(std::ceil(sys.p() * std::log2(static_cast<double>(N)) - 1e-12));
  const auto modes = static_cast<double>(sys.modes().size());
  const int mode_bits = modes > 1 ? static_cast<int>(std::ceil(std::log2(modes) - 1e-12)) : 0;
  return payload + mode_bits;
}

int cmd_simulate(const std::string& config, const std::string& out_dir, const Globals& g, std::ostream& out,
                 std::ostream& err) {
  RunConfig cfg = load(config, g);
  require_valid_system(cfg.system);
  if (!cfg.simulation) throw ConfigError("config $.simulation: missing required key");
  if (!cfg.signal) throw ConfigError("config $.signal: missing required key");

  const Certificate cert = certify(cfg.system, cfg.certification);
  const SwitchingSignal signal = resolve_signal(cfg);
  const ValidationReport vr = validate_signal(signal, cfg.system.tau_s(), cfg.signal->adt);
  if (!vr.ok()) throw ConfigError("switching signal rejected:\n" + vr.to_string());
  if (cfg.signal->adt) {
    (void)zoom_out_window_count(*cfg.signal->adt, cert.eta, cfg.system.tau_s());
    if (!(cfg.signal->adt->tau_a > cert.tau_a_min) && !g.quiet) {
      err << "warning: tau_a = " << format_number(cfg.signal->adt->tau_a) << " does not exceed tau_a_min = "
          << format_number(cert.tau_a_min) << "; convergence is not certified for this signal\n";
    }
  }

  const SimulationSpec& sp = *cfg.simulation;
  const SimConfig sc{sp.x0, signal, sp.t_end, sp.substep, sp.record_intersample};
  const TrajectoryLog log = run(cfg.system, sc, cfg.quantizer, cert);
  const InvariantReport rep = check_invariants(log, cert);

  const fs::path dir(out_dir);
  std::ostringstream traj, syms;
  write_trajectory_csv(log, traj);
  write_symbol_csv(log, cfg.system.tau_s(), syms);
  write_file(dir / "trajectory.csv", traj.str());
  write_file(dir / "symbols.csv", syms.str());
  write_file(dir / "invariants.json", invariants_to_json(rep, log.summary).dump(2) + "\n");
  write_file(dir / "certificate.json", certificate_to_json(cert, cfg.system).dump(2) + "\n");
  write_file(dir / "plot_trajectory.py", plot_script());

  if (!g.quiet) {
    out << "zoom_out_end=" << opt_number(log.summary.zoom_out_end) << '\n'
        << "first_nonzero_u=" << opt_number(log.summary.first_nonzero_u) << '\n'
        << "final_state_norm=" << format_number(log.summary.final_state_norm) << '\n'
        << "initial_state_norm=" << format_number(sp.x0.norm()) << '\n'
        << "e_dominance_ok=" << (rep.e_dominance_ok ? "true" : "false") << '\n'
        << "cycle_contraction_ok=" << (rep.cycle_contraction_ok ? "true" : "false") << '\n'
        << "bits_per_sample=" << bits_per_sample(cfg.system, cfg.quantizer.N) << '\n';
  }
  if (!rep.ok()) {
    err << "error: invariant violated: " << rep.first_violation.value_or("unknown") << '\n';
    return kRuntimeViolation;
  }
  return kOk;
}

int cmd_validate_signal(const std::string& config, const Globals& g, std::ostream& out) {
  RunConfig cfg = load(config, g);
  if (!cfg.signal) throw ConfigError("config $.signal: missing required key");
  const SwitchingSignal signal = resolve_signal(cfg);
  const ValidationReport rep = validate_signal(signal, cfg.system.tau_s(), cfg.signal->adt);

  auto verdict = [&](const std::string& subject) {
    bool ok = true;
    for (const Issue& i : rep.issues) {
      if (i.subject != subject) continue;
      ok = false;
      out << subject << ": FAIL " << i.message;
      if (i.witness) out << " witness=(" << format_number(i.witness->first) << ", " << format_number(i.witness->second) << ")";
      out << '\n';
    }
    if (ok) out << subject << ": pass\n";
  };
  out << "events=" << signal.events().size() << '\n';
  verdict("dwell");
  if (cfg.signal->adt) {
    verdict("adt");
  } else {
    out << "adt: not requested\n";
  }
  return rep.ok() ? kOk : kConfigError;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> vals;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const std::string s = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) throw ConfigError("--values: cannot parse '" + s + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw ConfigError("--values: empty range");
  return vals;
}

int as_int(double v, const char* what) {
  if (std::floor(v) != v) throw ConfigError(std::string("--values: ") + what + " must be an integer");
  return static_cast<int>(v);
}

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

int cmd_sweep(const std::string& config, const std::string& param, const std::string& values,
              const std::string& out_path, const Globals& g, std::ostream& out) {
  if (param != "N" && param != "tau_a" && param != "grid") throw ConfigError("--param must be N, tau_a or grid");
  RunConfig cfg = load(config, g);
  require_valid_system(cfg.system);
  const std::vector<double> vals = parse_values(values);

  std::ostringstream csv;
  csv << "value,feasible,nu,nu_bar,tau_a_min";
  if (param == "N") csv << ",theta_max";
  if (param == "tau_a") csv << ",admissible,m";
  if (param == "grid") csv << ",rel_gap_nu_bar";
  csv << '\n';

  auto row = [&](double v, const std::optional<Certificate>& c) {
    csv << format_number(v) << ',' << (c ? "true" : "false") << ',';
    if (c) csv << format_number(c->nu) << ',' << cell(c->nu_bar) << ',' << format_number(c->tau_a_min);
    else csv << ",,";
  };

  if (param == "tau_a") {
    const Certificate c = certify(cfg.system, cfg.certification);
    const int N0 = cfg.signal && cfg.signal->adt ? cfg.signal->adt->N0 : 1;
    for (double v : vals) {
      row(v, c);
      csv << ',' << (v > c.tau_a_min ? "true" : "false") << ',';
      try {
        csv << zoom_out_window_count({N0, v}, c.eta, cfg.system.tau_s());
      } catch (const ConfigError&) {
      }
      csv << '\n';
    }
  } else {
    std::optional<double> prev_nu_bar;
    for (double v : vals) {
      CertParams p = cfg.certification;
      if (param == "N") p.N = as_int(v, "N");
      else p.grid_points = as_int(v, "grid");
      std::optional<Certificate> c;
      try {
        c = certify(cfg.system, p);
      } catch (const InfeasibleError&) {
      } catch (const ConfigError&) {
        if (param != "N") throw;
      }
      row(v, c);
      if (param == "N") {
        csv << ',';
        if (c) {
          double th = 0.0;
          for (const ModeCert& m : c->modes) th = std::max(th, m.theta_p);
          csv << format_number(th);
        }
      } else {
        csv << ',';
        if (c && c->nu_bar && prev_nu_bar) csv << format_number(std::abs(*c->nu_bar - *prev_nu_bar) / std::abs(*c->nu_bar));
        prev_nu_bar = c ? c->nu_bar : std::nullopt;
      }
      csv << '\n';
    }
  }
  write_file(out_path, csv.str());
  if (!g.quiet) out << csv.str();
  return kOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e) || dynamic_cast<const NumericalError*>(&e)) return kInfeasible;
  if (dynamic_cast<const OverflowError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return kRuntimeViolation;
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::out_of_range*>(&e)) {
    return kConfigError;
  }
  return kRuntimeViolation;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  if (std::floor(v) == v && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
  }
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string plot_script() {
  return R"(#!/usr/bin/env python3
# Generated by qswitch simulate. Plots |x(t)| and |xi(t)| from trajectory.csv.
import csv
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "trajectory.csv")
with open(path, newline="") as f:
    rows = list(csv.DictReader(f))

xs = sorted(k for k in rows[0] if k.startswith("x") and not k.startswith("xi"))
xis = sorted(k for k in rows[0] if k.startswith("xi"))
t = [float(r["t"]) for r in rows]
nx = [math.sqrt(sum(float(r[k]) ** 2 for k in xs)) for r in rows]
nxi = [math.sqrt(sum(float(r[k]) ** 2 for k in xis)) for r in rows]

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(t, nx, label="|x(t)|")
ax.plot(t, nxi, "--", label="|xi(t)|")
ax.set_xlabel("t [s]")
ax.set_ylabel("norm")
ax.legend()
ax.grid(True, alpha=0.3)
fig.tight_layout()
out = os.path.join(os.path.dirname(os.path.abspath(path)), "trajectory.png")
fig.savefig(out, dpi=150)
print(out)
)";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certify and simulate switched linear systems under sampled quantized output feedback", "qswitch"};
  app.require_subcommand(1);
  Globals g;
  int grid = 0;
  std::uint64_t seed = 0;
  auto* grid_opt = app.add_option("--grid", grid, "tau-grid points for the switch constants");
  auto* seed_opt = app.add_option("--seed", seed, "override the signal generator seed");
  app.add_flag("--quiet", g.quiet, "suppress summaries");

  std::string config, out_path, out_dir, param, values;

  auto* certify_cmd = app.add_subcommand("certify", "compute the stability certificate");
  certify_cmd->add_option("--config", config, "config JSON")->required();
  certify_cmd->add_option("--out", out_path, "certificate JSON output")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "run the closed loop and write artifacts");
  sim_cmd->add_option("--config", config, "config JSON")->required();
  sim_cmd->add_option("--out-dir", out_dir, "output directory")->required();

  auto* val_cmd = app.add_subcommand("validate-signal", "check dwell time and average dwell time");
  val_cmd->add_option("--config", config, "config JSON")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "certify along a parameter range");
  sweep_cmd->add_option("--config", config, "config JSON")->required();
  sweep_cmd->add_option("--param", param, "N, tau_a or grid")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out_path, "CSV output")->required();

  for (CLI::App* sub : {certify_cmd, sim_cmd, val_cmd, sweep_cmd}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (*grid_opt) g.grid = grid;
  if (*seed_opt) g.seed = seed;

  try {
    if (*certify_cmd) return cmd_certify(config, out_path, g, out);
    if (*sim_cmd) return cmd_simulate(config, out_dir, g, out, err);
    if (*val_cmd) return cmd_validate_signal(config, g, out);
    return cmd_sweep(config, param, values, out_path, g, out);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << (code == kInfeasible ? "certificate infeasible: " : "") << e.what() << '\n';
    return code;
  }
}

}  // namespace qswitch::cli
