#include "qswitch/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace qswitch {

using nlohmann::json;

namespace {

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("config " + path_ + ": " + msg); }

  void only(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!ok.count(it.key())) Node(j_, path_ + "." + it.key()).fail("unknown key");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  [[nodiscard]] Node at(const char* key) const {
    if (!has(key)) Node(j_, path_ + "." + key).fail("missing required key");
    return {j_.at(key), path_ + "." + key};
  }

  [[nodiscard]] std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  [[nodiscard]] Node operator[](std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

  [[nodiscard]] double num() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  [[nodiscard]] double positive() const {
    const double v = num();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  [[nodiscard]] int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }

  [[nodiscard]] std::uint64_t u64() const {
    if (!j_.is_number_integer() || j_.get<std::int64_t>() < 0) fail("expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }

  [[nodiscard]] bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  [[nodiscard]] Vec vector() const {
    const std::size_t n = size();
    if (n == 0) fail("expected a non-empty array");
    Vec v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = (*this)[i].num();
    return v;
  }

  [[nodiscard]] Mat matrix() const {
    const std::size_t rows = size();
    if (rows == 0) fail("expected a non-empty array of rows");
    const std::size_t cols = (*this)[0].size();
    if (cols == 0) fail("rows must be non-empty");
    Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const Node row = (*this)[r];
      if (row.size() != cols) row.fail("ragged matrix: expected " + std::to_string(cols) + " entries");
      for (std::size_t c = 0; c < cols; ++c) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].num();
      }
    }
    return M;
  }

  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

SwitchedSystem parse_system(const Node& n) {
  n.only({"tau_s", "modes"});
  const double tau_s = n.at("tau_s").positive();
  const Node modes = n.at("modes");
  if (modes.size() == 0) modes.fail("at least one mode is required");
  std::vector<ModeDef> defs;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const Node m = modes[i];
    m.only({"id", "A", "B", "C", "K"});
    ModeDef d{m.at("id").integer(), m.at("A").matrix(), m.at("B").matrix(), m.at("C").matrix(), m.at("K").matrix()};
    for (const ModeDef& prev : defs) {
      if (prev.id == d.id) m.at("id").fail("duplicate mode id " + std::to_string(d.id));
    }
    defs.push_back(std::move(d));
  }
  try {
    return SwitchedSystem(std::move(defs), tau_s);
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

QuantizerConfig parse_quantizer(const Node& n) {
  n.only({"N", "mu0", "chi"});
  QuantizerConfig q;
  if (n.has("N")) q.N = n.at("N").integer();
  if (n.has("mu0")) q.mu0 = n.at("mu0").positive();
  if (n.has("chi")) q.chi = n.at("chi").positive();
  if (q.N < 3 || q.N % 2 == 0) n.at("N").fail("N must be an odd integer >= 3");
  return q;
}

CertParams parse_certification(const Node& n, const SwitchedSystem& sys) {
  n.only({"per_mode", "grid_points", "safety_factor"});
  CertParams cp;
  if (n.has("grid_points")) {
    cp.grid_points = n.at("grid_points").integer();
    if (cp.grid_points < 2) n.at("grid_points").fail("must be >= 2");
  }
  if (n.has("safety_factor")) {
    cp.safety_factor = n.at("safety_factor").num();
    if (!(cp.safety_factor >= 1.0)) n.at("safety_factor").fail("must be >= 1");
  }
  if (n.has("per_mode")) {
    const Node pm = n.at("per_mode");
    for (std::size_t i = 0; i < pm.size(); ++i) {
      const Node e = pm[i];
      e.only({"mode", "Q", "kappa", "rho"});
      const ModeId id = e.at("mode").integer();
      if (!sys.has_mode(id)) e.at("mode").fail("unknown mode " + std::to_string(id));
      if (cp.per_mode.count(id)) e.at("mode").fail("mode listed twice");
      ModeParams p;
      if (e.has("Q")) {
        p.Q = e.at("Q").matrix();
        if (p.Q->rows() != sys.n() || p.Q->cols() != sys.n()) e.at("Q").fail("Q must be n x n");
      }
      if (e.has("kappa")) p.kappa = e.at("kappa").num();
      if (e.has("rho")) p.rho = e.at("rho").positive();
      cp.per_mode.emplace(id, p);
    }
  }
  return cp;
}

ADTParams parse_adt_fields(const Node& n) {
  ADTParams a;
  a.N0 = n.at("N0").integer();
  if (a.N0 < 1) n.at("N0").fail("N0 must be >= 1");
  a.tau_a = n.at("tau_a").positive();
  return a;
}

SignalSpec parse_signal(const Node& n, const SwitchedSystem& sys) {
  SignalSpec spec;
  if (n.has("generator")) {
    n.only({"generator"});
    const Node g = n.at("generator");
    g.only({"seed", "dwell_min", "N0", "tau_a", "horizon", "sigma0"});
    SignalGenerator gen;
    if (g.has("seed")) gen.seed = g.at("seed").u64();
    gen.adt = parse_adt_fields(g);
    gen.dwell_min = g.at("dwell_min").positive();
    gen.horizon = g.at("horizon").positive();
    if (g.has("sigma0")) {
      gen.sigma0 = g.at("sigma0").integer();
      if (!sys.has_mode(*gen.sigma0)) g.at("sigma0").fail("unknown mode");
    }
    spec.generator = gen;
    spec.adt = gen.adt;
    return spec;
  }

  n.only({"sigma0", "events", "horizon", "adt"});
  const ModeId sigma0 = n.at("sigma0").integer();
  if (!sys.has_mode(sigma0)) n.at("sigma0").fail("unknown mode");
  const double horizon = n.at("horizon").positive();
  std::vector<SwitchEvent> events;
  if (n.has("events")) {
    const Node ev = n.at("events");
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const Node e = ev[i];
      e.only({"t", "mode"});
      SwitchEvent s{e.at("t").num(), e.at("mode").integer()};
      if (!sys.has_mode(s.mode)) e.at("mode").fail("unknown mode");
      events.push_back(s);
    }
  }
  if (n.has("adt")) {
    const Node a = n.at("adt");
    a.only({"N0", "tau_a"});
    spec.adt = parse_adt_fields(a);
  }
  try {
    spec.events = SwitchingSignal(sigma0, std::move(events), horizon);
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return spec;
}

SimulationSpec parse_simulation(const Node& n, const SwitchedSystem& sys) {
  n.only({"x0", "t_end", "record_intersample", "substep"});
  SimulationSpec s;
  s.x0 = n.at("x0").vector();
  if (s.x0.size() != sys.n()) n.at("x0").fail("expected " + std::to_string(sys.n()) + " entries");
  s.t_end = n.at("t_end").positive();
  if (n.has("record_intersample")) s.record_intersample = n.at("record_intersample").boolean();
  if (n.has("substep")) s.substep = n.at("substep").positive();
  if (s.record_intersample && !s.substep) n.at("substep").fail("required when record_intersample is true");
  return s;
}

}  // namespace

RunConfig parse_config(const json& j) {
  const Node root(j, "$");
  root.only({"system", "quantizer", "certification", "signal", "simulation"});
  SwitchedSystem sys = parse_system(root.at("system"));
  QuantizerConfig q = root.has("quantizer") ? parse_quantizer(root.at("quantizer")) : QuantizerConfig{};
  CertParams cp = root.has("certification") ? parse_certification(root.at("certification"), sys) : CertParams{};
  cp.N = q.N;
  RunConfig cfg{std::move(sys), q, cp, std::nullopt, std::nullopt};
  if (root.has("signal")) cfg.signal = parse_signal(root.at("signal"), cfg.system);
  if (root.has("simulation")) cfg.simulation = parse_simulation(root.at("simulation"), cfg.system);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

SwitchingSignal resolve_signal(const RunConfig& cfg) {
  if (!cfg.signal) throw ConfigError("config $.signal: missing required key");
  if (cfg.signal->events) return *cfg.signal->events;
  return random_signal(*cfg.signal->generator, cfg.system.tau_s(), cfg.system.mode_ids());
}

json matrix_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

json certificate_to_json(const Certificate& cert, const SwitchedSystem& sys) {
  json modes = json::array();
  for (const ModeCert& m : cert.modes) {
    modes.push_back({{"id", m.id},
                     {"eta_p", m.eta_p},
                     {"lhs", m.lhs4},
                     {"theta_p", m.theta_p},
                     {"kappa_p", m.kappa_p},
                     {"rho_p", m.rho_p},
                     {"Q_p", matrix_to_json(m.Q_p)},
                     {"P_p", matrix_to_json(m.P_p)},
                     {"lambda_min_P", m.lambda_min_P},
                     {"lambda_max_P", m.lambda_max_P},
                     {"alpha_p", m.alpha_p},
                     {"beta_p", m.beta_p},
                     {"nu_p", m.nu_p}});
  }
  json pairs = json::array();
  for (const PairCert& p : cert.pairs) {
    pairs.push_back({{"p", p.p},
                     {"q", p.q},
                     {"delta_bar", p.delta_bar},
                     {"gamma_prime_bar", p.gamma_prime_bar},
                     {"gamma_bar", p.gamma_bar},
                     {"alpha_bar", p.alpha_bar},
                     {"beta_bar", p.beta_bar},
                     {"nu_bar", p.nu_bar}});
  }
  const AdmissibleN an = min_admissible_N(sys);
  json out = {{"modes", modes},
              {"pairs", pairs},
              {"eta", cert.eta},
              {"nu", cert.nu},
              {"tau_a_min", cert.tau_a_min},
              {"N", cert.N},
              {"N_int", an.N_int},
              {"N_odd", an.N_odd},
              {"grid_points", cert.grid_points},
              {"safety_factor", cert.safety_factor},
              {"tau_s", cert.tau_s}};
  out["nu_bar"] = cert.nu_bar ? json(*cert.nu_bar) : json(nullptr);
  return out;
}

json invariants_to_json(const InvariantReport& rep, const TrajectorySummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json out = {{"ok", rep.ok()},
              {"e_dominance_ok", rep.e_dominance_ok},
              {"cycle_contraction_ok", rep.cycle_contraction_ok},
              {"samples_checked", rep.samples_checked},
              {"no_switch_checks", rep.no_switch_checks},
              {"switch_checks", rep.switch_checks},
              {"worst_e_ratio", rep.worst_e_ratio},
              {"worst_cycle_ratio", rep.worst_cycle_ratio},
              {"worst_switch_ratio", rep.worst_switch_ratio},
              {"zoom_out_end", opt(s.zoom_out_end)},
              {"first_nonzero_u", opt(s.first_nonzero_u)},
              {"final_state_norm", s.final_state_norm}};
  out["first_violation"] = rep.first_violation ? json(*rep.first_violation) : json(nullptr);
  return out;
}

}  // namespace qswitch
