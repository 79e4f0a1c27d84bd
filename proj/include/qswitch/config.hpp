#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "qswitch/sim.hpp"

namespace qswitch {

struct SignalSpec {
  std::optional<SwitchingSignal> events;   // explicit schedule
  std::optional<SignalGenerator> generator;
  std::optional<ADTParams> adt;            // from the explicit block or the generator
};

struct SimulationSpec {
  Vec x0;
  double t_end{};
  bool record_intersample{false};
  std::optional<double> substep;
};

struct RunConfig {
  SwitchedSystem system;
  QuantizerConfig quantizer;
  CertParams certification;
  std::optional<SignalSpec> signal;
  std::optional<SimulationSpec> simulation;
};

/// Strict parse: unknown keys and type errors raise ConfigError naming the JSON path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Concrete schedule for a run: the explicit events or the generator output.
SwitchingSignal resolve_signal(const RunConfig& cfg);

nlohmann::json matrix_to_json(const Mat& M);
nlohmann::json certificate_to_json(const Certificate& cert, const SwitchedSystem& sys);
nlohmann::json invariants_to_json(const InvariantReport& rep, const TrajectorySummary& summary);

}  // namespace qswitch
