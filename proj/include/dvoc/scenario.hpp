#pragma once

// Scenario documents: JSON text with units spelled out in key names.
// RMS quantities are converted to peak alpha-beta amplitudes here and nowhere else.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dvoc/sim.hpp"

namespace dvoc {

struct ScenarioFile {
    Scenario scenario;
    SimConfig config;
    std::vector<std::string> outputs;  ///< subset of "trace", "metrics", "curve"
};

/// Parses and validates a scenario document. A run manifest is accepted too,
/// in which case its embedded scenario is used. Throws ValidationError
/// carrying every problem found, each prefixed with its JSON path.
[[nodiscard]] ScenarioFile parse_scenario_text(std::string_view text);

/// Reads `path`; throws ValidationError if it cannot be read.
[[nodiscard]] ScenarioFile parse_scenario_file(const std::filesystem::path& path);

/// Built-in name or file path.
[[nodiscard]] ScenarioFile load_scenario(std::string_view name_or_path);

/// Canonical document: peak volts, rad/s, siemens. Parsing it gives back the same ScenarioFile.
[[nodiscard]] std::string serialize_scenario(const ScenarioFile& file, int indent = 2);

[[nodiscard]] std::vector<std::string> builtin_scenario_names();
[[nodiscard]] std::optional<std::string_view> builtin_scenario_text(std::string_view name);

bool operator==(const ScenarioFile& x, const ScenarioFile& y);

}  // namespace dvoc
