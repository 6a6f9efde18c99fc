#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "echosim/config.hpp"

namespace echosim::harness {

/// Raised when a scenario cannot run (unresolvable grids, divergence guards).
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunReport {
    std::string scenario;
    std::string config_hash;            ///< FNV-1a of the canonical config
    std::map<std::string, double> metrics;
    std::vector<std::pair<std::string, std::string>> files;  ///< name -> hash
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;

    std::string to_json() const;
};

/// Execute a named scenario pipeline and write its CSV/JSON outputs plus a
/// manifest under out_dir. Deterministic for a fixed (config, seed).
RunReport run_scenario(const ScenarioConfig& config,
                       const std::filesystem::path& out_dir);

struct MetricDelta {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
    double delta = 0.0;
    bool pass = false;
    bool missing = false;
};

struct CompareResult {
    bool pass = false;
    std::vector<MetricDelta> deltas;
    std::vector<std::string> notes;  ///< e.g. extra metrics ignored
};

/// Compare a run report against a reference metrics file
/// {"metrics": {name: {"value": v, "tol": t}}}. Metrics present in the report
/// but not in the reference are ignored and noted.
CompareResult compare_to_reference(const std::string& report_json,
                                   const std::string& reference_json);

struct ScenarioInfo {
    std::string name;
    std::string description;
};

const std::vector<ScenarioInfo>& list_scenarios();

}  // namespace echosim::harness
