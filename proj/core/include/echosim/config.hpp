#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echosim/detection.hpp"
#include "echosim/echo.hpp"
#include "echosim/pumping.hpp"
#include "echosim/spectral.hpp"

namespace echosim::harness {

/// Fully typed, unit-checked scenario configuration. All values SI.
struct ScenarioConfig {
    std::string scenario;
    std::uint64_t seed = 1;

    spectral::CombSpec comb{2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};

    struct Line {
        double fwhm_hz = 1e6;
        double depth = 2.0;
        double background = 0.0;
    } line;

    struct Window {
        double width_hz = 60e6;
        int points = 16384;
    } window;

    echo::Pulse pulse{300e-9, 100e-9, 0.5, 0.0};

    struct Field {
        double u1_v = 70.0;
        double u2_v = 70.0;
        double on_delay_s = 0.0;    ///< field on, relative to pulse center
        double flip_delay_s = 1e-6; ///< polarity flip, relative to pulse center
        spectral::VoltPerWidthCalibration calib{70.0, 3.0};
    } field;

    detection::DetectorModel detector;
    pumping::MaterialParams material;
    pumping::PumpSchedule pump;
    double pump_gate_half_width_hz = 0.5e6;  ///< central gate of the line prep

    struct Noise {
        double sigma_rad = 0.48277;  ///< LO phase jitter per preparation cycle
    } noise;

    struct Trials {
        std::uint64_t n = 100000;
        std::uint64_t cycles = 400;   ///< preparation cycles (fringe scans)
        double bin_width_s = 20e-9;
    } trials;

    struct Scan {
        double wait_start_s = 5e-3;
        double wait_stop_s = 60e-3;
        int wait_points = 12;
        std::vector<double> nbar{1, 2, 5, 10, 20, 27};
        int fringe_points = 24;
        std::vector<double> stim_gains{1, 3, 10};
        std::vector<int> orders{1, 2};
        std::vector<double> flip_delays_s{0.6e-6, 1.0e-6};
        std::vector<double> u2_values_v{35, 65, 95};
        std::vector<double> d_values{2, 4, 8};
    } scan;

    struct Storage {
        double t_end_s = 0.0;  ///< 0 = scenario default
        double dt_s = 0.0;     ///< 0 = scenario default
    } storage;

    std::string canonical_json() const;  ///< sorted-key dump used for hashing
};

struct ValidationIssue {
    std::string path;     ///< dotted field path
    std::string message;
};

struct ValidationResult {
    bool ok = false;
    ScenarioConfig config;
    std::vector<ValidationIssue> issues;  ///< all violations, not just the first
};

/// Parse and validate a JSON config with mandatory unit suffixes on
/// dimensioned quantities (e.g. "delta": "2.78 MHz"). Unknown keys are
/// rejected; scenario defaults fill anything not given.
ValidationResult validate_config(const std::string& json_text);

/// Default configuration for a named scenario, serialized with units.
std::string default_config_json(const std::string& scenario);

}  // namespace echosim::harness
