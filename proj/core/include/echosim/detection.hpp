#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "echosim/echo.hpp"
#include "echosim/spectral.hpp"

namespace echosim::detection {

struct DetectorModel {
    double efficiency = 0.07;          ///< detection probability per photon
    double dark_rate_hz = 10.0;
    double path_transmission = 0.15;   ///< input-to-detector signal transmission
    double fluorescence_collection = 1e-3;  ///< share of fluorescence reaching
                                            ///< the detection mode; free knob
    bool chopper_open = true;          ///< signal path gated during storage
};

struct CountHistogram {
    std::vector<double> bin_edges_s;     ///< size = counts.size() + 1
    std::vector<std::uint64_t> counts;
    std::uint64_t n_trials = 0;
    std::uint64_t seed = 0;

    std::uint64_t total() const;
};

/// Gaussian phase jitter of the local oscillator between preparation and
/// measurement; quasi-static (one draw per preparation cycle).
struct PhaseNoiseModel {
    double sigma_rad = 0.0;
};

/// Accumulate a time-binned detection histogram over n_trials storage trials.
/// Expected count per bin = n_trials * (signal * path * efficiency
/// + fluorescence * collection * efficiency + dark rate * bin width);
/// realized counts are Poisson, deterministic for a fixed seed.
CountHistogram simulate_counts(const echo::EchoResult& result,
                               const std::function<double(double)>& fluor_rate,
                               const DetectorModel& det, std::uint64_t n_trials,
                               double bin_width_s, std::uint64_t seed);

struct BinRange {
    std::size_t first = 0;
    std::size_t count = 0;
};

struct SnrResult {
    std::optional<double> value;  ///< empty when the noise window is empty
    std::uint64_t n_a = 0;
    std::uint64_t n_b = 0;
};

/// (N_A - N_B) / N_B over two disjoint, equally sized bin windows.
SnrResult snr(const CountHistogram& hist, BinRange window_a, BinRange window_b);

/// Expected dark contribution subtracted bin-wise; may go negative.
std::vector<double> dark_subtracted(const CountHistogram& hist,
                                    const DetectorModel& det);

struct FringePoint {
    double delta0_hz;
    std::uint64_t counts;
    double counts_err;  ///< Poisson
};

struct FringeScan {
    std::vector<FringePoint> points;
    bool lo_mismatch_warning = false;
    double echo_photons = 0.0;
    double lo_photons = 0.0;
    double dark_expectation = 0.0;  ///< expected dark counts per scan point
};

/// LO photon number (at the detector) that matches the echo amplitude.
double matched_lo_photons(double echo_efficiency, double input_mean_photons);

/// Interfere echo m with a matched local oscillator while scanning the comb
/// offset. The LO phase jitter is drawn once per preparation cycle with
/// standard deviation m * sigma; counts come from the Poisson machinery.
FringeScan interference_scan(const echo::EchoResult& result, int order_m,
                             double lo_detected_photons,
                             std::span<const double> delta0_scan_hz,
                             const spectral::CombSpec& comb,
                             const PhaseNoiseModel& noise,
                             const DetectorModel& det, std::uint64_t n_cycles,
                             std::uint64_t trials_per_cycle, std::uint64_t seed);

struct FringeFit {
    double visibility = 0.0;
    double visibility_err = 0.0;
    double period_hz = 0.0;
    double period_err = 0.0;
    double phase0_rad = 0.0;
    double phase0_err = 0.0;
    double offset = 0.0;
};

/// Least-squares fit of c0 * (1 + V cos(2 pi x / P + phi0)) to a fringe scan.
/// Needs at least six points spanning one period; the visibility is clipped
/// to [0, 1] and errors come from the fit covariance. A known flat baseline
/// (dark counts) is subtracted before fitting.
FringeFit fit_fringe(std::span<const FringePoint> points, double baseline = 0.0);

/// V_m = exp(-(m sigma)^2 / 2).
double visibility_model(double sigma_rad, int m);

}  // namespace echosim::detection
