#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "echosim/spectral.hpp"

namespace echosim::echo {

/// Weak Gaussian input pulse. mean_photons is the expectation of the photon
/// number; the field is normalized so that the time-integrated intensity of
/// the free pulse equals mean_photons.
struct Pulse {
    double center_time_s = 0.0;
    double fwhm_s = 0.0;            ///< intensity FWHM
    double mean_photons = 1.0;
    double carrier_offset_hz = 0.0; ///< detuning of the carrier from grid zero

    /// Transform-limited spectral intensity FWHM: 4 ln2 / (2 pi fwhm).
    double spectral_fwhm_hz() const;
};

/// One interval of applied electric field. The sign of the voltage is the
/// polarity; detunings acquired through the linear Stark shift scale with the
/// signed voltage.
struct FieldSegment {
    double t_start_s;
    double t_end_s;
    double voltage_v;  ///< signed
};

struct FieldSchedule {
    std::vector<FieldSegment> segments;  ///< non-overlapping, time-ordered
    spectral::VoltPerWidthCalibration calib;
};

struct EchoEvent {
    int order = 0;            ///< rephasing order (m for combs, 1 for a flip echo)
    double peak_time_s = 0.0;
    double efficiency = 0.0;  ///< window-integrated intensity / input photons
    double fwhm_s = 0.0;
    double phase_rad = 0.0;   ///< field phase at the peak, exp(+i phi) sense
};

struct EchoResult {
    std::vector<double> times_s;
    std::vector<double> intensity;  ///< photons per second equivalent
    std::vector<double> phase_rad;
    std::vector<EchoEvent> echoes;
    double transmitted_fraction = 0.0;
    double absorbed_remainder = 0.0;
    double mean_photons = 0.0;      ///< input pulse photons (for count scaling)
    bool energy_warning = false;    ///< bookkeeping exceeded unity
};

/// Output time grid for a storage run. dt must resolve the pulse (fwhm/10)
/// and the profile window (1/(10 * window width)).
struct StorageGrid {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double dt_s = 0.0;
};

/// Forward-retrieval echo efficiency of a flip-rephased broadened line:
/// d_br^2 e^{-d_br} e^{-d0} e^{-t^2 (2 pi gamma)^2}, where gamma is the
/// standard deviation of the initial (unbroadened) line and t the total
/// storage time from absorption to echo.
double crib_efficiency(double d_br, double d0, double t_s, double gamma_std_hz);

/// First-echo efficiency of a comb of finesse F and peak depth d:
/// (d/F)^2 e^{-d/F} e^{-d0} e^{-(1/F^2) pi^2/(4 ln2)}.
double afc_efficiency(double d, double finesse, double d0);

/// Comb rephasing times m / delta for m = 1..m_max.
std::vector<double> afc_echo_times(double delta_hz, int m_max);

struct EchoPhase {
    double wrapped_rad;    ///< in (-pi, pi]
    double unwrapped_rad;  ///< m * 2 pi delta0 / delta
};

/// Phase acquired by echo m when the comb center is offset by delta0.
/// Convention: a positive center offset advances the reported phase.
EchoPhase afc_echo_phase(double delta0_hz, double delta_hz, int m);

/// Linear weak-pulse storage simulation.
///
/// The input spectrum is split into frequency classes of the prepared
/// feature. Each class absorbs amplitude proportional to the input spectral
/// amplitude times sqrt(local depth), attenuated by half the medium depth per
/// pass; classes then accumulate phase according to their intrinsic detuning
/// plus the voltage-scaled Stark shift of the schedule, and re-emit with the
/// mirrored weight. Transmission is the input filtered by
/// exp(-(depth + background)/2) in amplitude. Echoes are located by peak
/// finding and integrated over +-2 FWHM windows.
EchoResult simulate_storage(const spectral::SpectralProfile& prepared,
                            const Pulse& input, const FieldSchedule& schedule,
                            const StorageGrid& grid);

/// Brute-force collective dipole sum s(t) = (1/W) sum_j w_j e^{-i phi_j(t)}
/// over an explicit ensemble; no spectral shortcuts. The per-atom Stark shift
/// under the schedule is stark_hz_per_volt * voltage * (2 z_j / L - 1).
std::vector<std::complex<double>> dipole_sum_oracle(
    const spectral::AtomEnsemble& ensemble, const FieldSchedule& schedule,
    std::span<const double> times_s, double stark_hz_per_volt = 0.0);

struct StretchResult {
    double alpha;            ///< added-width ratio between the two fields
    double output_fwhm_s;    ///< input fwhm / alpha
    double rephase_scale;    ///< echo delay after the flip = scale * delay before
};

/// Temporal rescaling of the echo for asymmetric flip voltages.
/// alpha compares the *added* Stark widths, which scale linearly with voltage.
StretchResult compress_stretch_fwhm(double input_fwhm_s, double u1_volts,
                                    double u2_volts,
                                    const spectral::VoltPerWidthCalibration& calib);

/// Temporal modes storable by a flip-rephased memory: grows with the applied
/// broadening while the broadened depth (and efficiency) falls.
int multimode_capacity_crib(double broadening_factor);

/// Temporal modes storable by a comb memory: set by the peak count, with the
/// efficiency unaffected.
int multimode_capacity_afc(int n_peaks, double modes_per_peak = 1.0);

}  // namespace echosim::echo
