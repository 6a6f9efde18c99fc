#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace echosim::spectral {

/// Tailored absorption structure on a uniform detuning grid.
///
/// `depth` is the optical depth of the tailored feature above the flat
/// absorbing `background` d0.  Intensity transmission through the medium at
/// detuning x is exp(-(depth(x) + background)).
struct SpectralProfile {
    std::vector<double> grid;   ///< detuning samples [Hz], uniform, ascending
    std::vector<double> depth;  ///< optical depth above background, >= 0
    double background = 0.0;    ///< flat background optical depth d0

    // Metadata filled in by the constructors below. Not persisted by the CSV
    // round trip; recomputed on demand where needed.
    double feature_fwhm_hz = 0.0;  ///< FWHM of a single feature / comb peak
    double comb_delta_hz = 0.0;    ///< comb peak spacing, 0 for non-combs
    double comb_floor = 0.0;       ///< inter-peak depth left by overlapping peaks
    bool low_contrast = false;     ///< comb peaks merged (contrast < 0.5)

    double spacing() const;
    double window_width() const { return grid.back() - grid.front(); }
    /// Trapezoid integral of `depth` over the grid [Hz].
    double area() const;
    /// Linear interpolation of the feature depth; 0 outside the grid.
    double value_at(double detuning_hz) const;
    /// Background raised by the computed inter-peak floor of a comb.
    double effective_background() const { return background + comb_floor; }
};

/// Parameters of a periodic absorption structure.
struct CombSpec {
    double delta_hz = 0.0;        ///< peak spacing
    double peak_fwhm_hz = 0.0;    ///< FWHM of each peak
    double peak_depth = 0.0;      ///< optical depth of a peak above background
    double background = 0.0;      ///< d0
    int n_peaks = 1;              ///< odd by convention so a peak sits at the offset
    double center_offset_hz = 0.0;///< comb center relative to the signal carrier

    double finesse() const { return delta_hz / peak_fwhm_hz; }
};

/// Linear map between applied voltage and width-broadening factor,
/// anchored at one measured point (u_ref -> b_ref).
struct VoltPerWidthCalibration {
    double u_ref_volts = 70.0;
    double b_ref = 3.0;
};

struct Atom {
    double detuning_hz;
    double position_m;
    double weight;
};

/// Discrete dipoles sampled from a profile; substrate of the brute-force
/// dipole-sum checks.
struct AtomEnsemble {
    std::vector<Atom> atoms;
    double total_weight = 0.0;
    double length_m = 0.0;
    double carrier_wavenumber = 4.0906e6;  ///< 2*pi / 1536 nm
    std::uint64_t seed = 0;
};

/// Gaussian absorption line of the given FWHM centered at zero detuning.
/// Rejects windows narrower than 6x the FWHM.
SpectralProfile make_single_line(double gamma_fwhm_hz, double peak_depth,
                                 double background, double window_width_hz,
                                 int grid_points);

/// Sum of identical Gaussian peaks at center_offset + n*delta.
/// Overlap of adjacent peaks raises `comb_floor`; a contrast below 0.5 sets
/// `low_contrast` instead of rejecting.
SpectralProfile make_comb(const CombSpec& spec, double window_width_hz,
                          int grid_points);

/// Rescale the feature x -> b*x with depth scaled by 1/b. The grid itself is
/// rescaled, which conserves the trapezoid area exactly and never truncates.
/// The flat background is left alone.
SpectralProfile stark_broaden(const SpectralProfile& profile, double factor);

/// b(u) = 1 + (b_ref - 1) * u / u_ref  (added width linear in voltage).
double voltage_to_broadening(double volts, const VoltPerWidthCalibration& calib);

/// Inverse-CDF sampling of the normalized feature profile. Positions are
/// uniform on [0, length]. With include_background, atoms are assigned to the
/// flat background in proportion to its share of the total area and drawn
/// uniformly over the window. Deterministic for a fixed seed.
AtomEnsemble sample_ensemble(const SpectralProfile& profile, std::size_t n_atoms,
                             double length_m, std::uint64_t seed,
                             bool include_background = false);

/// FWHM of the tallest feature in the profile, measured by half-maximum
/// crossings around the global peak.
double measure_feature_fwhm(const SpectralProfile& profile);

}  // namespace echosim::spectral
