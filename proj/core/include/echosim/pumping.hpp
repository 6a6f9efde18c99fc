#pragma once

#include <cstdint>
#include <vector>

#include "echosim/spectral.hpp"

namespace echosim::pumping {

struct MaterialParams {
    double t1_s = 11e-3;            ///< excited-state lifetime
    double tz_s = 130e-3;           ///< ground Zeeman lifetime
    double t_persistent_s = 900.0;  ///< persistent-hole lifetime (~15 min)
    double branch_beta = 0.1;       ///< decay branching into the other ground level
    double persistent_fraction = 0.0;  ///< share of pumped ions parking in the
                                       ///< persistent reservoir; no established
                                       ///< value, must be set per scenario
    double ensemble_ions = 1.0;  ///< ions represented by one unit of
                                 ///< population; absolute fluorescence scale
};

struct GateWindow {
    double lo_hz;
    double hi_hz;
};

enum class SweepModel {
    averaged,       ///< per-class duty-cycled pump rate (default)
    explicit_window ///< resonance window literally swept across the span
};

struct PumpSchedule {
    double duration_s = 120e-3;        ///< optical pumping time
    double sweep_span_hz = 0.0;        ///< width of the repeatedly swept region
    double sweep_rate_hz_per_s = 0.0;  ///< sweep speed (explicit model)
    std::vector<GateWindow> gate_windows;  ///< pump gated OFF inside these
    double pump_rate_per_s = 0.0;      ///< peak pumping rate at resonance
    double resonance_width_hz = 0.0;   ///< pump resonance window; 0 = 2 grid steps
    double stimulation_gain = 1.0;     ///< T1_eff = T1 / gain while stimulating
    double t_extra_s = 23.5e-3;        ///< stimulation-only tail after pumping
    double t_wait_s = 86e-3;           ///< delay before the storage trials
    SweepModel sweep_model = SweepModel::averaged;
};

/// Populations per frequency class: initial ground g1, other Zeeman level g2,
/// excited e, persistent reservoir p. g1+g2+e+p = 1 per class.
struct PopulationField {
    std::vector<double> grid;  ///< detuning per class [Hz]
    std::vector<double> g1, g2, e, p;

    static PopulationField ground(const std::vector<double>& grid);
    std::size_t size() const { return grid.size(); }
    double total_excited() const;
};

struct PreparationRun {
    std::vector<double> times_s;             ///< snapshot times
    std::vector<PopulationField> snapshots;  ///< sampled states
    PopulationField final_state;             ///< state at duration + t_extra
};

/// Integrate the per-class rate equations over pumping plus the stimulation
/// tail. Fixed-step RK4 with an internal step-halving convergence check
/// (relative change < 1e-6 on the final populations). Rejects dt coarser than
/// min(T1_eff, 1/pump_rate)/10 and reports the bound.
PreparationRun evolve_preparation(const PopulationField& initial,
                                  const PumpSchedule& schedule,
                                  const MaterialParams& mat, double dt_s,
                                  int snapshot_stride = 0);

/// Absorption is proportional to the population left in the initial state:
/// depth(x) = raw_depth(x) * g1(x), background scaled the same way.
spectral::SpectralProfile realized_profile(const PopulationField& final_state,
                                           const spectral::SpectralProfile& raw);

/// Fluorescence emission rate a time t after the end of preparation,
/// in excited-population-equivalents per second (stimulation off).
double fluorescence_rate(const PopulationField& final_state,
                         const MaterialParams& mat, double t_s);

/// Free relaxation of the populations for t_wait (no pump, no stimulation),
/// evaluated in closed form.
PopulationField relax_populations(const PopulationField& pops,
                                  const MaterialParams& mat, double t_wait_s);

/// Profile realized a time t_wait after preparation: the pumped-away
/// population returns with T_Z while the persistent share returns only with
/// the persistent-hole lifetime.
spectral::SpectralProfile decay_profile(const spectral::SpectralProfile& raw,
                                        const PopulationField& pops,
                                        const MaterialParams& mat,
                                        double t_wait_s);

}  // namespace echosim::pumping
