#include "echosim/pumping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace echosim::pumping {

namespace {

void check_material(const MaterialParams& m) {
    if (!(m.t1_s > 0.0) || !(m.tz_s > 0.0) || !(m.t_persistent_s > 0.0))
        throw std::invalid_argument("lifetimes must be positive");
    if (m.branch_beta < 0.0 || m.branch_beta > 1.0)
        throw std::invalid_argument("branching ratio must lie in [0, 1]");
    if (m.persistent_fraction < 0.0 || m.persistent_fraction > 1.0)
        throw std::invalid_argument("persistent fraction must lie in [0, 1]");
}

struct ClassState {
    double g1, g2, e, p;
};

struct Rates {
    double pump;        // g1 -> e
    double decay_g1;    // e -> g1
    double decay_g2;    // e -> g2
    double decay_p;     // e -> p
    double relax_g2;    // g2 -> g1
    double relax_p;     // p -> g1
};

ClassState derivs(const ClassState& s, const Rates& r) {
    const double pump = r.pump * s.g1;
    const double from_e = s.e;
    ClassState d;
    d.e = pump - from_e * (r.decay_g1 + r.decay_g2 + r.decay_p);
    d.g2 = from_e * r.decay_g2 - s.g2 * r.relax_g2;
    d.p = from_e * r.decay_p - s.p * r.relax_p;
    d.g1 = -pump + from_e * r.decay_g1 + s.g2 * r.relax_g2 + s.p * r.relax_p;
    return d;
}

ClassState rk4_step(const ClassState& s, const Rates& r, double dt) {
    auto add = [](const ClassState& a, const ClassState& b, double f) {
        return ClassState{a.g1 + f * b.g1, a.g2 + f * b.g2, a.e + f * b.e,
                          a.p + f * b.p};
    };
    const ClassState k1 = derivs(s, r);
    const ClassState k2 = derivs(add(s, k1, 0.5 * dt), r);
    const ClassState k3 = derivs(add(s, k2, 0.5 * dt), r);
    const ClassState k4 = derivs(add(s, k3, dt), r);
    ClassState out = s;
    out.g1 += dt / 6.0 * (k1.g1 + 2 * k2.g1 + 2 * k3.g1 + k4.g1);
    out.g2 += dt / 6.0 * (k1.g2 + 2 * k2.g2 + 2 * k3.g2 + k4.g2);
    out.e += dt / 6.0 * (k1.e + 2 * k2.e + 2 * k3.e + k4.e);
    out.p += dt / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    return out;
}

bool in_gate(const PumpSchedule& s, double x) {
    for (const auto& g : s.gate_windows)
        if (x >= g.lo_hz && x <= g.hi_hz) return true;
    return false;
}

}  // namespace

PopulationField PopulationField::ground(const std::vector<double>& grid) {
    PopulationField f;
    f.grid = grid;
    f.g1.assign(grid.size(), 1.0);
    f.g2.assign(grid.size(), 0.0);
    f.e.assign(grid.size(), 0.0);
    f.p.assign(grid.size(), 0.0);
    return f;
}

double PopulationField::total_excited() const {
    double s = 0.0;
    for (double v : e) s += v;
    return s;
}

PreparationRun evolve_preparation(const PopulationField& initial,
                                  const PumpSchedule& schedule,
                                  const MaterialParams& mat, double dt_s,
                                  int snapshot_stride) {
    check_material(mat);
    if (schedule.stimulation_gain < 1.0)
        throw std::invalid_argument("stimulation gain must be >= 1");
    const double t1_eff = mat.t1_s / schedule.stimulation_gain;
    double bound = t1_eff;
    if (schedule.pump_rate_per_s > 0.0)
        bound = std::min(bound, 1.0 / schedule.pump_rate_per_s);
    bound /= 10.0;
    if (!(dt_s > 0.0) || (std::isfinite(bound) && dt_s > bound))
        throw std::invalid_argument("dt too coarse; stability bound is " +
                                    std::to_string(bound) + " s");

    const std::size_t n = initial.size();
    const double grid_step =
        n > 1 ? initial.grid[1] - initial.grid[0] : 0.0;
    const double res_width = schedule.resonance_width_hz > 0.0
                                 ? schedule.resonance_width_hz
                                 : 2.0 * grid_step;

    // Per-class pump rate while the swept pump is on. In the averaged model a
    // class sees the sweep for a duty fraction res_width / span per pass.
    std::vector<double> pump_mask(n, 0.0);
    const double span = schedule.sweep_span_hz;
    if (schedule.pump_rate_per_s > 0.0 && span > 0.0) {
        const double duty = std::min(1.0, res_width / span);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = initial.grid[i];
            if (std::abs(x) > 0.5 * span) continue;
            if (in_gate(schedule, x)) continue;
            pump_mask[i] = schedule.sweep_model == SweepModel::averaged
                               ? schedule.pump_rate_per_s * duty
                               : schedule.pump_rate_per_s;
        }
    }

    const Rates base{
        0.0,
        (1.0 - mat.branch_beta) / t1_eff,
        mat.branch_beta * (1.0 - mat.persistent_fraction) / t1_eff,
        mat.branch_beta * mat.persistent_fraction / t1_eff,
        1.0 / mat.tz_s,
        1.0 / mat.t_persistent_s,
    };

    const double t_total = schedule.duration_s + schedule.t_extra_s;

    auto integrate = [&](double dt, bool record,
                         PreparationRun& run) -> PopulationField {
        PopulationField state = initial;
        const auto steps = static_cast<std::size_t>(std::ceil(t_total / dt));
        const double step = t_total / static_cast<double>(steps);
        if (record && snapshot_stride > 0) {
            run.times_s.push_back(0.0);
            run.snapshots.push_back(state);
        }
        for (std::size_t k = 0; k < steps; ++k) {
            const double t = k * step;
            const bool pumping = t < schedule.duration_s;
            for (std::size_t i = 0; i < n; ++i) {
                Rates r = base;
                if (pumping) {
                    if (schedule.sweep_model == SweepModel::explicit_window &&
                        pump_mask[i] > 0.0) {
                        // Sawtooth sweep position; pump hits the class only
                        // while the resonance window covers it.
                        const double pos =
                            -0.5 * span +
                            std::fmod(schedule.sweep_rate_hz_per_s * t, span);
                        if (std::abs(initial.grid[i] - pos) > 0.5 * res_width)
                            r.pump = 0.0;
                        else
                            r.pump = pump_mask[i];
                    } else {
                        r.pump = pump_mask[i];
                    }
                }
                ClassState s{state.g1[i], state.g2[i], state.e[i], state.p[i]};
                s = rk4_step(s, r, step);
                state.g1[i] = s.g1;
                state.g2[i] = s.g2;
                state.e[i] = s.e;
                state.p[i] = s.p;
            }
            if (record && snapshot_stride > 0 &&
                ((k + 1) % static_cast<std::size_t>(snapshot_stride) == 0)) {
                run.times_s.push_back((k + 1) * step);
                run.snapshots.push_back(state);
            }
        }
        return state;
    };

    // Step-halving convergence check on the final populations.
    PreparationRun run;
    double dt = dt_s;
    PopulationField coarse = integrate(dt, false, run);
    for (int iter = 0;; ++iter) {
        PreparationRun fine_run;
        PopulationField fine = integrate(dt / 2.0, iter >= 0, fine_run);
        double num = 0.0, den = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            num = std::max(num, std::abs(fine.g1[i] - coarse.g1[i]));
            num = std::max(num, std::abs(fine.e[i] - coarse.e[i]));
        }
        if (num / den < 1e-6) {
            run = std::move(fine_run);
            run.final_state = std::move(fine);
            break;
        }
        if (iter >= 8)
            throw std::runtime_error(
                "preparation integration failed to converge under step halving");
        coarse = std::move(fine);
        dt /= 2.0;
    }
    return run;
}

spectral::SpectralProfile realized_profile(const PopulationField& final_state,
                                           const spectral::SpectralProfile& raw) {
    if (final_state.size() != raw.grid.size() ||
        (final_state.size() > 0 && (final_state.grid.front() != raw.grid.front() ||
                                    final_state.grid.back() != raw.grid.back())))
        throw std::invalid_argument("population grid does not match the profile");
    spectral::SpectralProfile out = raw;
    for (std::size_t i = 0; i < out.depth.size(); ++i)
        out.depth[i] = raw.depth[i] * final_state.g1[i];
    // The flat background models spectrally untargeted absorption and keeps
    // its unpumped population.
    out.feature_fwhm_hz = 0.0;  // shape changed; remeasure on demand
    return out;
}

double fluorescence_rate(const PopulationField& final_state,
                         const MaterialParams& mat, double t_s) {
    if (t_s < 0.0) throw std::invalid_argument("time must be non-negative");
    return mat.ensemble_ions * final_state.total_excited() *
           std::exp(-t_s / mat.t1_s) / mat.t1_s;
}

PopulationField relax_populations(const PopulationField& pops,
                                  const MaterialParams& mat, double t_wait_s) {
    check_material(mat);
    if (t_wait_s < 0.0) throw std::invalid_argument("wait must be non-negative");
    PopulationField out = pops;
    const double r1 = 1.0 / mat.t1_s;
    const double rz = 1.0 / mat.tz_s;
    const double rp = 1.0 / mat.t_persistent_s;
    const double e1 = std::exp(-t_wait_s * r1);
    const double ez = std::exp(-t_wait_s * rz);
    const double ep = std::exp(-t_wait_s * rp);

    // Feed-through of the decaying excited population into a pool relaxing at
    // rate rx: solution of x' = a e0 exp(-t r1) - rx x with x(0) = 0.
    auto feed = [&](double a, double rx, double ex) -> double {
        if (a == 0.0) return 0.0;
        const double diff = rx - r1;
        if (std::abs(diff) < 1e-12 * std::max(rx, r1))
            return a * t_wait_s * e1;
        return a * (e1 - ex) / diff;
    };

    const double a2 = mat.branch_beta * (1.0 - mat.persistent_fraction) * r1;
    const double ap = mat.branch_beta * mat.persistent_fraction * r1;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double e0 = pops.e[i];
        out.e[i] = e0 * e1;
        out.g2[i] = pops.g2[i] * ez + e0 * feed(a2, rz, ez);
        out.p[i] = pops.p[i] * ep + e0 * feed(ap, rp, ep);
        out.g1[i] = pops.g1[i] + pops.g2[i] + pops.e[i] + pops.p[i] -
                    out.g2[i] - out.e[i] - out.p[i];
    }
    return out;
}

spectral::SpectralProfile decay_profile(const spectral::SpectralProfile& raw,
                                        const PopulationField& pops,
                                        const MaterialParams& mat,
                                        double t_wait_s) {
    return realized_profile(relax_populations(pops, mat, t_wait_s), raw);
}

}  // namespace echosim::pumping
