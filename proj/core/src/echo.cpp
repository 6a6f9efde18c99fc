#include "echosim/echo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace echosim::echo {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kFourLn2 = 2.772588722239781;
constexpr double kPi = 3.141592653589793238462643383279;

using cplx = std::complex<double>;

}  // namespace

double Pulse::spectral_fwhm_hz() const { return kFourLn2 / (kTwoPi * fwhm_s); }

double crib_efficiency(double d_br, double d0, double t_s, double gamma_std_hz) {
    if (d_br < 0.0 || d0 < 0.0 || t_s < 0.0 || gamma_std_hz < 0.0)
        throw std::invalid_argument("crib_efficiency needs non-negative inputs");
    const double gt = t_s * kTwoPi * gamma_std_hz;
    return d_br * d_br * std::exp(-d_br) * std::exp(-d0) * std::exp(-gt * gt);
}

double afc_efficiency(double d, double finesse, double d0) {
    if (d < 0.0 || finesse <= 0.0 || d0 < 0.0)
        throw std::invalid_argument("afc_efficiency needs d, d0 >= 0 and F > 0");
    const double deff = d / finesse;
    const double dephasing = kPi * kPi / (kFourLn2 * finesse * finesse);
    return deff * deff * std::exp(-deff) * std::exp(-d0) * std::exp(-dephasing);
}

std::vector<double> afc_echo_times(double delta_hz, int m_max) {
    if (delta_hz <= 0.0)
        throw std::invalid_argument("peak spacing must be positive");
    std::vector<double> t(m_max);
    for (int m = 1; m <= m_max; ++m) t[m - 1] = m / delta_hz;
    return t;
}

EchoPhase afc_echo_phase(double delta0_hz, double delta_hz, int m) {
    if (delta_hz <= 0.0)
        throw std::invalid_argument("peak spacing must be positive");
    const double unwrapped = m * kTwoPi * delta0_hz / delta_hz;
    double wrapped = std::remainder(unwrapped, kTwoPi);
    if (wrapped <= -kPi) wrapped += kTwoPi;
    return {wrapped, unwrapped};
}

StretchResult compress_stretch_fwhm(double input_fwhm_s, double u1_volts,
                                    double u2_volts,
                                    const spectral::VoltPerWidthCalibration& calib) {
    if (input_fwhm_s <= 0.0 || u1_volts <= 0.0 || u2_volts <= 0.0)
        throw std::invalid_argument("need positive pulse width and voltages");
    const double added1 = spectral::voltage_to_broadening(u1_volts, calib) - 1.0;
    const double added2 = spectral::voltage_to_broadening(u2_volts, calib) - 1.0;
    const double alpha = added2 / added1;
    return {alpha, input_fwhm_s / alpha, 1.0 / alpha};
}

int multimode_capacity_crib(double broadening_factor) {
    if (broadening_factor < 1.0)
        throw std::invalid_argument("broadening factor must be >= 1");
    return static_cast<int>(std::floor(broadening_factor));
}

int multimode_capacity_afc(int n_peaks, double modes_per_peak) {
    if (n_peaks < 1 || modes_per_peak <= 0.0)
        throw std::invalid_argument("need at least one peak");
    return static_cast<int>(std::floor(modes_per_peak * n_peaks));
}

std::vector<cplx> dipole_sum_oracle(const spectral::AtomEnsemble& ensemble,
                                    const FieldSchedule& schedule,
                                    std::span<const double> times_s,
                                    double stark_hz_per_volt) {
    if (ensemble.atoms.empty()) throw std::invalid_argument("ensemble is empty");

    // Signed volt-seconds accumulated by the schedule up to each time.
    auto volt_seconds = [&](double t) {
        double vs = 0.0;
        for (const auto& seg : schedule.segments) {
            if (t <= seg.t_start_s) break;
            vs += seg.voltage_v * (std::min(t, seg.t_end_s) - seg.t_start_s);
        }
        return vs;
    };

    std::vector<double> vs(times_s.size());
    for (std::size_t k = 0; k < times_s.size(); ++k)
        vs[k] = volt_seconds(times_s[k]);

    std::vector<cplx> out(times_s.size());
    for (const auto& atom : ensemble.atoms) {
        const double shift_per_volt =
            stark_hz_per_volt *
            (ensemble.length_m > 0.0
                 ? 2.0 * atom.position_m / ensemble.length_m - 1.0
                 : 0.0);
        for (std::size_t k = 0; k < times_s.size(); ++k) {
            const double phi =
                kTwoPi * (atom.detuning_hz * times_s[k] + shift_per_volt * vs[k]);
            out[k] += atom.weight * cplx(std::cos(phi), -std::sin(phi));
        }
    }
    for (auto& v : out) v /= ensemble.total_weight;
    return out;
}

// ---------------------------------------------------------------------------
// Storage simulation
// ---------------------------------------------------------------------------

namespace {

struct Interval {
    std::size_t i0, i1;  // sample range [i0, i1)
    double rate;         // signed voltage / u_norm, 0 with the field off
    double voltage_abs;
};

double pulse_spectrum_amp(const Pulse& p, double nu) {
    const double sigma_t = p.fwhm_s / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double a0 = std::sqrt(std::max(p.mean_photons, 0.0) /
                                (sigma_t * std::sqrt(kTwoPi)));
    const double d = nu - p.carrier_offset_hz;
    return a0 * 2.0 * sigma_t * std::sqrt(kPi) *
           std::exp(-4.0 * kPi * kPi * sigma_t * sigma_t * d * d);
}

// Flat pedestal of the feature (residual depth of an imperfect pit). The
// structure above it re-emits coherently; the pedestal only attenuates.
// For a constant offset under a periodic comb this changes nothing but the
// smooth near-pulse response.
double depth_pedestal(const spectral::SpectralProfile& prof) {
    double f = 1e300;
    for (double d : prof.depth) f = std::min(f, d);
    return f == 1e300 ? 0.0 : f;
}

// Depth seen by a propagating smooth-spectrum field: equal to the profile for
// smooth features, period-averaged for combs. A re-emitted echo carries the
// input's smooth spectral envelope, so its reabsorption follows this average
// rather than the local peak depth.
std::vector<double> propagation_depth(const spectral::SpectralProfile& prof) {
    std::vector<double> out = prof.depth;
    if (prof.comb_delta_hz <= 0.0) return out;
    const auto half = static_cast<std::size_t>(
        std::max(1.0, 0.5 * prof.comb_delta_hz / prof.spacing()));
    std::vector<double> prefix(prof.depth.size() + 1, 0.0);
    for (std::size_t i = 0; i < prof.depth.size(); ++i)
        prefix[i + 1] = prefix[i] + prof.depth[i];
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t lo = i > half ? i - half : 0;
        const std::size_t hi = std::min(i + half, out.size() - 1);
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi + 1 - lo);
    }
    return out;
}

double interp_on(const std::vector<double>& grid, const std::vector<double>& v,
                 double x) {
    if (grid.empty() || x <= grid.front() || x >= grid.back()) {
        if (!grid.empty() && x == grid.front()) return v.front();
        if (!grid.empty() && x == grid.back()) return v.back();
        return 0.0;
    }
    const double dx = grid[1] - grid[0];
    const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / dx),
                            grid.size() - 2);
    const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    return v[i] + t * (v[i + 1] - v[i]);
}

}  // namespace

EchoResult simulate_storage(const spectral::SpectralProfile& prepared,
                            const Pulse& input, const FieldSchedule& schedule,
                            const StorageGrid& grid) {
    if (prepared.grid.size() < 8)
        throw std::invalid_argument("profile grid too small");
    if (!(input.fwhm_s > 0.0) || input.mean_photons < 0.0)
        throw std::invalid_argument("invalid input pulse");
    if (!(grid.dt_s > 0.0) || !(grid.t_end_s > grid.t_start_s))
        throw std::invalid_argument("invalid storage grid");

    const double window = prepared.window_width();
    const double dt_bound = std::min(input.fwhm_s / 10.0, 1.0 / (10.0 * window));
    if (grid.dt_s > dt_bound)
        throw std::invalid_argument("time step too coarse; need dt <= " +
                                    std::to_string(dt_bound) + " s");

    double gamma_fwhm = prepared.feature_fwhm_hz;
    if (gamma_fwhm <= 0.0) gamma_fwhm = spectral::measure_feature_fwhm(prepared);
    if (gamma_fwhm > 0.0 && prepared.spacing() > gamma_fwhm / 4.0)
        throw std::invalid_argument(
            "profile grid does not resolve the feature (need step <= fwhm/4)");

    const double sigma_t = input.fwhm_s / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double edge = std::min(prepared.grid.back() - input.carrier_offset_hz,
                                 input.carrier_offset_hz - prepared.grid.front());
    if (std::exp(-8.0 * kPi * kPi * sigma_t * sigma_t * edge * edge) > 1e-6)
        throw std::invalid_argument("input spectrum clipped by the profile window");

    // Output sample grid; schedule edges and the absorption instant snap to it.
    const auto n_samples = static_cast<std::size_t>(std::floor(
                               (grid.t_end_s - grid.t_start_s) / grid.dt_s)) + 1;
    std::vector<double> times(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k)
        times[k] = grid.t_start_s + k * grid.dt_s;
    auto snap = [&](double t) -> std::size_t {
        const auto idx = std::llround((t - grid.t_start_s) / grid.dt_s);
        return static_cast<std::size_t>(
            std::clamp(idx, 0LL, static_cast<long long>(n_samples) - 1));
    };
    const std::size_t k_abs = snap(input.center_time_s);
    const double t_c = times[k_abs];

    // Field magnitudes: u_abs while the pulse is absorbed (0 = none), u_norm
    // the reference for the per-atom Stark coordinate.
    double u_abs = 0.0, u_norm = 0.0;
    double prev_end = -1e300;
    for (const auto& seg : schedule.segments) {
        if (seg.t_end_s <= seg.t_start_s)
            throw std::invalid_argument("field segment with non-positive length");
        if (seg.t_start_s < prev_end)
            throw std::invalid_argument("field segments overlap or are unordered");
        prev_end = seg.t_end_s;
        const double lo = input.center_time_s - input.fwhm_s;
        const double hi = input.center_time_s + input.fwhm_s;
        const bool covers = seg.t_start_s <= lo && seg.t_end_s >= hi;
        const bool disjoint = seg.t_end_s <= lo || seg.t_start_s >= hi;
        if (!covers && !disjoint)
            throw std::invalid_argument(
                "field segment edge falls inside the input pulse");
        if (covers) u_abs = std::abs(seg.voltage_v);
    }
    u_norm = u_abs;
    if (u_norm == 0.0) {
        for (const auto& seg : schedule.segments)
            if (seg.t_start_s >= input.center_time_s) {
                u_norm = std::abs(seg.voltage_v);
                break;
            }
    }

    // Piecewise-constant field intervals aligned to the sample grid.
    std::vector<Interval> intervals;
    std::size_t cursor = 0;
    for (const auto& seg : schedule.segments) {
        if (seg.t_end_s <= grid.t_start_s || seg.t_start_s >= grid.t_end_s)
            continue;
        const std::size_t a =
            seg.t_start_s <= grid.t_start_s ? 0 : snap(seg.t_start_s);
        const std::size_t b =
            seg.t_end_s >= grid.t_end_s ? n_samples : snap(seg.t_end_s);
        if (b <= a) continue;
        if (a > cursor) intervals.push_back({cursor, a, 0.0, 0.0});
        intervals.push_back({a, b, u_norm > 0.0 ? seg.voltage_v / u_norm : 0.0,
                             std::abs(seg.voltage_v)});
        cursor = b;
    }
    if (cursor < n_samples) intervals.push_back({cursor, n_samples, 0.0, 0.0});

    const auto& calib = schedule.calib;
    const double b_abs =
        u_abs > 0.0 ? spectral::voltage_to_broadening(u_abs, calib) : 1.0;
    const spectral::SpectralProfile profile_abs =
        b_abs > 1.0 ? spectral::stark_broaden(prepared, b_abs) : prepared;

    const double gamma_std = gamma_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double b_norm =
        u_norm > 0.0 ? spectral::voltage_to_broadening(u_norm, calib) : 1.0;
    const double sigma_stark =
        u_norm > 0.0 ? gamma_std * std::sqrt(b_norm * b_norm - 1.0) : 0.0;

    const double floor_abs = depth_pedestal(profile_abs);
    const std::vector<double> prop_abs = propagation_depth(profile_abs);
    auto absorb_weight = [&](double nu) -> double {
        const double structure =
            std::max(profile_abs.value_at(nu) - floor_abs, 0.0);
        const double total =
            interp_on(profile_abs.grid, prop_abs, nu) + prepared.background;
        return std::sqrt(structure) * std::exp(-0.25 * total);
    };

    const double e_peak = pulse_spectrum_amp(input, input.carrier_offset_hz);
    const double e_cut = 1e-9 * e_peak;

    // Transmission through the absorption-time profile, and the output field.
    // The reported fraction is the exact spectral value; the painted time
    // series filters with the propagation depth, so that for combs the
    // filter ringing is carried by the class emission instead.
    // The time series is painted on the prepared (fine) grid; the broadened
    // profile is sampled by interpolation so that the spectral spacing, and
    // with it the alias period of the replay, stays fine.
    std::vector<cplx> field(n_samples, cplx(0.0, 0.0));
    double transmitted_fraction = 0.0;
    {
        double num = 0.0, den = 0.0;
        const double dnu = prepared.spacing();
        for (std::size_t i = 0; i < prepared.grid.size(); ++i) {
            const double nu = prepared.grid[i];
            const double e = pulse_spectrum_amp(input, nu);
            if (e < e_cut) continue;
            const double th =
                profile_abs.value_at(nu) + prepared.background;
            num += e * e * std::exp(-th) * dnu;
            den += e * e * dnu;
            const double amp =
                e *
                std::exp(-0.5 * (interp_on(profile_abs.grid, prop_abs, nu) +
                                 prepared.background)) *
                dnu;
            const double w = -kTwoPi * nu * grid.dt_s;
            const cplx step(std::cos(w), std::sin(w));
            const double ph0 = -kTwoPi * nu * (times[0] - t_c);
            cplx z = amp * cplx(std::cos(ph0), std::sin(ph0));
            for (std::size_t k = 0; k < n_samples; ++k) {
                field[k] += z;
                z *= step;
            }
        }
        transmitted_fraction = den > 0.0 ? num / den : 0.0;
    }

    // Normalized Stark phase coordinate, zero at the absorption instant.
    std::vector<double> qint(n_samples, 0.0);
    {
        std::vector<double> rate(n_samples, 0.0);
        for (const auto& iv : intervals)
            for (std::size_t k = iv.i0; k < iv.i1; ++k) rate[k] = iv.rate;
        for (std::size_t k = 1; k < n_samples; ++k)
            qint[k] = qint[k - 1] + rate[k - 1] * grid.dt_s;
        const double ref = qint[k_abs];
        for (auto& q : qint) q -= ref;
    }

    const bool field_during_pulse = u_abs > 0.0;

    // Class axes: intrinsic detuning of the prepared feature, and (with a
    // field on during absorption) an explicit Stark-offset axis. Without one,
    // later field segments act through the Gaussian characteristic function.
    std::vector<double> intr_val, intr_w;
    std::vector<double> stark_val{0.0}, stark_w{1.0};
    // Marginal density of intrinsic + Stark detuning on a helper grid.
    std::vector<double> marg_grid, marg_val;
    if (!field_during_pulse) {
        const double dnu = prepared.spacing();
        for (std::size_t i = 0; i < prepared.grid.size(); ++i) {
            const double nu = prepared.grid[i];
            const double e = pulse_spectrum_amp(input, nu);
            if (e < e_cut) continue;
            const double w = e * absorb_weight(nu) * dnu;
            if (w <= 0.0) continue;
            intr_val.push_back(nu);
            intr_w.push_back(w);
        }
    } else {
        // Storage-relevant detuning range: pulse support widened by the Stark
        // spread on either side.
        const double half_support =
            3.5 * input.spectral_fwhm_hz() + 4.5 * sigma_stark;
        const double lo = input.carrier_offset_hz - half_support;
        const double hi = input.carrier_offset_hz + half_support;

        // Intrinsic axis: prepared feature above its in-range floor, unit mass.
        std::vector<std::size_t> in_range;
        double range_floor = 1e300;
        for (std::size_t i = 0; i < prepared.grid.size(); ++i) {
            if (prepared.grid[i] < lo || prepared.grid[i] > hi) continue;
            in_range.push_back(i);
            range_floor = std::min(range_floor, prepared.depth[i]);
        }
        if (in_range.size() < 8)
            throw std::invalid_argument("pulse does not overlap the feature");
        const std::size_t stride =
            std::max<std::size_t>(1, in_range.size() / 384);
        double wsum = 0.0;
        for (std::size_t k = 0; k < in_range.size(); k += stride) {
            const std::size_t i = in_range[k];
            const double f = std::max(prepared.depth[i] - range_floor, 0.0);
            if (f <= 0.0) continue;
            intr_val.push_back(prepared.grid[i]);
            intr_w.push_back(f);
            wsum += f;
        }
        if (wsum <= 0.0)
            throw std::invalid_argument("prepared profile has no feature");
        for (auto& w : intr_w) w /= wsum;

        stark_val.clear();
        stark_w.clear();
        const int ns = 385;
        const double smax = 4.5 * sigma_stark;
        const double ds = 2.0 * smax / (ns - 1);
        double gsum = 0.0;
        for (int j = 0; j < ns; ++j) {
            const double s = -smax + j * ds;
            const double g =
                std::exp(-0.5 * s * s / (sigma_stark * sigma_stark));
            stark_val.push_back(s);
            stark_w.push_back(g);
            gsum += g;
        }
        for (auto& w : stark_w) w /= gsum;

        // Exact marginal of delta + s for the sampled intrinsic mass under the
        // Gaussian Stark distribution.
        const double dnu = prepared.spacing();
        const double glo = lo - 1.5 * sigma_stark, ghi = hi + 1.5 * sigma_stark;
        const auto npts =
            static_cast<std::size_t>(std::ceil((ghi - glo) / dnu)) + 1;
        marg_grid.resize(npts);
        marg_val.assign(npts, 0.0);
        const double norm = 1.0 / (sigma_stark * std::sqrt(kTwoPi));
        for (std::size_t i = 0; i < npts; ++i) {
            marg_grid[i] = glo + i * dnu;
            double acc = 0.0;
            for (std::size_t a = 0; a < intr_val.size(); ++a) {
                const double u = (marg_grid[i] - intr_val[a]) / sigma_stark;
                acc += intr_w[a] * norm * std::exp(-0.5 * u * u);
            }
            marg_val[i] = acc;
        }
    }
    auto marginal_at = [&](double nu) -> double {
        if (marg_grid.empty()) return 0.0;
        if (nu <= marg_grid.front() || nu >= marg_grid.back()) return 0.0;
        const double dx = marg_grid[1] - marg_grid[0];
        const auto i = static_cast<std::size_t>((nu - marg_grid.front()) / dx);
        const double t = (nu - marg_grid[i]) / dx;
        return marg_val[i] + t * (marg_val[i + 1] - marg_val[i]);
    };

    // Collective emission, tracked from the absorption instant onwards.
    std::vector<cplx> emitted(n_samples, cplx(0.0, 0.0));
    for (const auto& iv : intervals) {
        const std::size_t first = std::max(iv.i0, k_abs);
        if (first >= iv.i1) continue;

        const spectral::SpectralProfile* now = &prepared;
        spectral::SpectralProfile broadened_now;
        if (iv.voltage_abs > 0.0) {
            broadened_now = spectral::stark_broaden(
                prepared, spectral::voltage_to_broadening(iv.voltage_abs, calib));
            now = &broadened_now;
        }
        const double floor_now = depth_pedestal(*now);
        const std::vector<double> prop_now =
            now == &prepared && u_abs == 0.0 && b_abs == 1.0
                ? prop_abs
                : propagation_depth(*now);
        auto emit_weight = [&](double nu) -> double {
            const double structure = std::max(now->value_at(nu) - floor_now, 0.0);
            const double total =
                interp_on(now->grid, prop_now, nu) + prepared.background;
            return std::sqrt(structure) * std::exp(-0.25 * total);
        };

        for (std::size_t a = 0; a < intr_val.size(); ++a) {
            const double delta = intr_val[a];
            for (std::size_t b = 0; b < stark_val.size(); ++b) {
                const double s = stark_val[b];
                double m;
                if (!field_during_pulse) {
                    m = intr_w[a] * emit_weight(delta);
                } else {
                    const double nu = delta + s;
                    const double e_in = pulse_spectrum_amp(input, nu);
                    if (e_in < e_cut) continue;
                    // Joint (intrinsic, Stark) mass conditioned on the total
                    // detuning nu = delta + s.
                    const double marg = marginal_at(nu);
                    if (marg <= 1e-300) continue;
                    const double nu_now = delta + s * iv.rate;
                    m = intr_w[a] * stark_w[b] / marg * e_in *
                        absorb_weight(nu) * emit_weight(nu_now);
                }
                if (!(std::abs(m) > 1e-300)) continue;
                const double omega = delta + s * iv.rate;
                const double w = -kTwoPi * omega * grid.dt_s;
                const cplx step(std::cos(w), std::sin(w));
                const double ph0 =
                    -kTwoPi * (delta * (times[first] - t_c) + s * qint[first]);
                cplx z = m * cplx(std::cos(ph0), std::sin(ph0));
                for (std::size_t k = first; k < iv.i1; ++k) {
                    emitted[k] += z;
                    z *= step;
                }
            }
        }
    }

    if (!field_during_pulse && sigma_stark > 0.0) {
        for (std::size_t k = 0; k < n_samples; ++k) {
            const double arg = kTwoPi * sigma_stark * qint[k];
            emitted[k] *= std::exp(-0.5 * arg * arg);
        }
    }

    for (std::size_t k = 0; k < n_samples; ++k) field[k] += emitted[k];

    EchoResult res;
    res.times_s = std::move(times);
    res.intensity.resize(n_samples);
    res.phase_rad.assign(n_samples, 0.0);
    res.mean_photons = input.mean_photons;
    res.transmitted_fraction = transmitted_fraction;
    double imax = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        res.intensity[k] = std::norm(field[k]);
        imax = std::max(imax, res.intensity[k]);
    }
    for (std::size_t k = 0; k < n_samples; ++k) {
        if (res.intensity[k] > 1e-12 * imax) {
            const double carrier =
                kTwoPi * input.carrier_offset_hz * (res.times_s[k] - t_c);
            res.phase_rad[k] =
                -std::arg(field[k] * cplx(std::cos(carrier), std::sin(carrier)));
        }
    }

    // Echo search past the transmitted pulse: local maxima at least 3x above
    // the surrounding floor, integrated over +-2 FWHM windows.
    const std::size_t k_search = snap(t_c + 2.5 * input.fwhm_s);
    if (k_search + 8 < n_samples) {
        double region_max = 0.0;
        for (std::size_t k = k_search; k < n_samples; ++k)
            region_max = std::max(region_max, res.intensity[k]);

        auto shoulder_median = [&](std::size_t lo, std::size_t hi) -> double {
            std::vector<double> s;
            for (std::size_t i = lo; i < hi && i < n_samples; ++i)
                s.push_back(res.intensity[i]);
            if (s.empty()) return -1.0;
            std::nth_element(s.begin(), s.begin() + s.size() / 2, s.end());
            return s[s.size() / 2];
        };

        // Half-maximum width around a local maximum; stretched echoes can be
        // much wider than the input pulse.
        auto half_width = [&](std::size_t pk) -> double {
            const double half = 0.5 * res.intensity[pk];
            std::size_t l = pk, r = pk;
            while (l > k_search && res.intensity[l - 1] > half) --l;
            while (r + 1 < n_samples && res.intensity[r + 1] > half) ++r;
            auto cross = [&](std::size_t inside, std::size_t outside) {
                const double d0 = res.intensity[inside];
                const double d1 = res.intensity[outside];
                if (d0 == d1) return res.times_s[inside];
                const double t = (d0 - half) / (d0 - d1);
                return res.times_s[inside] +
                       t * (res.times_s[outside] - res.times_s[inside]);
            };
            const double t_lo = l > k_search ? cross(l, l - 1) : res.times_s[l];
            const double t_hi =
                r + 1 < n_samples ? cross(r, r + 1) : res.times_s[r];
            return std::max(t_hi - t_lo, grid.dt_s);
        };

        // The floor comes from shoulders placed a few of the candidate's own
        // widths away; a neighboring echo can fill one side, so the quieter
        // shoulder counts.
        auto local_floor = [&](std::size_t k, double width_s) -> double {
            const auto w_near = static_cast<std::size_t>(
                std::max(1.0, 2.5 * width_s / grid.dt_s));
            const auto w_far = static_cast<std::size_t>(
                std::max(2.0, 8.0 * width_s / grid.dt_s));
            const std::size_t lo1 = k > w_far ? k - w_far : k_search;
            const double left =
                k > w_near ? shoulder_median(std::max(lo1, k_search), k - w_near)
                           : -1.0;
            const double right =
                shoulder_median(k + w_near, std::min(k + w_far, n_samples));
            if (left < 0.0) return std::max(right, 0.0);
            if (right < 0.0) return left;
            return std::min(left, right);
        };

        struct Candidate {
            std::size_t k;
            double width_s;
        };
        std::vector<Candidate> cand;
        for (std::size_t k = k_search + 1; k + 1 < n_samples; ++k) {
            const double v = res.intensity[k];
            if (v <= res.intensity[k - 1] || v < res.intensity[k + 1]) continue;
            if (v < 1e-9 * region_max) continue;
            const double w = half_width(k);
            if (v < 3.0 * local_floor(k, w)) continue;
            cand.push_back({k, w});
        }
        std::sort(cand.begin(), cand.end(),
                  [&](const Candidate& a, const Candidate& b) {
                      return res.intensity[a.k] > res.intensity[b.k];
                  });
        std::vector<Candidate> peaks;
        for (const auto& c : cand) {
            bool clash = false;
            for (const auto& p : peaks)
                if (std::abs(res.times_s[c.k] - res.times_s[p.k]) <
                    2.0 * std::max(c.width_s, p.width_s))
                    clash = true;
            if (!clash) peaks.push_back(c);
        }
        std::sort(peaks.begin(), peaks.end(),
                  [](const Candidate& a, const Candidate& b) { return a.k < b.k; });

        int seq = 0;
        for (const auto& p : peaks) {
            EchoEvent ev;
            ev.peak_time_s = res.times_s[p.k];
            ev.fwhm_s = p.width_s;
            const double wlo = ev.peak_time_s - 2.0 * ev.fwhm_s;
            const double whi = ev.peak_time_s + 2.0 * ev.fwhm_s;
            double sum = 0.0;
            for (std::size_t k = k_search; k < n_samples; ++k)
                if (res.times_s[k] >= wlo && res.times_s[k] <= whi)
                    sum += res.intensity[k] * grid.dt_s;
            ev.efficiency =
                input.mean_photons > 0.0 ? sum / input.mean_photons : 0.0;
            ev.phase_rad = res.phase_rad[p.k];
            if (prepared.comb_delta_hz > 0.0)
                ev.order = static_cast<int>(
                    std::lround((ev.peak_time_s - t_c) * prepared.comb_delta_hz));
            else
                ev.order = ++seq;
            res.echoes.push_back(ev);
        }
    }

    double eta_sum = 0.0;
    for (const auto& ev : res.echoes) eta_sum += ev.efficiency;
    res.absorbed_remainder = 1.0 - res.transmitted_fraction - eta_sum;
    res.energy_warning = res.absorbed_remainder < -1e-6;
    return res;
}

}  // namespace echosim::echo
