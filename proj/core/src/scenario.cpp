#include "echosim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "echosim/io.hpp"
#include "echosim/rng.hpp"
#include "json.hpp"

namespace echosim::harness {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.141592653589793238462643383279;
constexpr double kFourLn2 = 2.772588722239781;

using Files = std::vector<std::pair<std::string, std::string>>;
using Metrics = std::map<std::string, double>;

void record(Files& files, const std::filesystem::path& dir,
            const std::string& name) {
    files.emplace_back(name, io::file_hash(dir / name));
}

std::string tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    std::string s = buf;
    for (auto& ch : s)
        if (ch == '.' || ch == '-' || ch == '+') ch = 'p';
    return s;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w) {
    LineFit f;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        sw += wi;
        sx += wi * x[i];
        sy += wi * y[i];
        sxx += wi * x[i] * x[i];
        sxy += wi * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (std::abs(det) < 1e-300) return f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / sw;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        const double pred = f.intercept + f.slope * x[i];
        ss_res += wi * (y[i] - pred) * (y[i] - pred);
        ss_tot += wi * (y[i] - ybar) * (y[i] - ybar);
    }
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return f;
}

echo::StorageGrid storage_grid(const ScenarioConfig& c, double fallback_end,
                               double fallback_dt) {
    echo::StorageGrid g;
    g.t_start_s = 0.0;
    g.t_end_s = c.storage.t_end_s > 0.0 ? c.storage.t_end_s : fallback_end;
    g.dt_s = c.storage.dt_s > 0.0 ? c.storage.dt_s : fallback_dt;
    return g;
}

pumping::PumpSchedule pump_schedule(const ScenarioConfig& c, double gain) {
    pumping::PumpSchedule s = c.pump;
    s.stimulation_gain = gain;
    s.gate_windows = {{-c.pump_gate_half_width_hz, c.pump_gate_half_width_hz}};
    return s;
}

double pump_dt(const ScenarioConfig& c, double gain) {
    double bound = c.material.t1_s / gain;
    if (c.pump.pump_rate_per_s > 0.0)
        bound = std::min(bound, 1.0 / c.pump.pump_rate_per_s);
    return bound * 0.0999;
}

const echo::EchoEvent* find_order(const echo::EchoResult& res, int m) {
    for (const auto& e : res.echoes)
        if (e.order == m) return &e;
    return nullptr;
}

// Echo nearest an expected arrival time; null when nothing lands within the
// given fraction of it.
const echo::EchoEvent* find_near(const echo::EchoResult& res, double t_expected,
                                 double rel_window = 0.25) {
    const echo::EchoEvent* best = nullptr;
    double best_d = rel_window * t_expected;
    for (const auto& e : res.echoes) {
        const double d = std::abs(e.peak_time_s - t_expected);
        if (d <= best_d) {
            best_d = d;
            best = &e;
        }
    }
    return best;
}

double window_energy(const echo::EchoResult& res, double t_lo, double t_hi) {
    double sum = 0.0;
    const double dt = res.times_s.size() > 1 ? res.times_s[1] - res.times_s[0] : 0;
    for (std::size_t k = 0; k < res.times_s.size(); ++k)
        if (res.times_s[k] >= t_lo && res.times_s[k] <= t_hi)
            sum += res.intensity[k] * dt;
    return sum;
}

echo::EchoResult scale_photons(const echo::EchoResult& res, double factor) {
    echo::EchoResult out = res;
    for (auto& v : out.intensity) v *= factor;
    out.mean_photons *= factor;
    return out;
}

echo::EchoResult zero_signal_record(double t_end, double dt) {
    echo::EchoResult r;
    const auto n = static_cast<std::size_t>(std::floor(t_end / dt)) + 1;
    r.times_s.resize(n);
    for (std::size_t k = 0; k < n; ++k) r.times_s[k] = k * dt;
    r.intensity.assign(n, 0.0);
    r.phase_rad.assign(n, 0.0);
    r.mean_photons = 0.0;
    return r;
}

// ---------------------------------------------------------------------------

void run_afc_echo(const ScenarioConfig& c, const std::filesystem::path& dir,
                  Files& files, Metrics& metrics, std::uint64_t seed) {
    const auto profile = spectral::make_comb(c.comb, c.window.width_hz,
                                             c.window.points);
    const auto grid = storage_grid(c, 1.3e-6, 1.6e-9);
    const auto res =
        echo::simulate_storage(profile, c.pulse, {{}, c.field.calib}, grid);

    const auto* e1 = find_order(res, 1);
    const auto* e2 = find_order(res, 2);
    if (!e1 || !e2) throw ScenarioError("comb echoes not found");

    io::write_profile_csv(profile, dir / "profile.csv");
    record(files, dir, "profile.csv");
    io::write_echo_csv(res, dir / "echo.csv");
    record(files, dir, "echo.csv");
    io::write_text(io::echo_list_json(res), dir / "echoes.json");
    record(files, dir, "echoes.json");

    const auto hist = detection::simulate_counts(
        res, nullptr, c.detector, c.trials.n, c.trials.bin_width_s, seed);
    io::write_histogram_csv(hist, dir / "histogram.csv");
    record(files, dir, "histogram.csv");

    metrics["echo1_time_s"] = e1->peak_time_s - c.pulse.center_time_s;
    metrics["echo2_time_s"] = e2->peak_time_s - c.pulse.center_time_s;
    metrics["eta1"] = e1->efficiency;
    metrics["eta2"] = e2->efficiency;
    metrics["transmitted_fraction"] = res.transmitted_fraction;
    metrics["effective_background"] = profile.effective_background();
}

void run_noise_decay(const ScenarioConfig& c, const std::filesystem::path& dir,
                     Files& files, Metrics& metrics, std::uint64_t seed) {
    const auto raw = spectral::make_single_line(
        c.line.fwhm_hz, c.line.depth, c.line.background, c.window.width_hz,
        c.window.points);
    const auto ground = pumping::PopulationField::ground(raw.grid);

    const double trial_window_s = 20e-6;
    std::string csv = "stim_gain,wait_s,counts,dark_expected\n";
    std::size_t gi = 0;
    for (double gain : c.scan.stim_gains) {
        const auto prep = pumping::evolve_preparation(
            ground, pump_schedule(c, gain), c.material, pump_dt(c, gain));
        if (gi == 0) {
            io::write_populations_csv(prep.final_state, dir / "populations.csv");
            record(files, dir, "populations.csv");
        }

        std::vector<double> waits, logs, wts;
        for (int i = 0; i < c.scan.wait_points; ++i) {
            const double t_wait =
                c.scan.wait_start_s + (c.scan.wait_stop_s - c.scan.wait_start_s) *
                                          i / (c.scan.wait_points - 1);
            auto fluor = [&](double t) {
                return pumping::fluorescence_rate(prep.final_state, c.material,
                                                  t_wait + t);
            };
            const auto rec = zero_signal_record(trial_window_s, 200e-9);
            const auto hist = detection::simulate_counts(
                rec, fluor, c.detector, c.trials.n, c.trials.bin_width_s,
                rng::substream_seed(seed, gi * 1000 + i));
            const double darks = c.detector.dark_rate_hz * trial_window_s *
                                 static_cast<double>(c.trials.n);
            const double net =
                static_cast<double>(hist.total()) - darks;
            csv += io::format_double(gain) + "," + io::format_double(t_wait) +
                   "," + std::to_string(hist.total()) + "," +
                   io::format_double(darks) + "\n";
            if (net > 10.0) {
                waits.push_back(t_wait);
                logs.push_back(std::log(net));
                wts.push_back(net);
            }
        }
        if (waits.size() < 3)
            throw ScenarioError("too few usable noise points for the decay fit");
        const auto fit = linear_fit(waits, logs, wts);
        if (fit.slope >= 0.0)
            throw ScenarioError("noise does not decay; fit diverged");
        metrics["tau_fit_s_gain" + tag(gain)] = -1.0 / fit.slope;
        metrics["noise0_rate_gain" + tag(gain)] =
            pumping::fluorescence_rate(prep.final_state, c.material, 0.0);
        metrics["residual_excited_gain" + tag(gain)] =
            prep.final_state.total_excited();
        ++gi;
    }
    io::write_text(csv, dir / "noise_decay.csv");
    record(files, dir, "noise_decay.csv");

    // Monotone noise reduction with stimulation.
    double prev = 1e300;
    bool monotone = true;
    for (double gain : c.scan.stim_gains) {
        const double v = metrics["noise0_rate_gain" + tag(gain)];
        if (v >= prev) monotone = false;
        prev = v;
    }
    metrics["noise_monotone_in_gain"] = monotone ? 1.0 : 0.0;
}

struct CribRun {
    echo::EchoResult result;
    spectral::SpectralProfile prepared;
};

CribRun crib_run(const ScenarioConfig& c, const spectral::SpectralProfile& prof,
                 double flip_delay, const echo::StorageGrid& grid) {
    const double tc = c.pulse.center_time_s;
    echo::FieldSchedule sched;
    sched.calib = c.field.calib;
    sched.segments = {
        {tc + c.field.on_delay_s, tc + flip_delay, c.field.u1_v},
        {tc + flip_delay, grid.t_end_s + grid.dt_s, -c.field.u2_v}};
    return {echo::simulate_storage(prof, c.pulse, sched, grid), prof};
}

void run_snr_vs_wait(const ScenarioConfig& c, const std::filesystem::path& dir,
                     Files& files, Metrics& metrics, std::uint64_t seed) {
    const auto raw = spectral::make_single_line(
        c.line.fwhm_hz, c.line.depth, c.line.background, c.window.width_hz,
        c.window.points);
    const auto ground = pumping::PopulationField::ground(raw.grid);
    const auto grid = storage_grid(c, 3.6e-6, 2.4e-9);
    const double tc = c.pulse.center_time_s;
    const double echo_t = tc + 2.0 * c.field.flip_delay_s;

    std::string csv = "stimulated,wait_s,efficiency,snr,noise_rate\n";
    for (int stim = 1; stim >= 0; --stim) {
        const double gain = stim ? c.pump.stimulation_gain : 1.0;
        const auto prep = pumping::evolve_preparation(
            ground, pump_schedule(c, gain), c.material, pump_dt(c, gain));

        for (int i = 0; i < c.scan.wait_points; ++i) {
            const double t_wait =
                c.scan.wait_start_s + (c.scan.wait_stop_s - c.scan.wait_start_s) *
                                          i / (c.scan.wait_points - 1);
            const auto prof =
                pumping::decay_profile(raw, prep.final_state, c.material, t_wait);
            const auto run = crib_run(c, prof, c.field.flip_delay_s, grid);
            const auto relaxed =
                pumping::relax_populations(prep.final_state, c.material, t_wait);
            auto fluor = [&](double t) {
                return pumping::fluorescence_rate(relaxed, c.material, t);
            };
            const auto hist = detection::simulate_counts(
                run.result, fluor, c.detector, c.trials.n, c.trials.bin_width_s,
                rng::substream_seed(seed, stim * 1000 + i));

            const auto nbins = hist.counts.size();
            const auto bw = c.trials.bin_width_s;
            const auto a0 = static_cast<std::size_t>(
                std::max(0.0, (echo_t - 3.0 * bw) / bw));
            const detection::BinRange wa{std::min(a0, nbins - 13), 6};
            const detection::BinRange wb{nbins - 6, 6};
            const auto s = detection::snr(hist, wa, wb);

            const auto* e1 = find_near(run.result, echo_t);
            const double eta = e1 ? e1->efficiency : 0.0;
            const double noise =
                pumping::fluorescence_rate(relaxed, c.material, 0.0);
            csv += std::to_string(stim) + "," + io::format_double(t_wait) + "," +
                   io::format_double(eta) + "," +
                   io::format_double(s.value.value_or(0.0)) + "," +
                   io::format_double(noise) + "\n";
            if (stim && i == 0) metrics["eta_first_stim"] = eta;
            if (stim && i == c.scan.wait_points - 1)
                metrics["eta_last_stim"] = eta;
            if (!stim && i == 0) metrics["eta_first_nostim"] = eta;
        }
    }
    io::write_text(csv, dir / "snr_vs_wait.csv");
    record(files, dir, "snr_vs_wait.csv");

    // Persistent holes keep the profile tailored beyond the Zeeman lifetime:
    // compare against a counterfactual with the persistent pool folded into
    // the Zeeman pool.
    {
        const double gain = c.pump.stimulation_gain;
        const auto prep = pumping::evolve_preparation(
            ground, pump_schedule(c, gain), c.material, pump_dt(c, gain));
        const double t_ref = c.scan.wait_stop_s;
        auto pure = prep.final_state;
        for (std::size_t i = 0; i < pure.size(); ++i) {
            pure.g2[i] += pure.p[i];
            pure.p[i] = 0.0;
        }
        auto mat_pure = c.material;
        mat_pure.persistent_fraction = 0.0;
        const auto prof_p =
            pumping::decay_profile(raw, prep.final_state, c.material, t_ref);
        const auto prof_0 = pumping::decay_profile(raw, pure, mat_pure, t_ref);
        const auto run_p = crib_run(c, prof_p, c.field.flip_delay_s, grid);
        const auto run_0 = crib_run(c, prof_0, c.field.flip_delay_s, grid);
        const auto* ep = find_near(run_p.result, echo_t);
        const auto* e0 = find_near(run_0.result, echo_t);
        const double eta_p = ep ? ep->efficiency : 0.0;
        const double eta_0 = e0 ? e0->efficiency : 0.0;
        metrics["eta_persistent_at_stop"] = eta_p;
        metrics["eta_pure_tz_at_stop"] = eta_0;
        metrics["persistent_excess_ratio"] = eta_0 > 0.0 ? eta_p / eta_0 : 0.0;
    }

    // Signal-to-noise is linear in the input photon number.
    {
        const double gain = c.pump.stimulation_gain;
        const auto prep = pumping::evolve_preparation(
            ground, pump_schedule(c, gain), c.material, pump_dt(c, gain));
        const auto prof = pumping::decay_profile(raw, prep.final_state,
                                                 c.material, c.pump.t_wait_s);
        auto base_cfg = c;
        base_cfg.pulse.mean_photons = 1.0;
        const auto base = crib_run(base_cfg, prof, c.field.flip_delay_s, grid);
        const auto relaxed = pumping::relax_populations(
            prep.final_state, c.material, c.pump.t_wait_s);
        auto fluor = [&](double t) {
            return pumping::fluorescence_rate(relaxed, c.material, t);
        };
        std::vector<double> xs, ys;
        std::string nb_csv = "nbar,snr\n";
        for (std::size_t i = 0; i < c.scan.nbar.size(); ++i) {
            const auto scaled = scale_photons(base.result, c.scan.nbar[i]);
            const auto hist = detection::simulate_counts(
                scaled, fluor, c.detector, c.trials.n, c.trials.bin_width_s,
                rng::substream_seed(seed, 5000 + i));
            const auto nbins = hist.counts.size();
            const auto bw = c.trials.bin_width_s;
            const auto a0 = static_cast<std::size_t>(
                std::max(0.0, (echo_t - 3.0 * bw) / bw));
            const detection::BinRange wa{std::min(a0, nbins - 13), 6};
            const detection::BinRange wb{nbins - 6, 6};
            const auto s = detection::snr(hist, wa, wb);
            if (s.value) {
                xs.push_back(c.scan.nbar[i]);
                ys.push_back(*s.value);
                nb_csv += io::format_double(c.scan.nbar[i]) + "," +
                          io::format_double(*s.value) + "\n";
            }
        }
        io::write_text(nb_csv, dir / "snr_vs_nbar.csv");
        record(files, dir, "snr_vs_nbar.csv");
        if (xs.size() < 3) throw ScenarioError("SNR scan produced too few points");
        const auto fit = linear_fit(xs, ys, {});
        metrics["snr_slope_per_photon"] = fit.slope;
        metrics["snr_linear_r2"] = fit.r2;
    }
}

void run_crib_echo(const ScenarioConfig& c, const std::filesystem::path& dir,
                   Files& files, Metrics& metrics, std::uint64_t seed) {
    const auto prof = spectral::make_single_line(
        c.line.fwhm_hz, c.line.depth, c.line.background, c.window.width_hz,
        c.window.points);
    const auto grid = storage_grid(c, 2.8e-6, 3.0e-9);
    const double tc = c.pulse.center_time_s;

    std::size_t i = 0;
    for (double flip : c.scan.flip_delays_s) {
        const auto run = crib_run(c, prof, flip, grid);
        const std::string base = "crib_flip" + std::to_string(i);
        io::write_echo_csv(run.result, dir / (base + ".csv"));
        record(files, dir, base + ".csv");
        io::write_text(io::echo_list_json(run.result),
                       dir / (base + "_echoes.json"));
        record(files, dir, base + "_echoes.json");

        const auto hist = detection::simulate_counts(
            run.result, nullptr, c.detector, c.trials.n, c.trials.bin_width_s,
            rng::substream_seed(seed, i));
        io::write_histogram_csv(hist, dir / (base + "_histogram.csv"));
        record(files, dir, base + "_histogram.csv");

        const auto* sel = find_near(run.result, tc + 2.0 * flip);
        if (!sel) throw ScenarioError("no flip echo near the expected time");
        const auto& e = *sel;
        metrics["echo_time_s_flip" + std::to_string(i)] = e.peak_time_s - tc;
        metrics["eta_flip" + std::to_string(i)] = e.efficiency;
        metrics["fwhm_s_flip" + std::to_string(i)] = e.fwhm_s;

        const auto nbins = hist.counts.size();
        const auto bw = c.trials.bin_width_s;
        const auto a0 = static_cast<std::size_t>(
            std::max(0.0, (e.peak_time_s - 3.0 * bw) / bw));
        const detection::BinRange wa{std::min(a0, nbins - 7), 6};
        const detection::BinRange wb{nbins - 7, 6};
        const auto s = detection::snr(hist, wa, wb);
        metrics["snr_flip" + std::to_string(i)] = s.value.value_or(0.0);
        ++i;
    }
    metrics["d_broadened"] =
        c.line.depth / spectral::voltage_to_broadening(c.field.u1_v, c.field.calib);
}

void run_pulse_shape(const ScenarioConfig& c, const std::filesystem::path& dir,
                     Files& files, Metrics& metrics, std::uint64_t) {
    const auto prof = spectral::make_single_line(
        c.line.fwhm_hz, c.line.depth, c.line.background, c.window.width_hz,
        c.window.points);
    const auto grid = storage_grid(c, 8.0e-6, 12e-9);
    std::string csv = "u1_v,u2_v,alpha,fwhm_sim_s,fwhm_pred_s,echo_time_s\n";
    double prev_fwhm = -1.0;
    bool monotone = true;
    for (double u2 : c.scan.u2_values_v) {
        auto cfg = c;
        cfg.field.u2_v = u2;
        const auto run = crib_run(cfg, prof, c.field.flip_delay_s, grid);
        const auto pred = echo::compress_stretch_fwhm(
            c.pulse.fwhm_s, c.field.u1_v, u2, c.field.calib);
        const double t_exp = c.pulse.center_time_s +
                             c.field.flip_delay_s * (1.0 + c.field.u1_v / u2);
        const auto* sel = find_near(run.result, t_exp);
        if (!sel)
            throw ScenarioError("no echo for voltage " + std::to_string(u2));
        const auto& e = *sel;
        csv += io::format_double(c.field.u1_v) + "," + io::format_double(u2) +
               "," + io::format_double(pred.alpha) + "," +
               io::format_double(e.fwhm_s) + "," +
               io::format_double(pred.output_fwhm_s) + "," +
               io::format_double(e.peak_time_s) + "\n";
        metrics["fwhm_sim_s_u" + tag(u2)] = e.fwhm_s;
        metrics["fwhm_pred_s_u" + tag(u2)] = pred.output_fwhm_s;
        metrics["alpha_u" + tag(u2)] = pred.alpha;
        if (prev_fwhm > 0.0 && e.fwhm_s >= prev_fwhm) monotone = false;
        prev_fwhm = e.fwhm_s;
    }
    metrics["fwhm_monotone_in_u2"] = monotone ? 1.0 : 0.0;
    io::write_text(csv, dir / "pulse_shape.csv");
    record(files, dir, "pulse_shape.csv");
}

void run_fringe_scan(const ScenarioConfig& c, const std::filesystem::path& dir,
                     Files& files, Metrics& metrics, std::uint64_t seed) {
    const auto profile = spectral::make_comb(c.comb, c.window.width_hz,
                                             c.window.points);
    const auto grid = storage_grid(c, 1.3e-6, 1.6e-9);
    const auto res =
        echo::simulate_storage(profile, c.pulse, {{}, c.field.calib}, grid);

    detection::PhaseNoiseModel noise{c.noise.sigma_rad};
    std::vector<double> slopes;
    for (int m : c.scan.orders) {
        const auto* ev = find_order(res, m);
        if (!ev) throw ScenarioError("no echo of order " + std::to_string(m));
        // Weak higher-order echoes are probed with proportionally stronger
        // pulses, like the measurements they mirror.
        const auto probe = m > 1 ? scale_photons(res, 10.0 * (m - 1)) : res;
        const double lo_photons =
            detection::matched_lo_photons(ev->efficiency, probe.mean_photons);
        std::vector<double> scan_pts(c.scan.fringe_points);
        const double span = 1.2 * c.comb.delta_hz / m;
        for (int i = 0; i < c.scan.fringe_points; ++i)
            scan_pts[i] =
                -span / 2.0 + span * i / (c.scan.fringe_points - 1);
        const auto scan = detection::interference_scan(
            probe, m, lo_photons, scan_pts, c.comb, noise, c.detector,
            c.trials.cycles, c.trials.n / c.trials.cycles,
            rng::substream_seed(seed, static_cast<std::uint64_t>(m)));
        const auto fit = detection::fit_fringe(scan.points, scan.dark_expectation);

        const std::string base = "fringe_m" + std::to_string(m);
        io::write_fringe_csv(scan, dir / (base + ".csv"));
        record(files, dir, base + ".csv");
        io::write_text(io::fringe_fit_json(fit), dir / (base + "_fit.json"));
        record(files, dir, base + "_fit.json");

        metrics["visibility_m" + std::to_string(m)] = fit.visibility;
        metrics["visibility_err_m" + std::to_string(m)] = fit.visibility_err;
        metrics["period_hz_m" + std::to_string(m)] = fit.period_hz;
        metrics["expected_visibility_m" + std::to_string(m)] =
            detection::visibility_model(c.noise.sigma_rad, m);
        slopes.push_back(kTwoPi / fit.period_hz);
    }
    if (slopes.size() >= 2 && slopes[0] > 0.0)
        metrics["phase_slope_ratio"] = slopes[1] / slopes[0];
}

void run_combined_gate(const ScenarioConfig& c, const std::filesystem::path& dir,
                       Files& files, Metrics& metrics, std::uint64_t) {
    const auto profile = spectral::make_comb(c.comb, c.window.width_hz,
                                             c.window.points);
    const auto grid = storage_grid(c, 1.2e-6, 1.6e-9);
    const double tc = c.pulse.center_time_s;
    const double t1 = 1.0 / c.comb.delta_hz;
    const double t_on = tc + c.field.on_delay_s;
    const double u = c.field.u1_v;
    // Polarity reversed at the first rephasing time; the field stays on until
    // the accumulated Stark phase returns to zero, just ahead of the second
    // rephasing.
    const double t_flip = tc + t1;
    const double t_off = 2.0 * t_flip - t_on;

    const echo::FieldSchedule none{{}, c.field.calib};
    const echo::FieldSchedule unreversed{
        {{t_on, grid.t_end_s + grid.dt_s, u}}, c.field.calib};
    const echo::FieldSchedule reversed{
        {{t_on, t_flip, u}, {t_flip, t_off, -u}}, c.field.calib};

    const auto ref = echo::simulate_storage(profile, c.pulse, none, grid);
    const auto sup = echo::simulate_storage(profile, c.pulse, unreversed, grid);
    const auto rec = echo::simulate_storage(profile, c.pulse, reversed, grid);

    io::write_echo_csv(ref, dir / "trace_reference.csv");
    record(files, dir, "trace_reference.csv");
    io::write_echo_csv(sup, dir / "trace_unreversed.csv");
    record(files, dir, "trace_unreversed.csv");
    io::write_echo_csv(rec, dir / "trace_reversed.csv");
    record(files, dir, "trace_reversed.csv");
    io::write_text(io::echo_list_json(rec), dir / "reversed_echoes.json");
    record(files, dir, "reversed_echoes.json");

    const auto* r1 = find_order(ref, 1);
    const auto* r2 = find_order(ref, 2);
    if (!r1 || !r2) throw ScenarioError("reference comb echoes not found");

    const double w1_lo = r1->peak_time_s - 2.0 * r1->fwhm_s;
    const double w1_hi = r1->peak_time_s + 2.0 * r1->fwhm_s;
    const double e1_ref = window_energy(ref, w1_lo, w1_hi);
    const double e1_sup = window_energy(sup, w1_lo, w1_hi);
    const double e1_rec = window_energy(rec, w1_lo, w1_hi);
    const double w2_lo = r2->peak_time_s - 2.0 * r2->fwhm_s;
    const double w2_hi = r2->peak_time_s + 2.0 * r2->fwhm_s;
    const double e2_sup = window_energy(sup, w2_lo, w2_hi);

    metrics["eta1_reference"] = r1->efficiency;
    metrics["eta2_reference"] = r2->efficiency;
    metrics["echo1_suppression_unreversed"] =
        e1_sup > 0.0 ? e1_ref / e1_sup : 1e12;
    metrics["echo1_suppression_reversed"] =
        e1_rec > 0.0 ? e1_ref / e1_rec : 1e12;
    metrics["eta2_unreversed"] =
        ref.mean_photons > 0.0 ? e2_sup / ref.mean_photons : 0.0;

    const auto* c2 = find_order(rec, 2);
    if (!c2) throw ScenarioError("recovered second echo not found");
    metrics["eta2_recovered"] = c2->efficiency;
    const double finesse = c.comb.finesse();
    const double dephase1 = kPi * kPi / (kFourLn2 * finesse * finesse);
    metrics["eta2_predicted"] =
        echo::afc_efficiency(c.comb.peak_depth, finesse,
                             profile.effective_background()) *
        std::exp(-3.0 * dephase1);
    metrics["applied_broadening_hz"] =
        spectral::voltage_to_broadening(u, c.field.calib) * c.comb.peak_fwhm_hz;
    metrics["three_delta_hz"] = 3.0 * c.comb.delta_hz;
}

void run_capacity_curves(const ScenarioConfig& c,
                         const std::filesystem::path& dir, Files& files,
                         Metrics& metrics, std::uint64_t) {
    // Flip-rephased memory: mode count grows with the applied broadening while
    // the broadened depth falls; at a fixed target efficiency the achievable
    // mode count is proportional to the initial depth.
    const double target = std::exp(-1.0) * (1.0 - 1e-9);
    std::string csv = "d,broadening,modes,efficiency\n";
    for (double d : c.scan.d_values) {
        int best = 1;
        for (int b = 1; b <= 100; ++b) {
            const double eta = echo::crib_efficiency(d / b, 0.0, 0.0, 0.0);
            if (eta >= target && d / b <= 2.0)
                best = std::max(best, echo::multimode_capacity_crib(b));
            csv += io::format_double(d) + "," + std::to_string(b) + "," +
                   std::to_string(echo::multimode_capacity_crib(b)) + "," +
                   io::format_double(eta) + "\n";
        }
        metrics["crib_capacity_d" + tag(d)] = best;
    }
    io::write_text(csv, dir / "crib_capacity.csv");
    record(files, dir, "crib_capacity.csv");

    std::string afc_csv = "n_peaks,modes,efficiency\n";
    const double eta_afc = echo::afc_efficiency(c.comb.peak_depth,
                                                c.comb.finesse(),
                                                c.comb.background);
    for (int n : {c.comb.n_peaks, 2 * c.comb.n_peaks, 4 * c.comb.n_peaks}) {
        afc_csv += std::to_string(n) + "," +
                   std::to_string(echo::multimode_capacity_afc(n)) + "," +
                   io::format_double(eta_afc) + "\n";
    }
    io::write_text(afc_csv, dir / "afc_capacity.csv");
    record(files, dir, "afc_capacity.csv");
    metrics["afc_capacity_base"] = echo::multimode_capacity_afc(c.comb.n_peaks);
    metrics["afc_capacity_doubled"] =
        echo::multimode_capacity_afc(2 * c.comb.n_peaks);
    metrics["afc_eta"] = eta_afc;
}

}  // namespace

const std::vector<ScenarioInfo>& list_scenarios() {
    static const std::vector<ScenarioInfo> infos{
        {"afc-echo", "store a weak pulse in a comb; echoes at m/delta"},
        {"noise-decay", "fluorescence counts vs wait time after preparation"},
        {"snr-vs-wait", "flip-echo efficiency and SNR vs wait time and photon number"},
        {"crib-echo", "flip echoes of weak pulses for two switching times"},
        {"pulse-shape", "echo compression and stretching via asymmetric fields"},
        {"fringe-scan", "echo/local-oscillator interference vs comb offset"},
        {"combined-gate", "comb echoes gated by a reversible applied broadening"},
        {"capacity-curves", "temporal mode capacity of both protocols"},
    };
    return infos;
}

std::string RunReport::to_json() const {
    json j;
    j["scenario"] = scenario;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["wall_seconds"] = wall_seconds;
    j["metrics"] = metrics;
    json f = json::array();
    for (const auto& [n, h] : files) f.push_back({{"name", n}, {"hash", h}});
    j["files"] = f;
    return j.dump(2);
}

RunReport run_scenario(const ScenarioConfig& config,
                       const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    RunReport report;
    report.scenario = config.scenario;
    report.seed = config.seed;
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(
                          io::fnv1a64(config.canonical_json())));
        report.config_hash = buf;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (config.scenario == "afc-echo")
            run_afc_echo(config, out_dir, report.files, report.metrics,
                         config.seed);
        else if (config.scenario == "noise-decay")
            run_noise_decay(config, out_dir, report.files, report.metrics,
                            config.seed);
        else if (config.scenario == "snr-vs-wait")
            run_snr_vs_wait(config, out_dir, report.files, report.metrics,
                            config.seed);
        else if (config.scenario == "crib-echo")
            run_crib_echo(config, out_dir, report.files, report.metrics,
                          config.seed);
        else if (config.scenario == "pulse-shape")
            run_pulse_shape(config, out_dir, report.files, report.metrics,
                            config.seed);
        else if (config.scenario == "fringe-scan")
            run_fringe_scan(config, out_dir, report.files, report.metrics,
                            config.seed);
        else if (config.scenario == "combined-gate")
            run_combined_gate(config, out_dir, report.files, report.metrics,
                              config.seed);
        else if (config.scenario == "capacity-curves")
            run_capacity_curves(config, out_dir, report.files, report.metrics,
                                config.seed);
        else
            throw ScenarioError("unknown scenario " + config.scenario);
    } catch (const std::invalid_argument& ex) {
        throw ScenarioError(std::string("scenario aborted: ") + ex.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds =
        std::chrono::duration<double>(t1 - t0).count();

    io::write_text(report.to_json(), out_dir / "manifest.json");
    return report;
}

CompareResult compare_to_reference(const std::string& report_json,
                                   const std::string& reference_json) {
    CompareResult res;
    json rep, ref;
    try {
        rep = json::parse(report_json);
        ref = json::parse(reference_json);
    } catch (const std::exception& ex) {
        res.pass = false;
        res.notes.push_back(std::string("parse error: ") + ex.what());
        return res;
    }
    if (!ref.contains("metrics") || !ref["metrics"].is_object()) {
        res.pass = false;
        res.notes.push_back("reference has no metrics object");
        return res;
    }
    const json rep_metrics =
        rep.contains("metrics") ? rep["metrics"] : json::object();

    res.pass = true;
    for (auto it = ref["metrics"].begin(); it != ref["metrics"].end(); ++it) {
        MetricDelta d;
        d.name = it.key();
        d.expected = it.value().value("value", 0.0);
        d.tolerance = it.value().value("tol", 0.0);
        if (!rep_metrics.contains(d.name)) {
            d.missing = true;
            d.pass = false;
            res.pass = false;
        } else {
            d.actual = rep_metrics[d.name].get<double>();
            d.delta = std::abs(d.actual - d.expected);
            d.pass = d.delta <= d.tolerance;
            if (!d.pass) res.pass = false;
        }
        res.deltas.push_back(d);
    }
    for (auto it = rep_metrics.begin(); it != rep_metrics.end(); ++it)
        if (!ref["metrics"].contains(it.key()))
            res.notes.push_back("metric not in reference, ignored: " + it.key());
    return res;
}

}  // namespace echosim::harness
