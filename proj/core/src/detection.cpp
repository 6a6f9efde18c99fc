#include "echosim/detection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "echosim/rng.hpp"

namespace echosim::detection {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::uint64_t CountHistogram::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

CountHistogram simulate_counts(const echo::EchoResult& result,
                               const std::function<double(double)>& fluor_rate,
                               const DetectorModel& det, std::uint64_t n_trials,
                               double bin_width_s, std::uint64_t seed) {
    if (!(bin_width_s > 0.0)) throw std::invalid_argument("bin width must be positive");
    if (n_trials < 1) throw std::invalid_argument("need at least one trial");
    if (result.times_s.size() < 2)
        throw std::invalid_argument("empty intensity record");

    const double t0 = result.times_s.front();
    const double t1 = result.times_s.back();
    const auto n_bins =
        static_cast<std::size_t>(std::ceil((t1 - t0) / bin_width_s));
    const double dt = result.times_s[1] - result.times_s[0];

    CountHistogram hist;
    hist.n_trials = n_trials;
    hist.seed = seed;
    hist.bin_edges_s.resize(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b)
        hist.bin_edges_s[b] = t0 + b * bin_width_s;
    hist.counts.assign(n_bins, 0);

    // Signal photons per trial inside each bin.
    std::vector<double> signal(n_bins, 0.0);
    for (std::size_t k = 0; k < result.times_s.size(); ++k) {
        const auto b = static_cast<std::size_t>(
            std::min((result.times_s[k] - t0) / bin_width_s,
                     static_cast<double>(n_bins - 1)));
        signal[b] += result.intensity[k] * dt;
    }

    std::mt19937_64 gen(seed);
    for (std::size_t b = 0; b < n_bins; ++b) {
        const double tc = t0 + (b + 0.5) * bin_width_s;
        double mean = det.dark_rate_hz * bin_width_s;
        if (det.chopper_open) {
            mean += signal[b] * det.path_transmission * det.efficiency;
            if (fluor_rate)
                mean += fluor_rate(tc) * bin_width_s *
                        det.fluorescence_collection * det.efficiency;
        }
        std::poisson_distribution<std::uint64_t> pois(mean * n_trials);
        hist.counts[b] = mean > 0.0 ? pois(gen) : 0;
    }
    return hist;
}

SnrResult snr(const CountHistogram& hist, BinRange window_a, BinRange window_b) {
    if (window_a.count != window_b.count || window_a.count == 0)
        throw std::invalid_argument("windows must have the same non-zero size");
    if (window_a.first + window_a.count > hist.counts.size() ||
        window_b.first + window_b.count > hist.counts.size())
        throw std::invalid_argument("window outside the histogram");
    const bool disjoint = window_a.first + window_a.count <= window_b.first ||
                          window_b.first + window_b.count <= window_a.first;
    if (!disjoint) throw std::invalid_argument("windows must be disjoint");

    SnrResult r;
    for (std::size_t i = 0; i < window_a.count; ++i) {
        r.n_a += hist.counts[window_a.first + i];
        r.n_b += hist.counts[window_b.first + i];
    }
    if (r.n_b > 0)
        r.value = (static_cast<double>(r.n_a) - static_cast<double>(r.n_b)) /
                  static_cast<double>(r.n_b);
    return r;
}

std::vector<double> dark_subtracted(const CountHistogram& hist,
                                    const DetectorModel& det) {
    std::vector<double> out(hist.counts.size());
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        const double width = hist.bin_edges_s[b + 1] - hist.bin_edges_s[b];
        out[b] = static_cast<double>(hist.counts[b]) -
                 det.dark_rate_hz * width * static_cast<double>(hist.n_trials);
    }
    return out;
}

double matched_lo_photons(double echo_efficiency, double input_mean_photons) {
    return echo_efficiency * input_mean_photons;
}

double visibility_model(double sigma_rad, int m) {
    if (sigma_rad < 0.0 || m < 1)
        throw std::invalid_argument("need sigma >= 0 and m >= 1");
    const double ms = m * sigma_rad;
    return std::exp(-0.5 * ms * ms);
}

FringeScan interference_scan(const echo::EchoResult& result, int order_m,
                             double lo_photons,
                             std::span<const double> delta0_scan_hz,
                             const spectral::CombSpec& comb,
                             const PhaseNoiseModel& noise,
                             const DetectorModel& det, std::uint64_t n_cycles,
                             std::uint64_t trials_per_cycle, std::uint64_t seed) {
    const echo::EchoEvent* ev = nullptr;
    for (const auto& e : result.echoes)
        if (e.order == order_m) ev = &e;
    if (!ev) throw std::invalid_argument("no echo of the requested order");
    if (n_cycles < 1 || trials_per_cycle < 1)
        throw std::invalid_argument("need at least one cycle and trial");

    FringeScan scan;
    scan.echo_photons = ev->efficiency * result.mean_photons;
    scan.lo_photons = lo_photons;
    const double a_e = std::sqrt(scan.echo_photons);
    const double a_lo = std::sqrt(lo_photons);
    if (a_e > 0.0 && std::abs(a_lo - a_e) / a_e > 0.05)
        scan.lo_mismatch_warning = true;

    const double window_s = 4.0 * ev->fwhm_s;
    scan.dark_expectation = det.dark_rate_hz * window_s *
                            static_cast<double>(n_cycles) *
                            static_cast<double>(trials_per_cycle);

    for (std::size_t i = 0; i < delta0_scan_hz.size(); ++i) {
        const double d0 = delta0_scan_hz[i];
        const double phi =
            echo::afc_echo_phase(d0, comb.delta_hz, order_m).unwrapped_rad;
        std::mt19937_64 gen(rng::substream_seed(seed, i));
        std::uint64_t total = 0;
        for (std::uint64_t c = 0; c < n_cycles; ++c) {
            // One laser-jitter draw per preparation cycle; echo m sees it
            // m-fold amplified.
            const double dphi = order_m * rng::normal(gen, 0.0, noise.sigma_rad);
            const double photons = scan.echo_photons + lo_photons +
                                   2.0 * a_e * a_lo * std::cos(phi + dphi);
            double mean = det.dark_rate_hz * window_s;
            if (det.chopper_open)
                mean += photons * det.path_transmission * det.efficiency;
            std::poisson_distribution<std::uint64_t> pois(
                mean * static_cast<double>(trials_per_cycle));
            total += pois(gen);
        }
        scan.points.push_back(
            {d0, total, std::sqrt(static_cast<double>(std::max<std::uint64_t>(total, 1)))});
    }
    return scan;
}

namespace {

// Solve the 3x3 normal equations A x = rhs in place; returns false when
// singular.
bool solve3(std::array<std::array<double, 3>, 3>& a, std::array<double, 3>& rhs) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-30) return false;
        std::swap(a[col], a[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int i = 0; i < 3; ++i) rhs[i] /= a[i][i];
    return true;
}

struct LinFit {
    double c0, a, b;
    double sse;
    std::array<std::array<double, 3>, 3> xtx;
    bool ok;
};

LinFit fit_for_period(std::span<const FringePoint> pts, double period,
                      double baseline) {
    LinFit f{};
    std::array<std::array<double, 3>, 3> m{};
    std::array<double, 3> rhs{};
    for (const auto& p : pts) {
        const double c = std::cos(kTwoPi * p.delta0_hz / period);
        const double s = std::sin(kTwoPi * p.delta0_hz / period);
        const double y = static_cast<double>(p.counts) - baseline;
        const std::array<double, 3> row{1.0, c, s};
        for (int i = 0; i < 3; ++i) {
            rhs[i] += row[i] * y;
            for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
        }
    }
    f.xtx = m;
    auto msolve = m;
    auto sol = rhs;
    if (!solve3(msolve, sol)) {
        f.ok = false;
        return f;
    }
    f.c0 = sol[0];
    f.a = sol[1];
    f.b = sol[2];
    f.sse = 0.0;
    for (const auto& p : pts) {
        const double c = std::cos(kTwoPi * p.delta0_hz / period);
        const double s = std::sin(kTwoPi * p.delta0_hz / period);
        const double r = static_cast<double>(p.counts) - baseline -
                         (f.c0 + f.a * c + f.b * s);
        f.sse += r * r;
    }
    f.ok = true;
    return f;
}

// Inverse of a symmetric positive 3x3 via adjugate.
std::array<std::array<double, 3>, 3> inv3(
    const std::array<std::array<double, 3>, 3>& m, bool& ok) {
    const double det =
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
        m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
        m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    std::array<std::array<double, 3>, 3> inv{};
    if (std::abs(det) < 1e-30) {
        ok = false;
        return inv;
    }
    const double id = 1.0 / det;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id;
    inv[1][0] = inv[0][1];
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id;
    inv[2][0] = inv[0][2];
    inv[2][1] = inv[1][2];
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id;
    ok = true;
    return inv;
}

}  // namespace

FringeFit fit_fringe(std::span<const FringePoint> points, double baseline) {
    if (points.size() < 6)
        throw std::invalid_argument("need at least six fringe points");
    double xmin = points[0].delta0_hz, xmax = points[0].delta0_hz;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.delta0_hz);
        xmax = std::max(xmax, p.delta0_hz);
    }
    const double span = xmax - xmin;
    if (span <= 0.0)
        throw std::invalid_argument("degenerate scan: all offsets equal");

    // Coarse period scan followed by a golden-section refinement.
    double best_p = span, best_sse = 1e300;
    const int n_cand = 240;
    for (int i = 0; i < n_cand; ++i) {
        const double p =
            span / 8.0 * std::pow(16.0, i / static_cast<double>(n_cand - 1));
        const LinFit f = fit_for_period(points, p, baseline);
        if (f.ok && f.sse < best_sse) {
            best_sse = f.sse;
            best_p = p;
        }
    }
    {
        const double gr = 0.61803398875;
        double lo = best_p / 1.25, hi = best_p * 1.25;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = fit_for_period(points, x1, baseline).sse;
        double f2 = fit_for_period(points, x2, baseline).sse;
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = fit_for_period(points, x1, baseline).sse;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = fit_for_period(points, x2, baseline).sse;
            }
        }
        best_p = 0.5 * (lo + hi);
    }

    const LinFit f = fit_for_period(points, best_p, baseline);
    if (!f.ok) throw std::invalid_argument("fringe fit is singular");

    FringeFit out;
    out.period_hz = best_p;
    out.offset = f.c0;
    const double amp = std::hypot(f.a, f.b);
    out.visibility = f.c0 > 0.0 ? std::clamp(amp / f.c0, 0.0, 1.0) : 0.0;
    out.phase0_rad = std::atan2(-f.b, f.a);

    const double dof = static_cast<double>(points.size()) - 4.0;
    const double s2 = dof > 0.0 ? f.sse / dof : 0.0;
    bool ok = false;
    const auto cov_base = inv3(f.xtx, ok);
    if (ok && f.c0 > 0.0 && amp > 0.0) {
        std::array<std::array<double, 3>, 3> cov{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cov[i][j] = s2 * cov_base[i][j];
        // Delta method for V = sqrt(a^2+b^2)/c0 and phi0 = atan2(-b, a).
        const std::array<double, 3> gv{-amp / (f.c0 * f.c0), f.a / (amp * f.c0),
                                       f.b / (amp * f.c0)};
        const std::array<double, 3> gp{0.0, f.b / (amp * amp),
                                       -f.a / (amp * amp)};
        double vv = 0.0, pp = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                vv += gv[i] * cov[i][j] * gv[j];
                pp += gp[i] * cov[i][j] * gp[j];
            }
        out.visibility_err = vv > 0.0 ? std::sqrt(vv) : 0.0;
        out.phase0_err = pp > 0.0 ? std::sqrt(pp) : 0.0;
    }

    // Period uncertainty from the curvature of SSE(P) at the optimum.
    {
        const double h = best_p * 1e-3;
        const double s_m = fit_for_period(points, best_p - h, baseline).sse;
        const double s_p = fit_for_period(points, best_p + h, baseline).sse;
        const double curv = (s_p - 2.0 * f.sse + s_m) / (h * h);
        out.period_err = curv > 0.0 ? std::sqrt(2.0 * s2 / curv) : 0.0;
    }
    return out;
}

}  // namespace echosim::detection
