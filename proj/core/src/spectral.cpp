#include "echosim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "echosim/rng.hpp"

namespace echosim::spectral {

namespace {

constexpr double kFourLn2 = 2.772588722239781;

double gaussian_peak(double x, double center, double fwhm) {
    const double u = (x - center) / fwhm;
    return std::exp(-kFourLn2 * u * u);
}

// Uniform grid that always contains x = 0 exactly, so that features centered
// on the carrier hit their nominal peak depth on-grid.
std::vector<double> centered_grid(double window_width_hz, int points) {
    std::vector<double> g(points);
    const double dx = window_width_hz / points;
    const int mid = points / 2;
    for (int i = 0; i < points; ++i) g[i] = (i - mid) * dx;
    return g;
}

}  // namespace

double SpectralProfile::spacing() const {
    if (grid.size() < 2) throw std::invalid_argument("profile grid too small");
    return grid[1] - grid[0];
}

double SpectralProfile::area() const {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        a += 0.5 * (depth[i] + depth[i + 1]) * (grid[i + 1] - grid[i]);
    return a;
}

double SpectralProfile::value_at(double detuning_hz) const {
    if (grid.empty()) return 0.0;
    if (detuning_hz <= grid.front() || detuning_hz >= grid.back()) {
        if (detuning_hz == grid.front()) return depth.front();
        if (detuning_hz == grid.back()) return depth.back();
        return 0.0;
    }
    const double dx = spacing();
    const auto idx = static_cast<std::size_t>((detuning_hz - grid.front()) / dx);
    const std::size_t i = std::min(idx, grid.size() - 2);
    const double t = (detuning_hz - grid[i]) / (grid[i + 1] - grid[i]);
    return depth[i] + t * (depth[i + 1] - depth[i]);
}

SpectralProfile make_single_line(double gamma_fwhm_hz, double peak_depth,
                                 double background, double window_width_hz,
                                 int grid_points) {
    if (gamma_fwhm_hz <= 0.0)
        throw std::invalid_argument("line width must be positive");
    if (peak_depth < 0.0 || background < 0.0)
        throw std::invalid_argument("optical depths must be non-negative");
    if (window_width_hz < 6.0 * gamma_fwhm_hz)
        throw std::invalid_argument(
            "window too narrow: need at least 6x the line FWHM (" +
            std::to_string(6.0 * gamma_fwhm_hz) + " Hz)");
    if (grid_points < 256)
        throw std::invalid_argument("need at least 256 grid points");

    SpectralProfile p;
    p.grid = centered_grid(window_width_hz, grid_points);
    p.depth.resize(p.grid.size());
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        p.depth[i] = peak_depth * gaussian_peak(p.grid[i], 0.0, gamma_fwhm_hz);
    p.background = background;
    p.feature_fwhm_hz = gamma_fwhm_hz;
    return p;
}

SpectralProfile make_comb(const CombSpec& spec, double window_width_hz,
                          int grid_points) {
    if (spec.n_peaks < 1) throw std::invalid_argument("need at least one peak");
    if (spec.peak_fwhm_hz <= 0.0)
        throw std::invalid_argument("peak width must be positive");
    if (spec.peak_depth < 0.0 || spec.background < 0.0)
        throw std::invalid_argument("optical depths must be non-negative");
    if (spec.n_peaks > 1) {
        if (spec.finesse() <= 1.0)
            throw std::invalid_argument("finesse must exceed 1");
        if (window_width_hz < (spec.n_peaks + 2) * spec.delta_hz)
            throw std::invalid_argument(
                "window too narrow for the comb: need at least " +
                std::to_string((spec.n_peaks + 2) * spec.delta_hz) + " Hz");
    } else if (window_width_hz < 6.0 * spec.peak_fwhm_hz) {
        throw std::invalid_argument("window too narrow: need 6x the peak FWHM");
    }
    if (grid_points < 256)
        throw std::invalid_argument("need at least 256 grid points");

    SpectralProfile p;
    p.grid = centered_grid(window_width_hz, grid_points);
    p.depth.assign(p.grid.size(), 0.0);
    const double first = spec.center_offset_hz -
                         0.5 * (spec.n_peaks - 1) * spec.delta_hz;
    for (int n = 0; n < spec.n_peaks; ++n) {
        const double c = first + n * spec.delta_hz;
        for (std::size_t i = 0; i < p.grid.size(); ++i)
            p.depth[i] +=
                spec.peak_depth * gaussian_peak(p.grid[i], c, spec.peak_fwhm_hz);
    }
    p.background = spec.background;
    p.feature_fwhm_hz = spec.peak_fwhm_hz;
    p.comb_delta_hz = spec.n_peaks > 1 ? spec.delta_hz : 0.0;

    if (spec.n_peaks > 1) {
        // Floor and contrast over one central period.
        const double lo = spec.center_offset_hz;
        const double hi = spec.center_offset_hz + spec.delta_hz;
        double vmin = 1e300, vmax = 0.0;
        for (std::size_t i = 0; i < p.grid.size(); ++i) {
            if (p.grid[i] < lo || p.grid[i] > hi) continue;
            vmin = std::min(vmin, p.depth[i]);
            vmax = std::max(vmax, p.depth[i]);
        }
        if (vmax > 0.0 && vmin < 1e300) {
            p.comb_floor = vmin;
            p.low_contrast = (vmax - vmin) / vmax < 0.5;
        }
    }
    return p;
}

SpectralProfile stark_broaden(const SpectralProfile& profile, double factor) {
    if (factor < 1.0)
        throw std::invalid_argument("broadening factor must be >= 1");
    SpectralProfile out = profile;
    if (factor == 1.0) return out;
    for (auto& x : out.grid) x *= factor;
    for (auto& d : out.depth) d /= factor;
    out.feature_fwhm_hz *= factor;
    out.comb_delta_hz *= factor;
    out.comb_floor /= factor;
    return out;
}

double voltage_to_broadening(double volts, const VoltPerWidthCalibration& calib) {
    if (volts < 0.0) throw std::invalid_argument("voltage must be non-negative");
    if (calib.u_ref_volts <= 0.0 || calib.b_ref <= 1.0)
        throw std::invalid_argument("calibration needs u_ref > 0 and b_ref > 1");
    return 1.0 + (calib.b_ref - 1.0) * volts / calib.u_ref_volts;
}

namespace {

// Piecewise-linear density on the profile grid; exact inverse-CDF inversion
// per segment (quadratic in the offset).
struct InverseCdf {
    const SpectralProfile& p;
    std::vector<double> cum;  // cumulative mass at each node
    double total;

    explicit InverseCdf(const SpectralProfile& prof) : p(prof) {
        cum.resize(p.grid.size(), 0.0);
        for (std::size_t i = 0; i + 1 < p.grid.size(); ++i)
            cum[i + 1] = cum[i] + 0.5 * (p.depth[i] + p.depth[i + 1]) *
                                      (p.grid[i + 1] - p.grid[i]);
        total = cum.back();
    }

    double sample(double u) const {
        const double c = u * total;
        auto it = std::upper_bound(cum.begin(), cum.end(), c);
        std::size_t i = it == cum.begin()
                            ? 0
                            : static_cast<std::size_t>(it - cum.begin()) - 1;
        i = std::min(i, p.grid.size() - 2);
        const double h = p.grid[i + 1] - p.grid[i];
        const double c_loc = c - cum[i];
        const double b = p.depth[i];
        const double a = (p.depth[i + 1] - p.depth[i]) / (2.0 * h);
        double t;
        const double disc = b * b + 4.0 * a * c_loc;
        const double denom = b + std::sqrt(std::max(disc, 0.0));
        if (denom > 0.0)
            t = 2.0 * c_loc / denom;
        else
            t = 0.5 * h;  // zero-mass segment, arbitrary interior point
        return p.grid[i] + std::clamp(t, 0.0, h);
    }
};

}  // namespace

AtomEnsemble sample_ensemble(const SpectralProfile& profile, std::size_t n_atoms,
                             double length_m, std::uint64_t seed,
                             bool include_background) {
    if (n_atoms < 1) throw std::invalid_argument("need at least one atom");
    const double feature_area = profile.area();
    const double background_area =
        include_background ? profile.background * profile.window_width() : 0.0;
    if (feature_area + background_area <= 0.0)
        throw std::invalid_argument("profile has zero area, nothing to sample");

    InverseCdf icdf(profile);
    std::mt19937_64 gen(seed);
    AtomEnsemble ens;
    ens.atoms.reserve(n_atoms);
    ens.length_m = length_m;
    ens.seed = seed;
    const double feature_share =
        feature_area / (feature_area + background_area);
    for (std::size_t j = 0; j < n_atoms; ++j) {
        double detuning;
        if (include_background) {
            const double sel = rng::uniform01(gen);
            if (sel < feature_share)
                detuning = icdf.sample(rng::uniform01(gen));
            else
                detuning = profile.grid.front() +
                           rng::uniform01(gen) * profile.window_width();
        } else {
            detuning = icdf.sample(rng::uniform01(gen));
        }
        const double z = rng::uniform01(gen) * length_m;
        ens.atoms.push_back({detuning, z, 1.0});
    }
    ens.total_weight = static_cast<double>(n_atoms);
    return ens;
}

double measure_feature_fwhm(const SpectralProfile& profile) {
    if (profile.depth.empty()) return 0.0;
    const auto it = std::max_element(profile.depth.begin(), profile.depth.end());
    const double peak = *it;
    if (peak <= 0.0) return 0.0;
    const std::size_t ip = static_cast<std::size_t>(it - profile.depth.begin());
    const double half = 0.5 * peak;

    auto crossing = [&](bool right) -> double {
        std::size_t i = ip;
        while (true) {
            const std::size_t nxt = right ? i + 1 : i - 1;
            if ((right && nxt >= profile.depth.size()) || (!right && i == 0))
                return profile.grid[i];
            if (profile.depth[nxt] <= half) {
                const double d0 = profile.depth[i], d1 = profile.depth[nxt];
                const double t = d0 == d1 ? 0.0 : (d0 - half) / (d0 - d1);
                return profile.grid[i] + t * (profile.grid[nxt] - profile.grid[i]);
            }
            i = nxt;
        }
    };
    return crossing(true) - crossing(false);
}

}  // namespace echosim::spectral
