#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "echosim/io.hpp"
#include "echosim/spectral.hpp"

using namespace echosim;

namespace {

constexpr double kFourLn2 = 2.772588722239781;

// Quadrature oracle: Simpson integration of the analytic Gaussian line on a
// fine grid, independent of the trapezoid path under test.
double gaussian_area_oracle(double fwhm, double depth, double half_window) {
    const auto f = [&](double x) {
        return depth * std::exp(-kFourLn2 * x * x / (fwhm * fwhm));
    };
    const int n = 200001;
    const double h = 2.0 * half_window / (n - 1);
    double acc = f(-half_window) + f(half_window);
    for (int i = 1; i + 1 < n; ++i)
        acc += f(-half_window + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("single line hits its nominal peak and half maximum") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 10e6, 4096);
    CHECK(p.value_at(0.0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(p.value_at(0.5e6) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.value_at(-0.5e6) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(spectral::measure_feature_fwhm(p) == doctest::Approx(1e6).epsilon(1e-3));
}

TEST_CASE("zero-depth line is flat background") {
    const auto p = spectral::make_single_line(1e6, 0.0, 1.5, 10e6, 4096);
    for (double d : p.depth) CHECK(d == 0.0);
    CHECK(p.background == 1.5);
}

TEST_CASE("line construction rejects bad inputs") {
    CHECK_THROWS_AS(spectral::make_single_line(1e6, 2.0, 0.0, 5e6, 4096),
                    std::invalid_argument);  // window < 6 gamma
    CHECK_THROWS_AS(spectral::make_single_line(-1.0, 2.0, 0.0, 10e6, 4096),
                    std::invalid_argument);
    CHECK_THROWS_AS(spectral::make_single_line(1e6, 2.0, 0.0, 10e6, 100),
                    std::invalid_argument);
}

TEST_CASE("line area matches the closed form and an independent quadrature") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 12e6, 16384);
    const double closed = 2.0 * 1e6 * std::sqrt(M_PI / kFourLn2);
    CHECK(closed == doctest::Approx(2.12893e6).epsilon(1e-4));
    CHECK(p.area() == doctest::Approx(closed).epsilon(1e-9));
    CHECK(gaussian_area_oracle(1e6, 2.0, 6e6) ==
          doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("comb carries its rephasing period") {
    const spectral::CombSpec spec{2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
    const auto p = spectral::make_comb(spec, 60e6, 16384);
    CHECK(p.comb_delta_hz == 2.78e6);
    CHECK(1.0 / p.comb_delta_hz == doctest::Approx(360e-9).epsilon(2e-3));
    CHECK_FALSE(p.low_contrast);
    CHECK(p.comb_floor > 0.0);
    CHECK(p.comb_floor < 0.05);
    CHECK(p.value_at(0.0) > 0.99 * 0.5);
    CHECK(p.effective_background() ==
          doctest::Approx(1.5 + p.comb_floor).epsilon(1e-12));
}

TEST_CASE("single-peak comb degenerates to the single line") {
    const spectral::CombSpec spec{5e6, 1e6, 2.0, 1.5, 1, 0.0};
    const auto comb = spectral::make_comb(spec, 10e6, 4096);
    const auto line = spectral::make_single_line(1e6, 2.0, 1.5, 10e6, 4096);
    REQUIRE(comb.grid.size() == line.grid.size());
    for (std::size_t i = 0; i < comb.grid.size(); ++i) {
        CHECK(comb.grid[i] == line.grid[i]);
        CHECK(comb.depth[i] == doctest::Approx(line.depth[i]).epsilon(1e-12));
    }
    CHECK(comb.background == line.background);
}

TEST_CASE("comb center offset shifts every peak") {
    spectral::CombSpec spec{2e6, 0.5e6, 1.0, 0.0, 7, 0.0};
    const auto base = spectral::make_comb(spec, 30e6, 8192);
    spec.center_offset_hz = spec.delta_hz / 2.0;
    const auto shifted = spectral::make_comb(spec, 30e6, 8192);
    for (int n = -3; n <= 3; ++n) {
        const double c0 = n * spec.delta_hz;
        CHECK(base.value_at(c0) > 0.99);
        CHECK(shifted.value_at(c0 + spec.delta_hz / 2.0) > 0.99);
    }
}

TEST_CASE("merged comb peaks raise the warning flag, not an error") {
    const spectral::CombSpec spec{1e6, 0.9e6, 1.0, 0.0, 9, 0.0};
    const auto p = spectral::make_comb(spec, 20e6, 8192);
    CHECK(p.low_contrast);
}

TEST_CASE("broadening by 1 is the identity") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.5, 10e6, 2048);
    const auto q = spectral::stark_broaden(p, 1.0);
    CHECK(q.grid == p.grid);
    CHECK(q.depth == p.depth);
}

TEST_CASE("broadening by 3 rescales width and depth") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 10e6, 8192);
    const auto q = spectral::stark_broaden(p, 3.0);
    CHECK(spectral::measure_feature_fwhm(q) == doctest::Approx(3e6).epsilon(1e-3));
    CHECK(*std::max_element(q.depth.begin(), q.depth.end()) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(q.background == p.background);
}

TEST_CASE("broadening conserves the feature area") {
    const auto p = spectral::make_single_line(1e6, 2.0, 1.5, 10e6, 8192);
    const auto q = spectral::stark_broaden(p, 5.0);
    CHECK(q.area() == doctest::Approx(p.area()).epsilon(1e-9));
}

TEST_CASE("successive broadenings compose multiplicatively") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 12e6, 8192);
    const auto ab = spectral::stark_broaden(spectral::stark_broaden(p, 1.7), 1.3);
    const auto prod = spectral::stark_broaden(p, 1.7 * 1.3);
    for (double x = -6e6; x <= 6e6; x += 0.337e6) {
        const double b = prod.value_at(x);
        if (std::abs(b) > 1e-12)
            CHECK(ab.value_at(x) == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("voltage map is anchored and linear") {
    const spectral::VoltPerWidthCalibration calib{70.0, 3.0};
    CHECK(spectral::voltage_to_broadening(0.0, calib) == 1.0);
    CHECK(spectral::voltage_to_broadening(70.0, calib) == doctest::Approx(3.0));
    CHECK(spectral::voltage_to_broadening(35.0, calib) == doctest::Approx(2.0));
    CHECK_THROWS_AS(spectral::voltage_to_broadening(-1.0, calib),
                    std::invalid_argument);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 10e6, 2048);
    const auto a = spectral::sample_ensemble(p, 5000, 0.01, 42);
    const auto b = spectral::sample_ensemble(p, 5000, 0.01, 42);
    REQUIRE(a.atoms.size() == b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        CHECK(a.atoms[i].detuning_hz == b.atoms[i].detuning_hz);
        CHECK(a.atoms[i].position_m == b.atoms[i].position_m);
    }
}

TEST_CASE("sampled detuning spread matches the source line") {
    const double gamma = 1e6;
    const auto p = spectral::make_single_line(gamma, 2.0, 0.0, 12e6, 8192);
    const auto ens = spectral::sample_ensemble(p, 10000, 0.01, 7);
    double mean = 0.0;
    for (const auto& a : ens.atoms) mean += a.detuning_hz;
    mean /= static_cast<double>(ens.atoms.size());
    double var = 0.0;
    for (const auto& a : ens.atoms)
        var += (a.detuning_hz - mean) * (a.detuning_hz - mean);
    var /= static_cast<double>(ens.atoms.size());
    const double expect_std = gamma / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    CHECK(std::sqrt(var) == doctest::Approx(expect_std).epsilon(0.03));
    const double se = expect_std / std::sqrt(10000.0);
    CHECK(std::abs(mean) < 5.0 * se);
}

TEST_CASE("comb sampling fills peaks uniformly") {
    const spectral::CombSpec spec{2.78e6, 2.78e6 / 2.6, 0.5, 0.0, 15, 0.0};
    const auto p = spectral::make_comb(spec, 60e6, 16384);
    const auto ens = spectral::sample_ensemble(p, 1000000, 0.01, 11);
    std::array<std::size_t, 15> occupancy{};
    for (const auto& a : ens.atoms) {
        const auto n = std::lround(a.detuning_hz / spec.delta_hz + 7.0);
        if (n >= 0 && n < 15) occupancy[static_cast<std::size_t>(n)]++;
    }
    const double expected = 1000000.0 / 15.0;
    for (auto n : occupancy)
        CHECK(static_cast<double>(n) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("sampling a zero-area profile is rejected") {
    const auto p = spectral::make_single_line(1e6, 0.0, 0.0, 10e6, 2048);
    CHECK_THROWS_AS(spectral::sample_ensemble(p, 100, 0.01, 1),
                    std::invalid_argument);
}

TEST_CASE("empirical distribution converges to the profile") {
    const auto p = spectral::make_single_line(1e6, 2.0, 0.0, 12e6, 8192);
    const std::size_t n = 100000;
    auto ens = spectral::sample_ensemble(p, n, 0.01, 3);
    std::vector<double> xs;
    xs.reserve(n);
    for (const auto& a : ens.atoms) xs.push_back(a.detuning_hz);
    std::sort(xs.begin(), xs.end());

    std::vector<double> cdf(p.grid.size(), 0.0);
    for (std::size_t i = 0; i + 1 < p.grid.size(); ++i)
        cdf[i + 1] = cdf[i] + 0.5 * (p.depth[i] + p.depth[i + 1]) *
                                  (p.grid[i + 1] - p.grid[i]);
    const double total = cdf.back();

    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xs[i];
        const auto it = std::upper_bound(p.grid.begin(), p.grid.end(), x);
        const auto j = static_cast<std::size_t>(it - p.grid.begin());
        const double model =
            j == 0 ? 0.0 : cdf[std::min(j, cdf.size() - 1)] / total;
        const double emp = static_cast<double>(i + 1) / static_cast<double>(n);
        ks = std::max(ks, std::abs(emp - model));
    }
    CHECK(ks < 0.02);
}

TEST_CASE("comb transform has its first sideband at the rephasing lag") {
    const spectral::CombSpec spec{2.78e6, 2.78e6 / 2.6, 0.5, 0.0, 15, 0.0};
    const auto p = spectral::make_comb(spec, 60e6, 16384);
    const double lag_step = 1.0 / p.window_width();
    const double t1 = 1.0 / spec.delta_hz;
    double best_mag = -1.0, best_lag = 0.0;
    for (double lag = 0.5 * t1; lag <= 1.5 * t1; lag += lag_step) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < p.grid.size(); ++i) {
            const double ph = -2.0 * M_PI * p.grid[i] * lag;
            re += p.depth[i] * std::cos(ph);
            im += p.depth[i] * std::sin(ph);
        }
        const double mag = re * re + im * im;
        if (mag > best_mag) {
            best_mag = mag;
            best_lag = lag;
        }
    }
    CHECK(std::abs(best_lag - t1) <= lag_step);
}

TEST_CASE("profile CSV round trip is lossless") {
    const auto p = spectral::make_single_line(1.234567e6, 1.75, 0.875, 11e6, 2048);
    const auto path = std::filesystem::temp_directory_path() / "echosim_prof.csv";
    io::write_profile_csv(p, path);
    const auto q = io::read_profile_csv(path);
    REQUIRE(q.grid.size() == p.grid.size());
    CHECK(q.background == p.background);
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
        CHECK(q.grid[i] == p.grid[i]);
        CHECK(q.depth[i] == p.depth[i]);
    }
    std::filesystem::remove(path);
}
