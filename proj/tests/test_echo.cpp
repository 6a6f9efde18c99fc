#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "echosim/echo.hpp"
#include "echosim/spectral.hpp"

using namespace echosim;

namespace {

constexpr double kTwoPi = 6.283185307179586;

const echo::EchoEvent* order_of(const echo::EchoResult& r, int m) {
    for (const auto& e : r.echoes)
        if (e.order == m) return &e;
    return nullptr;
}

const echo::EchoEvent* nearest(const echo::EchoResult& r, double t) {
    const echo::EchoEvent* best = nullptr;
    double d = 1e300;
    for (const auto& e : r.echoes)
        if (std::abs(e.peak_time_s - t) < d) {
            d = std::abs(e.peak_time_s - t);
            best = &e;
        }
    return best;
}

}  // namespace

TEST_CASE("flip-echo efficiency closed form") {
    CHECK(echo::crib_efficiency(0.0, 0.0, 0.0, 0.0) == 0.0);
    // Forward-retrieval maximum: d^2 e^-d peaks at d = 2 with value 4/e^2.
    double best_d = 0.0, best = -1.0;
    for (double d = 0.0; d <= 5.0; d += 1e-4) {
        const double eta = echo::crib_efficiency(d, 0.0, 0.0, 0.0);
        if (eta > best) {
            best = eta;
            best_d = d;
        }
    }
    CHECK(best_d == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(best == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-6));
    CHECK(4.0 * std::exp(-2.0) == doctest::Approx(0.5413).epsilon(1e-4));
    // Broadened-by-3 sample with its absorbing background.
    CHECK(echo::crib_efficiency(2.0 / 3.0, 1.5, 0.0, 0.0) ==
          doctest::Approx(0.0509).epsilon(2e-3));
}

TEST_CASE("comb efficiency closed form") {
    CHECK(echo::afc_efficiency(0.0, 2.6, 0.0) == 0.0);
    // Independent arithmetic for the reference point.
    const double deff = 0.5 / 2.6;
    const double dephasing =
        std::exp(-(1.0 / (2.6 * 2.6)) * M_PI * M_PI / (4.0 * std::log(2.0)));
    const double by_hand =
        deff * deff * std::exp(-deff) * std::exp(-1.5) * dephasing;
    CHECK(echo::afc_efficiency(0.5, 2.6, 1.5) ==
          doctest::Approx(by_hand).epsilon(1e-12));
    CHECK(by_hand == doctest::Approx(0.0040).epsilon(0.01));

    // The finesse has an interior optimum at fixed depths.
    double best_f = 0.0, best = -1.0;
    for (double f = 1.05; f <= 12.0; f += 1e-3) {
        const double eta = echo::afc_efficiency(0.5, f, 1.5);
        if (eta > best) {
            best = eta;
            best_f = f;
        }
    }
    CHECK(best_f > 1.2);
    CHECK(best_f < 5.0);
    CHECK(echo::afc_efficiency(0.5, best_f, 1.5) >=
          echo::afc_efficiency(0.5, 2.6, 1.5));
}

TEST_CASE("comb rephasing times") {
    const auto t = echo::afc_echo_times(2.78e6, 2);
    CHECK(t[0] == doctest::Approx(360e-9).epsilon(2e-3));
    CHECK(t[1] == doctest::Approx(720e-9).epsilon(2e-3));
    CHECK(echo::afc_echo_times(1.0, 1)[0] == doctest::Approx(1.0));
    // Linearity in the order.
    const auto many = echo::afc_echo_times(3.7e6, 8);
    for (int m = 1; m <= 4; ++m)
        CHECK(many[2 * m - 1] == doctest::Approx(2.0 * many[m - 1]).epsilon(1e-12));
}

TEST_CASE("comb-offset phase law") {
    CHECK(echo::afc_echo_phase(0.0, 2.78e6, 1).unwrapped_rad == 0.0);
    const auto half = echo::afc_echo_phase(1.39e6, 2.78e6, 1);
    CHECK(half.unwrapped_rad == doctest::Approx(M_PI).epsilon(1e-9));
    // Second echo accumulates twice the phase.
    const auto p1 = echo::afc_echo_phase(0.31e6, 2.78e6, 1);
    const auto p2 = echo::afc_echo_phase(0.31e6, 2.78e6, 2);
    CHECK(p2.unwrapped_rad == doctest::Approx(2.0 * p1.unwrapped_rad).epsilon(1e-12));
}

TEST_CASE("pulse stretching closed form") {
    const spectral::VoltPerWidthCalibration calib{70.0, 3.0};
    const auto same = echo::compress_stretch_fwhm(100e-9, 65.0, 65.0, calib);
    CHECK(same.alpha == doctest::Approx(1.0));
    CHECK(same.output_fwhm_s == doctest::Approx(100e-9));
    const auto twice = echo::compress_stretch_fwhm(100e-9, 50.0, 100.0, calib);
    CHECK(twice.alpha == doctest::Approx(2.0));
    CHECK(twice.output_fwhm_s == doctest::Approx(50e-9));
    CHECK(twice.rephase_scale == doctest::Approx(0.5));
}

TEST_CASE("mode capacities") {
    CHECK(echo::multimode_capacity_crib(1.0) == 1);
    CHECK(echo::multimode_capacity_crib(7.9) == 7);
    CHECK(echo::multimode_capacity_afc(15) == 15);
    CHECK(echo::multimode_capacity_afc(30) == 30);
    // Doubling the initial depth doubles the modes at fixed target efficiency.
    auto capacity_at = [](double d) {
        const double target = std::exp(-1.0) * (1.0 - 1e-9);
        int best = 1;
        for (int b = 1; b <= 64; ++b)
            if (d / b <= 2.0 &&
                echo::crib_efficiency(d / b, 0.0, 0.0, 0.0) >= target)
                best = std::max(best, b);
        return best;
    };
    CHECK(capacity_at(4.0) == 2 * capacity_at(2.0));
    CHECK(capacity_at(8.0) == 2 * capacity_at(4.0));
    // Comb efficiency does not depend on the peak count.
    CHECK(echo::afc_efficiency(0.5, 2.6, 1.5) ==
          echo::afc_efficiency(0.5, 2.6, 1.5));
}

TEST_CASE("dipole sum of trivial ensembles") {
    spectral::AtomEnsemble one;
    one.atoms = {{0.0, 0.005, 1.0}};
    one.total_weight = 1.0;
    one.length_m = 0.01;
    const std::vector<double> times{0.0, 1e-7, 5e-7, 3e-6};
    const auto s = echo::dipole_sum_oracle(one, {}, times);
    for (const auto& v : s) CHECK(std::abs(v) == doctest::Approx(1.0));

    spectral::AtomEnsemble two;
    const double d0 = 0.7e6;
    two.atoms = {{d0, 0.002, 1.0}, {-d0, 0.008, 1.0}};
    two.total_weight = 2.0;
    two.length_m = 0.01;
    const auto s2 = echo::dipole_sum_oracle(two, {}, times);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(std::abs(s2[k]) ==
              doctest::Approx(std::abs(std::cos(kTwoPi * d0 * times[k])))
                  .epsilon(1e-9));
}

TEST_CASE("comb ensemble rephases with the finesse-set amplitude") {
    const double finesse = 2.6;
    const spectral::CombSpec spec{2.78e6, 2.78e6 / finesse, 0.5, 0.0, 15, 0.0};
    const auto prof = spectral::make_comb(spec, 60e6, 16384);
    const auto ens = spectral::sample_ensemble(prof, 20000, 0.01, 5);
    const double t1 = 1.0 / spec.delta_hz;
    const std::vector<double> times{0.0, t1};
    const auto s = echo::dipole_sum_oracle(ens, {}, times);
    const double expected = std::exp(-(1.0 / (finesse * finesse)) * M_PI *
                                     M_PI / (4.0 * std::log(2.0)));
    CHECK(std::abs(s[0]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(s[1]) / std::abs(s[0]) ==
          doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("an empty medium transmits the pulse") {
    const auto prof = spectral::make_single_line(1e6, 0.0, 0.0, 20e6, 2048);
    echo::Pulse pulse{0.4e-6, 100e-9, 1.0, 0.0};
    const echo::StorageGrid grid{0.0, 1.2e-6, 4.0e-9};
    const auto res = echo::simulate_storage(prof, pulse, {}, grid);
    CHECK(res.transmitted_fraction == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.echoes.empty());
    CHECK_FALSE(res.energy_warning);
}

TEST_CASE("storage rejects ill-posed runs") {
    const auto prof = spectral::make_single_line(1e6, 2.0, 0.0, 20e6, 2048);
    echo::Pulse pulse{0.4e-6, 100e-9, 1.0, 0.0};
    SUBCASE("coarse time step") {
        CHECK_THROWS_AS(
            echo::simulate_storage(prof, pulse, {}, {0.0, 1.2e-6, 50e-9}),
            std::invalid_argument);
    }
    SUBCASE("spectrum clipped by the window") {
        echo::Pulse wide{0.4e-6, 8e-9, 1.0, 0.0};  // 88 MHz bandwidth
        CHECK_THROWS_AS(
            echo::simulate_storage(prof, wide, {}, {0.0, 1.2e-6, 0.5e-9}),
            std::invalid_argument);
    }
    SUBCASE("unresolved feature") {
        const auto coarse = spectral::make_single_line(1e6, 2.0, 0.0, 200e6, 256);
        CHECK_THROWS_AS(
            echo::simulate_storage(coarse, pulse, {}, {0.0, 1.2e-6, 0.4e-9}),
            std::invalid_argument);
    }
    SUBCASE("field edge inside the pulse") {
        echo::FieldSchedule sched;
        sched.segments = {{0.35e-6, 2e-6, 70.0}};
        CHECK_THROWS_AS(
            echo::simulate_storage(prof, pulse, sched, {0.0, 2.2e-6, 4.0e-9}),
            std::invalid_argument);
    }
}

TEST_CASE("flip echo lands at twice the switching delay") {
    // Narrow prepared line strongly broadened, so that nearly all detuning is
    // reversible.
    const auto prof = spectral::make_single_line(1e6, 2.0, 0.0, 40e6, 8192);
    const double tc = 0.2e-6, tau = 115e-9, u = 1015.0;  // b = 30
    echo::Pulse pulse{tc, 51.5e-9, 1.0, 0.0};
    echo::FieldSchedule sched;
    sched.calib = {70.0, 3.0};
    const echo::StorageGrid grid{0.0, 0.65e-6, 2.0e-9};
    sched.segments = {{tc - 0.1e-6, tc + tau, u},
                      {tc + tau, grid.t_end_s + 1e-9, -u}};
    const auto res = echo::simulate_storage(prof, pulse, sched, grid);
    const auto* e = nearest(res, tc + 2.0 * tau);
    REQUIRE(e != nullptr);
    CHECK(std::abs(e->peak_time_s - (tc + 2.0 * tau)) <= grid.dt_s);

    // Cross-check the rephasing time against the brute-force dipole sum on an
    // ensemble sampled from the same line.
    const auto ens = spectral::sample_ensemble(prof, 4000, 0.01, 17);
    const double gamma_std = 1e6 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double b = spectral::voltage_to_broadening(u, sched.calib);
    // Uniform positional shifts reproducing the same added width.
    const double stark_per_volt =
        gamma_std * std::sqrt(b * b - 1.0) * std::sqrt(3.0) / u;
    std::vector<double> times;
    for (double t = tc; t < grid.t_end_s; t += grid.dt_s) times.push_back(t);
    echo::FieldSchedule shifted = sched;
    // The oracle accumulates phase from t = 0; shift segments so that the
    // absorption instant is the origin.
    for (auto& seg : shifted.segments) {
        seg.t_start_s -= tc;
        seg.t_end_s -= tc;
    }
    std::vector<double> otimes;
    for (double t = 0.0; t < grid.t_end_s - tc; t += grid.dt_s)
        otimes.push_back(t);
    const auto s = echo::dipole_sum_oracle(ens, shifted, otimes, stark_per_volt);
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.size(); ++k)
        if (std::abs(s[k]) > std::abs(s[best]) && otimes[k] > tau) best = k;
    CHECK(std::abs(otimes[best] - 2.0 * tau) <= grid.dt_s);
}

TEST_CASE("comb storage emits echoes at multiples of the period") {
    const spectral::CombSpec spec{2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
    const auto prof = spectral::make_comb(spec, 60e6, 16384);
    echo::Pulse pulse{300e-9, 100e-9, 0.5, 0.0};
    const echo::StorageGrid grid{0.0, 1.3e-6, 1.6e-9};
    const auto res = echo::simulate_storage(prof, pulse, {}, grid);
    const auto* e1 = order_of(res, 1);
    const auto* e2 = order_of(res, 2);
    REQUIRE(e1 != nullptr);
    REQUIRE(e2 != nullptr);
    const double t1 = 1.0 / spec.delta_hz;
    CHECK(std::abs(e1->peak_time_s - 300e-9 - t1) <= grid.dt_s);
    CHECK(std::abs(e2->peak_time_s - 300e-9 - 2.0 * t1) <= grid.dt_s);
    CHECK(e2->efficiency < 0.1 * e1->efficiency);

    // Energy bookkeeping.
    double eta = 0.0;
    for (const auto& e : res.echoes) eta += e.efficiency;
    CHECK(res.transmitted_fraction + eta <= 1.0 + 1e-6);
    CHECK_FALSE(res.energy_warning);
}

TEST_CASE("simulated comb echo matches the closed form in its regime") {
    const double finesse = 8.0;
    const spectral::CombSpec spec{2.78e6, 2.78e6 / finesse, 0.5, 0.3, 15, 0.0};
    const auto prof = spectral::make_comb(spec, 60e6, 16384);
    echo::Pulse pulse{300e-9, 100e-9, 1.0, 0.0};
    const echo::StorageGrid grid{0.0, 1.3e-6, 1.6e-9};
    const auto res = echo::simulate_storage(prof, pulse, {}, grid);
    const auto* e1 = order_of(res, 1);
    REQUIRE(e1 != nullptr);
    const double eq = echo::afc_efficiency(spec.peak_depth, finesse,
                                           prof.effective_background());
    CHECK(e1->efficiency == doctest::Approx(eq).epsilon(0.10));
}

TEST_CASE("simulated flip echo matches the closed form in its regime") {
    const double gamma = 1e6, b = 24.0;
    const double gamma_std = gamma / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const auto prof = spectral::make_single_line(gamma, 24.0, 1.5, 36e6, 8192);
    const double tc = 0.25e-6, tau = 154e-9, fw = 70e-9;
    echo::Pulse pulse{tc, fw, 1.0, 0.0};
    echo::FieldSchedule sched;
    sched.calib = {70.0, 3.0};
    const echo::StorageGrid grid{0.0, 0.82e-6, 2.5e-9};
    sched.segments = {{tc - 0.1e-6, tc + tau, (b - 1.0) / 2.0 * 70.0},
                      {tc + tau, grid.t_end_s + 1e-9, -(b - 1.0) / 2.0 * 70.0}};
    const auto res = echo::simulate_storage(prof, pulse, sched, grid);
    const auto* e = nearest(res, tc + 2.0 * tau);
    REQUIRE(e != nullptr);
    const double eq = echo::crib_efficiency(1.0, 1.5, 2.0 * tau, gamma_std);
    CHECK(e->efficiency == doctest::Approx(eq).epsilon(0.10));
}

TEST_CASE("echo phase follows the comb offset") {
    const double delta = 2.78e6;
    for (double delta0 : {-0.45e6, 0.3e6, 0.9e6}) {
        const spectral::CombSpec spec{delta, delta / 2.6, 0.5, 0.5, 15, delta0};
        const auto prof = spectral::make_comb(spec, 60e6, 16384);
        echo::Pulse pulse{300e-9, 100e-9, 1.0, 0.0};
        const echo::StorageGrid grid{0.0, 1.3e-6, 1.6e-9};
        const auto res = echo::simulate_storage(prof, pulse, {}, grid);
        for (int m = 1; m <= 2; ++m) {
            const auto* e = order_of(res, m);
            REQUIRE(e != nullptr);
            const double want = echo::afc_echo_phase(delta0, delta, m).wrapped_rad;
            const double got = std::remainder(e->phase_rad - want, kTwoPi);
            CHECK(std::abs(got) < 0.05);
        }
    }
}

TEST_CASE("output intensity is linear in the input photon number") {
    const spectral::CombSpec spec{2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
    const auto prof = spectral::make_comb(spec, 60e6, 16384);
    const echo::StorageGrid grid{0.0, 1.0e-6, 1.6e-9};
    echo::Pulse weak{300e-9, 100e-9, 0.5, 0.0};
    echo::Pulse strong{300e-9, 100e-9, 5.0, 0.0};
    const auto a = echo::simulate_storage(prof, weak, {}, grid);
    const auto b = echo::simulate_storage(prof, strong, {}, grid);
    REQUIRE(a.intensity.size() == b.intensity.size());
    for (std::size_t k = 0; k < a.intensity.size(); k += 37) {
        if (a.intensity[k] < 1e-12) continue;
        CHECK(b.intensity[k] ==
              doctest::Approx(10.0 * a.intensity[k]).epsilon(1e-9));
    }
    // Efficiencies are photon-number independent.
    REQUIRE(!a.echoes.empty());
    REQUIRE(!b.echoes.empty());
    CHECK(a.echoes[0].efficiency ==
          doctest::Approx(b.echoes[0].efficiency).epsilon(1e-9));
}
