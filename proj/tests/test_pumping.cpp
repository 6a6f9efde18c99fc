#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "echosim/pumping.hpp"
#include "echosim/spectral.hpp"

using namespace echosim;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

pumping::PumpSchedule small_schedule() {
    pumping::PumpSchedule s;
    s.duration_s = 20e-3;
    s.sweep_span_hz = 4e6;
    s.pump_rate_per_s = 2e4;
    s.t_extra_s = 2e-3;
    s.gate_windows = {{-0.3e6, 0.3e6}};
    return s;
}

spectral::SpectralProfile small_raw() {
    return spectral::make_single_line(2e6, 2.0, 0.0, 16e6, 256);
}

// Independent fine-step Euler integration of the same rate equations,
// written out directly; oracle for the pit depth.
struct EulerOracle {
    double g1 = 1.0, g2 = 0.0, e = 0.0, p = 0.0;
    void run(double pump, double t1_eff, double tz, double tp, double beta,
             double pf, double duration, double dt) {
        const auto steps = static_cast<std::size_t>(duration / dt);
        for (std::size_t k = 0; k < steps; ++k) {
            const double dg1 = -pump * g1 + (1.0 - beta) / t1_eff * e +
                               g2 / tz + p / tp;
            const double de = pump * g1 - e / t1_eff;
            const double dg2 = beta * (1.0 - pf) / t1_eff * e - g2 / tz;
            const double dp = beta * pf / t1_eff * e - p / tp;
            g1 += dt * dg1;
            g2 += dt * dg2;
            e += dt * de;
            p += dt * dp;
        }
    }
};

}  // namespace

TEST_CASE("closed branching keeps the second level and reservoir empty") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;
    mat.branch_beta = 0.0;
    const auto run =
        pumping::evolve_preparation(ground, small_schedule(), mat, 5e-6, 200);
    for (std::size_t i = 0; i < run.final_state.size(); ++i) {
        CHECK(run.final_state.g2[i] == 0.0);
        CHECK(run.final_state.p[i] == 0.0);
    }
}

TEST_CASE("population is conserved per class at every snapshot") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;
    mat.persistent_fraction = 0.3;
    const auto run =
        pumping::evolve_preparation(ground, small_schedule(), mat, 5e-6, 100);
    REQUIRE(run.snapshots.size() > 3);
    for (const auto& f : run.snapshots)
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(std::abs(f.g1[i] + f.g2[i] + f.e[i] + f.p[i] - 1.0) < 1e-9);
}

TEST_CASE("with decay channels off the pump conserves g1 + e exactly") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;
    mat.t1_s = kInf;
    mat.tz_s = kInf;
    mat.t_persistent_s = kInf;
    const auto run =
        pumping::evolve_preparation(ground, small_schedule(), mat, 5e-6);
    for (std::size_t i = 0; i < run.final_state.size(); ++i)
        CHECK(std::abs(run.final_state.g1[i] + run.final_state.e[i] - 1.0) <
              1e-12);
}

TEST_CASE("stimulation strictly improves the pumping and lowers the residual") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;
    double prev_excited = 1e300;
    double prev_g1 = 1e300;
    for (double gain : {1.0, 2.0, 5.0, 10.0}) {
        auto sch = small_schedule();
        sch.stimulation_gain = gain;
        const auto run = pumping::evolve_preparation(ground, sch, mat, 4e-6);
        const double excited = run.final_state.total_excited();
        CHECK(excited < prev_excited);
        prev_excited = excited;
        // Residual initial-state population deep in the pumped region.
        double g1min = 1e300;
        for (std::size_t i = 0; i < run.final_state.size(); ++i)
            if (std::abs(run.final_state.grid[i]) > 0.5e6 &&
                std::abs(run.final_state.grid[i]) < 1.5e6)
                g1min = std::min(g1min, run.final_state.g1[i]);
        CHECK(g1min < prev_g1);
        prev_g1 = g1min;
    }
}

TEST_CASE("a too-coarse step is rejected with the bound") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;
    CHECK_THROWS_WITH_AS(
        pumping::evolve_preparation(ground, small_schedule(), mat, 1e-3),
        doctest::Contains("stability bound"), std::invalid_argument);
}

TEST_CASE("pumped-region floor matches an independent fine-step integration") {
    // Single class pumped continuously; no stimulation, so the transfer is
    // limited by the lifetime ratio and the pit does not reach zero.
    auto raw = small_raw();
    pumping::PopulationField one;
    one.grid = {0.0};
    one.g1 = {1.0};
    one.g2 = {0.0};
    one.e = {0.0};
    one.p = {0.0};
    pumping::PumpSchedule sch;
    sch.duration_s = 60e-3;
    sch.sweep_span_hz = 1e6;
    sch.resonance_width_hz = 1e6;  // duty 1: continuous pumping of the class
    sch.pump_rate_per_s = 2e3;
    sch.t_extra_s = 0.0;
    pumping::MaterialParams mat;  // beta 0.1, T1 11 ms, TZ 130 ms

    const auto run = pumping::evolve_preparation(one, sch, mat, 4e-6);

    EulerOracle oracle;
    oracle.run(2e3, mat.t1_s, mat.tz_s, mat.t_persistent_s, mat.branch_beta,
               mat.persistent_fraction, 60e-3, 1e-7);
    CHECK(run.final_state.g1[0] == doctest::Approx(oracle.g1).epsilon(1e-3));
    // Deep pit is not reached without stimulation.
    CHECK(run.final_state.g1[0] > 0.2);
}

TEST_CASE("averaged sweep agrees with the explicit moving window") {
    // Slow sweep resolved by the step so both models are integrable.
    auto raw = spectral::make_single_line(2e6, 2.0, 0.0, 16e6, 128);
    auto ground = pumping::PopulationField::ground(raw.grid);
    pumping::PumpSchedule sch;
    sch.duration_s = 30e-3;
    sch.sweep_span_hz = 2e6;
    sch.resonance_width_hz = 0.5e6;
    sch.sweep_rate_hz_per_s = 2e6 / 1e-3;  // one pass per millisecond
    sch.pump_rate_per_s = 1e3;
    sch.t_extra_s = 0.0;
    pumping::MaterialParams mat;

    auto averaged = sch;
    averaged.sweep_model = pumping::SweepModel::averaged;
    auto explicit_sch = sch;
    explicit_sch.sweep_model = pumping::SweepModel::explicit_window;

    const auto a = pumping::evolve_preparation(ground, averaged, mat, 2e-6);
    const auto b = pumping::evolve_preparation(ground, explicit_sch, mat, 2e-6);
    for (std::size_t i = 0; i < a.final_state.size(); ++i) {
        if (std::abs(a.final_state.grid[i]) > 0.9e6) continue;
        CHECK(a.final_state.g1[i] ==
              doctest::Approx(b.final_state.g1[i]).epsilon(0.05));
    }
}

TEST_CASE("realized profile scales the raw absorption by g1") {
    auto raw = small_raw();
    auto ground = pumping::PopulationField::ground(raw.grid);

    SUBCASE("no pumping leaves the profile unchanged") {
        const auto out = pumping::realized_profile(ground, raw);
        for (std::size_t i = 0; i < raw.depth.size(); ++i)
            CHECK(out.depth[i] == raw.depth[i]);
    }
    SUBCASE("perfect pumping outside a gate leaves a bare line") {
        auto pops = ground;
        for (std::size_t i = 0; i < pops.size(); ++i)
            if (std::abs(pops.grid[i]) > 0.3e6) {
                pops.g1[i] = 0.0;
                pops.g2[i] = 1.0;
            }
        const auto out = pumping::realized_profile(pops, raw);
        for (std::size_t i = 0; i < out.depth.size(); ++i) {
            if (std::abs(out.grid[i]) > 0.3e6)
                CHECK(out.depth[i] == 0.0);
            else
                CHECK(out.depth[i] == raw.depth[i]);
        }
    }
    SUBCASE("pumped profile never exceeds the raw profile") {
        pumping::MaterialParams mat;
        const auto run =
            pumping::evolve_preparation(ground, small_schedule(), mat, 5e-6);
        const auto out = pumping::realized_profile(run.final_state, raw);
        for (std::size_t i = 0; i < out.depth.size(); ++i)
            CHECK(out.depth[i] <= raw.depth[i] + 1e-12);
    }
    SUBCASE("grid mismatch is rejected") {
        auto other = spectral::make_single_line(2e6, 2.0, 0.0, 16e6, 512);
        CHECK_THROWS_AS(pumping::realized_profile(ground, other),
                        std::invalid_argument);
    }
}

TEST_CASE("fluorescence follows the excited population") {
    auto raw = small_raw();
    auto pops = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;

    SUBCASE("no excitation, no fluorescence") {
        for (double t : {0.0, 1e-3, 10e-3})
            CHECK(pumping::fluorescence_rate(pops, mat, t) == 0.0);
    }
    SUBCASE("log-rate slope equals the excited-state decay") {
        for (std::size_t i = 0; i < pops.size(); ++i) {
            pops.e[i] = 0.001;
            pops.g1[i] = 0.999;
        }
        const double r1 = pumping::fluorescence_rate(pops, mat, 5e-3);
        const double r2 = pumping::fluorescence_rate(pops, mat, 25e-3);
        const double tau = (25e-3 - 5e-3) / std::log(r1 / r2);
        CHECK(tau == doctest::Approx(11e-3).epsilon(1e-9));
    }
    SUBCASE("rate is linear in the excited population") {
        for (std::size_t i = 0; i < pops.size(); ++i) pops.e[i] = 0.002;
        const double r1 = pumping::fluorescence_rate(pops, mat, 3e-3);
        for (std::size_t i = 0; i < pops.size(); ++i) pops.e[i] = 0.004;
        const double r2 = pumping::fluorescence_rate(pops, mat, 3e-3);
        CHECK(r2 == doctest::Approx(2.0 * r1).epsilon(1e-12));
    }
}

TEST_CASE("profile decay follows the two relaxation channels") {
    auto raw = small_raw();
    auto pops = pumping::PopulationField::ground(raw.grid);
    pumping::MaterialParams mat;

    // Pumped-away population split between the Zeeman level and the
    // persistent reservoir at a selected class.
    const std::size_t i0 = raw.grid.size() / 2 + 10;

    SUBCASE("zero wait reproduces the realized profile") {
        pops.g1[i0] = 0.4;
        pops.g2[i0] = 0.6;
        mat.persistent_fraction = 0.0;
        const auto a = pumping::decay_profile(raw, pops, mat, 0.0);
        const auto b = pumping::realized_profile(pops, raw);
        for (std::size_t i = 0; i < a.depth.size(); ++i)
            CHECK(a.depth[i] == doctest::Approx(b.depth[i]).epsilon(1e-12));
    }
    SUBCASE("pure Zeeman storage recovers by 1/e after one lifetime") {
        pops.g1[i0] = 0.0;
        pops.g2[i0] = 1.0;
        const auto out = pumping::decay_profile(raw, pops, mat, mat.tz_s);
        // Remaining deficit is 1/e of the initial hole.
        const double recovered = out.depth[i0] / raw.depth[i0];
        CHECK(recovered == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-9));
    }
    SUBCASE("persistent share keeps the hole open at long waits") {
        pops.g1[i0] = 0.0;
        pops.g2[i0] = 0.7;
        pops.p[i0] = 0.3;
        const auto out = pumping::decay_profile(raw, pops, mat, 10.0 * mat.tz_s);
        const double residual_contrast = 1.0 - out.depth[i0] / raw.depth[i0];
        // Zeeman part is gone (e^-10), persistent part barely moved.
        CHECK(residual_contrast == doctest::Approx(0.3).epsilon(0.01));
    }
}
