#include "ecocal/ecohydro.hpp"
#include "ecocal/error.hpp"
#include "ecocal/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace ecocal;

namespace {

SoilParams unit_soil() {
    SoilParams s;
    s.alpha = 2.0;
    s.n = 2.0;
    s.w_r = 0.05;
    s.w_s = 0.45;
    return s;
}

double mid_moisture(const SoilParams& s) { return 0.5 * (s.w_r + s.w_s); }

}  // namespace

TEST_CASE("effective saturation is the affine map of [w_r, w_s]") {
    const SoilParams s = unit_soil();
    CHECK(effective_saturation(s.w_s, s) == 1.0);
    CHECK(effective_saturation(s.w_r, s) == 0.0);
    CHECK(effective_saturation(mid_moisture(s), s) == doctest::Approx(0.5).epsilon(1e-15));
    // Tiny drift is clamped, larger excursions are errors.
    CHECK(effective_saturation(s.w_s + 1e-12, s) == 1.0);
    CHECK_THROWS_AS((void)effective_saturation(s.w_s + 1e-3, s), DomainError);
}

TEST_CASE("van Genuchten suction") {
    const SoilParams s = unit_soil();
    CHECK(vg_suction(s.w_s, s) == 0.0);
    CHECK(vg_suction(mid_moisture(s), s) == doctest::Approx(0.5 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK_THROWS_AS((void)vg_suction(s.w_r, s), NumericalError);

    // Cross-check against the retention curve w(psi) inverted by bisection.
    const double psi = vg_suction(0.2, s);
    double lo = s.w_r + 1e-12, hi = s.w_s;
    const double m = 1.0 - 1.0 / s.n;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double w_at = s.w_r + (s.w_s - s.w_r) * std::pow(1.0 + std::pow(s.alpha * psi, s.n), -m);
        (mid > w_at ? hi : lo) = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(vg_moisture_at_suction(psi, s) == doctest::Approx(0.2).epsilon(1e-12));

    SUBCASE("monotone decreasing in moisture") {
        double prev = vg_suction(s.w_r + 1e-3, s);
        for (double w = s.w_r + 2e-3; w <= s.w_s; w += 1e-3) {
            const double now = vg_suction(w, s);
            CHECK(now < prev);
            prev = now;
        }
    }
}

TEST_CASE("van Genuchten-Mualem conductivity") {
    SoilParams s = unit_soil();
    s.ks = 3e-6;
    CHECK(vg_conductivity(s.w_s, s) == doctest::Approx(s.ks).epsilon(1e-14));
    CHECK(vg_conductivity(s.w_r, s) == 0.0);
    const double expected = std::sqrt(0.5) * std::pow(1.0 - std::sqrt(0.75), 2.0);
    CHECK(expected == doctest::Approx(0.01288).epsilon(1e-3));
    CHECK(vg_conductivity(mid_moisture(s), s) / s.ks == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("hydraulic curves are monotone for random soils") {
    Rng rng(17);
    std::uniform_real_distribution<double> alpha(0.5, 8.0), n(1.1, 3.0), ks(1e-7, 1e-4);
    for (int k = 0; k < 50; ++k) {
        SoilParams s = unit_soil();
        s.alpha = alpha(rng);
        s.n = n(rng);
        s.ks = ks(rng);
        double prev_psi = std::numeric_limits<double>::infinity();
        double prev_k = 0.0;
        bool ok = true;
        for (int i = 1; i <= 1000; ++i) {
            const double w = s.w_r + (s.w_s - s.w_r) * i / 1000.0;
            const double psi = vg_suction(w, s);
            const double kw = vg_conductivity(w, s);
            ok = ok && psi <= prev_psi && kw >= prev_k && kw <= s.ks * (1.0 + 1e-12);
            prev_psi = psi;
            prev_k = kw;
        }
        CHECK(ok);
    }
}

TEST_CASE("evaporation efficiency") {
    SoilParams s;
    s.psi_dry = 100.0;
    CHECK(evaporation_efficiency(0.0, s) == 1.0);
    CHECK(evaporation_efficiency(50.0, s) == doctest::Approx(0.5));
    CHECK(evaporation_efficiency(250.0, s) == 0.0);
}

TEST_CASE("soil step without forcing only drains the column") {
    const SoilParams s = unit_soil();
    VegParams v;
    ModelState st;
    st.w = {0.3, 0.3, 0.3};
    const ForcingRecord calm{0.0, 300.0, 0.0, 0.0};
    const SoilStep step = step_soil(st, calm, s, v);
    CHECK(step.fluxes.drainage > 0.0);
    CHECK(step.fluxes.infiltration == 0.0);
    CHECK(step.fluxes.evapotranspiration() == 0.0);
    // Gravity moves the same flux through every interface, so only the
    // surface layer ends up drier.
    CHECK(step.state.w[1] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(step.state.w[2] == doctest::Approx(0.3).epsilon(1e-14));
    const double dstore = column_storage(step.state, s) - column_storage(st, s);
    CHECK(std::fabs(dstore + step.fluxes.drainage) <= 1e-12);
}

TEST_CASE("saturated column rejects heavy rain as runoff") {
    const SoilParams s = unit_soil();
    VegParams v;
    ModelState st;
    st.w = {s.w_s, s.w_s, s.w_s};
    const ForcingRecord storm{50.0 / 1000.0 / 3600.0, 300.0, 0.0, 0.0};
    const SoilStep step = step_soil(st, storm, s, v);
    CHECK(step.fluxes.runoff > 0.0);
    for (double w : step.state.w) CHECK(w <= s.w_s);
    CHECK(step.fluxes.precip == doctest::Approx(step.fluxes.infiltration + step.fluxes.runoff).epsilon(1e-15));
}

TEST_CASE("infiltration is limited by the saturated conductivity") {
    SoilParams s = unit_soil();
    s.ks = 1e-6;
    VegParams v;
    ModelState st;
    st.w = {0.1, 0.1, 0.1};
    const ForcingRecord storm{20.0 / 1000.0 / 3600.0, 300.0, 0.0, 0.0};
    const SoilStep step = step_soil(st, storm, s, v);
    CHECK(step.fluxes.infiltration == doctest::Approx(s.ks * kStepSeconds).epsilon(1e-14));
}

TEST_CASE("water balance closes per step and per year") {
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries forcing = generate_forcing(preset, 1, preset.climate.forcing_seed);
    const PhysicalParams p = denormalize(ScaledParams(kTruthTheta), preset.ranges);
    const SoilParams soil = soil_params(preset, p);
    const VegParams veg = veg_params(preset, p);

    ModelState prev = initial_state(soil, veg);
    const double start = column_storage(prev, soil);
    WaterFluxes total;
    double worst_step = 0.0;
    integrate(p, preset, forcing, 0, [&](std::size_t, const ModelState& st, const WaterFluxes& fx) {
        const double d = column_storage(st, soil) - column_storage(prev, soil);
        worst_step = std::max(worst_step, std::fabs(d - (fx.infiltration - fx.evapotranspiration() - fx.drainage)));
        CHECK(fx.precip == doctest::Approx(fx.infiltration + fx.runoff).epsilon(1e-12));
        total += fx;
        prev = st;
    });
    CHECK(worst_step <= 1e-9);
    CHECK(total.precip > 0.5);
    const double residual =
        total.precip - (total.evapotranspiration() + total.drainage + total.runoff) - (column_storage(prev, soil) - start);
    CHECK(std::fabs(residual) <= 1e-6);
}

TEST_CASE("full water stress stops growth") {
    const SoilParams s = unit_soil();
    VegParams v;
    v.w_wilt = 0.15;
    v.w_fc = 0.3;
    ModelState st;
    st.w = {0.1, 0.1, 0.1};
    st.c_leaf = 0.05;
    st.c_stem = 0.4;
    st.c_root = 0.4;
    st.lai = v.sl * st.c_leaf;
    const ForcingRecord noon{0.0, 300.0, 900.0, 1e-7};
    const ModelState out = step_vegetation(st, noon, v, s);
    CHECK(out.c_stem == doctest::Approx(st.c_stem * (1.0 - v.d_stem * kStepSeconds)).epsilon(1e-14));
    CHECK(out.c_root == doctest::Approx(st.c_root * (1.0 - v.d_root * kStepSeconds)).epsilon(1e-14));
    CHECK(out.c_leaf < st.c_leaf);
    CHECK(out.lai == doctest::Approx(v.sl * out.c_leaf));
}

TEST_CASE("support constraint at equality still allows leaf growth") {
    const SoilParams s = unit_soil();
    VegParams v;
    v.es = 4.0;
    ModelState st;
    st.w = {0.35, 0.35, 0.35};
    st.c_leaf = 0.05;
    st.c_stem = 0.1;
    st.c_root = 0.1;  // stem + root == es * leaf
    st.lai = v.sl * st.c_leaf;
    const ForcingRecord noon{0.0, 300.0, 900.0, 1e-7};
    const ModelState out = step_vegetation(st, noon, v, s);
    const double leaf_kept = st.c_leaf * (1.0 - v.d_leaf * kStepSeconds);
    CHECK(out.c_leaf > leaf_kept);
    CHECK(out.c_stem + out.c_root >= v.es * out.c_leaf - 1e-15);
}

TEST_CASE("pools stay non-negative and the support constraint holds over a run") {
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries forcing = generate_forcing(preset, 2, preset.climate.forcing_seed);
    const PhysicalParams p = denormalize(ScaledParams({0.2, 0.7, 0.9, 0.1}), preset.ranges);
    const VegParams veg = veg_params(preset, p);
    bool held = true;
    bool non_negative = true;
    bool lai_tied = true;
    integrate(p, preset, forcing, 1, [&](std::size_t, const ModelState& st, const WaterFluxes&) {
        non_negative = non_negative && st.c_leaf >= 0.0 && st.c_stem >= 0.0 && st.c_root >= 0.0;
        held = held && st.c_stem + st.c_root >= veg.es * st.c_leaf - 1e-9;
        lai_tied = lai_tied && st.lai == veg.sl * st.c_leaf;
    });
    CHECK(non_negative);
    CHECK(held);
    CHECK(lai_tied);
}

TEST_CASE("site1 truth LAI stays in its seasonal band") {
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries forcing = generate_forcing(preset, 8, preset.climate.forcing_seed);
    const auto traj = simulate(denormalize(ScaledParams(kTruthTheta), preset.ranges), preset, forcing, 4);
    const auto [lo, hi] = std::minmax_element(traj.begin(), traj.end(),
                                              [](const ModelState& a, const ModelState& b) { return a.lai < b.lai; });
    CHECK(lo->lai >= 0.3);
    CHECK(hi->lai <= 2.5);
}

TEST_CASE("more photosynthetic capacity never means less leaf area") {
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries forcing = generate_forcing(preset, 2, preset.climate.forcing_seed);
    double prev = -1.0;
    for (double scale : {0.5, 0.75, 1.0, 1.5, 2.0}) {
        PhysicalParams p = denormalize(ScaledParams(kTruthTheta), preset.ranges);
        p.vmax0 *= scale;
        const auto traj = simulate(p, preset, forcing, 2);
        const double mean =
            std::accumulate(traj.begin(), traj.end(), 0.0, [](double a, const ModelState& s) { return a + s.lai; }) /
            static_cast<double>(traj.size());
        CHECK(mean >= prev);
        prev = mean;
    }
}

TEST_CASE("spin-up changes the recorded pass; identical inputs reproduce it exactly") {
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries forcing = generate_forcing(preset, 1, preset.climate.forcing_seed);
    const PhysicalParams p = denormalize(ScaledParams(kTruthTheta), preset.ranges);
    const auto cold = simulate(p, preset, forcing, 0);
    const auto warm = simulate(p, preset, forcing, 4);
    CHECK(cold.back() != warm.back());
    CHECK(simulate(p, preset, forcing, 4) == warm);
}

TEST_CASE("forcing totals and determinism") {
    for (const auto& [name, target] : {std::pair{"site2", 1590.0}, std::pair{"site3", 110.0}}) {
        const ScenarioPreset preset = load_named_preset(name);
        const ForcingSeries f = generate_forcing(preset, 8, preset.climate.forcing_seed);
        CHECK(f.years() == 8);
        double total = 0.0;
        for (std::size_t y = 0; y < 8; ++y) total += f.annual_precip_mm(y);
        const double mean = total / 8.0;
        CHECK(mean >= 0.9 * target);
        CHECK(mean <= 1.1 * target);
        CHECK_NOTHROW(f.validate());
    }
    const ScenarioPreset preset = load_named_preset("site1");
    const ForcingSeries a = generate_forcing(preset, 2, 5);
    const ForcingSeries b = generate_forcing(preset, 2, 5);
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t h = 0; h < a.size(); ++h) {
        same = same && a.hours[h].precip == b.hours[h].precip && a.hours[h].temp == b.hours[h].temp &&
               a.hours[h].swrad == b.hours[h].swrad && a.hours[h].pet == b.hours[h].pet;
    }
    CHECK(same);
}

TEST_CASE("preset parsing rejects unknown keys with their line") {
    try {
        (void)parse_preset("name = x\nbogus_key = 1\n", "inline");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}
