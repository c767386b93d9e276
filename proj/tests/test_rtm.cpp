#include "ecocal/error.hpp"
#include "ecocal/rtm.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ecocal;

namespace {

ModelState state_with(double w0, double lai, double t = 300.0) {
    ModelState s;
    s.w = {w0, w0, w0};
    s.lai = lai;
    s.t_surf = t;
    return s;
}

double dtb_dw(const ChannelParams& ch, double lai) {
    const double h = 1e-4;
    return (brightness_temperature(state_with(0.2 + h, lai), ch) - brightness_temperature(state_with(0.2 - h, lai), ch)) /
           (2.0 * h);
}

}  // namespace

TEST_CASE("worked tau-omega example") {
    ChannelParams ch;
    ch.omega = 0.05;
    ch.e_dry = 0.8;
    ch.s_m = 0.0;
    ch.inc_angle = 0.0;
    ch.b_veg = std::numbers::ln2;  // Gamma = 0.5 at LAI 1
    CHECK(canopy_transmissivity(1.0, ch) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(brightness_temperature(state_with(0.2, 1.0), ch) == doctest::Approx(276.75).epsilon(1e-12));
}

TEST_CASE("bare soil and dense canopy limits") {
    for (const auto& ch : default_channels()) {
        CAPTURE(ch.label);
        const double e_soil = ch.e_dry - ch.s_m * 0.2;
        CHECK(brightness_temperature(state_with(0.2, 0.0), ch) == doctest::Approx(300.0 * e_soil).epsilon(1e-14));
        CHECK(brightness_temperature(state_with(0.2, 200.0), ch) == doctest::Approx(300.0 * (1.0 - ch.omega)).epsilon(1e-9));
    }
}

TEST_CASE("bare-soil brightness temperature falls as the soil wets") {
    for (const auto& ch : default_channels()) {
        double prev = brightness_temperature(state_with(0.03, 0.0), ch);
        for (double w = 0.05; w <= 0.42; w += 0.02) {
            const double tb = brightness_temperature(state_with(w, 0.0), ch);
            CHECK(tb < prev);
            prev = tb;
        }
    }
}

TEST_CASE("a dense canopy hides the soil-moisture signal") {
    for (const auto& ch : default_channels()) {
        CAPTURE(ch.label);
        const double bare = std::fabs(dtb_dw(ch, 0.0));
        CHECK(bare > 0.0);
        CHECK(std::fabs(dtb_dw(ch, 4.0)) <= 0.01 * bare);
        double prev = bare;
        for (double lai = 0.5; lai <= 6.0; lai += 0.5) {
            const double now = std::fabs(dtb_dw(ch, lai));
            CHECK(now < prev);
            prev = now;
        }
    }
}

TEST_CASE("brightness temperatures stay physical over reachable states") {
    Rng rng(3);
    std::uniform_real_distribution<double> w(0.03, 0.42), lai(0.0, 8.0), t(250.0, 320.0);
    for (int k = 0; k < 2000; ++k) {
        const auto tb = brightness_temperatures(state_with(w(rng), lai(rng), t(rng)), default_channels());
        for (double x : tb) {
            CHECK(x > 100.0);
            CHECK(x < 340.0);
        }
    }
}

TEST_CASE("observation noise") {
    const std::vector<ModelState> traj(2600, state_with(0.2, 1.0));
    const auto times = observation_times(traj.size(), 0, 1);
    REQUIRE(times.size() == 2600);
    const TbVector clean = brightness_temperatures(traj.front(), default_channels());

    SUBCASE("zero noise is exact and reproducible") {
        Rng a(1), b(2);
        const auto x = observe(traj, times, default_channels(), 0.0, a);
        const auto y = observe(traj, times, default_channels(), 0.0, b);
        CHECK(x.tb == y.tb);
        CHECK(x.tb.front() == clean);
    }
    SUBCASE("unit noise has unit spread") {
        Rng rng(11);
        const auto x = observe(traj, times, default_channels(), 1.0, rng);
        double s = 0.0, ss = 0.0;
        std::size_t n = 0;
        for (const auto& v : x.tb) {
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                const double e = v[c] - clean[c];
                s += e;
                ss += e * e;
                ++n;
            }
        }
        const double mean = s / static_cast<double>(n);
        const double sd = std::sqrt(ss / static_cast<double>(n) - mean * mean);
        CHECK(n >= 10000);
        CHECK(sd >= 0.95);
        CHECK(sd <= 1.05);
    }
    SUBCASE("hours outside the trajectory are rejected") {
        Rng rng(1);
        CHECK_THROWS_AS((void)observe(traj, {10.0, 2600.0}, default_channels(), 0.0, rng), std::out_of_range);
    }
}

TEST_CASE("observation schedule") {
    const auto t = observation_times(500, 1, 48);
    REQUIRE(!t.empty());
    CHECK(t.front() == 1.0);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] - t[i - 1] == 48.0);
    CHECK(t.back() < 500.0);
}

TEST_CASE("observations survive a save and load") {
    test_support::TempDir dir("rtm");
    std::vector<ModelState> traj;
    for (int h = 0; h < 300; ++h) traj.push_back(state_with(0.1 + 0.001 * h, 0.01 * h, 290.0 + 0.01 * h));
    Rng rng(5);
    const auto obs = observe(traj, observation_times(traj.size()), default_channels(), 0.7, rng);
    save_observations(obs, dir / "obs.csv");
    const auto back = load_observations(dir / "obs.csv");
    CHECK(back.hours == obs.hours);
    CHECK(back.tb == obs.tb);
}

TEST_CASE("channel validation") {
    ChannelParams ch;
    ch.omega = 0.5;
    CHECK_THROWS_AS(ch.validate(0.42), ConfigError);
    ch = ChannelParams{};
    ch.s_m = 3.0;
    CHECK_THROWS_AS(ch.validate(0.42), ConfigError);
}
