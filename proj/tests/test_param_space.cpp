#include "ecocal/error.hpp"
#include "ecocal/param_space.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace ecocal;

TEST_CASE("denormalize maps the bounds of the multiplier ranges") {
    ParamRanges r;
    r.ks_def = 2e-6;
    r.es_def = 10.0;
    const auto lo = denormalize(ScaledParams({0.0, 0.0, 0.0, 1.0}), r);
    CHECK(lo.ks == doctest::Approx(0.5 * 2e-6).epsilon(1e-15));
    CHECK(lo.es == doctest::Approx(1.75 * 10.0).epsilon(1e-15));
    CHECK(lo.vmax0 == doctest::Approx(0.5 * r.vmax0_def).epsilon(1e-15));
}

TEST_CASE("the prior centre maps to defaults times the range midpoints") {
    ParamRanges r;
    const auto p = denormalize(ScaledParams(), r);
    const auto d = r.defaults();
    const double phys[] = {p.ks, p.n, p.vmax0, p.es};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const double mid = 0.5 * (r.multipliers[i].lo + r.multipliers[i].hi);
        CHECK(phys[i] == doctest::Approx(d[i] * mid).epsilon(1e-14));
    }
}

TEST_CASE("normalize inverts denormalize") {
    ParamRanges r;
    SUBCASE("truth") {
        const ScaledParams t(kTruthTheta);
        const auto back = normalize(denormalize(t, r), r);
        for (std::size_t i = 0; i < kNumParams; ++i) CHECK(std::fabs(back[i] - kTruthTheta[i]) <= 1e-12);
    }
    SUBCASE("random draws") {
        Rng rng(42);
        for (int k = 0; k < 100; ++k) {
            const ScaledParams t = prior_sample(rng);
            const auto back = normalize(denormalize(t, r), r);
            for (std::size_t i = 0; i < kNumParams; ++i) CHECK(std::fabs(back[i] - t[i]) <= 1e-12);
        }
    }
    SUBCASE("lower bound") {
        const auto d = r.defaults();
        PhysicalParams p{d[0] * 0.5, d[1] * 0.8, d[2] * 0.5, d[3] * 0.25};
        const auto t = normalize(p, r);
        for (std::size_t i = 0; i < kNumParams; ++i) CHECK(std::fabs(t[i]) <= 1e-12);
    }
}

TEST_CASE("out-of-bounds theta is rejected with the component named") {
    try {
        (void)ScaledParams({0.5, 1.2, 0.5, 0.5});
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("theta2") != std::string::npos);
    }
    CHECK_THROWS_AS((void)ScaledParams({-0.1, 0.5, 0.5, 0.5}), DomainError);
    CHECK_THROWS_AS((void)ScaledParams({0.5, 0.5, NAN, 0.5}), DomainError);

    ParamRanges r;
    PhysicalParams too_big{r.ks_def * 2.0, r.n_def, r.vmax0_def, r.es_def};
    CHECK_THROWS_AS((void)normalize(too_big, r), DomainError);
}

TEST_CASE("n is floored") {
    ParamRanges r;
    r.n_def = 1.0;  // 0.8 * 1.0 would be an invalid van Genuchten shape
    const auto p = denormalize(ScaledParams({0.5, 0.0, 0.5, 0.5}), r);
    CHECK(p.n == doctest::Approx(kMinVanGenuchtenN));
}

TEST_CASE("prior draws are uniform on the unit cube and reproducible") {
    Rng rng(7);
    constexpr int kDraws = 10000;
    std::array<double, kNumParams> sum{}, lo{1, 1, 1, 1}, hi{};
    for (int k = 0; k < kDraws; ++k) {
        const auto t = prior_sample(rng);
        for (std::size_t i = 0; i < kNumParams; ++i) {
            sum[i] += t[i];
            lo[i] = std::min(lo[i], t[i]);
            hi[i] = std::max(hi[i], t[i]);
        }
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const double mean = sum[i] / kDraws;
        CHECK(mean >= 0.47);
        CHECK(mean <= 0.53);
        CHECK(lo[i] >= 0.0);
        CHECK(hi[i] <= 1.0);
    }
    Rng a(99), b(99);
    for (int k = 0; k < 50; ++k) CHECK(prior_sample(a) == prior_sample(b));
}

TEST_CASE("seed derivation separates streams") {
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(5, 6) == derive_seed(5, 6));
}
