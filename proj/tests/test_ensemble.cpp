#include "ecocal/ensemble.hpp"
#include "ecocal/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

using namespace ecocal;

namespace {

ForwardModel small_model() {
    ForwardModel m;
    m.preset = load_named_preset("site1");
    m.forcing = generate_forcing(m.preset, 1, m.preset.climate.forcing_seed);
    m.spinup_cycles = 0;
    m.times = observation_times(m.forcing.size(), 1, 48);
    return m;
}

ObservationSeries series(std::vector<double> hours, std::vector<TbVector> tb) {
    ObservationSeries s;
    s.hours = std::move(hours);
    s.tb = std::move(tb);
    return s;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("Latin hypercube strata") {
    SUBCASE("one sample per quartile") {
        const auto d = lhs_design(4, kNumParams, 9);
        for (std::size_t dim = 0; dim < kNumParams; ++dim) {
            std::set<int> bins;
            for (const auto& x : d) bins.insert(static_cast<int>(std::floor(x[dim] * 4.0)));
            CHECK(bins.size() == 4);
        }
    }
    SUBCASE("400 members fill 400 bins per dimension") {
        const auto d = lhs_design(400, kNumParams, 123);
        REQUIRE(d.size() == 400);
        for (std::size_t dim = 0; dim < kNumParams; ++dim) {
            std::vector<int> count(400, 0);
            for (const auto& x : d) {
                REQUIRE(x[dim] >= 0.0);
                REQUIRE(x[dim] < 1.0);
                ++count[static_cast<std::size_t>(std::floor(x[dim] * 400.0))];
            }
            for (int c : count) CHECK(c == 1);
        }
    }
    SUBCASE("reproducible from the seed") {
        CHECK(lhs_design(50, kNumParams, 7) == lhs_design(50, kNumParams, 7));
        CHECK(lhs_design(50, kNumParams, 7) != lhs_design(50, kNumParams, 8));
    }
    CHECK_THROWS_AS((void)lhs_design(0, kNumParams, 1), ConfigError);
}

TEST_CASE("pooled RMSE") {
    const TbVector a{250.0, 260.0, 270.0, 280.0};
    const TbVector b{252.0, 262.0, 272.0, 282.0};
    const auto x = series({1.0, 3.0}, {a, a});
    CHECK(rmse(x, x) == 0.0);
    CHECK(rmse(series({1.0, 3.0}, {b, b}), x) == doctest::Approx(2.0).epsilon(1e-14));

    SUBCASE("agrees with a two-pass sum") {
        Rng rng(4);
        std::normal_distribution<double> nd(260.0, 10.0);
        std::vector<double> hours;
        std::vector<TbVector> s, o;
        for (int t = 0; t < 500; ++t) {
            hours.push_back(t);
            s.push_back({nd(rng), nd(rng), nd(rng), nd(rng)});
            o.push_back({nd(rng), nd(rng), nd(rng), nd(rng)});
        }
        double sum = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) {
            for (std::size_t c = 0; c < kNumChannels; ++c) sum += (s[t][c] - o[t][c]) * (s[t][c] - o[t][c]);
        }
        const double oracle = std::sqrt(sum / (4.0 * 500.0));
        CHECK(std::fabs(rmse(series(hours, s), series(hours, o)) - oracle) <= 1e-10);
    }
    SUBCASE("misaligned series are rejected") {
        CHECK_THROWS_AS((void)rmse(series({1.0}, {a}), x), AlignmentError);
        CHECK_THROWS_AS((void)rmse(series({1.0, 5.0}, {a, a}), x), AlignmentError);
    }
}

TEST_CASE("cost is exp(-rmse / sigma_o)") {
    const CostConfig unit{1.0};
    CHECK(cost(0.0, unit) == 1.0);
    CHECK(cost(1.0, unit) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(cost(2.0, CostConfig{2.0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    double prev = 2.0;
    for (double r = 0.0; r < 10.0; r += 0.25) {
        const double c = cost(r, unit);
        CHECK(c > 0.0);
        CHECK(c <= 1.0);
        CHECK(c < prev);
        prev = c;
    }
    CHECK_THROWS_AS(CostConfig{0.0}.validate(), ConfigError);
}

TEST_CASE("ensemble runs are independent of the worker count") {
    const ForwardModel m = small_model();
    Rng rng(1);
    const ScaledParams truth(kTruthTheta);
    const auto obs = simulate_observations(m, truth, 0.0, rng);
    auto thetas = lhs_sample(12, kNumParams, 77);
    thetas.push_back(truth);

    const auto one = run_ensemble(thetas, m, obs, 1, 5);
    const auto eight = run_ensemble(thetas, m, obs, 8, 5);
    REQUIRE(one.size() == thetas.size());
    CHECK_FALSE(one.partial());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one.records[i].member == i);
        CHECK(one.records[i].theta == eight.records[i].theta);
        CHECK(one.records[i].rmse == eight.records[i].rmse);
    }
    CHECK(one.records.back().rmse == 0.0);
    CHECK(one.rmse_min() == 0.0);
    CHECK(one.rmse_max() > 0.0);
}

TEST_CASE("dataset files") {
    test_support::TempDir dir("ensemble");
    EnsembleDataset d;
    d.scenario = "site1";
    d.seed = 42;
    const auto thetas = lhs_sample(400, kNumParams, 3);
    for (std::size_t i = 0; i < thetas.size(); ++i) d.records.push_back({i, thetas[i], 0.1 + std::sqrt(static_cast<double>(i))});
    d.failures.push_back({400, "solver, blew up"});

    SUBCASE("round trip is exact") {
        save_dataset(d, dir / "d.csv");
        const auto back = load_dataset(dir / "d.csv");
        CHECK(back.scenario == "site1");
        CHECK(back.seed == 42);
        REQUIRE(back.size() == d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            CHECK(back.records[i].member == d.records[i].member);
            CHECK(back.records[i].theta == d.records[i].theta);
            CHECK(back.records[i].rmse == d.records[i].rmse);
        }
        REQUIRE(back.failures.size() == 1);
        CHECK(back.failures[0].member == 400);
    }
    SUBCASE("empty file") {
        write_text(dir / "e.csv", "");
        CHECK_THROWS_AS((void)load_dataset(dir / "e.csv"), ParseError);
    }
    SUBCASE("truncated last row") {
        write_text(dir / "t.csv", "member,theta1,theta2,theta3,theta4,rmse_K\n0,0.1,0.2,0.3,0.4,1.5\n1,0.1,0.2,0.3,0.4,1.");
        try {
            (void)load_dataset(dir / "t.csv");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("malformed row reports its line") {
        write_text(dir / "m.csv",
                   "# scenario=x\nmember,theta1,theta2,theta3,theta4,rmse_K\n0,0.1,0.2,0.3,0.4,1.5\n1,0.1,abc,0.3,0.4,1.5\n");
        try {
            (void)load_dataset(dir / "m.csv");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
    }
    SUBCASE("theta outside the unit cube") {
        write_text(dir / "o.csv", "member,theta1,theta2,theta3,theta4,rmse_K\n0,0.1,1.2,0.3,0.4,1.5\n");
        CHECK_THROWS_AS((void)load_dataset(dir / "o.csv"), ParseError);
    }
}
