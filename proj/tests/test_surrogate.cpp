#include "ecocal/error.hpp"
#include "ecocal/surrogate.hpp"

#include "support.hpp"

#include <Eigen/LU>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ecocal;

namespace {

GpHyper hyper(double length, double signal, double noise) {
    GpHyper h;
    h.length_scales = {length, length, length, length};
    h.signal_variance = signal;
    h.noise_variance = noise;
    return h;
}

std::vector<ParamVector> random_points(std::size_t n, std::uint64_t seed, double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, hi);
    std::vector<ParamVector> x(n);
    for (auto& p : x) {
        for (double& v : p) v = u(rng);
    }
    return x;
}

double bumpy(const ParamVector& t) {
    return 0.5 + 0.3 * std::sin(3.0 * t[0]) * std::cos(2.0 * t[1]) + 0.2 * t[2] * t[3];
}

Eigen::MatrixXd dense_kernel(const std::vector<ParamVector>& x, const GpHyper& h) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < kNumParams; ++d) {
                const double z = (x[i][d] - x[j][d]) / h.length_scales[d];
                r2 += z * z;
            }
            k(i, j) = h.signal_variance * matern52(std::sqrt(r2));
        }
        k(i, i) += h.noise_variance;
    }
    return k;
}

EnsembleDataset dataset_from(const std::vector<ParamVector>& x, const std::vector<double>& rmse) {
    EnsembleDataset d;
    for (std::size_t i = 0; i < x.size(); ++i) d.records.push_back({i, ScaledParams(x[i]), rmse[i]});
    return d;
}

}  // namespace

TEST_CASE("Matern 5/2 kernel") {
    CHECK(matern52(0.0) == 1.0);
    const double s5 = std::sqrt(5.0);
    CHECK(matern52(1.0) == doctest::Approx((1.0 + s5 + 5.0 / 3.0) * std::exp(-s5)).epsilon(1e-15));
    CHECK(matern52(1.0) == doctest::Approx(0.5240).epsilon(1e-3));
    const GpHyper h = hyper(0.4, 2.5, 1e-6);
    const auto x = random_points(30, 1);
    for (const auto& a : x) {
        CHECK(matern_kernel(a, a, h) == 2.5);
        CHECK(matern_kernel(ScaledParams(a), ScaledParams(a), h) == 2.5);
        for (const auto& b : x) CHECK(matern_kernel(a, b, h) == matern_kernel(b, a, h));
    }
    double prev = 1.0;
    for (double r = 0.1; r < 5.0; r += 0.1) {
        CHECK(matern52(r) < prev);
        prev = matern52(r);
    }
}

TEST_CASE("prediction matches a dense-inverse oracle") {
    const GpHyper h = hyper(0.3, 1.0, 1e-4);
    const auto x = random_points(80, 2);
    std::vector<double> y;
    for (const auto& p : x) y.push_back(bumpy(p));
    const auto gp = GpSurrogate::train(x, y, 1.0, 3.0, h);
    REQUIRE(gp.jitter() == 0.0);

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    Eigen::VectorXd yc(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) yc[static_cast<Eigen::Index>(i)] = y[i] - mean;
    const Eigen::VectorXd w = dense_kernel(x, h).inverse() * yc;

    for (const auto& q : random_points(400, 3)) {
        double oracle = mean;
        for (std::size_t i = 0; i < x.size(); ++i) oracle += w[static_cast<Eigen::Index>(i)] * matern_kernel(q, x[i], h);
        CHECK(std::fabs(gp.predict_norm_rmse(q) - oracle) <= 1e-8);
    }
}

TEST_CASE("near-noiseless GP interpolates its training data") {
    const auto x = random_points(60, 4);
    std::vector<double> y;
    for (const auto& p : x) y.push_back(bumpy(p));
    const auto gp = GpSurrogate::train(x, y, 2.0, 4.0, hyper(0.5, 1.0, GpHyper::noise_floor));
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::fabs(gp.predict_norm_rmse(x[i]) - y[i]) <= 1e-6);
        CHECK(gp.predict_rmse(x[i]) == doctest::Approx(2.0 + 2.0 * y[i]).epsilon(1e-6));
        CHECK(gp.predict_variance(x[i]) <= 1e-6);
    }
}

TEST_CASE("far from the data the prediction reverts to the training mean") {
    const auto x = random_points(40, 5, 0.3);
    std::vector<double> y;
    for (const auto& p : x) y.push_back(bumpy(p));
    const auto gp = GpSurrogate::train(x, y, 0.0, 1.0, hyper(0.05, 1.0, 1e-6));
    CHECK(gp.predict_norm_rmse(ParamVector{1.0, 1.0, 1.0, 1.0}) == doctest::Approx(gp.prior_mean()).epsilon(1e-9));
    CHECK(gp.predict_variance(ParamVector{1.0, 1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("duplicate training inputs still factorize") {
    auto x = random_points(20, 6);
    x.push_back(x.front());
    std::vector<double> y;
    for (const auto& p : x) y.push_back(bumpy(p));
    const auto gp = GpSurrogate::train(x, y, 0.0, 1.0, hyper(0.5, 1.0, GpHyper::noise_floor));
    CHECK(std::isfinite(gp.predict_norm_rmse(x.front())));
    CHECK(std::fabs(gp.predict_norm_rmse(x.front()) - y.front()) <= 1e-4);
}

TEST_CASE("log marginal likelihood") {
    SUBCASE("single point closed form") {
        const GpHyper h = hyper(1.0, 2.0, 0.5);
        const double k = 2.5, y = 0.7;
        const double expected = -0.5 * y * y / k - 0.5 * std::log(k) - 0.5 * std::log(2.0 * std::numbers::pi);
        CHECK(log_marginal_likelihood({ParamVector{0.1, 0.2, 0.3, 0.4}}, {y}, h) ==
              doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("dense determinant oracle") {
        for (std::uint64_t seed : {7u, 8u, 9u}) {
            const auto x = random_points(20, seed);
            std::vector<double> y;
            for (const auto& p : x) y.push_back(bumpy(p) - 0.5);
            const GpHyper h = hyper(0.6, 0.8, 1e-3);
            const Eigen::MatrixXd k = dense_kernel(x, h);
            Eigen::VectorXd yv(20);
            for (int i = 0; i < 20; ++i) yv[i] = y[static_cast<std::size_t>(i)];
            const double oracle = -0.5 * yv.dot(k.inverse() * yv) - 0.5 * std::log(k.determinant()) -
                                  10.0 * std::log(2.0 * std::numbers::pi);
            CHECK(std::fabs(log_marginal_likelihood(x, y, h) - oracle) <= 1e-8);
        }
    }
}

TEST_CASE("cost anchors") {
    const CostConfig cfg{1.0};
    CHECK(cost_from_norm_rmse(0.0, 2.0, 5.0, cfg) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(cost_from_norm_rmse(1.0, 2.0, 5.0, cfg) == doctest::Approx(std::exp(-5.0)).epsilon(1e-14));
    CHECK(cost_from_norm_rmse(10.0, 2.0, 5.0, cfg) == cost_from_norm_rmse(kNormRmseClampHi, 2.0, 5.0, cfg));
    CHECK(cost_from_norm_rmse(-10.0, 2.0, 5.0, cfg) == cost_from_norm_rmse(kNormRmseClampLo, 2.0, 5.0, cfg));
    CHECK(normalize_rmse(3.5, 2.0, 5.0) == doctest::Approx(0.5));
    double prev = 2.0;
    for (double norm = -0.5; norm <= 1.5; norm += 0.05) {
        const double g = cost_from_norm_rmse(norm, 2.0, 5.0, cfg);
        CHECK(g > 0.0);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("fitting a linear response") {
    const auto design = lhs_sample(150, kNumParams, 10);
    std::vector<ParamVector> x;
    std::vector<double> r;
    auto linear = [](const ParamVector& t) { return 1.0 + 0.8 * t[0] - 0.5 * t[1] + 0.3 * t[2] + 0.1 * t[3]; };
    for (const auto& t : design) {
        x.push_back(t.values());
        r.push_back(linear(t.values()));
    }
    const auto data = dataset_from(x, r);
    GpFitOptions opt;
    opt.seed = 3;
    std::vector<GpRestart> restarts;
    const auto gp = GpSurrogate::fit(data, opt, &restarts);

    SUBCASE("held-out R2") {
        double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
        const auto test = random_points(200, 11);
        for (const auto& t : test) mean += linear(t);
        mean /= 200.0;
        for (const auto& t : test) {
            ss_res += std::pow(gp.predict_rmse(t) - linear(t), 2.0);
            ss_tot += std::pow(linear(t) - mean, 2.0);
        }
        CHECK(1.0 - ss_res / ss_tot >= 0.999);
    }
    SUBCASE("hill climbing never loses likelihood") {
        REQUIRE(restarts.size() == opt.restarts);
        for (const auto& rs : restarts) CHECK(rs.log_likelihood >= log_marginal_likelihood(data, rs.start) - 1e-9);
        CHECK(log_marginal_likelihood(data, gp.hyper()) >= restarts.front().log_likelihood - 1e-9);
    }
    SUBCASE("same seed, same hyperparameters") {
        const auto again = GpSurrogate::fit(data, opt);
        CHECK(again.hyper().length_scales == gp.hyper().length_scales);
        CHECK(again.hyper().signal_variance == gp.hyper().signal_variance);
        CHECK(again.hyper().noise_variance == gp.hyper().noise_variance);
    }
    SUBCASE("save and load reproduce predictions") {
        test_support::TempDir dir("surrogate");
        gp.save(dir / "gp.txt");
        const auto back = GpSurrogate::load(dir / "gp.txt");
        for (const auto& t : random_points(100, 12)) CHECK(back.predict_cost(t, CostConfig{}) == gp.predict_cost(t, CostConfig{}));
    }
}

TEST_CASE("surrogate cost tracks the model cost on its training members") {
    ForwardModel m;
    m.preset = load_named_preset("site1");
    m.forcing = generate_forcing(m.preset, 1, m.preset.climate.forcing_seed);
    m.spinup_cycles = 0;
    m.times = observation_times(m.forcing.size(), 1, 48);
    Rng rng(1);
    const auto obs = simulate_observations(m, ScaledParams(kTruthTheta), 0.0, rng);
    const auto data = run_ensemble(lhs_sample(60, kNumParams, 21), m, obs, 1, 21);
    const auto gp = GpSurrogate::fit(data);
    const CostConfig cfg{1.0};
    const double range = data.rmse_max() - data.rmse_min();
    std::size_t close = 0;
    for (const auto& r : data.records) {
        CHECK(std::fabs(gp.predict_rmse(r.theta.values()) - r.rmse) <= 1e-6 * range);
        const double ratio = gp.predict_cost(r.theta, cfg) / cost(r.rmse, cfg);
        if (ratio >= 1.0 / 1.05 && ratio <= 1.05) ++close;
    }
    CHECK(static_cast<double>(close) >= 0.9 * static_cast<double>(data.size()));
}

TEST_CASE("invalid hyperparameters") {
    CHECK_THROWS_AS(hyper(-1.0, 1.0, 1e-6).validate(), ConfigError);
    CHECK_THROWS_AS(hyper(1.0, 1.0, 1e-12).validate(), ConfigError);
    CHECK_THROWS_AS((void)GpSurrogate::train({ParamVector{}}, {0.0, 1.0}, 0.0, 1.0, GpHyper{}), AlignmentError);
}
