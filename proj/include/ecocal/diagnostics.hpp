#pragma once

#include "ecocal/ensemble.hpp"
#include "ecocal/mcmc.hpp"
#include "ecocal/surrogate.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace ecocal {

/// Normalized histogram on [0,1].
struct Histogram {
    std::vector<double> edges;   // bins + 1 strictly increasing values
    std::vector<double> masses;  // non-negative, sum to 1

    [[nodiscard]] std::size_t bins() const noexcept { return masses.size(); }
    void validate() const;

    [[nodiscard]] static Histogram uniform(std::size_t bins);
    [[nodiscard]] static Histogram from_samples(const std::vector<double>& values, std::size_t bins);
    [[nodiscard]] static Histogram from_masses(std::vector<double> masses);
};

// q-side masses are floored at this value and renormalized inside kld.
inline constexpr double kKldFloor = 1e-10;

/// Kullback-Leibler divergence sum p log(p/q) in nats.
[[nodiscard]] double kld(const Histogram& p, const Histogram& q);

/// kld(posterior histogram of one parameter, uniform).
[[nodiscard]] double sensitivity_index(const Chain& chain, std::size_t param, std::size_t bins = 20);

struct CorrelationMatrix {
    std::array<std::array<double, kNumParams>, kNumParams> r{};
    // Dimensions without variance; their correlations are reported as 0.
    std::array<bool, kNumParams> zero_variance{};
};

[[nodiscard]] CorrelationMatrix pairwise_correlation(const Chain& chain);

/// Least-squares slope of parameter b on parameter a.
[[nodiscard]] double regression_slope(const Chain& chain, std::size_t a, std::size_t b);

using Series = std::vector<double>;

/// sqrt(mean over members of (time-mean of sim_i - obs)^2).
[[nodiscard]] double bias_ens(const std::vector<Series>& sims, const Series& obs);

/// Mean over members of the RMS of the anomaly difference, where the
/// simulated anomaly is taken about the time-mean of the ensemble mean and
/// the observed anomaly about the time-mean of obs.
[[nodiscard]] double ubrmse_ens(const std::vector<Series>& sims, const Series& obs);

/// (s_mcmc - s_unif) / s_unif; negative means improvement.
[[nodiscard]] double improvement_rate(double s_mcmc, double s_unif);

struct EvalScores {
    double bias_ens = 0.0;
    double ubrmse_ens = 0.0;
    double improvement_rate = 0.0;  // of ubrmse_ens against the prior ensemble
};

struct SizeStudyConfig {
    std::vector<std::size_t> sizes{50, 100, 200, 300};
    std::size_t reference_size = 400;
    std::size_t bins = 20;
    McmcConfig mcmc;
    CostConfig cost;
    GpFitOptions fit;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
};

struct SizeStudyRow {
    std::size_t size = 0;
    std::array<double, kNumParams> kld{};  // against the reference posterior
};

/// For each size: independent LHS design, ensemble, surrogate fit, MCMC, and
/// per-parameter kld(posterior_size, posterior_reference). When `reference`
/// is given it is used as the reference-size chain instead of being rebuilt.
[[nodiscard]] std::vector<SizeStudyRow> ensemble_size_study(const ForwardModel& model, const ObservationSeries& obs,
                                                            const SizeStudyConfig& cfg,
                                                            const Chain* reference = nullptr);

void save_size_study(const std::vector<SizeStudyRow>& rows, const std::filesystem::path& path);

}  // namespace ecocal
