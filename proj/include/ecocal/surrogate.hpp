#pragma once

#include "ecocal/ensemble.hpp"
#include "ecocal/param_space.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ecocal {

struct GpHyper {
    static constexpr double matern_nu = 2.5;
    static constexpr double noise_floor = 1e-8;

    ParamVector length_scales{1.0, 1.0, 1.0, 1.0};
    double signal_variance = 1.0;
    double noise_variance = 1e-6;

    void validate() const;
};

/// Matern 5/2 correlation at scaled distance r: (1 + sqrt5 r + 5r^2/3) exp(-sqrt5 r).
[[nodiscard]] double matern52(double r);

/// Anisotropic Matern 5/2 covariance.
[[nodiscard]] double matern_kernel(const ParamVector& a, const ParamVector& b, const GpHyper& hyper);
[[nodiscard]] double matern_kernel(const ScaledParams& a, const ScaledParams& b, const GpHyper& hyper);

/// (rmse - rmse_min) / (rmse_max - rmse_min).
[[nodiscard]] double normalize_rmse(double rmse_value, double rmse_min, double rmse_max);

// Predicted normalized RMSE is clamped to this interval before it is turned
// into a cost, so extrapolation cannot produce unbounded costs.
inline constexpr double kNormRmseClampLo = -0.5;
inline constexpr double kNormRmseClampHi = 1.5;

/// g = exp(-(norm * (rmse_max - rmse_min) + rmse_min) / sigma_o), with norm
/// first clamped to [kNormRmseClampLo, kNormRmseClampHi].
[[nodiscard]] double cost_from_norm_rmse(double norm, double rmse_min, double rmse_max, const CostConfig& cfg);

/// Zero-mean Gaussian log marginal likelihood of targets y at inputs x.
/// Throws IllConditionedError when the kernel matrix cannot be factorized
/// even with jitter.
[[nodiscard]] double log_marginal_likelihood(const std::vector<ParamVector>& x, const std::vector<double>& y,
                                             const GpHyper& hyper);

/// Likelihood of a dataset as the surrogate sees it: normalized RMSE
/// centered on its mean.
[[nodiscard]] double log_marginal_likelihood(const EnsembleDataset& data, const GpHyper& hyper);

struct GpFitOptions {
    std::uint64_t seed = 0;
    std::size_t restarts = 5;
    double length_scale_min = 0.05;
    double length_scale_max = 5.0;
    double signal_variance_min = 0.01;
    double signal_variance_max = 10.0;
    double noise_variance_min = 1e-8;
    double noise_variance_max = 1e-2;
    double min_step = 0.02;  // smallest log-space step of the hill climber
    std::size_t max_evaluations = 400;  // per restart
};

/// Result of one hill-climbing restart, kept for reporting.
struct GpRestart {
    GpHyper start;
    GpHyper best;
    double log_likelihood = 0.0;
    std::size_t evaluations = 0;
};

/// Gaussian-process regression of normalized RMSE on theta. Immutable once
/// built; all queries are const and thread-safe.
class GpSurrogate {
public:
    /// Normalizes the dataset's RMSE, optimizes the hyperparameters by
    /// log-space coordinate hill climbing from `restarts` seeded random starts
    /// and builds the model with the best ones.
    static GpSurrogate fit(const EnsembleDataset& data, const GpFitOptions& options = {},
                           std::vector<GpRestart>* restarts = nullptr);

    /// Builds the model with fixed hyperparameters.
    static GpSurrogate train(const EnsembleDataset& data, const GpHyper& hyper);
    static GpSurrogate train(std::vector<ParamVector> x, std::vector<double> y_norm, double rmse_min,
                             double rmse_max, const GpHyper& hyper);

    [[nodiscard]] double predict_norm_rmse(const ParamVector& theta) const;
    [[nodiscard]] double predict_norm_rmse(const ScaledParams& theta) const { return predict_norm_rmse(theta.values()); }
    /// Posterior variance of the normalized RMSE (diagnostics only).
    [[nodiscard]] double predict_variance(const ParamVector& theta) const;
    /// Predicted RMSE in K (unclamped).
    [[nodiscard]] double predict_rmse(const ParamVector& theta) const;
    [[nodiscard]] double predict_cost(const ParamVector& theta, const CostConfig& cfg) const;
    [[nodiscard]] double predict_cost(const ScaledParams& theta, const CostConfig& cfg) const {
        return predict_cost(theta.values(), cfg);
    }

    [[nodiscard]] const GpHyper& hyper() const noexcept { return hyper_; }
    [[nodiscard]] double rmse_min() const noexcept { return rmse_min_; }
    [[nodiscard]] double rmse_max() const noexcept { return rmse_max_; }
    [[nodiscard]] double prior_mean() const noexcept { return prior_mean_; }
    /// Diagonal jitter that was needed on top of noise_variance (0 if none).
    [[nodiscard]] double jitter() const noexcept { return jitter_; }
    [[nodiscard]] std::size_t size() const noexcept { return x_.size(); }
    [[nodiscard]] const std::vector<ParamVector>& inputs() const noexcept { return x_; }
    [[nodiscard]] const std::vector<double>& targets() const noexcept { return y_; }
    [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return weights_; }

    void save(const std::filesystem::path& path) const;
    static GpSurrogate load(const std::filesystem::path& path);

private:
    GpSurrogate() = default;
    void factorize();
    void build_scaled_inputs();
    [[nodiscard]] Eigen::VectorXd cross_covariance(const ParamVector& theta) const;

    std::vector<ParamVector> x_;
    std::vector<double> y_;  // normalized RMSE
    double rmse_min_ = 0.0;
    double rmse_max_ = 1.0;
    double prior_mean_ = 0.0;
    double jitter_ = 0.0;
    GpHyper hyper_;
    std::vector<ParamVector> x_scaled_;  // inputs divided by the length scales
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_;
};

}  // namespace ecocal
