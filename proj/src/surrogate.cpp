#include "ecocal/surrogate.hpp"

#include "ecocal/error.hpp"
#include "ecocal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace ecocal {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
constexpr double kMaxJitter = 1e-4;
constexpr const char* kModelMagic = "ecocal-gp-surrogate 1";

std::vector<ParamVector> scale_inputs(const std::vector<ParamVector>& x, const GpHyper& hyper) {
    std::vector<ParamVector> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t d = 0; d < kNumParams; ++d) out[i][d] = x[i][d] / hyper.length_scales[d];
    }
    return out;
}

double scaled_distance(const ParamVector& a, const ParamVector& b) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < kNumParams; ++d) {
        const double diff = a[d] - b[d];
        r2 += diff * diff;
    }
    return std::sqrt(r2);
}

// Kernel matrix plus noise_variance on the diagonal.
Eigen::MatrixXd kernel_matrix(const std::vector<ParamVector>& x, const GpHyper& hyper) {
    const auto xs = scale_inputs(x, hyper);
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& xi = xs[static_cast<std::size_t>(i)];
        k(i, i) = hyper.signal_variance + hyper.noise_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = hyper.signal_variance * matern52(scaled_distance(xi, xs[static_cast<std::size_t>(j)]));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

// Cholesky factorization with escalating diagonal jitter. Returns the jitter
// that was needed.
double factorize_with_jitter(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>& llt) {
    llt.compute(k);
    if (llt.info() == Eigen::Success) return 0.0;
    for (double jitter = 1e-10; jitter <= kMaxJitter * (1.0 + 1e-12); jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        llt.compute(kj);
        if (llt.info() == Eigen::Success) return jitter;
    }
    throw IllConditionedError("kernel matrix not positive definite even with jitter 1e-4");
}

double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y) {
    const Eigen::VectorXd alpha = llt.solve(y);
    const auto n = static_cast<double>(y.size());
    const double log_det_half = llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct NormalizedData {
    std::vector<ParamVector> x;
    std::vector<double> y;  // normalized RMSE
    double rmse_min;
    double rmse_max;
};

NormalizedData normalized(const EnsembleDataset& data) {
    data.validate();
    NormalizedData out{{}, {}, data.rmse_min(), data.rmse_max()};
    if (!(out.rmse_max > out.rmse_min)) throw DomainError("dataset rmse has no spread");
    for (const auto& r : data.records) {
        out.x.push_back(r.theta.values());
        out.y.push_back(normalize_rmse(r.rmse, out.rmse_min, out.rmse_max));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> centered(const std::vector<double>& v, double mean) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
    return out;
}

// Log-space coordinates: four length scales, signal variance, noise variance.
using HyperCoords = std::array<double, kNumParams + 2>;

GpHyper from_coords(const HyperCoords& z) {
    GpHyper h;
    for (std::size_t d = 0; d < kNumParams; ++d) h.length_scales[d] = std::exp(z[d]);
    h.signal_variance = std::exp(z[kNumParams]);
    // exp(log(floor)) can round just below the floor.
    h.noise_variance = std::max(std::exp(z[kNumParams + 1]), GpHyper::noise_floor);
    return h;
}

}  // namespace

void GpHyper::validate() const {
    for (double l : length_scales) {
        if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("GP length scales must be > 0");
    }
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) throw ConfigError("GP signal variance must be > 0");
    if (!(noise_variance >= noise_floor) || !std::isfinite(noise_variance)) {
        throw ConfigError("GP noise variance must be >= 1e-8");
    }
}

double matern52(double r) {
    const double s = kSqrt5 * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern_kernel(const ParamVector& a, const ParamVector& b, const GpHyper& hyper) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < kNumParams; ++d) {
        const double diff = (a[d] - b[d]) / hyper.length_scales[d];
        r2 += diff * diff;
    }
    return hyper.signal_variance * matern52(std::sqrt(r2));
}

double matern_kernel(const ScaledParams& a, const ScaledParams& b, const GpHyper& hyper) {
    return matern_kernel(a.values(), b.values(), hyper);
}

double normalize_rmse(double rmse_value, double rmse_min, double rmse_max) {
    if (!(rmse_max > rmse_min)) throw DomainError("rmse_max must exceed rmse_min");
    return (rmse_value - rmse_min) / (rmse_max - rmse_min);
}

double cost_from_norm_rmse(double norm, double rmse_min, double rmse_max, const CostConfig& cfg) {
    const double clamped = std::clamp(norm, kNormRmseClampLo, kNormRmseClampHi);
    return std::exp(-(clamped * (rmse_max - rmse_min) + rmse_min) / cfg.sigma_o);
}

double log_marginal_likelihood(const std::vector<ParamVector>& x, const std::vector<double>& y, const GpHyper& hyper) {
    hyper.validate();
    if (x.size() != y.size() || x.empty()) throw AlignmentError("GP inputs and targets differ in length");
    Eigen::LLT<Eigen::MatrixXd> llt;
    factorize_with_jitter(kernel_matrix(x, hyper), llt);
    return lml_from_factor(llt, to_eigen(y));
}

double log_marginal_likelihood(const EnsembleDataset& data, const GpHyper& hyper) {
    const NormalizedData nd = normalized(data);
    return log_marginal_likelihood(nd.x, centered(nd.y, mean_of(nd.y)), hyper);
}

GpSurrogate GpSurrogate::fit(const EnsembleDataset& data, const GpFitOptions& options,
                             std::vector<GpRestart>* restarts) {
    const NormalizedData nd = normalized(data);
    if (nd.x.size() < 10) throw DomainError("GP fit needs at least 10 records");
    if (options.restarts < 1) throw ConfigError("GP fit needs at least one restart");
    const std::vector<double> yc = centered(nd.y, mean_of(nd.y));

    HyperCoords lo{};
    HyperCoords hi{};
    for (std::size_t d = 0; d < kNumParams; ++d) {
        lo[d] = std::log(options.length_scale_min);
        hi[d] = std::log(options.length_scale_max);
    }
    lo[kNumParams] = std::log(options.signal_variance_min);
    hi[kNumParams] = std::log(options.signal_variance_max);
    lo[kNumParams + 1] = std::log(std::max(options.noise_variance_min, GpHyper::noise_floor));
    hi[kNumParams + 1] = std::log(options.noise_variance_max);

    auto objective = [&](const HyperCoords& z) {
        try {
            return log_marginal_likelihood(nd.x, yc, from_coords(z));
        } catch (const IllConditionedError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    double best_value = -std::numeric_limits<double>::infinity();
    HyperCoords best_z{};
    bool have_best = false;
    for (std::size_t r = 0; r < options.restarts; ++r) {
        Rng rng(derive_seed(options.seed, 0x6770ULL + r));
        HyperCoords z{};
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
        const HyperCoords start = z;
        double value = objective(z);
        std::size_t evaluations = 1;
        double step = 1.0;
        while (step >= options.min_step && evaluations < options.max_evaluations) {
            bool improved = false;
            for (std::size_t k = 0; k < z.size() && evaluations < options.max_evaluations; ++k) {
                for (double dir : {1.0, -1.0}) {
                    HyperCoords trial = z;
                    trial[k] = std::clamp(z[k] + dir * step, lo[k], hi[k]);
                    if (trial[k] == z[k]) continue;
                    const double v = objective(trial);
                    ++evaluations;
                    if (v > value) {
                        value = v;
                        z = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (restarts) restarts->push_back({from_coords(start), from_coords(z), value, evaluations});
        if (!have_best || value > best_value) {
            best_value = value;
            best_z = z;
            have_best = true;
        }
    }
    if (!std::isfinite(best_value)) throw IllConditionedError("no restart produced a factorizable kernel matrix");
    return train(nd.x, nd.y, nd.rmse_min, nd.rmse_max, from_coords(best_z));
}

GpSurrogate GpSurrogate::train(const EnsembleDataset& data, const GpHyper& hyper) {
    NormalizedData nd = normalized(data);
    return train(std::move(nd.x), std::move(nd.y), nd.rmse_min, nd.rmse_max, hyper);
}

GpSurrogate GpSurrogate::train(std::vector<ParamVector> x, std::vector<double> y_norm, double rmse_min,
                               double rmse_max, const GpHyper& hyper) {
    hyper.validate();
    if (x.size() != y_norm.size() || x.empty()) throw AlignmentError("GP inputs and targets differ in length");
    if (!(rmse_max > rmse_min)) throw DomainError("rmse_max must exceed rmse_min");
    GpSurrogate m;
    m.x_ = std::move(x);
    m.y_ = std::move(y_norm);
    m.rmse_min_ = rmse_min;
    m.rmse_max_ = rmse_max;
    m.hyper_ = hyper;
    m.prior_mean_ = mean_of(m.y_);
    m.build_scaled_inputs();
    m.jitter_ = factorize_with_jitter(kernel_matrix(m.x_, m.hyper_), m.llt_);
    m.weights_ = m.llt_.solve(to_eigen(centered(m.y_, m.prior_mean_)));
    return m;
}

void GpSurrogate::build_scaled_inputs() { x_scaled_ = scale_inputs(x_, hyper_); }

void GpSurrogate::factorize() {
    Eigen::MatrixXd k = kernel_matrix(x_, hyper_);
    k.diagonal().array() += jitter_;
    llt_.compute(k);
    if (llt_.info() != Eigen::Success) throw IllConditionedError("stored GP model no longer factorizes");
}

Eigen::VectorXd GpSurrogate::cross_covariance(const ParamVector& theta) const {
    ParamVector t{};
    for (std::size_t d = 0; d < kNumParams; ++d) t[d] = theta[d] / hyper_.length_scales[d];
    Eigen::VectorXd k(static_cast<Eigen::Index>(x_scaled_.size()));
    for (std::size_t i = 0; i < x_scaled_.size(); ++i) {
        k[static_cast<Eigen::Index>(i)] = hyper_.signal_variance * matern52(scaled_distance(t, x_scaled_[i]));
    }
    return k;
}

double GpSurrogate::predict_norm_rmse(const ParamVector& theta) const {
    ParamVector t{};
    for (std::size_t d = 0; d < kNumParams; ++d) t[d] = theta[d] / hyper_.length_scales[d];
    double mean = 0.0;
    for (std::size_t i = 0; i < x_scaled_.size(); ++i) {
        mean += weights_[static_cast<Eigen::Index>(i)] * matern52(scaled_distance(t, x_scaled_[i]));
    }
    return prior_mean_ + hyper_.signal_variance * mean;
}

double GpSurrogate::predict_variance(const ParamVector& theta) const {
    const Eigen::VectorXd k = cross_covariance(theta);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    return std::max(0.0, hyper_.signal_variance - v.squaredNorm());
}

double GpSurrogate::predict_rmse(const ParamVector& theta) const {
    return predict_norm_rmse(theta) * (rmse_max_ - rmse_min_) + rmse_min_;
}

double GpSurrogate::predict_cost(const ParamVector& theta, const CostConfig& cfg) const {
    return cost_from_norm_rmse(predict_norm_rmse(theta), rmse_min_, rmse_max_, cfg);
}

void GpSurrogate::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << kModelMagic << '\n';
    out << "length_scales";
    for (double l : hyper_.length_scales) out << ' ' << l;
    out << '\n';
    out << "signal_variance " << hyper_.signal_variance << '\n';
    out << "noise_variance " << hyper_.noise_variance << '\n';
    out << "jitter " << jitter_ << '\n';
    out << "rmse_min " << rmse_min_ << '\n';
    out << "rmse_max " << rmse_max_ << '\n';
    out << "prior_mean " << prior_mean_ << '\n';
    out << "points " << x_.size() << '\n';
    out << "# theta1 theta2 theta3 theta4 norm_rmse weight\n";
    for (std::size_t i = 0; i < x_.size(); ++i) {
        for (double v : x_[i]) out << v << ' ';
        out << y_[i] << ' ' << weights_[static_cast<Eigen::Index>(i)] << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

GpSurrogate GpSurrogate::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    const std::string source = path.string();
    if (!in) throw ParseError(source, 0, "cannot open surrogate file");
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::istringstream {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line[0] != '#') return std::istringstream(line);
        }
        throw ParseError(source, line_no, "unexpected end of surrogate file");
    };
    auto expect = [&](std::istringstream& ls, const std::string& key) {
        std::string k;
        if (!(ls >> k) || k != key) throw ParseError(source, line_no, "expected '" + key + "'");
    };
    auto number = [&](std::istringstream& ls) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError(source, line_no, "missing value");
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ParseError(source, line_no, "cannot parse '" + tok + "'");
        }
    };

    if (!std::getline(in, line) || line != kModelMagic) throw ParseError(source, 1, "not a surrogate model file");
    ++line_no;
    GpSurrogate m;
    {
        auto ls = next_line();
        expect(ls, "length_scales");
        for (double& l : m.hyper_.length_scales) l = number(ls);
    }
    auto scalar = [&](const std::string& key) {
        auto ls = next_line();
        expect(ls, key);
        return number(ls);
    };
    m.hyper_.signal_variance = scalar("signal_variance");
    m.hyper_.noise_variance = scalar("noise_variance");
    m.jitter_ = scalar("jitter");
    m.rmse_min_ = scalar("rmse_min");
    m.rmse_max_ = scalar("rmse_max");
    m.prior_mean_ = scalar("prior_mean");
    const double points = scalar("points");
    if (!(points >= 1.0) || points != std::floor(points)) throw ParseError(source, line_no, "bad point count");
    try {
        m.hyper_.validate();
    } catch (const ConfigError& e) {
        throw ParseError(source, line_no, e.what());
    }
    const auto n = static_cast<std::size_t>(points);
    m.weights_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next_line();
        ParamVector x{};
        for (double& v : x) v = number(ls);
        m.x_.push_back(x);
        m.y_.push_back(number(ls));
        m.weights_[static_cast<Eigen::Index>(i)] = number(ls);
        std::string extra;
        if (ls >> extra) throw ParseError(source, line_no, "too many columns");
    }
    m.build_scaled_inputs();
    m.factorize();
    return m;
}

}  // namespace ecocal
