#include "ecocal/diagnostics.hpp"

#include "ecocal/error.hpp"
#include "ecocal/log.hpp"
#include "ecocal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ecocal {

void Histogram::validate() const {
    if (masses.empty() || edges.size() != masses.size() + 1) throw DomainError("histogram edges do not match bins");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw DomainError("histogram edges must be strictly increasing");
    }
    double sum = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw DomainError("histogram masses must be >= 0");
        sum += m;
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw DomainError("histogram masses must sum to 1");
}

Histogram Histogram::from_masses(std::vector<double> masses) {
    Histogram h;
    const std::size_t bins = masses.size();
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = static_cast<double>(k) / static_cast<double>(bins);
    h.masses = std::move(masses);
    h.validate();
    return h;
}

Histogram Histogram::uniform(std::size_t bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    return from_masses(std::vector<double>(bins, 1.0 / static_cast<double>(bins)));
}

Histogram Histogram::from_samples(const std::vector<double>& values, std::size_t bins) {
    return from_masses(histogram_masses(values, bins));
}

double kld(const Histogram& p, const Histogram& q) {
    if (p.edges != q.edges) throw AlignmentError("kld needs identical binning");
    // The floor only matters where p has mass and q (nearly) none; in every
    // other case q is used as is, which keeps kld(p, p) exactly 0.
    bool needs_floor = false;
    for (std::size_t i = 0; i < q.masses.size(); ++i) {
        if (p.masses[i] > 0.0 && q.masses[i] < kKldFloor) needs_floor = true;
    }
    std::vector<double> qf = q.masses;
    if (needs_floor) {
        double total = 0.0;
        for (double& m : qf) {
            m = std::max(m, kKldFloor);
            total += m;
        }
        for (double& m : qf) m /= total;
    }
    double d = 0.0;
    for (std::size_t i = 0; i < qf.size(); ++i) {
        if (p.masses[i] > 0.0) d += p.masses[i] * (std::log(p.masses[i]) - std::log(qf[i]));
    }
    return std::max(d, 0.0);
}

double sensitivity_index(const Chain& chain, std::size_t param, std::size_t bins) {
    if (param >= kNumParams) throw std::out_of_range("parameter index out of range");
    if (chain.samples.empty()) throw DomainError("chain is empty");
    return kld(Histogram::from_samples(chain.column(param), bins), Histogram::uniform(bins));
}

namespace {

struct Moments {
    std::array<double, kNumParams> mean{};
    std::array<std::array<double, kNumParams>, kNumParams> cov{};
};

Moments moments(const Chain& chain) {
    if (chain.samples.size() < 2) throw DomainError("correlation needs at least 2 samples");
    Moments m;
    const double n = static_cast<double>(chain.samples.size());
    for (const auto& s : chain.samples) {
        for (std::size_t i = 0; i < kNumParams; ++i) m.mean[i] += s[i];
    }
    for (double& v : m.mean) v /= n;
    for (const auto& s : chain.samples) {
        for (std::size_t i = 0; i < kNumParams; ++i) {
            for (std::size_t j = 0; j <= i; ++j) m.cov[i][j] += (s[i] - m.mean[i]) * (s[j] - m.mean[j]);
        }
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            m.cov[i][j] /= n - 1.0;
            m.cov[j][i] = m.cov[i][j];
        }
    }
    return m;
}

}  // namespace

CorrelationMatrix pairwise_correlation(const Chain& chain) {
    const Moments m = moments(chain);
    CorrelationMatrix out;
    for (std::size_t i = 0; i < kNumParams; ++i) out.zero_variance[i] = !(m.cov[i][i] > 0.0);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        for (std::size_t j = 0; j < kNumParams; ++j) {
            if (i == j) {
                out.r[i][j] = 1.0;
            } else if (out.zero_variance[i] || out.zero_variance[j]) {
                out.r[i][j] = 0.0;
            } else {
                out.r[i][j] = std::clamp(m.cov[i][j] / std::sqrt(m.cov[i][i] * m.cov[j][j]), -1.0, 1.0);
            }
        }
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (out.zero_variance[i]) log::warn("parameter " + std::to_string(i + 1) + " has zero variance in the chain");
    }
    return out;
}

double regression_slope(const Chain& chain, std::size_t a, std::size_t b) {
    if (a >= kNumParams || b >= kNumParams) throw std::out_of_range("parameter index out of range");
    const Moments m = moments(chain);
    if (!(m.cov[a][a] > 0.0)) return 0.0;
    return m.cov[a][b] / m.cov[a][a];
}

namespace {

void check_ensemble(const std::vector<Series>& sims, const Series& obs) {
    if (sims.empty()) throw AlignmentError("ensemble is empty");
    if (obs.empty()) throw AlignmentError("observation series is empty");
    for (const auto& s : sims) {
        if (s.size() != obs.size()) throw AlignmentError("ensemble member and observations differ in length");
    }
}

double time_mean(const Series& s) {
    double sum = 0.0;
    for (double v : s) sum += v;
    return sum / static_cast<double>(s.size());
}

}  // namespace

double bias_ens(const std::vector<Series>& sims, const Series& obs) {
    check_ensemble(sims, obs);
    const double obs_mean = time_mean(obs);
    double sum = 0.0;
    for (const auto& s : sims) {
        const double b = time_mean(s) - obs_mean;
        sum += b * b;
    }
    return std::sqrt(sum / static_cast<double>(sims.size()));
}

double ubrmse_ens(const std::vector<Series>& sims, const Series& obs) {
    check_ensemble(sims, obs);
    const double obs_mean = time_mean(obs);
    double ens_mean = 0.0;
    for (const auto& s : sims) ens_mean += time_mean(s);
    ens_mean /= static_cast<double>(sims.size());
    double total = 0.0;
    for (const auto& s : sims) {
        double sq = 0.0;
        for (std::size_t t = 0; t < obs.size(); ++t) {
            const double d = (s[t] - ens_mean) - (obs[t] - obs_mean);
            sq += d * d;
        }
        total += std::sqrt(sq / static_cast<double>(obs.size()));
    }
    return total / static_cast<double>(sims.size());
}

double improvement_rate(double s_mcmc, double s_unif) {
    if (!(s_unif > 0.0)) throw DomainError("improvement rate undefined for a zero reference score");
    return (s_mcmc - s_unif) / s_unif;
}

namespace {

Chain posterior_for_size(const ForwardModel& model, const ObservationSeries& obs, const SizeStudyConfig& cfg,
                         std::size_t size) {
    const std::uint64_t tag = derive_seed(cfg.seed, 0x5153ULL + size);
    const auto thetas = lhs_sample(size, kNumParams, derive_seed(tag, 1));
    EnsembleDataset data = run_ensemble(thetas, model, obs, cfg.workers, derive_seed(tag, 2));
    if (data.partial()) {
        log::warn("size study: " + std::to_string(data.failures.size()) + " members failed at size " +
                  std::to_string(size));
    }
    GpFitOptions fit = cfg.fit;
    fit.seed = derive_seed(tag, 3);
    const GpSurrogate gp = GpSurrogate::fit(data, fit);
    const CostConfig cost_cfg = cfg.cost;
    return metropolis_hastings([&](const ParamVector& t) { return gp.predict_cost(t, cost_cfg); }, cfg.mcmc,
                               "gp-size-" + std::to_string(size));
}

}  // namespace

std::vector<SizeStudyRow> ensemble_size_study(const ForwardModel& model, const ObservationSeries& obs,
                                              const SizeStudyConfig& cfg, const Chain* reference) {
    Chain ref_chain = reference ? *reference : posterior_for_size(model, obs, cfg, cfg.reference_size);
    std::array<Histogram, kNumParams> ref_hist;
    for (std::size_t p = 0; p < kNumParams; ++p) ref_hist[p] = Histogram::from_samples(ref_chain.column(p), cfg.bins);

    std::vector<SizeStudyRow> rows;
    for (std::size_t size : cfg.sizes) {
        log::info("size study: " + std::to_string(size) + " members");
        SizeStudyRow row;
        row.size = size;
        const Chain chain = size == cfg.reference_size ? ref_chain : posterior_for_size(model, obs, cfg, size);
        for (std::size_t p = 0; p < kNumParams; ++p) {
            row.kld[p] = kld(Histogram::from_samples(chain.column(p), cfg.bins), ref_hist[p]);
        }
        rows.push_back(row);
    }
    return rows;
}

void save_size_study(const std::vector<SizeStudyRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "size,kld_theta1,kld_theta2,kld_theta3,kld_theta4\n";
    for (const auto& r : rows) {
        out << r.size;
        for (double v : r.kld) out << ',' << v;
        out << '\n';
    }
}

}  // namespace ecocal
