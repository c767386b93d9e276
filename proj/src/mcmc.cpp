#include "ecocal/mcmc.hpp"

#include "ecocal/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ecocal {

void McmcConfig::validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!(proposal_sd > 0.0) || !std::isfinite(proposal_sd)) throw ConfigError("proposal_sd must be > 0");
    if (burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
}

std::vector<double> Chain::column(std::size_t param) const {
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i][param];
    return out;
}

ParamVector propose(const ParamVector& current, double sd, Rng& rng) {
    std::normal_distribution<double> step(0.0, 1.0);
    ParamVector out = current;
    for (double& x : out) x += sd * step(rng);
    return out;
}

Chain metropolis_hastings(const CostFunction& costfn, const McmcConfig& cfg, std::string cost_id) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Chain chain;
    chain.seed = cfg.seed;
    chain.cost_id = std::move(cost_id);
    chain.iterations = cfg.iterations;
    chain.samples.reserve(cfg.iterations - cfg.burn_in);
    chain.accepted.reserve(cfg.iterations - cfg.burn_in);

    ParamVector current = cfg.initial_theta.values();
    double c_current = costfn(current);
    if (!std::isfinite(c_current) || !(c_current > 0.0)) {
        throw NumericalError("cost at the initial state is not finite and positive");
    }
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const ParamVector candidate = propose(current, cfg.proposal_sd, rng);
        bool accept = false;
        if (!ScaledParams::in_bounds(candidate)) {
            ++chain.out_of_bounds;
        } else {
            const double c_candidate = costfn(candidate);
            if (!std::isfinite(c_candidate) || c_candidate < 0.0) {
                throw NumericalError("non-finite cost at iteration " + std::to_string(it));
            }
            const double a = c_candidate / c_current;
            // A zero cost (underflow) is never accepted.
            accept = unif(rng) <= a && c_candidate > 0.0;
            if (accept) {
                current = candidate;
                c_current = c_candidate;
            }
        }
        if (accept) ++chain.acceptance_count;
        if (it >= cfg.burn_in) {
            chain.samples.push_back(current);
            chain.accepted.push_back(accept ? 1 : 0);
        }
    }
    return chain;
}

std::vector<double> histogram_masses(const std::vector<double>& values, std::size_t bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) throw DomainError("histogram of an empty sample");
    std::vector<double> counts(bins, 0.0);
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("histogram value outside [0,1]");
        const auto k = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
        counts[k] += 1.0;
    }
    const double n = static_cast<double>(values.size());
    for (double& c : counts) c /= n;
    return counts;
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw DomainError("median of an empty sample");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<ParamStats> chain_stats(const Chain& chain, std::size_t bins) {
    if (chain.samples.empty()) throw DomainError("chain is empty");
    if (bins < 2) throw ConfigError("chain_stats needs at least 2 bins");
    std::vector<ParamStats> out(kNumParams);
    for (std::size_t p = 0; p < kNumParams; ++p) {
        const std::vector<double> col = chain.column(p);
        out[p].histogram = histogram_masses(col, bins);
        out[p].median = median_of(col);
        const auto top = std::max_element(out[p].histogram.begin(), out[p].histogram.end());
        const auto k = static_cast<double>(top - out[p].histogram.begin());
        out[p].mode = (k + 0.5) / static_cast<double>(bins);
    }
    return out;
}

namespace {
constexpr const char* kChainHeader = "iter,theta1,theta2,theta3,theta4,accepted";
}

void save_chain(const Chain& chain, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "# seed=" << chain.seed << '\n';
    out << "# cost_id=" << chain.cost_id << '\n';
    out << "# iterations=" << chain.iterations << '\n';
    out << "# acceptance_count=" << chain.acceptance_count << '\n';
    out << "# out_of_bounds=" << chain.out_of_bounds << '\n';
    out << kChainHeader << '\n';
    const std::size_t first = chain.iterations - chain.samples.size();
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        out << first + i;
        for (double v : chain.samples[i]) out << ',' << v;
        out << ',' << static_cast<int>(chain.accepted[i]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Chain load_chain(const std::filesystem::path& path) {
    std::ifstream in(path);
    const std::string source = path.string();
    if (!in) throw ParseError(source, 0, "cannot open chain file");
    Chain chain;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    auto to_count = [&](const std::string& v) {
        try {
            std::size_t used = 0;
            const unsigned long long x = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return static_cast<std::uint64_t>(x);
        } catch (const std::exception&) {
            throw ParseError(source, line_no, "cannot parse '" + v + "'");
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos || line.size() < 2) continue;
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "seed") chain.seed = to_count(value);
            else if (key == "cost_id") chain.cost_id = value;
            else if (key == "iterations") chain.iterations = to_count(value);
            else if (key == "acceptance_count") chain.acceptance_count = to_count(value);
            else if (key == "out_of_bounds") chain.out_of_bounds = to_count(value);
            continue;
        }
        if (!header_seen) {
            if (line != kChainHeader) throw ParseError(source, line_no, "unexpected header");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != kNumParams + 2) throw ParseError(source, line_no, "expected 6 columns");
        ParamVector theta{};
        for (std::size_t p = 0; p < kNumParams; ++p) {
            try {
                std::size_t used = 0;
                theta[p] = std::stod(cells[p + 1], &used);
                if (used != cells[p + 1].size()) throw std::invalid_argument(cells[p + 1]);
            } catch (const std::exception&) {
                throw ParseError(source, line_no, "cannot parse '" + cells[p + 1] + "'");
            }
        }
        if (!ScaledParams::in_bounds(theta)) throw ParseError(source, line_no, "sample outside [0,1]^4");
        const auto acc = to_count(cells.back());
        if (acc > 1) throw ParseError(source, line_no, "accepted flag must be 0 or 1");
        chain.samples.push_back(theta);
        chain.accepted.push_back(static_cast<std::uint8_t>(acc));
    }
    if (!header_seen || chain.samples.empty()) throw ParseError(source, 0, "chain file has no samples");
    if (chain.iterations < chain.samples.size()) chain.iterations = chain.samples.size();
    return chain;
}

}  // namespace ecocal
