#pragma once

#include "ecocal/param_space.hpp"
#include "ecocal/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ecocal {

struct McmcConfig {
    std::size_t iterations = 100000;
    double proposal_sd = 0.1;
    ScaledParams initial_theta;  // centre of the prior by default
    std::uint64_t seed = 0;
    std::size_t burn_in = 0;

    void validate() const;
};

struct Chain {
    std::vector<ParamVector> samples;  // retained state of each kept iteration
    std::vector<std::uint8_t> accepted;
    std::size_t acceptance_count = 0;  // over all iterations, burn-in included
    std::size_t iterations = 0;
    std::size_t out_of_bounds = 0;  // candidates rejected by the prior support
    std::uint64_t seed = 0;
    std::string cost_id;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] double acceptance_rate() const noexcept {
        return iterations ? static_cast<double>(acceptance_count) / static_cast<double>(iterations) : 0.0;
    }
    /// Values of one parameter across the chain.
    [[nodiscard]] std::vector<double> column(std::size_t param) const;
};

using CostFunction = std::function<double(const ParamVector&)>;

/// Random-walk candidate current + N(0, sd^2 I). May leave [0,1]^4.
[[nodiscard]] ParamVector propose(const ParamVector& current, double sd, Rng& rng);

/// Metropolis-Hastings targeting p(theta) proportional to costfn(theta) on
/// [0,1]^4. Out-of-bounds candidates are rejected without evaluating the cost;
/// otherwise a = C(candidate) / C(current) and the candidate is accepted iff
/// b <= a for b uniform on [0,1].
[[nodiscard]] Chain metropolis_hastings(const CostFunction& costfn, const McmcConfig& cfg,
                                        std::string cost_id = {});

struct ParamStats {
    std::vector<double> histogram;  // masses of `bins` uniform bins on [0,1]
    double median = 0.0;
    double mode = 0.0;  // centre of the heaviest bin, ties to the lowest bin
};

[[nodiscard]] std::vector<ParamStats> chain_stats(const Chain& chain, std::size_t bins);

/// Masses of `bins` uniform bins on [0,1]; a value of exactly 1 falls in the
/// last bin.
[[nodiscard]] std::vector<double> histogram_masses(const std::vector<double>& values, std::size_t bins);

/// Median of a sample (mean of the two middle values for even sizes).
[[nodiscard]] double median_of(std::vector<double> values);

void save_chain(const Chain& chain, const std::filesystem::path& path);
[[nodiscard]] Chain load_chain(const std::filesystem::path& path);

}  // namespace ecocal
