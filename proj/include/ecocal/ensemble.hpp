#pragma once

#include "ecocal/ecohydro.hpp"
#include "ecocal/param_space.hpp"
#include "ecocal/rtm.hpp"
#include "ecocal/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ecocal {

struct CostConfig {
    double sigma_o = 1.0;  // observation error, K

    void validate() const;
};

/// Stratified design on [0,1]^n_dims: every dimension has exactly one sample
/// in each of the n_members bins [k/n, (k+1)/n).
[[nodiscard]] std::vector<ParamVector> lhs_design(std::size_t n_members, std::size_t n_dims, std::uint64_t seed);
[[nodiscard]] std::vector<ScaledParams> lhs_sample(std::size_t n_members, std::size_t n_dims, std::uint64_t seed);

/// Root-mean-square difference pooled over all (time, channel) pairs.
[[nodiscard]] double rmse(const ObservationSeries& sim, const ObservationSeries& obs);

/// C = exp(-rmse / sigma_o).
[[nodiscard]] double cost(double rmse_value, const CostConfig& cfg);

/// Scenario, forcing and observation schedule: everything that maps a
/// parameter vector to simulated observations.
struct ForwardModel {
    ScenarioPreset preset;
    ForcingSeries forcing;
    std::size_t spinup_cycles = 4;
    std::vector<double> times;  // observation hours compared against data
};

/// Model output sampled at observation hours.
struct MemberOutput {
    std::vector<TbVector> tb;
    std::vector<double> lai;
    std::vector<double> sm_surface;
    std::vector<double> sm_root;
};

/// Runs the full model and samples it at `times` (sorted, within the forcing).
[[nodiscard]] MemberOutput run_member(const ForwardModel& model, const ScaledParams& theta,
                                      const std::vector<double>& times);

/// Noiseless (noise_sd = 0) or noisy simulated observations at model.times.
[[nodiscard]] ObservationSeries simulate_observations(const ForwardModel& model, const ScaledParams& theta,
                                                      double noise_sd, Rng& rng);

struct EnsembleRecord {
    std::size_t member = 0;
    ScaledParams theta;
    double rmse = 0.0;  // K
};

struct MemberFailure {
    std::size_t member = 0;
    std::string reason;
};

struct EnsembleDataset {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<EnsembleRecord> records;  // ordered by member index
    std::vector<MemberFailure> failures;

    [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
    [[nodiscard]] bool partial() const noexcept { return !failures.empty(); }
    [[nodiscard]] double rmse_min() const;
    [[nodiscard]] double rmse_max() const;

    void validate() const;
};

/// denormalize -> simulate -> observe (noiseless) -> rmse for every theta.
/// Member i draws from a private stream seeded by master_seed ^ i, so the
/// result is identical for any worker count. Failed members are listed in
/// `failures` and leave the dataset partial.
[[nodiscard]] EnsembleDataset run_ensemble(const std::vector<ScaledParams>& thetas, const ForwardModel& model,
                                           const ObservationSeries& obs, std::size_t workers,
                                           std::uint64_t master_seed);

void save_dataset(const EnsembleDataset& data, const std::filesystem::path& path);
[[nodiscard]] EnsembleDataset load_dataset(const std::filesystem::path& path);

}  // namespace ecocal
