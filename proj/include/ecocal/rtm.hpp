#pragma once

#include "ecocal/ecohydro.hpp"
#include "ecocal/rng.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace ecocal {

inline constexpr std::size_t kNumChannels = 4;

enum class Polarization { horizontal, vertical };

/// Zeroth-order tau-omega constants for one radiometer channel.
struct ChannelParams {
    std::string label;  // e.g. "069H"
    Polarization polarization = Polarization::horizontal;
    double omega = 0.05;      // single-scattering albedo
    double b_veg = 0.37;      // optical depth per unit LAI
    double e_dry = 0.93;      // dry-soil emissivity
    double s_m = 0.9;         // emissivity loss per unit surface soil moisture
    double inc_angle = 0.9599310885968813;  // 55 degrees, radians

    void validate(double w_s) const;
};

using ChannelSet = std::array<ChannelParams, kNumChannels>;

/// Channel constants used by all presets unless overridden (6.9/10.65 GHz, H/V).
[[nodiscard]] ChannelSet default_channels();

using TbVector = std::array<double, kNumChannels>;

/// Timestamped brightness temperatures, channel order 069H, 069V, 107H, 107V.
struct ObservationSeries {
    std::vector<double> hours;
    std::vector<TbVector> tb;
    double noise_sd = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return hours.size(); }
    void validate() const;
};

/// Vegetation transmissivity Gamma = exp(-tau / cos(theta)).
[[nodiscard]] double canopy_transmissivity(double lai, const ChannelParams& channel);

[[nodiscard]] double brightness_temperature(const ModelState& state, const ChannelParams& channel);

[[nodiscard]] TbVector brightness_temperatures(const ModelState& state, const ChannelSet& channels);

/// Observation hours every `spacing_hours` starting at `first_hour`, all strictly
/// inside [0, total_hours).
[[nodiscard]] std::vector<double> observation_times(std::size_t total_hours, std::size_t first_hour = 1,
                                                    std::size_t spacing_hours = 48);

/// Samples the trajectory at the given hours and adds i.i.d. Gaussian noise
/// of standard deviation noise_sd (no draws are made when noise_sd == 0).
[[nodiscard]] ObservationSeries observe(const std::vector<ModelState>& trajectory, const std::vector<double>& times,
                                        const ChannelSet& channels, double noise_sd, Rng& rng);

void save_observations(const ObservationSeries& obs, const std::filesystem::path& path);
[[nodiscard]] ObservationSeries load_observations(const std::filesystem::path& path);

}  // namespace ecocal
