#pragma once

#include "ecocal/ecohydro.hpp"
#include "ecocal/param_space.hpp"
#include "ecocal/rtm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace ecocal {

/// Synthetic climate description used to generate hourly forcing.
struct ClimateParams {
    double annual_precip_mm = 1190.0;
    double wet_center_day = 215.0;   // day of year of the rainfall peak
    double wet_halfwidth_days = 60.0;
    double storm_probability = 0.5;       // daily storm probability at the wet-season peak
    double dry_storm_probability = 0.01;  // daily storm probability outside the wet season
    double interannual_sd = 0.05;    // relative sd of yearly totals
    double temp_mean = 300.0;        // K
    double temp_seasonal_amp = 3.0;  // K
    double temp_diurnal_amp = 6.0;   // K
    double swrad_peak = 900.0;       // W/m2, clear-sky noon
    double cloud_dimming = 0.3;      // fractional radiation loss on rainy days
    double pet_mm_day = 5.0;         // mean daily potential evaporation, clear sky
    std::uint64_t forcing_seed = 1;
};

/// Everything that defines one synthetic site: climate, fixed soil and
/// vegetation constants, default calibrated values and radiometer channels.
struct ScenarioPreset {
    std::string name = "site1";
    ClimateParams climate;
    ParamRanges ranges;
    SoilParams soil;  // ks and n are overwritten from the calibrated parameters
    VegParams veg;    // vmax0 and es are overwritten from the calibrated parameters
    ChannelSet channels = default_channels();

    void validate() const;
};

[[nodiscard]] ScenarioPreset parse_preset(std::string_view text, const std::string& source = "<preset>");
[[nodiscard]] ScenarioPreset load_preset(const std::filesystem::path& path);

/// Directory holding the committed site presets.
[[nodiscard]] std::filesystem::path default_preset_dir();
/// Loads `<dir>/<name>.preset`.
[[nodiscard]] ScenarioPreset load_named_preset(const std::string& name,
                                               const std::filesystem::path& dir = default_preset_dir());

/// Seasonal synthetic forcing. Yearly precipitation totals are rescaled to
/// the preset target times a seeded interannual factor.
[[nodiscard]] ForcingSeries generate_forcing(const ScenarioPreset& preset, std::size_t years, std::uint64_t seed);

void save_forcing_csv(const ForcingSeries& forcing, const std::filesystem::path& path);

}  // namespace ecocal
