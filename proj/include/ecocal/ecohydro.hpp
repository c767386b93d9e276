#pragma once

#include "ecocal/param_space.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace ecocal {

inline constexpr std::size_t kNumLayers = 3;
inline constexpr double kStepSeconds = 3600.0;
inline constexpr std::size_t kHoursPerYear = 8760;

/// Soil column constants. `ks` and `n` come from the calibrated parameters,
/// the rest from the scenario preset.
struct SoilParams {
    double ks = 5.0e-6;   // m/s
    double n = 1.5;       // -
    double alpha = 2.0;   // 1/m
    double w_s = 0.42;    // m3/m3
    double w_r = 0.03;    // m3/m3
    std::array<double, kNumLayers> depths{0.05, 0.10, 0.10};  // m
    // Suction of the surface layer at which bare-soil evaporation stops, m.
    double psi_dry = 100.0;

    void validate() const;
};

struct VegParams {
    double vmax0 = 6.0e-5;        // mol m-2 s-1
    double es = 5.0;              // -
    double sl = 20.0;             // m2 leaf per kg C
    double a_leaf = 0.5;
    double a_stem = 0.2;
    double a_root = 0.3;
    double d_leaf = 1.0 / (90.0 * 86400.0);   // 1/s
    double d_stem = 1.0 / (730.0 * 86400.0);  // 1/s
    double d_root = 1.0 / (365.0 * 86400.0);  // 1/s
    double k_ext = 0.5;
    // Added to LAI in the light-interception term so a sparse canopy can
    // regrow instead of collapsing to zero.
    double lai_seed = 0.5;
    double w_wilt = 0.08;  // m3/m3
    double w_fc = 0.25;    // m3/m3
    double carbon_yield = 0.008;  // kg C per mol of NPP
    double swrad_ref = 1000.0;    // W/m2, normalizes the light factor
    std::array<double, kNumLayers> root_fraction{0.3, 0.4, 0.3};

    void validate(const SoilParams& soil) const;
};

struct ModelState {
    std::array<double, kNumLayers> w{};  // volumetric soil moisture, m3/m3
    double c_leaf = 0.0;                 // kg/m2
    double c_stem = 0.0;                 // kg/m2
    double c_root = 0.0;                 // kg/m2
    double lai = 0.0;                    // m2/m2, always sl * c_leaf
    double t_surf = 300.0;               // K, taken from forcing air temperature

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct ForcingRecord {
    double precip = 0.0;  // m/s
    double temp = 300.0;  // K
    double swrad = 0.0;   // W/m2
    double pet = 0.0;     // m/s
};

/// Hourly forcing covering a whole number of 365-day years.
struct ForcingSeries {
    std::vector<ForcingRecord> hours;

    [[nodiscard]] std::size_t size() const noexcept { return hours.size(); }
    [[nodiscard]] std::size_t years() const noexcept { return hours.size() / kHoursPerYear; }
    [[nodiscard]] double annual_precip_mm(std::size_t year) const;

    void validate() const;
};

/// Water moved during one step, all as depths in metres (positive).
struct WaterFluxes {
    double precip = 0.0;
    double infiltration = 0.0;
    double runoff = 0.0;
    double soil_evaporation = 0.0;
    double transpiration = 0.0;
    double drainage = 0.0;

    [[nodiscard]] double evapotranspiration() const noexcept { return soil_evaporation + transpiration; }
    WaterFluxes& operator+=(const WaterFluxes& o) noexcept;
};

struct SoilStep {
    ModelState state;
    WaterFluxes fluxes;
};

// van Genuchten hydraulics (shared by all layers).
[[nodiscard]] double effective_saturation(double w, const SoilParams& soil);
[[nodiscard]] double vg_suction(double w, const SoilParams& soil);
[[nodiscard]] double vg_conductivity(double w, const SoilParams& soil);
/// Moisture at which the van Genuchten suction equals `psi` (inverse of vg_suction).
[[nodiscard]] double vg_moisture_at_suction(double psi, const SoilParams& soil);

/// Soil evaporation efficiency 1 - psi / psi_dry, floored at 0.
[[nodiscard]] double evaporation_efficiency(double psi, const SoilParams& soil);

/// Column water storage in metres.
[[nodiscard]] double column_storage(const ModelState& state, const SoilParams& soil);

/// Root-fraction weighted soil moisture.
[[nodiscard]] double root_zone_moisture(const ModelState& state, const VegParams& veg);

/// One explicit hourly soil-water update, in order: free bottom drainage,
/// Darcy interlayer exchange, infiltration (limited by ks and free pore
/// space), soil evaporation and transpiration. Every flux is limited so no
/// layer leaves [w_r, w_s].
[[nodiscard]] SoilStep step_soil(const ModelState& state, const ForcingRecord& forcing, const SoilParams& soil,
                                 const VegParams& veg, double dt = kStepSeconds);

/// One explicit hourly carbon-pool update with the stem+root support constraint.
[[nodiscard]] ModelState step_vegetation(const ModelState& state, const ForcingRecord& forcing, const VegParams& veg,
                                         const SoilParams& soil, double dt = kStepSeconds);

struct ScenarioPreset;

/// Soil and vegetation constants of a preset combined with calibrated values.
[[nodiscard]] SoilParams soil_params(const ScenarioPreset& preset, const PhysicalParams& params);
[[nodiscard]] VegParams veg_params(const ScenarioPreset& preset, const PhysicalParams& params);

[[nodiscard]] ModelState initial_state(const SoilParams& soil, const VegParams& veg);

/// Called for each post-spin-up hour with the state at the end of that hour.
using StateVisitor = std::function<void(std::size_t hour, const ModelState& state, const WaterFluxes& fluxes)>;

/// Runs `spinup_cycles` passes over the forcing, then one recorded pass. The
/// visitor sees every hour of the recorded pass.
void integrate(const PhysicalParams& params, const ScenarioPreset& preset, const ForcingSeries& forcing,
               std::size_t spinup_cycles, const StateVisitor& visit);

/// Post-spin-up hourly trajectory (one state per forcing hour).
[[nodiscard]] std::vector<ModelState> simulate(const PhysicalParams& params, const ScenarioPreset& preset,
                                               const ForcingSeries& forcing, std::size_t spinup_cycles = 4);

}  // namespace ecocal
