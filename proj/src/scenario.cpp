#include "ecocal/scenario.hpp"

#include "ecocal/error.hpp"
#include "ecocal/keyvalue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#ifndef ECOCAL_PRESET_DIR
#define ECOCAL_PRESET_DIR "presets"
#endif

namespace ecocal {

namespace {

constexpr double kSecondsPerDay = 86400.0;

void read(KeyValueFile& kv, const std::string& key, double& target) {
    if (const auto v = kv.get_double(key)) target = *v;
}

// Turnover times are written in days, stored as rates in 1/s.
void read_turnover(KeyValueFile& kv, const std::string& key, double& rate) {
    if (const auto v = kv.get_double(key)) {
        if (!(*v > 0.0)) throw ParseError(kv.source(), kv.line_of(key), "'" + key + "' must be positive");
        rate = 1.0 / (*v * kSecondsPerDay);
    }
}

// Signed distance between two days of year on the 365-day circle.
double circular_day_distance(double a, double b) {
    double d = std::fmod(a - b, 365.0);
    if (d > 182.5) d -= 365.0;
    if (d < -182.5) d += 365.0;
    return d;
}

}  // namespace

void ScenarioPreset::validate() const {
    ranges.validate();
    if (!(climate.annual_precip_mm > 0.0)) throw ConfigError("annual_precip_mm must be positive");
    if (!(climate.wet_halfwidth_days > 0.0)) throw ConfigError("wet_halfwidth_days must be positive");
    if (!(climate.storm_probability > 0.0 && climate.storm_probability <= 1.0) ||
        !(climate.dry_storm_probability >= 0.0 && climate.dry_storm_probability <= 1.0)) {
        throw ConfigError("storm probabilities must lie in [0,1]");
    }
    if (!(climate.interannual_sd >= 0.0 && climate.interannual_sd <= 0.2)) {
        throw ConfigError("interannual_sd must lie in [0, 0.2]");
    }
    const double t_min = climate.temp_mean - climate.temp_seasonal_amp - climate.temp_diurnal_amp;
    const double t_max = climate.temp_mean + climate.temp_seasonal_amp + climate.temp_diurnal_amp;
    if (t_min < 200.0 || t_max > 330.0) throw ConfigError("temperature cycle leaves [200, 330] K");
    if (!(climate.swrad_peak > 0.0) || !(climate.pet_mm_day >= 0.0)) throw ConfigError("radiation/PET must be positive");
    if (!(climate.cloud_dimming >= 0.0 && climate.cloud_dimming < 1.0)) throw ConfigError("cloud_dimming must lie in [0,1)");
    soil.validate();
    veg.validate(soil);
    for (const auto& ch : channels) ch.validate(soil.w_s);
}

ScenarioPreset parse_preset(std::string_view text, const std::string& source) {
    KeyValueFile kv = KeyValueFile::parse(text, source);
    ScenarioPreset p;
    if (auto name = kv.get_string("name")) p.name = *name;

    auto& c = p.climate;
    read(kv, "annual_precip_mm", c.annual_precip_mm);
    read(kv, "wet_center_day", c.wet_center_day);
    read(kv, "wet_halfwidth_days", c.wet_halfwidth_days);
    read(kv, "storm_probability", c.storm_probability);
    read(kv, "dry_storm_probability", c.dry_storm_probability);
    read(kv, "interannual_sd", c.interannual_sd);
    read(kv, "temp_mean_K", c.temp_mean);
    read(kv, "temp_seasonal_amp_K", c.temp_seasonal_amp);
    read(kv, "temp_diurnal_amp_K", c.temp_diurnal_amp);
    read(kv, "swrad_peak_Wm2", c.swrad_peak);
    read(kv, "cloud_dimming", c.cloud_dimming);
    read(kv, "pet_mm_day", c.pet_mm_day);
    if (auto seed = kv.get_integer("forcing_seed")) c.forcing_seed = static_cast<std::uint64_t>(*seed);

    auto& r = p.ranges;
    read(kv, "ks_def", r.ks_def);
    read(kv, "n_def", r.n_def);
    read(kv, "vmax0_def", r.vmax0_def);
    read(kv, "es_def", r.es_def);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const std::string base = "theta" + std::to_string(i + 1);
        read(kv, base + "_min", r.multipliers[i].lo);
        read(kv, base + "_max", r.multipliers[i].hi);
    }

    auto& s = p.soil;
    read(kv, "alpha", s.alpha);
    read(kv, "w_s", s.w_s);
    read(kv, "w_r", s.w_r);
    read(kv, "psi_dry_m", s.psi_dry);

    auto& v = p.veg;
    read(kv, "sl", v.sl);
    read(kv, "a_leaf", v.a_leaf);
    read(kv, "a_stem", v.a_stem);
    read(kv, "a_root", v.a_root);
    read_turnover(kv, "leaf_turnover_days", v.d_leaf);
    read_turnover(kv, "stem_turnover_days", v.d_stem);
    read_turnover(kv, "root_turnover_days", v.d_root);
    read(kv, "k_ext", v.k_ext);
    read(kv, "lai_seed", v.lai_seed);
    read(kv, "w_wilt", v.w_wilt);
    read(kv, "w_fc", v.w_fc);
    read(kv, "carbon_yield", v.carbon_yield);
    read(kv, "swrad_ref_Wm2", v.swrad_ref);

    for (auto& ch : p.channels) {
        const std::string base = "tb_" + ch.label + "_";
        read(kv, base + "omega", ch.omega);
        read(kv, base + "b_veg", ch.b_veg);
        read(kv, base + "e_dry", ch.e_dry);
        read(kv, base + "s_m", ch.s_m);
    }

    kv.reject_unknown();
    // Defaults double as the calibrated values until a parameter set is applied.
    p.soil.ks = r.ks_def;
    p.soil.n = r.n_def;
    p.veg.vmax0 = r.vmax0_def;
    p.veg.es = r.es_def;
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return p;
}

ScenarioPreset load_preset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open preset file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_preset(text, path.string());
}

std::filesystem::path default_preset_dir() {
    if (const char* env = std::getenv("ECOCAL_PRESET_DIR")) return env;
    return ECOCAL_PRESET_DIR;
}

ScenarioPreset load_named_preset(const std::string& name, const std::filesystem::path& dir) {
    return load_preset(dir / (name + ".preset"));
}

ForcingSeries generate_forcing(const ScenarioPreset& preset, std::size_t years, std::uint64_t seed) {
    if (years < 1) throw ConfigError("forcing needs at least one year");
    const ClimateParams& c = preset.climate;
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> storm_depth(1.0);
    std::uniform_int_distribution<int> storm_start(13, 20);
    std::uniform_int_distribution<int> storm_hours(1, 4);

    constexpr double two_pi = 2.0 * std::numbers::pi;
    // Mean of max(0, sin) over the hourly diurnal cycle, used to turn the daily
    // PET total into an hourly rate proportional to radiation.
    double diurnal_mean = 0.0;
    for (int h = 0; h < 24; ++h) diurnal_mean += std::max(0.0, std::sin(std::numbers::pi * (h + 0.5 - 6.0) / 12.0));
    diurnal_mean /= 24.0;

    ForcingSeries out;
    out.hours.resize(years * kHoursPerYear);
    for (std::size_t y = 0; y < years; ++y) {
        const double factor = std::clamp(1.0 + c.interannual_sd * normal(rng), 0.92, 1.08);
        std::array<bool, 365> rainy{};
        std::vector<double> raw(kHoursPerYear, 0.0);
        double raw_total = 0.0;
        for (int day = 0; day < 365; ++day) {
            const double dist = circular_day_distance(day, c.wet_center_day) / c.wet_halfwidth_days;
            const double p = c.dry_storm_probability + (c.storm_probability - c.dry_storm_probability) * std::exp(-0.5 * dist * dist);
            const double draw = unif(rng);
            const double depth = storm_depth(rng);
            const int start = storm_start(rng);
            const int len = storm_hours(rng);
            if (draw >= p) continue;
            rainy[static_cast<std::size_t>(day)] = true;
            for (int h = start; h < start + len; ++h) {
                raw[static_cast<std::size_t>(day * 24 + h)] += depth / len;
            }
            raw_total += depth;
        }
        if (raw_total <= 0.0) {  // guarantee at least one storm per year
            const int day = static_cast<int>(std::lround(c.wet_center_day)) % 365;
            rainy[static_cast<std::size_t>(day)] = true;
            raw[static_cast<std::size_t>(day * 24 + 16)] = 1.0;
            raw_total = 1.0;
        }
        const double target_m = c.annual_precip_mm / 1000.0 * factor;
        const double scale = target_m / raw_total / kStepSeconds;  // depth per hour -> m/s

        const double hot_day = c.wet_center_day - 100.0;
        for (std::size_t hy = 0; hy < kHoursPerYear; ++hy) {
            const int day = static_cast<int>(hy / 24);
            const double hour = static_cast<double>(hy % 24) + 0.5;
            ForcingRecord& r = out.hours[y * kHoursPerYear + hy];
            r.precip = raw[hy] * scale;
            r.temp = c.temp_mean + c.temp_seasonal_amp * std::cos(two_pi * circular_day_distance(day, hot_day) / 365.0) +
                     c.temp_diurnal_amp * std::sin(two_pi * (hour - 9.0) / 24.0);
            const double sun = std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 12.0));
            const double dimming = rainy[static_cast<std::size_t>(day)] ? 1.0 - c.cloud_dimming : 1.0;
            r.swrad = c.swrad_peak * sun * dimming;
            r.pet = c.pet_mm_day / 1000.0 / 86400.0 * (sun * dimming / diurnal_mean);
        }
    }
    out.validate();
    return out;
}

void save_forcing_csv(const ForcingSeries& forcing, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "hour,precip_m_s,temp_K,swrad_Wm2,pet_m_s\n";
    for (std::size_t h = 0; h < forcing.hours.size(); ++h) {
        const auto& r = forcing.hours[h];
        out << h << ',' << r.precip << ',' << r.temp << ',' << r.swrad << ',' << r.pet << '\n';
    }
}

}  // namespace ecocal
