#include "ecocal/ecohydro.hpp"

#include "ecocal/error.hpp"
#include "ecocal/log.hpp"
#include "ecocal/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace ecocal {

namespace {

constexpr double kDriftTolerance = 1e-9;
// Extraction fluxes never push a layer below this saturation, which keeps
// the suction finite.
constexpr double kSaturationFloor = 1e-6;

struct VgShape {
    double n;
    double m;      // 1 - 1/n
    double inv_m;  // n / (n - 1)
    double inv_n;
};

VgShape shape_of(const SoilParams& soil) {
    const double m = 1.0 - 1.0 / soil.n;
    return {soil.n, m, 1.0 / m, 1.0 / soil.n};
}

// Suction from saturation, S in (0, 1].
double suction_from_saturation(double s, double alpha, const VgShape& vg) {
    if (s >= 1.0) return 0.0;
    const double l = -std::log(s) * vg.inv_m;  // ln(S^{-1/m})
    // ln(S^{-1/m} - 1), evaluated without overflow for very dry soil.
    const double log_x = l > 36.0 ? l + std::log1p(-std::exp(-l)) : std::log(std::expm1(l));
    return std::exp(log_x * vg.inv_n) / alpha;
}

double conductivity_ratio(double s, const VgShape& vg) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double y = std::exp(std::log(s) * vg.inv_m);  // S^{1/m}
    const double bracket = 1.0 - std::exp(vg.m * std::log1p(-y));
    return std::sqrt(s) * bracket * bracket;
}

struct Hydraulics {
    double psi;  // m
    double k;    // m/s
};

// Suction and conductivity sharing one evaluation of S^{1/m}; S in (0, 1].
Hydraulics hydraulics(double s, const SoilParams& soil, const VgShape& vg) {
    if (s >= 1.0) return {0.0, soil.ks};
    const double log_y = std::log(s) * vg.inv_m;  // ln S^{1/m}
    const double log_1my = std::log1p(-std::exp(log_y));
    const double bracket = 1.0 - std::exp(vg.m * log_1my);
    // psi = ((1 - y) / y)^{1/n} / alpha
    return {std::exp((log_1my - log_y) * vg.inv_n) / soil.alpha, soil.ks * std::sqrt(s) * bracket * bracket};
}

double saturation_unchecked(double w, const SoilParams& soil) {
    return std::clamp((w - soil.w_r) / (soil.w_s - soil.w_r), 0.0, 1.0);
}

std::string layer_message(std::size_t layer, const char* what) {
    return std::string(what) + " in soil layer " + std::to_string(layer + 1);
}

void require_finite(double v, std::size_t layer, const char* what) {
    if (!std::isfinite(v)) throw NumericalError(layer_message(layer, what));
}

// Transfer that equalizes the moisture of two layers of depths da and db.
double equalizing_transfer(double wa, double wb, double da, double db) {
    return std::fabs(wa - wb) * da * db / (da + db);
}

}  // namespace

void SoilParams::validate() const {
    if (!(w_r >= 0.0 && w_r < w_s && w_s <= 1.0)) throw ConfigError("soil requires 0 <= w_r < w_s <= 1");
    if (!(alpha > 0.0)) throw ConfigError("soil alpha must be positive");
    if (!(ks > 0.0)) throw ConfigError("soil ks must be positive");
    if (!(n > 1.0)) throw ConfigError("soil n must exceed 1");
    for (double d : depths) {
        if (!(d > 0.0)) throw ConfigError("soil layer depths must be positive");
    }
    if (!(psi_dry > 0.0) || !std::isfinite(psi_dry)) throw ConfigError("psi_dry must be positive");
}

void VegParams::validate(const SoilParams& soil) const {
    const double sum = a_leaf + a_stem + a_root;
    for (double a : {a_leaf, a_stem, a_root}) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("allocation fractions must lie in [0,1]");
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw ConfigError("allocation fractions must sum to 1");
    if (!(d_leaf >= 0.0 && d_stem >= 0.0 && d_root >= 0.0)) throw ConfigError("turnover rates must be >= 0");
    // With leaves turning over at least as fast as stems and roots, cutting leaf
    // allocation always restores the support constraint.
    if (d_leaf < std::max(d_stem, d_root)) throw ConfigError("d_leaf must be >= d_stem and d_root");
    if (!(w_wilt > 0.0 && w_wilt < w_fc && w_fc < soil.w_s)) throw ConfigError("vegetation requires 0 < w_wilt < w_fc < w_s");
    if (!(vmax0 > 0.0 && es > 0.0 && sl > 0.0 && k_ext > 0.0 && carbon_yield > 0.0 && swrad_ref > 0.0 &&
          lai_seed >= 0.0)) {
        throw ConfigError("vegetation constants must be positive");
    }
    double rsum = 0.0;
    for (double r : root_fraction) {
        if (r < 0.0) throw ConfigError("root fractions must be >= 0");
        rsum += r;
    }
    if (std::fabs(rsum - 1.0) > 1e-12) throw ConfigError("root fractions must sum to 1");
}

double ForcingSeries::annual_precip_mm(std::size_t year) const {
    double total = 0.0;
    const std::size_t begin = year * kHoursPerYear;
    for (std::size_t h = begin; h < begin + kHoursPerYear && h < hours.size(); ++h) total += hours[h].precip;
    return total * kStepSeconds * 1000.0;
}

void ForcingSeries::validate() const {
    if (hours.empty() || hours.size() % kHoursPerYear != 0) {
        throw ConfigError("forcing length must be a positive whole number of years");
    }
    for (std::size_t h = 0; h < hours.size(); ++h) {
        const auto& r = hours[h];
        if (!(r.precip >= 0.0) || !(r.temp >= 200.0 && r.temp <= 330.0) || !(r.swrad >= 0.0) || !(r.pet >= 0.0)) {
            throw ConfigError("invalid forcing record at hour " + std::to_string(h));
        }
    }
}

WaterFluxes& WaterFluxes::operator+=(const WaterFluxes& o) noexcept {
    precip += o.precip;
    infiltration += o.infiltration;
    runoff += o.runoff;
    soil_evaporation += o.soil_evaporation;
    transpiration += o.transpiration;
    drainage += o.drainage;
    return *this;
}

double effective_saturation(double w, const SoilParams& soil) {
    if (w < soil.w_r || w > soil.w_s) {
        const double excess = w < soil.w_r ? soil.w_r - w : w - soil.w_s;
        if (!(excess <= kDriftTolerance)) {
            std::ostringstream os;
            os.precision(17);
            os << "soil moisture " << w << " outside [" << soil.w_r << ", " << soil.w_s << "]";
            throw DomainError(os.str());
        }
        std::ostringstream os;
        os << "soil moisture drifted outside [w_r, w_s] by " << std::scientific << std::setprecision(2) << excess
           << "; clamped";
        log::warn(os.str());
        w = std::clamp(w, soil.w_r, soil.w_s);
    }
    return (w - soil.w_r) / (soil.w_s - soil.w_r);
}

double vg_suction(double w, const SoilParams& soil) {
    const double s = effective_saturation(w, soil);
    if (s <= 0.0) throw NumericalError("suction overflow: soil moisture at residual content");
    const double psi = suction_from_saturation(s, soil.alpha, shape_of(soil));
    if (!std::isfinite(psi)) throw NumericalError("suction overflow near residual content");
    return psi;
}

double vg_conductivity(double w, const SoilParams& soil) {
    return soil.ks * conductivity_ratio(effective_saturation(w, soil), shape_of(soil));
}

double vg_moisture_at_suction(double psi, const SoilParams& soil) {
    if (!(psi >= 0.0)) throw DomainError("suction must be non-negative");
    if (psi == 0.0) return soil.w_s;
    const VgShape vg = shape_of(soil);
    const double z = vg.n * std::log(soil.alpha * psi);  // ln((alpha psi)^n)
    const double log1p_term = z > 36.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    const double s = std::exp(-vg.m * log1p_term);
    return soil.w_r + s * (soil.w_s - soil.w_r);
}

double evaporation_efficiency(double psi, const SoilParams& soil) {
    return std::max(0.0, 1.0 - psi / soil.psi_dry);
}

double column_storage(const ModelState& state, const SoilParams& soil) {
    double total = 0.0;
    for (std::size_t i = 0; i < kNumLayers; ++i) total += state.w[i] * soil.depths[i];
    return total;
}

double root_zone_moisture(const ModelState& state, const VegParams& veg) {
    double w = 0.0;
    for (std::size_t i = 0; i < kNumLayers; ++i) w += veg.root_fraction[i] * state.w[i];
    return w;
}

namespace {

// Surface moisture below which soil evaporation stops.
double evaporation_floor(const SoilParams& soil) {
    const double w_floor = soil.w_r + kSaturationFloor * (soil.w_s - soil.w_r);
    return std::max(vg_moisture_at_suction(soil.psi_dry, soil), w_floor);
}

SoilStep step_soil_impl(const ModelState& state, const ForcingRecord& forcing, const SoilParams& soil,
                        const VegParams& veg, double dt, double w_eq) {
    SoilStep out{state, {}};
    auto& w = out.state.w;
    auto& fx = out.fluxes;
    const auto& d = soil.depths;
    const VgShape vg = shape_of(soil);
    const double w_floor = soil.w_r + kSaturationFloor * (soil.w_s - soil.w_r);

    // Hydraulic state at the start of the step.
    std::array<double, kNumLayers> psi{};
    std::array<double, kNumLayers> k{};
    for (std::size_t i = 0; i < kNumLayers; ++i) {
        const Hydraulics hy = hydraulics(std::max(saturation_unchecked(w[i], soil), kSaturationFloor), soil, vg);
        psi[i] = hy.psi;
        k[i] = hy.k;
        require_finite(psi[i], i, "non-finite suction");
        require_finite(k[i], i, "non-finite conductivity");
    }

    // Free drainage at the bottom, then Darcy exchange bottom-up so the
    // lower layers make room before water arrives from above.
    {
        const double avail = std::max(0.0, (w[2] - w_floor) * d[2]);
        fx.drainage = std::min(k[2] * dt, avail);
        require_finite(fx.drainage, 2, "non-finite drainage flux");
        w[2] -= fx.drainage / d[2];
    }
    for (std::size_t upper = kNumLayers - 1; upper-- > 0;) {
        const std::size_t lower = upper + 1;
        const double dz = 0.5 * (d[upper] + d[lower]);
        const double k_face = std::sqrt(k[upper] * k[lower]);
        double q_cap = k_face * (psi[lower] - psi[upper]) / dz * dt;
        const double eq_limit = equalizing_transfer(state.w[upper], state.w[lower], d[upper], d[lower]);
        q_cap = std::copysign(std::min(std::fabs(q_cap), eq_limit), q_cap);
        double q = k_face * dt + q_cap;  // positive downward
        require_finite(q, upper, "non-finite interlayer flux");
        if (q > 0.0) {
            q = std::min({q, std::max(0.0, (w[upper] - w_floor) * d[upper]), std::max(0.0, (soil.w_s - w[lower]) * d[lower])});
        } else {
            q = -std::min({-q, std::max(0.0, (w[lower] - w_floor) * d[lower]), std::max(0.0, (soil.w_s - w[upper]) * d[upper])});
        }
        w[upper] -= q / d[upper];
        w[lower] += q / d[lower];
    }

    // Infiltration limited by the saturated conductivity and by the free pore
    // space of the surface layer; the excess runs off.
    fx.precip = forcing.precip * dt;
    fx.infiltration = std::min({fx.precip, soil.ks * dt, std::max(0.0, (soil.w_s - w[0]) * d[0])});
    fx.runoff = fx.precip - fx.infiltration;
    w[0] += fx.infiltration / d[0];

    const double cover = 1.0 - std::exp(-veg.k_ext * state.lai);

    // Bare-soil evaporation, scaled down as the surface suction at the start
    // of the step approaches psi_dry and never drying the layer past it.
    if (forcing.pet > 0.0) {
        const double beta = evaporation_efficiency(psi[0], soil);
        if (beta > 0.0) {
            const double demand = forcing.pet * dt * (1.0 - cover) * beta;
            fx.soil_evaporation = std::min(demand, std::max(0.0, (w[0] - w_eq) * d[0]));
            require_finite(fx.soil_evaporation, 0, "non-finite evaporation flux");
            w[0] -= fx.soil_evaporation / d[0];
        }

        // Transpiration shared between layers by root fraction, never below wilting.
        const double wr = root_zone_moisture(out.state, veg);
        const double f_water = std::clamp((wr - veg.w_wilt) / (veg.w_fc - veg.w_wilt), 0.0, 1.0);
        const double demand_t = forcing.pet * dt * cover * f_water;
        for (std::size_t i = 0; i < kNumLayers && demand_t > 0.0; ++i) {
            const double take = std::min(demand_t * veg.root_fraction[i], std::max(0.0, (w[i] - veg.w_wilt) * d[i]));
            require_finite(take, i, "non-finite transpiration flux");
            w[i] -= take / d[i];
            fx.transpiration += take;
        }
    }

    for (auto& wi : w) wi = std::clamp(wi, soil.w_r, soil.w_s);
    return out;
}

}  // namespace

SoilStep step_soil(const ModelState& state, const ForcingRecord& forcing, const SoilParams& soil, const VegParams& veg,
                   double dt) {
    return step_soil_impl(state, forcing, soil, veg, dt, evaporation_floor(soil));
}

ModelState step_vegetation(const ModelState& state, const ForcingRecord& forcing, const VegParams& veg,
                           const SoilParams& /*soil*/, double dt) {
    ModelState out = state;
    const double wr = root_zone_moisture(state, veg);
    const double f_water = std::clamp((wr - veg.w_wilt) / (veg.w_fc - veg.w_wilt), 0.0, 1.0);
    const double f_light =
        (1.0 - std::exp(-veg.k_ext * (state.lai + veg.lai_seed))) * std::max(0.0, forcing.swrad) / veg.swrad_ref;
    const double npp = veg.vmax0 * f_light * f_water * veg.carbon_yield;  // kg C m-2 s-1
    const double gain = npp * dt;

    const double water_stress = veg.d_leaf * (1.0 - f_water);
    const double leaf_kept = state.c_leaf * std::max(0.0, 1.0 - (veg.d_leaf + water_stress) * dt);
    const double stem_kept = state.c_stem * std::max(0.0, 1.0 - veg.d_stem * dt);
    const double root_kept = state.c_root * std::max(0.0, 1.0 - veg.d_root * dt);

    // Leaf allocation is withheld when stems and roots cannot support the
    // leaves, and trimmed so that the support constraint still holds after
    // the update. Withheld carbon goes half to stems, half to roots.
    const double leaf_share = veg.a_leaf * gain;
    double to_leaf = 0.0;
    if (state.c_stem + state.c_root >= veg.es * state.c_leaf) {
        const double room = (stem_kept + root_kept + gain - veg.es * leaf_kept) / (1.0 + veg.es);
        to_leaf = std::clamp(room, 0.0, leaf_share);
    }
    const double spill = leaf_share - to_leaf;

    out.c_leaf = std::max(0.0, leaf_kept + to_leaf);
    out.c_stem = std::max(0.0, stem_kept + veg.a_stem * gain + 0.5 * spill);
    out.c_root = std::max(0.0, root_kept + veg.a_root * gain + 0.5 * spill);
    out.lai = veg.sl * out.c_leaf;
    return out;
}

SoilParams soil_params(const ScenarioPreset& preset, const PhysicalParams& params) {
    SoilParams soil = preset.soil;
    soil.ks = params.ks;
    soil.n = params.n;
    return soil;
}

VegParams veg_params(const ScenarioPreset& preset, const PhysicalParams& params) {
    VegParams veg = preset.veg;
    veg.vmax0 = params.vmax0;
    veg.es = params.es;
    return veg;
}

ModelState initial_state(const SoilParams& soil, const VegParams& veg) {
    ModelState s;
    s.w.fill(std::clamp(veg.w_fc, soil.w_r, soil.w_s));
    s.c_stem = 0.1;
    s.c_root = 0.1;
    s.c_leaf = std::min(0.01, (s.c_stem + s.c_root) / veg.es);
    s.lai = veg.sl * s.c_leaf;
    return s;
}

void integrate(const PhysicalParams& params, const ScenarioPreset& preset, const ForcingSeries& forcing,
               std::size_t spinup_cycles, const StateVisitor& visit) {
    params.validate();
    const SoilParams soil = soil_params(preset, params);
    const VegParams veg = veg_params(preset, params);
    soil.validate();
    veg.validate(soil);
    if (forcing.hours.empty()) throw ConfigError("empty forcing series");

    const double w_eq = evaporation_floor(soil);

    ModelState state = initial_state(soil, veg);
    for (std::size_t cycle = 0; cycle <= spinup_cycles; ++cycle) {
        const bool recorded = cycle == spinup_cycles;
        for (std::size_t h = 0; h < forcing.hours.size(); ++h) {
            const ForcingRecord& f = forcing.hours[h];
            state.t_surf = f.temp;
            try {
                SoilStep s = step_soil_impl(state, f, soil, veg, static_cast<double>(kStepSeconds), w_eq);
                state = step_vegetation(s.state, f, veg, soil);
                if (recorded) visit(h, state, s.fluxes);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (cycle " + std::to_string(cycle) + ", hour " +
                                     std::to_string(h) + ")");
            }
        }
    }
}

std::vector<ModelState> simulate(const PhysicalParams& params, const ScenarioPreset& preset,
                                 const ForcingSeries& forcing, std::size_t spinup_cycles) {
    std::vector<ModelState> traj;
    traj.reserve(forcing.hours.size());
    integrate(params, preset, forcing, spinup_cycles,
              [&](std::size_t, const ModelState& s, const WaterFluxes&) { traj.push_back(s); });
    return traj;
}

}  // namespace ecocal
