#include "ecocal/param_space.hpp"

#include "ecocal/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ecocal {

namespace {

std::string component_message(std::size_t i, double value, const char* what) {
    std::ostringstream os;
    os.precision(17);
    os << "theta" << (i + 1) << " (" << kParamNames[i] << ") = " << value << ' ' << what;
    return os.str();
}

}  // namespace

ScaledParams::ScaledParams(const ParamVector& theta) : theta_(theta) {
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (!(theta[i] >= 0.0 && theta[i] <= 1.0)) {
            throw DomainError(component_message(i, theta[i], "outside [0,1]"));
        }
    }
}

bool ScaledParams::in_bounds(const ParamVector& theta) noexcept {
    for (double v : theta) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

void ParamRanges::validate() const {
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& m = multipliers[i];
        if (!(m.lo < m.hi) || !(m.lo > 0.0)) {
            throw ConfigError("multiplier range of " + std::string(kParamNames[i]) + " must satisfy 0 < lo < hi");
        }
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (!(defaults()[i] > 0.0) || !std::isfinite(defaults()[i])) {
            throw ConfigError("default of " + std::string(kParamNames[i]) + " must be positive");
        }
    }
}

void PhysicalParams::validate() const {
    if (!(ks > 0.0)) throw DomainError("ks must be positive");
    if (!(n > 1.0)) throw DomainError("van Genuchten n must exceed 1");
    if (!(vmax0 > 0.0)) throw DomainError("vmax0 must be positive");
    if (!(es > 0.0)) throw DomainError("es must be positive");
}

PhysicalParams denormalize(const ScaledParams& theta, const ParamRanges& ranges) {
    const auto defaults = ranges.defaults();
    std::array<double, kNumParams> phys{};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const double t = theta[i];
        if (!(t >= 0.0 && t <= 1.0)) throw DomainError(component_message(i, t, "outside [0,1]"));
        const auto& m = ranges.multipliers[i];
        phys[i] = defaults[i] * (m.lo + (m.hi - m.lo) * t);
    }
    PhysicalParams out{phys[0], std::max(phys[1], kMinVanGenuchtenN), phys[2], phys[3]};
    out.validate();
    return out;
}

ScaledParams normalize(const PhysicalParams& physical, const ParamRanges& ranges) {
    constexpr double tol = 1e-12;
    const auto defaults = ranges.defaults();
    const std::array<double, kNumParams> phys = {physical.ks, physical.n, physical.vmax0, physical.es};
    ParamVector theta{};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& m = ranges.multipliers[i];
        double t = (phys[i] / defaults[i] - m.lo) / (m.hi - m.lo);
        if (!std::isfinite(t) || t < -tol || t > 1.0 + tol) {
            throw DomainError(component_message(i, phys[i], "is outside the representable multiplier range"));
        }
        theta[i] = std::clamp(t, 0.0, 1.0);
    }
    return ScaledParams(theta);
}

ScaledParams prior_sample(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ParamVector theta{};
    for (auto& t : theta) t = unif(rng);
    return ScaledParams(theta);
}

std::string to_string(const ScaledParams& theta) {
    std::ostringstream os;
    os.precision(6);
    os << '(';
    for (std::size_t i = 0; i < kNumParams; ++i) os << (i ? ", " : "") << theta[i];
    os << ')';
    return os.str();
}

}  // namespace ecocal
