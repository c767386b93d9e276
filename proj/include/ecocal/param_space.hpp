#pragma once

#include "ecocal/rng.hpp"

#include <array>
#include <cstddef>
#include <string>

namespace ecocal {

inline constexpr std::size_t kNumParams = 4;

using ParamVector = std::array<double, kNumParams>;

// Human-readable names of the four calibrated parameters, in theta order.
inline constexpr std::array<const char*, kNumParams> kParamNames = {"ks", "n", "vmax0", "es"};

/// Scaled parameter vector theta in [0,1]^4. Construction validates bounds,
/// so every instance satisfies the invariant.
class ScaledParams {
public:
    ScaledParams() : theta_{0.5, 0.5, 0.5, 0.5} {}
    explicit ScaledParams(const ParamVector& theta);

    [[nodiscard]] double operator[](std::size_t i) const { return theta_[i]; }
    [[nodiscard]] const ParamVector& values() const noexcept { return theta_; }

    [[nodiscard]] static bool in_bounds(const ParamVector& theta) noexcept;

    friend bool operator==(const ScaledParams&, const ScaledParams&) = default;

private:
    ParamVector theta_;
};

struct MultiplierRange {
    double lo;
    double hi;
};

/// Multiplier ranges and default physical values. A physical parameter is
/// `default * (lo + (hi - lo) * theta)`.
struct ParamRanges {
    std::array<MultiplierRange, kNumParams> multipliers{{{0.5, 1.5}, {0.8, 1.2}, {0.5, 1.5}, {0.25, 1.75}}};
    double ks_def = 5.0e-6;     // m/s
    double n_def = 1.5;         // -
    double vmax0_def = 6.0e-5;  // mol m-2 s-1
    double es_def = 5.0;        // -

    [[nodiscard]] std::array<double, kNumParams> defaults() const noexcept {
        return {ks_def, n_def, vmax0_def, es_def};
    }

    void validate() const;
};

struct PhysicalParams {
    double ks;     // saturated hydraulic conductivity, m/s
    double n;      // van Genuchten shape, -
    double vmax0;  // top-leaf Rubisco capacity, mol m-2 s-1
    double es;     // stem+root to leaf carbon ratio factor, -

    void validate() const;
};

// Lower bound applied to the physical van Genuchten n.
inline constexpr double kMinVanGenuchtenN = 1.01;

// Scaled synthetic-truth parameters used by the twin experiments.
inline constexpr ParamVector kTruthTheta = {0.75, 0.4, 0.25, 0.6};

[[nodiscard]] PhysicalParams denormalize(const ScaledParams& theta, const ParamRanges& ranges);
[[nodiscard]] ScaledParams normalize(const PhysicalParams& physical, const ParamRanges& ranges);

/// One draw from the bounded-uniform prior on [0,1]^4.
[[nodiscard]] ScaledParams prior_sample(Rng& rng);

[[nodiscard]] std::string to_string(const ScaledParams& theta);

}  // namespace ecocal
