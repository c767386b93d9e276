#include "ecocal/rtm.hpp"

#include "ecocal/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ecocal {

void ChannelParams::validate(double w_s) const {
    if (!(omega >= 0.0 && omega <= 0.2)) throw ConfigError(label + ": omega must lie in [0, 0.2]");
    if (!(e_dry > 0.0 && e_dry <= 1.0)) throw ConfigError(label + ": e_dry must lie in (0, 1]");
    if (!(s_m >= 0.0)) throw ConfigError(label + ": s_m must be >= 0");
    if (!(e_dry - s_m * w_s > 0.0)) throw ConfigError(label + ": emissivity must stay positive at saturation");
    if (!(b_veg >= 0.0)) throw ConfigError(label + ": b_veg must be >= 0");
    if (!(inc_angle >= 0.0 && inc_angle < 1.5)) throw ConfigError(label + ": incidence angle out of range");
}

ChannelSet default_channels() {
    // H polarization sees more of the soil-moisture signal than V; the higher
    // frequency is more strongly attenuated by the canopy.
    ChannelSet ch;
    ch[0] = {"069H", Polarization::horizontal, 0.05, 0.37, 0.92, 1.00};
    ch[1] = {"069V", Polarization::vertical, 0.05, 0.37, 0.96, 0.60};
    ch[2] = {"107H", Polarization::horizontal, 0.06, 0.45, 0.925, 0.90};
    ch[3] = {"107V", Polarization::vertical, 0.06, 0.45, 0.965, 0.55};
    return ch;
}

void ObservationSeries::validate() const {
    if (hours.size() != tb.size()) throw AlignmentError("observation hours and values differ in length");
    for (std::size_t i = 1; i < hours.size(); ++i) {
        if (!(hours[i] > hours[i - 1])) throw AlignmentError("observation hours must be strictly increasing");
    }
    for (const auto& v : tb) {
        for (double x : v) {
            if (!(x > 100.0 && x < 340.0)) throw DomainError("brightness temperature outside (100, 340) K");
        }
    }
}

double canopy_transmissivity(double lai, const ChannelParams& channel) {
    return std::exp(-channel.b_veg * lai / std::cos(channel.inc_angle));
}

double brightness_temperature(const ModelState& state, const ChannelParams& channel) {
    const double w0 = state.w[0];
    if (!std::isfinite(state.lai) || !std::isfinite(w0) || !std::isfinite(state.t_surf)) {
        throw NumericalError("non-finite state passed to brightness_temperature");
    }
    const double gamma = canopy_transmissivity(state.lai, channel);
    const double e_soil = channel.e_dry - channel.s_m * w0;
    const double canopy = (1.0 - channel.omega) * (1.0 - gamma) * (1.0 + (1.0 - e_soil) * gamma);
    return state.t_surf * (e_soil * gamma + canopy);
}

TbVector brightness_temperatures(const ModelState& state, const ChannelSet& channels) {
    TbVector out{};
    for (std::size_t c = 0; c < kNumChannels; ++c) out[c] = brightness_temperature(state, channels[c]);
    return out;
}

std::vector<double> observation_times(std::size_t total_hours, std::size_t first_hour, std::size_t spacing_hours) {
    std::vector<double> out;
    for (std::size_t h = first_hour; h < total_hours; h += spacing_hours) out.push_back(static_cast<double>(h));
    return out;
}

ObservationSeries observe(const std::vector<ModelState>& trajectory, const std::vector<double>& times,
                          const ChannelSet& channels, double noise_sd, Rng& rng) {
    if (!(noise_sd >= 0.0)) throw DomainError("noise_sd must be >= 0");
    ObservationSeries out;
    out.noise_sd = noise_sd;
    out.hours = times;
    out.tb.reserve(times.size());
    std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
    for (double t : times) {
        if (!(t >= 0.0) || t != std::floor(t) || t >= static_cast<double>(trajectory.size())) {
            throw std::out_of_range("observation hour " + std::to_string(t) + " outside the trajectory");
        }
        TbVector tb = brightness_temperatures(trajectory[static_cast<std::size_t>(t)], channels);
        if (noise_sd > 0.0) {
            for (double& x : tb) x += noise(rng);
        }
        out.tb.push_back(tb);
    }
    return out;
}

void save_observations(const ObservationSeries& obs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "hour,tb_069H_K,tb_069V_K,tb_107H_K,tb_107V_K\n";
    for (std::size_t i = 0; i < obs.size(); ++i) {
        out << obs.hours[i];
        for (double x : obs.tb[i]) out << ',' << x;
        out << '\n';
    }
}

ObservationSeries load_observations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open observation file");
    std::string line;
    std::size_t line_no = 0;
    ObservationSeries obs;
    if (!std::getline(in, line)) throw ParseError(path.string(), 0, "empty observation file");
    ++line_no;
    if (line != "hour,tb_069H_K,tb_069V_K,tb_107H_K,tb_107V_K") throw ParseError(path.string(), 1, "unexpected header");
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::array<double, kNumChannels + 1> v{};
        std::size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col >= v.size()) throw ParseError(path.string(), line_no, "too many columns");
            try {
                std::size_t used = 0;
                v[col] = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError(path.string(), line_no, "cannot parse '" + cell + "'");
            }
            ++col;
        }
        if (col != v.size()) throw ParseError(path.string(), line_no, "expected 5 columns");
        obs.hours.push_back(v[0]);
        obs.tb.push_back({v[1], v[2], v[3], v[4]});
    }
    obs.validate();
    return obs;
}

}  // namespace ecocal
