#include "ecocal/ensemble.hpp"

#include "ecocal/error.hpp"
#include "ecocal/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ecocal {

void CostConfig::validate() const {
    if (!(sigma_o > 0.0) || !std::isfinite(sigma_o)) throw ConfigError("sigma_o must be > 0");
}

std::vector<ParamVector> lhs_design(std::size_t n_members, std::size_t n_dims, std::uint64_t seed) {
    if (n_members < 1) throw ConfigError("lhs_sample needs at least one member");
    if (n_dims != kNumParams) throw ConfigError("lhs_sample supports exactly 4 dimensions");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<ParamVector> out(n_members);
    std::vector<std::size_t> perm(n_members);
    const double n = static_cast<double>(n_members);
    for (std::size_t d = 0; d < n_dims; ++d) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n_members; ++i) {
            const double k = static_cast<double>(perm[i]);
            // The upper clamp keeps rounding from pushing a sample into the next bin.
            out[i][d] = std::min((k + unif(rng)) / n, std::nextafter((k + 1.0) / n, 0.0));
        }
    }
    return out;
}

std::vector<ScaledParams> lhs_sample(std::size_t n_members, std::size_t n_dims, std::uint64_t seed) {
    const auto design = lhs_design(n_members, n_dims, seed);
    std::vector<ScaledParams> out;
    out.reserve(design.size());
    for (const auto& p : design) out.emplace_back(p);
    return out;
}

double rmse(const ObservationSeries& sim, const ObservationSeries& obs) {
    if (sim.size() != obs.size() || sim.tb.size() != sim.hours.size() || obs.tb.size() != obs.hours.size()) {
        throw AlignmentError("simulated and observed series differ in length");
    }
    if (obs.size() == 0) throw AlignmentError("rmse needs at least one timestamp");
    double sum = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        if (sim.hours[t] != obs.hours[t]) {
            throw AlignmentError("timestamp mismatch at index " + std::to_string(t));
        }
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            const double d = sim.tb[t][c] - obs.tb[t][c];
            sum += d * d;
        }
    }
    return std::sqrt(sum / static_cast<double>(obs.size() * kNumChannels));
}

double cost(double rmse_value, const CostConfig& cfg) {
    if (!(rmse_value >= 0.0)) throw DomainError("rmse must be >= 0");
    return std::exp(-rmse_value / cfg.sigma_o);
}

MemberOutput run_member(const ForwardModel& model, const ScaledParams& theta, const std::vector<double>& times) {
    const PhysicalParams params = denormalize(theta, model.preset.ranges);
    const VegParams veg = veg_params(model.preset, params);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || times[i] != std::floor(times[i]) ||
            times[i] >= static_cast<double>(model.forcing.hours.size()) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw std::out_of_range("observation hours must be increasing integers inside the forcing period");
        }
    }
    MemberOutput out;
    out.tb.reserve(times.size());
    out.lai.reserve(times.size());
    out.sm_surface.reserve(times.size());
    out.sm_root.reserve(times.size());
    std::size_t next = 0;
    integrate(params, model.preset, model.forcing, model.spinup_cycles,
              [&](std::size_t hour, const ModelState& s, const WaterFluxes&) {
                  if (next < times.size() && static_cast<double>(hour) == times[next]) {
                      out.tb.push_back(brightness_temperatures(s, model.preset.channels));
                      out.lai.push_back(s.lai);
                      out.sm_surface.push_back(s.w[0]);
                      out.sm_root.push_back(root_zone_moisture(s, veg));
                      ++next;
                  }
              });
    return out;
}

ObservationSeries simulate_observations(const ForwardModel& model, const ScaledParams& theta, double noise_sd,
                                        Rng& rng) {
    if (!(noise_sd >= 0.0)) throw DomainError("noise_sd must be >= 0");
    MemberOutput m = run_member(model, theta, model.times);
    ObservationSeries out;
    out.hours = model.times;
    out.noise_sd = noise_sd;
    out.tb = std::move(m.tb);
    if (noise_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sd);
        for (auto& v : out.tb) {
            for (double& x : v) x += noise(rng);
        }
    }
    return out;
}

double EnsembleDataset::rmse_min() const {
    if (records.empty()) throw DomainError("empty dataset");
    return std::min_element(records.begin(), records.end(),
                            [](const auto& a, const auto& b) { return a.rmse < b.rmse; })->rmse;
}

double EnsembleDataset::rmse_max() const {
    if (records.empty()) throw DomainError("empty dataset");
    return std::max_element(records.begin(), records.end(),
                            [](const auto& a, const auto& b) { return a.rmse < b.rmse; })->rmse;
}

void EnsembleDataset::validate() const {
    if (records.size() < 2) throw DomainError("dataset needs at least 2 members");
    for (const auto& r : records) {
        if (!std::isfinite(r.rmse) || r.rmse < 0.0) {
            throw DomainError("member " + std::to_string(r.member) + " has invalid rmse");
        }
    }
}

EnsembleDataset run_ensemble(const std::vector<ScaledParams>& thetas, const ForwardModel& model,
                             const ObservationSeries& obs, std::size_t workers, std::uint64_t master_seed) {
    obs.validate();
    if (obs.hours != model.times) throw AlignmentError("observations do not match the model observation hours");
    struct Slot {
        double rmse = 0.0;
        std::string error;
    };
    std::vector<Slot> slots(thetas.size());
    parallel_for(thetas.size(), workers, [&](std::size_t i) {
        try {
            Rng rng(master_seed ^ static_cast<std::uint64_t>(i));
            slots[i].rmse = rmse(simulate_observations(model, thetas[i], 0.0, rng), obs);
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    EnsembleDataset out;
    out.scenario = model.preset.name;
    out.seed = master_seed;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        if (slots[i].error.empty()) {
            out.records.push_back({i, thetas[i], slots[i].rmse});
        } else {
            out.failures.push_back({i, slots[i].error});
        }
    }
    return out;
}

namespace {

constexpr const char* kDatasetHeader = "member,theta1,theta2,theta3,theta4,rmse_K";

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ParseError(source, line, "cannot parse '" + cell + "'");
    }
}

}  // namespace

void save_dataset(const EnsembleDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "# scenario=" << data.scenario << '\n';
    out << "# seed=" << data.seed << '\n';
    for (const auto& f : data.failures) out << "# failed=" << f.member << ':' << one_line(f.reason) << '\n';
    out << kDatasetHeader << '\n';
    for (const auto& r : data.records) {
        out << r.member;
        for (double x : r.theta.values()) out << ',' << x;
        out << ',' << r.rmse << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

EnsembleDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream file(path);
    const std::string source = path.string();
    if (!file) throw ParseError(source, 0, "cannot open dataset file");
    const std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ParseError(source, 0, "empty dataset file");
    // The writer terminates every row, so a missing final newline means the
    // file was cut short.
    const bool truncated = text.back() != '\n';
    std::istringstream in(text);
    EnsembleDataset data;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "scenario") {
                data.scenario = value;
            } else if (key == "seed") {
                try {
                    data.seed = std::stoull(value);
                } catch (const std::exception&) {
                    throw ParseError(source, line_no, "bad seed '" + value + "'");
                }
            } else if (key == "failed") {
                const auto colon = value.find(':');
                if (colon == std::string::npos) throw ParseError(source, line_no, "bad failure entry");
                data.failures.push_back({static_cast<std::size_t>(parse_cell(value.substr(0, colon), source, line_no)),
                                         value.substr(colon + 1)});
            }
            continue;
        }
        if (!header_seen) {
            if (line != kDatasetHeader) throw ParseError(source, line_no, "unexpected header");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::array<double, kNumParams + 2> v{};
        std::size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col >= v.size()) throw ParseError(source, line_no, "too many columns");
            v[col++] = parse_cell(cell, source, line_no);
        }
        if (col != v.size()) throw ParseError(source, line_no, "expected 6 columns, found " + std::to_string(col));
        if (truncated && in.peek() == std::char_traits<char>::eof()) {
            throw ParseError(source, line_no, "truncated last line");
        }
        if (v[0] < 0.0 || v[0] != std::floor(v[0])) throw ParseError(source, line_no, "member index must be integral");
        EnsembleRecord r;
        r.member = static_cast<std::size_t>(v[0]);
        try {
            r.theta = ScaledParams({v[1], v[2], v[3], v[4]});
        } catch (const DomainError& e) {
            throw ParseError(source, line_no, e.what());
        }
        r.rmse = v[5];
        if (!std::isfinite(r.rmse) || r.rmse < 0.0) throw ParseError(source, line_no, "rmse must be finite and >= 0");
        data.records.push_back(r);
    }
    if (!header_seen) throw ParseError(source, 0, "dataset file has no header");
    if (data.records.empty()) throw ParseError(source, 0, "dataset file contains no records");
    data.validate();
    return data;
}

}  // namespace ecocal
