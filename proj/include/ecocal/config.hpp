#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ecocal {

/// Settings of one synthetic-twin experiment. Every artifact written by the
/// pipeline is a function of this structure alone.
struct RunConfig {
    std::string scenario = "site1";
    std::string preset_file;  // overrides the named preset when set
    std::size_t years = 8;
    std::size_t spinup_cycles = 4;
    std::size_t members = 400;
    std::size_t validation_members = 400;  // independent set used for the surrogate R^2
    std::size_t eval_members = 400;        // prior and posterior draws for skill scores
    std::size_t iterations = 100000;
    std::size_t burn_in = 0;
    double proposal_sd = 0.1;
    double sigma_o = 1.0;    // K
    double obs_noise = 0.0;  // K
    std::size_t obs_spacing_hours = 48;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::size_t bins = 20;
    std::size_t gp_restarts = 5;
    std::size_t workers = 1;
    bool split = false;  // calibrate on the first 3 years, evaluate on the rest
    std::size_t split_years = 3;
    bool size_study = false;
    std::vector<std::size_t> size_study_sizes{50, 100, 200, 300};

    void validate() const;
};

[[nodiscard]] RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// key=value rendering of every setting that influences results; output_dir
/// and workers are left out so the text is identical across runs that differ
/// only in where and how fast they execute.
[[nodiscard]] std::string to_text(const RunConfig& cfg);

}  // namespace ecocal
