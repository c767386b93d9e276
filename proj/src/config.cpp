#include "ecocal/config.hpp"

#include "ecocal/error.hpp"
#include "ecocal/keyvalue.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ecocal {

namespace {

void read_count(KeyValueFile& kv, const std::string& key, std::size_t& target) {
    const auto v = kv.get_integer(key);
    if (!v) return;
    if (*v < 0) throw ParseError(kv.source(), kv.line_of(key), "'" + key + "' must not be negative");
    target = static_cast<std::size_t>(*v);
}

std::vector<std::size_t> parse_sizes(KeyValueFile& kv, const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        while (pos < item.size() && (item[pos] == ' ' || item[pos] == '\t')) ++pos;
        if (pos == 0 || pos != item.size() || v < 1) {
            throw ParseError(kv.source(), kv.line_of(key), "'" + key + "': bad size '" + item + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (scenario.empty() && preset_file.empty()) throw ConfigError("scenario must not be empty");
    if (years < 1) throw ConfigError("years must be >= 1");
    if (members < 2) throw ConfigError("members must be >= 2");
    if (validation_members < 1) throw ConfigError("validation_members must be >= 1");
    if (eval_members < 1) throw ConfigError("eval_members must be >= 1");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
    if (!(proposal_sd > 0.0) || !std::isfinite(proposal_sd)) throw ConfigError("proposal_sd must be > 0");
    if (!(sigma_o > 0.0) || !std::isfinite(sigma_o)) throw ConfigError("sigma_o must be > 0");
    if (!(obs_noise >= 0.0) || !std::isfinite(obs_noise)) throw ConfigError("obs_noise must be >= 0");
    if (obs_spacing_hours < 1) throw ConfigError("obs_spacing_hours must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (bins < 2) throw ConfigError("bins must be >= 2");
    if (gp_restarts < 1) throw ConfigError("gp_restarts must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (split && (split_years < 1 || split_years >= years)) {
        throw ConfigError("split_years must leave at least one evaluation year");
    }
    if (size_study) {
        if (size_study_sizes.empty()) throw ConfigError("size_study_sizes must not be empty");
        for (std::size_t s : size_study_sizes) {
            if (s < 2) throw ConfigError("every size in size_study_sizes must be >= 2");
        }
    }
}

RunConfig parse_config(std::string_view text, const std::string& source) {
    KeyValueFile kv = KeyValueFile::parse(text, source);
    RunConfig c;
    if (auto v = kv.get_string("scenario")) c.scenario = *v;
    if (auto v = kv.get_string("preset_file")) c.preset_file = *v;
    read_count(kv, "years", c.years);
    read_count(kv, "spinup_cycles", c.spinup_cycles);
    read_count(kv, "members", c.members);
    read_count(kv, "validation_members", c.validation_members);
    read_count(kv, "eval_members", c.eval_members);
    read_count(kv, "iterations", c.iterations);
    read_count(kv, "burn_in", c.burn_in);
    if (auto v = kv.get_double("proposal_sd")) c.proposal_sd = *v;
    if (auto v = kv.get_double("sigma_o")) c.sigma_o = *v;
    if (auto v = kv.get_double("obs_noise")) c.obs_noise = *v;
    read_count(kv, "obs_spacing_hours", c.obs_spacing_hours);
    if (auto v = kv.get_integer("seed")) {
        if (*v < 0) throw ParseError(kv.source(), kv.line_of("seed"), "'seed' must not be negative");
        c.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = kv.get_string("output_dir")) c.output_dir = *v;
    read_count(kv, "bins", c.bins);
    read_count(kv, "gp_restarts", c.gp_restarts);
    read_count(kv, "workers", c.workers);
    if (auto v = kv.get_bool("split")) c.split = *v;
    read_count(kv, "split_years", c.split_years);
    if (auto v = kv.get_bool("size_study")) c.size_study = *v;
    if (auto v = kv.get_string("size_study_sizes")) c.size_study_sizes = parse_sizes(kv, "size_study_sizes", *v);
    kv.reject_unknown();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string to_text(const RunConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "scenario = " << c.scenario << '\n';
    if (!c.preset_file.empty()) out << "preset_file = " << c.preset_file << '\n';
    out << "years = " << c.years << '\n'
        << "spinup_cycles = " << c.spinup_cycles << '\n'
        << "members = " << c.members << '\n'
        << "validation_members = " << c.validation_members << '\n'
        << "eval_members = " << c.eval_members << '\n'
        << "iterations = " << c.iterations << '\n'
        << "burn_in = " << c.burn_in << '\n'
        << "proposal_sd = " << c.proposal_sd << '\n'
        << "sigma_o = " << c.sigma_o << '\n'
        << "obs_noise = " << c.obs_noise << '\n'
        << "obs_spacing_hours = " << c.obs_spacing_hours << '\n'
        << "seed = " << c.seed << '\n'
        << "bins = " << c.bins << '\n'
        << "gp_restarts = " << c.gp_restarts << '\n'
        << "split = " << (c.split ? "true" : "false") << '\n'
        << "split_years = " << c.split_years << '\n'
        << "size_study = " << (c.size_study ? "true" : "false") << '\n'
        << "size_study_sizes = ";
    for (std::size_t i = 0; i < c.size_study_sizes.size(); ++i) out << (i ? "," : "") << c.size_study_sizes[i];
    out << '\n';
    return out.str();
}

}  // namespace ecocal
