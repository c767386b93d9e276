// Command-line harness for the synthetic-twin calibration pipeline.

#include "ecocal/config.hpp"
#include "ecocal/error.hpp"
#include "ecocal/log.hpp"
#include "ecocal/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    std::optional<std::string> scenario;
    bool split = false;
    bool size_study = false;
    bool quiet = false;
};

ecocal::RunConfig resolve(const Options& o) {
    ecocal::RunConfig cfg = o.config_path.empty() ? ecocal::RunConfig{} : ecocal::load_config(o.config_path);
    if (o.scenario) cfg.scenario = *o.scenario;
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.out) cfg.output_dir = *o.out;
    if (o.split) cfg.split = true;
    if (o.size_study) cfg.size_study = true;
    cfg.validate();
    return cfg;
}

void print_posterior(const ecocal::DiagnoseReport& rep) {
    for (std::size_t p = 0; p < ecocal::kNumParams; ++p) {
        std::printf("theta%zu median %.3f mode %.3f index %.4f\n", p + 1, rep.stats[p].median, rep.stats[p].mode,
                    rep.sensitivity[p]);
    }
    std::printf("corr(theta3, theta4) %.4f\n", rep.correlation.r[2][3]);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surrogate-assisted Bayesian calibration of a toy land surface model"};
    app.require_subcommand(1, 1);
    Options o;
    app.add_option("--config", o.config_path, "key=value run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "master seed (overrides the config)");
    app.add_option("--workers", o.workers, "worker threads for ensemble runs")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "output directory");
    app.add_option("--scenario", o.scenario, "preset name, e.g. site1");
    app.add_flag("--split", o.split, "calibrate on the first years and evaluate on the rest");
    app.add_flag("--size-study", o.size_study, "run the ensemble-size study after the twin");
    app.add_flag("-q,--quiet", o.quiet, "only report warnings and errors");

    auto* twin = app.add_subcommand("twin", "run every stage and write summary.txt");
    auto* ensemble = app.add_subcommand("ensemble", "observations plus calibration and validation ensembles");
    auto* fit = app.add_subcommand("fit", "fit the surrogate to ensemble.csv");
    auto* sample = app.add_subcommand("sample", "sample the surrogate posterior into chain.csv");
    auto* diagnose = app.add_subcommand("diagnose", "histograms, sensitivity and correlation of chain.csv");
    auto* evaluate = app.add_subcommand("evaluate", "skill of posterior against prior draws");
    for (auto* sub : {twin, ensemble, fit, sample, diagnose, evaluate}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    if (o.quiet) ecocal::log::set_level(ecocal::log::Level::warn);

    ecocal::RunConfig cfg;
    try {
        cfg = resolve(o);
    } catch (const std::exception& e) {
        std::cerr << "ecocal: [config] " << e.what() << '\n';
        return 2;
    }

    try {
        if (twin->parsed()) {
            const auto rep = ecocal::run_twin(cfg);
            std::cout << ecocal::format_summary(cfg, rep);
        } else if (ensemble->parsed()) {
            const auto tw = ecocal::build_twin(cfg);
            ecocal::stage_setup(cfg, tw);
            ecocal::stage_ensemble(cfg, tw);
        } else if (fit->parsed()) {
            const auto rep = ecocal::stage_fit(cfg);
            std::printf("validation R2 %.4f\n", rep.r2);
        } else if (sample->parsed()) {
            const auto chain = ecocal::stage_sample(cfg);
            std::printf("acceptance rate %.4f\n", chain.acceptance_rate());
        } else if (diagnose->parsed()) {
            print_posterior(ecocal::stage_diagnose(cfg));
        } else if (evaluate->parsed()) {
            const auto tw = ecocal::build_twin(cfg);
            const auto rep = ecocal::stage_evaluate(cfg, tw);
            std::printf("median TB RMSE %.4f K -> %.4f K\n", rep.tb_rmse_median_prior, rep.tb_rmse_median_posterior);
            for (const auto& v : rep.variables) {
                std::printf("%s ubRMSE rate %+.4f\n", v.name.c_str(), v.ubrmse_rate());
            }
        }
    } catch (const ecocal::StageError& e) {
        std::cerr << "ecocal: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ecocal: [internal] " << e.what() << '\n';
        return 1;
    }
    return 0;
}
