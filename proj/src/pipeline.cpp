#include "ecocal/pipeline.hpp"

#include "ecocal/error.hpp"
#include "ecocal/log.hpp"
#include "ecocal/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecocal {

namespace {

// Stream tags for derive_seed(cfg.seed, tag).
enum SeedTag : std::uint64_t {
    kTagObsNoise = 1,
    kTagDesign = 2,
    kTagEnsemble = 3,
    kTagValidationDesign = 4,
    kTagValidationEnsemble = 5,
    kTagFit = 6,
    kTagMcmc = 7,
    kTagPrior = 8,
    kTagSizeStudy = 9,
    kTagThroughput = 10,
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

std::filesystem::path out_path(const RunConfig& cfg, const char* name) {
    return std::filesystem::path(cfg.output_dir) / name;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

McmcConfig mcmc_config(const RunConfig& cfg) {
    McmcConfig m;
    m.iterations = cfg.iterations;
    m.proposal_sd = cfg.proposal_sd;
    m.burn_in = cfg.burn_in;
    m.seed = derive_seed(cfg.seed, kTagMcmc);
    return m;
}

GpFitOptions fit_options(const RunConfig& cfg) {
    GpFitOptions f;
    f.seed = derive_seed(cfg.seed, kTagFit);
    f.restarts = cfg.gp_restarts;
    return f;
}

CostConfig cost_config(const RunConfig& cfg) {
    CostConfig c;
    c.sigma_o = cfg.sigma_o;
    return c;
}

ObservationSeries subset(const ObservationSeries& obs, std::size_t first, std::size_t last) {
    ObservationSeries out;
    out.noise_sd = obs.noise_sd;
    out.hours.assign(obs.hours.begin() + static_cast<std::ptrdiff_t>(first),
                     obs.hours.begin() + static_cast<std::ptrdiff_t>(last));
    out.tb.assign(obs.tb.begin() + static_cast<std::ptrdiff_t>(first),
                  obs.tb.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

void save_truth(const MemberOutput& truth, const std::vector<double>& times, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "hour,lai,sm_surface,sm_root,tb_069H,tb_069V,tb_107H,tb_107V\n";
    for (std::size_t t = 0; t < times.size(); ++t) {
        out << times[t] << ',' << truth.lai[t] << ',' << truth.sm_surface[t] << ',' << truth.sm_root[t];
        for (double v : truth.tb[t]) out << ',' << v;
        out << '\n';
    }
}

// Evenly spaced retained states; deterministic and free of extra draws.
std::vector<ScaledParams> thin_chain(const Chain& chain, std::size_t count) {
    if (chain.samples.empty()) throw DomainError("chain is empty");
    std::vector<ScaledParams> out;
    out.reserve(count);
    const double step = static_cast<double>(chain.samples.size()) / static_cast<double>(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto idx = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * step);
        out.emplace_back(chain.samples[std::min(idx, chain.samples.size() - 1)]);
    }
    return out;
}

std::vector<MemberOutput> run_members(const ForwardModel& model, const std::vector<ScaledParams>& thetas,
                                      const std::vector<double>& times, std::size_t workers) {
    std::vector<MemberOutput> out(thetas.size());
    std::vector<std::string> errors(thetas.size());
    parallel_for(thetas.size(), workers, [&](std::size_t i) {
        try {
            out[i] = run_member(model, thetas[i], times);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) throw NumericalError("member " + std::to_string(i) + " failed: " + errors[i]);
    }
    return out;
}

VariableScores score_variable(const std::string& name, const std::vector<MemberOutput>& prior,
                              const std::vector<MemberOutput>& posterior, const Series& truth,
                              Series MemberOutput::*field) {
    auto collect = [&](const std::vector<MemberOutput>& set) {
        std::vector<Series> s;
        s.reserve(set.size());
        for (const auto& m : set) s.push_back(m.*field);
        return s;
    };
    const auto sp = collect(prior);
    const auto sq = collect(posterior);
    VariableScores v;
    v.name = name;
    v.bias_prior = bias_ens(sp, truth);
    v.bias_posterior = bias_ens(sq, truth);
    v.ubrmse_prior = ubrmse_ens(sp, truth);
    v.ubrmse_posterior = ubrmse_ens(sq, truth);
    return v;
}

double tb_rmse(const MemberOutput& out, const ObservationSeries& obs) {
    ObservationSeries sim;
    sim.hours = obs.hours;
    sim.tb = out.tb;
    return rmse(sim, obs);
}

}  // namespace

ScenarioPreset resolve_preset(const RunConfig& cfg) {
    if (!cfg.preset_file.empty()) return load_preset(cfg.preset_file);
    return load_named_preset(cfg.scenario);
}

Twin build_twin(const RunConfig& cfg) {
    return in_stage("setup", [&] {
        cfg.validate();
        Twin twin;
        ForwardModel& m = twin.model;
        m.preset = resolve_preset(cfg);
        m.forcing = generate_forcing(m.preset, cfg.years, m.preset.climate.forcing_seed);
        m.spinup_cycles = cfg.spinup_cycles;
        const std::size_t total = m.forcing.hours.size();
        const auto all_times = observation_times(total, 1, cfg.obs_spacing_hours);

        ForwardModel full = m;
        full.times = all_times;
        Rng noise(derive_seed(cfg.seed, kTagObsNoise));
        const ScaledParams truth(kTruthTheta);
        const ObservationSeries all_obs = simulate_observations(full, truth, cfg.obs_noise, noise);

        std::size_t cut = all_times.size();
        if (cfg.split) {
            const double cutoff = static_cast<double>(total / cfg.years * cfg.split_years);
            cut = 0;
            while (cut < all_times.size() && all_times[cut] < cutoff) ++cut;
            if (cut == 0 || cut == all_times.size()) throw ConfigError("split leaves an empty period");
            twin.obs = subset(all_obs, 0, cut);
            twin.eval_obs = subset(all_obs, cut, all_times.size());
        } else {
            twin.obs = all_obs;
            twin.eval_obs = all_obs;
        }
        m.times = twin.obs.hours;
        twin.eval_times = twin.eval_obs.hours;
        twin.truth_eval = run_member(m, truth, twin.eval_times);
        return twin;
    });
}

void stage_setup(const RunConfig& cfg, const Twin& twin) {
    in_stage("setup", [&] {
        std::filesystem::create_directories(cfg.output_dir);
        open_out(out_path(cfg, artifact::config)) << to_text(cfg);
        save_observations(twin.obs, out_path(cfg, artifact::observations));
        save_truth(twin.truth_eval, twin.eval_times, out_path(cfg, artifact::truth));
    });
}

void stage_ensemble(const RunConfig& cfg, const Twin& twin, Timing* timing) {
    in_stage("ensemble", [&] {
        std::filesystem::create_directories(cfg.output_dir);
        const auto t0 = Clock::now();
        auto run = [&](std::size_t n, SeedTag design, SeedTag stream, const char* name) {
            log::info("ensemble: " + std::to_string(n) + " members -> " + name);
            const auto thetas = lhs_sample(n, kNumParams, derive_seed(cfg.seed, design));
            const EnsembleDataset data = run_ensemble(thetas, twin.model, twin.obs, cfg.workers,
                                                      derive_seed(cfg.seed, stream));
            if (data.partial()) {
                log::warn("ensemble: " + std::to_string(data.failures.size()) + " members failed in " + name);
            }
            save_dataset(data, out_path(cfg, name));
        };
        run(cfg.members, kTagDesign, kTagEnsemble, artifact::ensemble);
        run(cfg.validation_members, kTagValidationDesign, kTagValidationEnsemble, artifact::validation);
        if (timing) timing->ensemble_seconds = seconds_since(t0);
    });
}

FitReport stage_fit(const RunConfig& cfg, Timing* timing) {
    return in_stage("fit", [&] {
        const auto t0 = Clock::now();
        const EnsembleDataset data = load_dataset(out_path(cfg, artifact::ensemble));
        std::vector<GpRestart> restarts;
        const GpSurrogate gp = GpSurrogate::fit(data, fit_options(cfg), &restarts);
        gp.save(out_path(cfg, artifact::surrogate));
        if (timing) timing->fit_seconds = seconds_since(t0);

        {
            auto out = open_out(out_path(cfg, artifact::fit_restarts));
            out << "restart,log_likelihood,evaluations,ls_theta1,ls_theta2,ls_theta3,ls_theta4,signal_variance,"
                   "noise_variance\n";
            for (std::size_t r = 0; r < restarts.size(); ++r) {
                const auto& h = restarts[r].best;
                out << r << ',' << restarts[r].log_likelihood << ',' << restarts[r].evaluations;
                for (double l : h.length_scales) out << ',' << l;
                out << ',' << h.signal_variance << ',' << h.noise_variance << '\n';
            }
        }

        FitReport rep;
        rep.hyper = gp.hyper();
        rep.log_likelihood = log_marginal_likelihood(data, gp.hyper());
        rep.members = data.size();

        const EnsembleDataset val = load_dataset(out_path(cfg, artifact::validation));
        rep.validation_members = val.size();
        auto out = open_out(out_path(cfg, artifact::fit_validation));
        out << "member,rmse_K,predicted_rmse_K\n";
        double mean = 0.0;
        for (const auto& r : val.records) mean += r.rmse;
        mean /= static_cast<double>(val.size());
        double ss_res = 0.0, ss_tot = 0.0;
        for (const auto& r : val.records) {
            const double p = gp.predict_rmse(r.theta.values());
            out << r.member << ',' << r.rmse << ',' << p << '\n';
            ss_res += (p - r.rmse) * (p - r.rmse);
            ss_tot += (r.rmse - mean) * (r.rmse - mean);
        }
        rep.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
        rep.validation_rmse = std::sqrt(ss_res / static_cast<double>(val.size()));
        log::info(fmt("fit: validation R2 = %.4f", rep.r2));
        return rep;
    });
}

Chain stage_sample(const RunConfig& cfg, Timing* timing) {
    return in_stage("sample", [&] {
        const GpSurrogate gp = GpSurrogate::load(out_path(cfg, artifact::surrogate));
        const CostConfig cost = cost_config(cfg);
        const auto t0 = Clock::now();
        Chain chain = metropolis_hastings([&](const ParamVector& t) { return gp.predict_cost(t, cost); },
                                          mcmc_config(cfg), "gp");
        if (timing) timing->sample_seconds = seconds_since(t0);
        save_chain(chain, out_path(cfg, artifact::chain));
        log::info(fmt("sample: acceptance rate %.3f", chain.acceptance_rate()));
        return chain;
    });
}

DiagnoseReport stage_diagnose(const RunConfig& cfg) {
    return in_stage("diagnose", [&] {
        const Chain chain = load_chain(out_path(cfg, artifact::chain));
        DiagnoseReport rep;
        rep.stats = chain_stats(chain, cfg.bins);
        for (std::size_t p = 0; p < kNumParams; ++p) rep.sensitivity[p] = sensitivity_index(chain, p, cfg.bins);
        rep.correlation = pairwise_correlation(chain);
        rep.slope_34 = regression_slope(chain, 2, 3);
        rep.acceptance_rate = chain.acceptance_rate();
        rep.samples = chain.size();

        {
            auto out = open_out(out_path(cfg, artifact::histograms));
            out << "param,bin,lo,hi,mass\n";
            for (std::size_t p = 0; p < kNumParams; ++p) {
                for (std::size_t b = 0; b < cfg.bins; ++b) {
                    out << "theta" << p + 1 << ',' << b << ',' << static_cast<double>(b) / cfg.bins << ','
                        << static_cast<double>(b + 1) / cfg.bins << ',' << rep.stats[p].histogram[b] << '\n';
                }
            }
        }
        {
            auto out = open_out(out_path(cfg, artifact::posterior_stats));
            out << "param,name,truth,median,mode,sensitivity_index\n";
            for (std::size_t p = 0; p < kNumParams; ++p) {
                out << "theta" << p + 1 << ',' << kParamNames[p] << ',' << kTruthTheta[p] << ','
                    << rep.stats[p].median << ',' << rep.stats[p].mode << ',' << rep.sensitivity[p] << '\n';
            }
        }
        {
            auto out = open_out(out_path(cfg, artifact::correlation));
            out << "param,theta1,theta2,theta3,theta4\n";
            for (std::size_t i = 0; i < kNumParams; ++i) {
                out << "theta" << i + 1;
                for (std::size_t j = 0; j < kNumParams; ++j) out << ',' << rep.correlation.r[i][j];
                out << '\n';
            }
        }
        return rep;
    });
}

EvalReport stage_evaluate(const RunConfig& cfg, const Twin& twin) {
    return in_stage("evaluate", [&] {
        const Chain chain = load_chain(out_path(cfg, artifact::chain));
        const auto posterior_thetas = thin_chain(chain, cfg.eval_members);
        const auto prior_thetas = lhs_sample(cfg.eval_members, kNumParams, derive_seed(cfg.seed, kTagPrior));
        log::info("evaluate: " + std::to_string(2 * cfg.eval_members) + " full-model runs");
        const auto prior = run_members(twin.model, prior_thetas, twin.eval_times, cfg.workers);
        const auto posterior = run_members(twin.model, posterior_thetas, twin.eval_times, cfg.workers);

        std::vector<double> rmse_prior, rmse_posterior;
        {
            auto out = open_out(out_path(cfg, artifact::eval_members));
            out << "set,index,theta1,theta2,theta3,theta4,tb_rmse_K\n";
            auto dump = [&](const char* set, const std::vector<ScaledParams>& th, const std::vector<MemberOutput>& o,
                            std::vector<double>& rm) {
                for (std::size_t i = 0; i < o.size(); ++i) {
                    rm.push_back(tb_rmse(o[i], twin.eval_obs));
                    out << set << ',' << i;
                    for (double v : th[i].values()) out << ',' << v;
                    out << ',' << rm.back() << '\n';
                }
            };
            dump("prior", prior_thetas, prior, rmse_prior);
            dump("posterior", posterior_thetas, posterior, rmse_posterior);
        }

        EvalReport rep;
        rep.tb_rmse_median_prior = median_of(rmse_prior);
        rep.tb_rmse_median_posterior = median_of(rmse_posterior);
        rep.variables.push_back(score_variable("lai", prior, posterior, twin.truth_eval.lai, &MemberOutput::lai));
        rep.variables.push_back(
            score_variable("sm_surface", prior, posterior, twin.truth_eval.sm_surface, &MemberOutput::sm_surface));
        rep.variables.push_back(
            score_variable("sm_root", prior, posterior, twin.truth_eval.sm_root, &MemberOutput::sm_root));

        auto out = open_out(out_path(cfg, artifact::eval_scores));
        out << "variable,score,prior,posterior,improvement_rate\n";
        out << "tb,median_rmse," << rep.tb_rmse_median_prior << ',' << rep.tb_rmse_median_posterior << ','
            << improvement_rate(rep.tb_rmse_median_posterior, rep.tb_rmse_median_prior) << '\n';
        for (const auto& v : rep.variables) {
            out << v.name << ",bias_ens," << v.bias_prior << ',' << v.bias_posterior << ',' << v.bias_rate() << '\n';
            out << v.name << ",ubrmse_ens," << v.ubrmse_prior << ',' << v.ubrmse_posterior << ','
                << v.ubrmse_rate() << '\n';
        }
        return rep;
    });
}

std::vector<SizeStudyRow> stage_size_study(const RunConfig& cfg, const Twin& twin) {
    return in_stage("size-study", [&] {
        const Chain reference = load_chain(out_path(cfg, artifact::chain));
        SizeStudyConfig s;
        s.sizes = cfg.size_study_sizes;
        s.reference_size = cfg.members;
        s.bins = cfg.bins;
        s.mcmc = mcmc_config(cfg);
        s.cost = cost_config(cfg);
        s.fit = fit_options(cfg);
        s.workers = cfg.workers;
        s.seed = derive_seed(cfg.seed, kTagSizeStudy);
        auto rows = ensemble_size_study(twin.model, twin.obs, s, &reference);
        save_size_study(rows, out_path(cfg, artifact::size_study));
        return rows;
    });
}

void measure_throughput(const Twin& twin, const GpSurrogate& gp, const CostConfig& cost, Timing& timing) {
    Rng rng(derive_seed(0, kTagThroughput));
    const ScaledParams truth(kTruthTheta);
    constexpr int kModelRuns = 2;
    auto t0 = Clock::now();
    for (int i = 0; i < kModelRuns; ++i) (void)simulate_observations(twin.model, truth, 0.0, rng);
    timing.model_seconds_per_run = seconds_since(t0) / kModelRuns;

    const auto points = lhs_design(1000, kNumParams, derive_seed(1, kTagThroughput));
    constexpr std::size_t kEvaluations = 100000;
    double sink = 0.0;
    t0 = Clock::now();
    for (std::size_t i = 0; i < kEvaluations; ++i) sink += gp.predict_cost(points[i % points.size()], cost);
    timing.surrogate_seconds_per_1e5 = seconds_since(t0) * (1e5 / static_cast<double>(kEvaluations));
    if (!std::isfinite(sink)) throw NumericalError("surrogate produced a non-finite cost");
}

TwinReport run_twin(const RunConfig& cfg) {
    TwinReport rep;
    const Twin twin = build_twin(cfg);
    stage_setup(cfg, twin);
    stage_ensemble(cfg, twin, &rep.timing);
    rep.fit = stage_fit(cfg, &rep.timing);
    (void)stage_sample(cfg, &rep.timing);
    rep.diagnose = stage_diagnose(cfg);
    rep.eval = stage_evaluate(cfg, twin);
    if (cfg.size_study) rep.size_study = stage_size_study(cfg, twin);
    in_stage("report", [&] {
        const GpSurrogate gp = GpSurrogate::load(out_path(cfg, artifact::surrogate));
        measure_throughput(twin, gp, cost_config(cfg), rep.timing);
        open_out(out_path(cfg, artifact::summary)) << format_summary(cfg, rep);
        open_out(out_path(cfg, artifact::timing)) << format_timing(cfg, rep.timing);
    });
    return rep;
}

std::string format_summary(const RunConfig& cfg, const TwinReport& r) {
    std::ostringstream s;
    s << "scenario: " << cfg.scenario << (cfg.preset_file.empty() ? "" : " (" + cfg.preset_file + ")") << '\n';
    s << "seed: " << cfg.seed << '\n';
    s << "calibration window: " << (cfg.split ? "first " + std::to_string(cfg.split_years) + " years" : "all years")
      << '\n';
    s << '\n' << "surrogate\n";
    s << fmt("  members %zu, validation members %zu\n", r.fit.members, r.fit.validation_members);
    s << fmt("  length scales %.4f %.4f %.4f %.4f\n", r.fit.hyper.length_scales[0], r.fit.hyper.length_scales[1],
             r.fit.hyper.length_scales[2], r.fit.hyper.length_scales[3]);
    s << fmt("  signal variance %.4g, noise variance %.4g, log likelihood %.4f\n", r.fit.hyper.signal_variance,
             r.fit.hyper.noise_variance, r.fit.log_likelihood);
    s << fmt("  validation R2 %.4f, prediction RMSE %.4f K\n", r.fit.r2, r.fit.validation_rmse);

    s << '\n' << fmt("posterior (%zu samples, acceptance rate %.4f)\n", r.diagnose.samples, r.diagnose.acceptance_rate);
    s << "  param   name   truth  median    mode  index\n";
    for (std::size_t p = 0; p < kNumParams; ++p) {
        s << fmt("  theta%zu  %-5s  %.3f   %.3f   %.3f  %.4f\n", p + 1, kParamNames[p], kTruthTheta[p],
                 r.diagnose.stats[p].median, r.diagnose.stats[p].mode, r.diagnose.sensitivity[p]);
    }
    s << fmt("  corr(theta3, theta4) %.4f, slope %.4f\n", r.diagnose.correlation.r[2][3], r.diagnose.slope_34);

    s << '\n' << "evaluation (prior vs posterior draws)\n";
    s << fmt("  median TB RMSE %.4f K -> %.4f K\n", r.eval.tb_rmse_median_prior, r.eval.tb_rmse_median_posterior);
    for (const auto& v : r.eval.variables) {
        s << fmt("  %-10s bias %.5g -> %.5g (rate %+.4f), ubRMSE %.5g -> %.5g (rate %+.4f)\n", v.name.c_str(),
                 v.bias_prior, v.bias_posterior, v.bias_rate(), v.ubrmse_prior, v.ubrmse_posterior, v.ubrmse_rate());
    }
    if (!r.size_study.empty()) {
        s << '\n' << fmt("ensemble size study (KLD against %zu members)\n", cfg.members);
        for (const auto& row : r.size_study) {
            s << fmt("  %4zu  %.4f %.4f %.4f %.4f\n", row.size, row.kld[0], row.kld[1], row.kld[2], row.kld[3]);
        }
    }
    return s.str();
}

std::string format_timing(const RunConfig& cfg, const Timing& t) {
    std::ostringstream s;
    const double per_eval = t.surrogate_seconds_per_1e5 / 1e5;
    s << fmt("ensemble_seconds %.3f\n", t.ensemble_seconds);
    s << fmt("fit_seconds %.3f\n", t.fit_seconds);
    s << fmt("sample_seconds %.3f\n", t.sample_seconds);
    s << fmt("model_seconds_per_run %.6f\n", t.model_seconds_per_run);
    s << fmt("surrogate_seconds_per_1e5_evaluations %.6f\n", t.surrogate_seconds_per_1e5);
    if (per_eval > 0.0) s << fmt("throughput_ratio %.1f\n", t.model_seconds_per_run / per_eval);
    // Sampling the full model directly versus ensemble + fit + surrogate sampling.
    const double direct = static_cast<double>(cfg.iterations) * t.model_seconds_per_run;
    const double surrogate = static_cast<double>(cfg.members) * t.model_seconds_per_run + t.fit_seconds +
                             t.sample_seconds;
    if (surrogate > 0.0) s << fmt("pipeline_speedup %.1f\n", direct / surrogate);
    return s.str();
}

}  // namespace ecocal
