#pragma once

#include "ecocal/config.hpp"
#include "ecocal/diagnostics.hpp"
#include "ecocal/ensemble.hpp"
#include "ecocal/mcmc.hpp"
#include "ecocal/surrogate.hpp"

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecocal {

// Any failure inside a pipeline stage, tagged with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// File names inside the output directory. Files whose name starts with
// "timing" hold wall-clock measurements; every other file is a deterministic
// function of the configuration.
namespace artifact {
inline constexpr const char* config = "config.txt";
inline constexpr const char* observations = "observations.csv";
inline constexpr const char* truth = "truth_eval.csv";
inline constexpr const char* ensemble = "ensemble.csv";
inline constexpr const char* validation = "validation.csv";
inline constexpr const char* surrogate = "surrogate.txt";
inline constexpr const char* fit_restarts = "fit_restarts.csv";
inline constexpr const char* fit_validation = "fit_validation.csv";
inline constexpr const char* chain = "chain.csv";
inline constexpr const char* histograms = "histograms.csv";
inline constexpr const char* posterior_stats = "posterior_stats.csv";
inline constexpr const char* correlation = "correlation.csv";
inline constexpr const char* eval_members = "eval_members.csv";
inline constexpr const char* eval_scores = "eval_scores.csv";
inline constexpr const char* size_study = "size_study.csv";
inline constexpr const char* summary = "summary.txt";
inline constexpr const char* timing = "timing.txt";
}  // namespace artifact

/// Synthetic twin: forward model over the calibration window, observations
/// generated with the truth parameters, and truth output over the evaluation
/// window.
struct Twin {
    ForwardModel model;  // model.times are the calibration observation hours
    ObservationSeries obs;
    std::vector<double> eval_times;
    ObservationSeries eval_obs;
    MemberOutput truth_eval;
};

[[nodiscard]] ScenarioPreset resolve_preset(const RunConfig& cfg);
[[nodiscard]] Twin build_twin(const RunConfig& cfg);

struct FitReport {
    GpHyper hyper;
    double log_likelihood = 0.0;
    double r2 = 0.0;             // on the independent validation set, RMSE in K
    double validation_rmse = 0.0;  // of the predictions, K
    std::size_t members = 0;
    std::size_t validation_members = 0;
};

struct DiagnoseReport {
    std::vector<ParamStats> stats;
    std::array<double, kNumParams> sensitivity{};
    CorrelationMatrix correlation;
    double slope_34 = 0.0;  // regression of theta4 on theta3
    double acceptance_rate = 0.0;
    std::size_t samples = 0;
};

struct VariableScores {
    std::string name;
    double bias_prior = 0.0;
    double bias_posterior = 0.0;
    double ubrmse_prior = 0.0;
    double ubrmse_posterior = 0.0;
    [[nodiscard]] double bias_rate() const { return improvement_rate(bias_posterior, bias_prior); }
    [[nodiscard]] double ubrmse_rate() const { return improvement_rate(ubrmse_posterior, ubrmse_prior); }
};

struct EvalReport {
    double tb_rmse_median_prior = 0.0;
    double tb_rmse_median_posterior = 0.0;
    std::vector<VariableScores> variables;  // lai, sm_surface, sm_root
};

/// Wall-clock measurements of one run. Never part of the deterministic
/// artifacts.
struct Timing {
    double ensemble_seconds = 0.0;
    double fit_seconds = 0.0;
    double sample_seconds = 0.0;
    double model_seconds_per_run = 0.0;             // one full-model evaluation, single thread
    double surrogate_seconds_per_1e5 = 0.0;         // 10^5 surrogate cost evaluations
};

// Each stage reads its inputs from and writes its outputs to cfg.output_dir.
// Exceptions leave as StageError; files written before the failure remain.
void stage_setup(const RunConfig& cfg, const Twin& twin);
void stage_ensemble(const RunConfig& cfg, const Twin& twin, Timing* timing = nullptr);
FitReport stage_fit(const RunConfig& cfg, Timing* timing = nullptr);
Chain stage_sample(const RunConfig& cfg, Timing* timing = nullptr);
DiagnoseReport stage_diagnose(const RunConfig& cfg);
EvalReport stage_evaluate(const RunConfig& cfg, const Twin& twin);
std::vector<SizeStudyRow> stage_size_study(const RunConfig& cfg, const Twin& twin);

/// One full-model evaluation and 10^5 surrogate evaluations, timed.
void measure_throughput(const Twin& twin, const GpSurrogate& gp, const CostConfig& cost, Timing& timing);

struct TwinReport {
    FitReport fit;
    DiagnoseReport diagnose;
    EvalReport eval;
    std::vector<SizeStudyRow> size_study;
    Timing timing;
};

/// Every stage in order, then summary.txt and timing.txt.
TwinReport run_twin(const RunConfig& cfg);

[[nodiscard]] std::string format_summary(const RunConfig& cfg, const TwinReport& report);
[[nodiscard]] std::string format_timing(const RunConfig& cfg, const Timing& timing);

}  // namespace ecocal
