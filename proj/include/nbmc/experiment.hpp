#pragma once

#include "nbmc/dataio.hpp"
#include "nbmc/noise.hpp"
#include "nbmc/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nbmc {

/// Where the ground truth M comes from.
struct DataSource {
    enum class Kind { synthetic, csv, pgm };
    Kind kind = Kind::synthetic;
    std::filesystem::path path;

    // synthetic: constant offset plus a nonnegative rank-(rank - 1) product,
    // scaled so the entries span [min_value, max_value].
    Index rows = 30;
    Index cols = 30;
    Index rank = 2;
    double min_value = 5.0;
    double max_value = 50.0;

    // pgm: the image is cut into patch_size x patch_size patches.
    Index patch_size = 8;
    /// Truncation rank applied to the loaded matrix (patch matrix for pgm).
    std::optional<Index> truncate_rank;
};

/// A model to fit in every trial.
struct ModelSpec {
    enum class Kind {
        nb_matched,  // NB with the noise's own r; r = 1000 under Poisson or no noise
        nb_fixed,    // NB with a fixed r
        poisson,
    };
    std::string id;
    Kind kind = Kind::nb_matched;
    double r = 0.0;

    /// "nb", "nb:R", "poisson" or "nb-approx-poisson" (NB with r = 1000).
    static ModelSpec parse(std::string_view text);
    ObjectiveKind objective_for(const NoiseFamily& noise) const;
};

/// r used by the NB model to stand in for the Poisson model.
inline constexpr double kPoissonApproxDispersion = 1000.0;

struct SolverDefaults {
    int max_iters = 2000;
    double tol = 1e-6;
    double eta = 1.1;
    double t0 = 1.0;
    std::optional<double> alpha;  // derived from the observations when unset
    std::optional<double> beta;
};

struct ExperimentPlan {
    DataSource data;
    std::vector<NoiseFamily> noise_list;
    std::vector<double> q_list;
    std::vector<ModelSpec> models;
    int trials = 20;
    SolverDefaults solver;
    std::vector<double> tau_grid = default_tau_grid();
    std::uint64_t master_seed = 0;
    int threads = 1;
    std::filesystem::path output_dir = "results";
    bool heatmaps = false;
    bool trace = false;

    /// Throws ConfigError listing every problem.
    void validate() const;
};

struct TrialRecord {
    std::string noise;
    double q = 0.0;
    std::string model;
    int trial = 0;
    bool ok = false;
    double tau = 0.0;
    double psnr_db = 0.0;
    double nrmse = 0.0;
    int iterations = 0;
    std::string termination;
    std::string error;
    std::vector<double> objective_trace;
    std::vector<double> data_fit_trace;
};

struct ResultCell {
    std::string noise;
    double q = 0.0;
    std::string model;
    double mean_psnr = 0.0;
    double sd_psnr = 0.0;
    double mean_nrmse = 0.0;
    double sd_nrmse = 0.0;
    int n_trials = 0;    // successful trials
    int n_failures = 0;
};

using ResultTable = std::vector<ResultCell>;

struct ExperimentOutcome {
    DenseMatrix ground_truth;
    std::optional<PatchLayout> layout;
    /// Canonical order: noise, then q, then trial, then model.
    std::vector<TrialRecord> records;
    ResultTable table;
};

/// Ground truth described by `source`. Synthetic truths draw from `seed`.
DenseMatrix make_ground_truth(const DataSource& source, std::uint64_t seed, std::optional<PatchLayout>* layout = nullptr);

/// Seed for one (noise, q, trial, purpose) case. Depends only on the case
/// identity, never on iteration order.
std::uint64_t case_seed(std::uint64_t master, const std::string& noise, double q, int trial, std::string_view purpose);

/// Runs every (noise, q, trial) case, fits every model with a tau grid search
/// against the ground truth and aggregates the metrics. Heatmaps are written to
/// plan.output_dir/heatmaps when plan.heatmaps is set.
ExperimentOutcome run_experiment(const ExperimentPlan& plan);

/// Means and sample standard deviations over successful trials. Throws if every
/// trial of some cell failed.
ResultTable aggregate(const std::vector<TrialRecord>& records);

/// noise,q,model,mean_psnr,sd_psnr,mean_nrmse,sd_nrmse,n_trials,n_failures
std::string format_results_csv(const ResultTable& table);
std::string format_summary(const ResultTable& table);
std::string format_trials_csv(const std::vector<TrialRecord>& records);
/// One JSON object per accepted iteration of every successful trial.
std::string format_trace_jsonl(const std::vector<TrialRecord>& records);

/// results.csv, summary.txt, trials.csv and, if plan.trace, traces.jsonl.
void write_outputs(const ExperimentPlan& plan, const ExperimentOutcome& outcome);

/// Image pipeline: requires a pgm source; writes reconstructions of the first
/// trial as images next to the usual tables.
ExperimentOutcome run_microscopy_pipeline(const ExperimentPlan& plan);

/// Parses a key=value config with [section] headers. Unknown keys, malformed
/// values and missing fields are all reported in a single ConfigError. The
/// NBMC_SEED environment variable, when set, overrides master_seed.
ExperimentPlan parse_config(const std::filesystem::path& path);
ExperimentPlan parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

}  // namespace nbmc
