// nbmc: negative binomial / Poisson matrix completion experiments.

#include "nbmc/dataio.hpp"
#include "nbmc/experiment.hpp"
#include "nbmc/metrics.hpp"
#include "nbmc/noise.hpp"
#include "nbmc/rng.hpp"
#include "nbmc/solver.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace nbmc;

IndexSet mask_from_matrix(const DenseMatrix& mask) {
    IndexSet omega;
    for (Index i = 0; i < mask.rows(); ++i)
        for (Index j = 0; j < mask.cols(); ++j) {
            const double v = mask(i, j);
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument(fmt::format("mask entry ({}, {}) = {} is not 0 or 1", i, j, v));
            if (v == 1.0) omega.push_back({i, j});
        }
    return omega;
}

DenseMatrix matrix_from_mask(const IndexSet& omega, Index rows, Index cols) {
    DenseMatrix m = DenseMatrix::Zero(rows, cols);
    for (const auto& idx : omega) m(idx.row, idx.col) = 1.0;
    return m;
}

struct RunArgs {
    std::string config;
};

struct CompleteArgs {
    std::string input, mask, out, model = "nb", trace;
    std::optional<double> q, r, alpha, beta;
    double tau = 10.0;
    std::uint64_t seed = 0;
    int max_iters = 2000;
    double tol = 1e-6, eta = 1.1, t0 = 1.0;
};

struct CorruptArgs {
    std::string input, noise, out, mask_out;
    double q = 1.0;
    std::uint64_t seed = 0;
};

struct MetricsArgs {
    std::string truth, estimate;
    bool json = false;
};

int run_command(const RunArgs& args) {
    const ExperimentPlan plan = parse_config(args.config);
    ExperimentOutcome outcome = plan.data.kind == DataSource::Kind::pgm ? run_microscopy_pipeline(plan)
                                                                         : run_experiment(plan);
    if (plan.data.kind != DataSource::Kind::pgm) write_outputs(plan, outcome);
    std::cout << format_summary(outcome.table);
    std::cout << fmt::format("results written to {}\n", plan.output_dir.string());
    return 0;
}

int complete_command(const CompleteArgs& args) {
    const DenseMatrix counts = load_matrix_csv(args.input);
    IndexSet omega;
    if (!args.mask.empty()) {
        const DenseMatrix mask = load_matrix_csv(args.mask);
        if (mask.rows() != counts.rows() || mask.cols() != counts.cols())
            throw std::invalid_argument("mask and input dimensions differ");
        omega = mask_from_matrix(mask);
    } else if (args.q) {
        omega = sample_mask(counts.rows(), counts.cols(), {*args.q, args.seed});
    } else {
        omega = sample_mask(counts.rows(), counts.cols(), {1.0, 0});
    }
    const ObservedData obs = restrict(counts, omega);

    SolverConfig config;
    config.tau = args.tau;
    config.eta = args.eta;
    config.max_iters = args.max_iters;
    config.tol = args.tol;
    config.t0 = args.t0;
    const Bounds bounds = default_bounds(obs);
    config.alpha = args.alpha.value_or(bounds.upper);
    config.beta = args.beta.value_or(bounds.lower);
    if (args.model == "poisson") {
        config.objective = Poisson{};
    } else if (args.model == "nb") {
        if (!args.r) throw std::invalid_argument("--model nb needs --r");
        config.objective = NegativeBinomial{*args.r};
    } else {
        throw std::invalid_argument(fmt::format("unknown model '{}' (expected nb or poisson)", args.model));
    }

    const SolveResult res = solve(obs, config);
    save_matrix_csv(res.estimate, args.out);
    if (!args.trace.empty()) {
        std::ofstream trace(args.trace, std::ios::trunc);
        for (std::size_t k = 0; k < res.objective_trace.size(); ++k)
            trace << fmt::format("{{\"iteration\":{},\"objective\":{:.17g},\"data_fit\":{:.17g}}}\n", k,
                                 res.objective_trace[k], res.data_fit_trace[k]);
    }
    std::cout << fmt::format("{} after {} iterations, objective {:.10g}, t = {:.6g}, {} backtracks\n",
                             to_string(res.termination), res.iterations, res.objective_trace.back(), res.final_t,
                             res.backtracks);
    return 0;
}

int corrupt_command(const CorruptArgs& args) {
    const DenseMatrix truth = load_matrix_csv(args.input);
    const NoiseFamily family = parse_noise_family(args.noise);
    const CountMatrix noisy = corrupt(truth, {family, derive_seed(args.seed, {fnv1a64("noise")})});
    const IndexSet omega = sample_mask(truth.rows(), truth.cols(), {args.q, derive_seed(args.seed, {fnv1a64("mask")})});
    save_matrix_csv(noisy, args.out);
    const std::string mask_path = args.mask_out.empty() ? args.out + ".mask.csv" : args.mask_out;
    save_matrix_csv(matrix_from_mask(omega, truth.rows(), truth.cols()), mask_path);
    std::cout << fmt::format("{} noise, {} of {} entries observed; mask written to {}\n", noise_id(family),
                             omega.size(), truth.size(), mask_path);
    return 0;
}

int metrics_command(const MetricsArgs& args) {
    const MetricReport rep = evaluate(load_matrix_csv(args.truth), load_matrix_csv(args.estimate));
    if (args.json) {
        // JSON has no infinity literal; an exact match reports null.
        const std::string psnr = std::isfinite(rep.psnr_db) ? fmt::format("{:.17g}", rep.psnr_db) : "null";
        std::cout << fmt::format("{{\"psnr_db\":{},\"nrmse\":{:.17g},\"s\":{:.17g},\"m_max\":{:.17g},\"m_min\":{:.17g}}}\n",
                                 psnr, rep.nrmse, rep.s, rep.m_max, rep.m_min);
    } else {
        std::cout << fmt::format("PSNR  {:.4f} dB\nNRMSE {:.4f} %\n", rep.psnr_db, 100.0 * rep.nrmse);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix completion for negative binomial and Poisson count data"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
    run->add_option("config", run_args.config, "Experiment config (key = value with [sections])")
        ->required()
        ->check(CLI::ExistingFile);

    CompleteArgs ca;
    auto* complete = app.add_subcommand("complete", "Complete one count matrix");
    complete->add_option("--input", ca.input, "Count matrix CSV")->required()->check(CLI::ExistingFile);
    auto* mask_opt = complete->add_option("--mask", ca.mask, "0/1 CSV of observed positions")->check(CLI::ExistingFile);
    complete->add_option("--q", ca.q, "Observe a random fraction q of entries instead of --mask")->excludes(mask_opt);
    complete->add_option("--seed", ca.seed, "Seed for --q");
    complete->add_option("--model", ca.model, "nb or poisson")->check(CLI::IsMember({"nb", "poisson"}));
    complete->add_option("--r", ca.r, "NB dispersion");
    complete->add_option("--tau", ca.tau, "Nuclear-norm weight");
    complete->add_option("--alpha", ca.alpha, "Upper bound for observed entries");
    complete->add_option("--beta", ca.beta, "Lower bound for observed entries");
    complete->add_option("--max-iters", ca.max_iters);
    complete->add_option("--tol", ca.tol);
    complete->add_option("--eta", ca.eta);
    complete->add_option("--t0", ca.t0);
    complete->add_option("--out", ca.out, "Output CSV")->required();
    complete->add_option("--trace", ca.trace, "Write per-iteration objective values as JSON lines");

    CorruptArgs co;
    auto* corrupt_cmd = app.add_subcommand("corrupt", "Add count noise to a matrix and draw a mask");
    corrupt_cmd->add_option("--input", co.input, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
    corrupt_cmd->add_option("--noise", co.noise, "nb:R, poisson or none")->required();
    corrupt_cmd->add_option("--q", co.q, "Fraction of observed entries");
    corrupt_cmd->add_option("--seed", co.seed);
    corrupt_cmd->add_option("--out", co.out, "Noisy count CSV")->required();
    corrupt_cmd->add_option("--mask-out", co.mask_out, "Mask CSV (default: <out>.mask.csv)");

    MetricsArgs ma;
    auto* metrics = app.add_subcommand("metrics", "PSNR and NRMSE of an estimate");
    metrics->add_option("--truth", ma.truth)->required()->check(CLI::ExistingFile);
    metrics->add_option("--estimate", ma.estimate)->required()->check(CLI::ExistingFile);
    metrics->add_flag("--json", ma.json);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(run_args);
        if (complete->parsed()) return complete_command(ca);
        if (corrupt_cmd->parsed()) return corrupt_command(co);
        if (metrics->parsed()) return metrics_command(ma);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
