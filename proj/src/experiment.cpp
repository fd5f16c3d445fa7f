#include "nbmc/experiment.hpp"

#include "nbmc/metrics.hpp"
#include "nbmc/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace nbmc {

namespace {

std::string format_number(double v) {
    return fmt::format("{:.10g}", v);
}

std::string file_tag(std::string text) {
    std::replace_if(text.begin(), text.end(), [](char c) { return c == ':' || c == '(' || c == ')' || c == '='; }, '-');
    return text;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    out << content;
    if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

DenseMatrix synthetic_truth(const DataSource& src, std::uint64_t seed) {
    Rng rng(seed);
    const Index k = src.rank - 1;
    DenseMatrix m = DenseMatrix::Zero(src.rows, src.cols);
    if (k > 0) {
        DenseMatrix u(src.rows, k), v(src.cols, k);
        for (Index i = 0; i < u.size(); ++i) u.data()[i] = rng.uniform();
        for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
        m = u * v.transpose();
        const double peak = m.maxCoeff();
        if (peak > 0.0) m /= peak;
    }
    return (src.min_value + (src.max_value - src.min_value) * m.array()).matrix();
}

// Image rendering of a matrix (patch matrices are folded back into images).
DenseMatrix as_image(const DenseMatrix& m, const std::optional<PatchLayout>& layout) {
    return layout ? unpatchify(m, *layout) : m;
}

void write_heatmap(const DenseMatrix& m, const std::optional<PatchLayout>& layout, double peak,
                   const std::filesystem::path& path) {
    const DenseMatrix img = as_image(m, layout);
    const double scale = peak > 0.0 ? 255.0 / peak : 1.0;
    save_pgm(img * scale, path, 255);
}

struct CaseKey {
    std::size_t noise_index;
    std::size_t q_index;
    int trial;
};

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
    ModelSpec m;
    m.id = std::string(text);
    if (text == "nb") {
        m.kind = Kind::nb_matched;
    } else if (text == "poisson") {
        m.kind = Kind::poisson;
    } else if (text == "nb-approx-poisson") {
        m.kind = Kind::nb_fixed;
        m.r = kPoissonApproxDispersion;
    } else if (text.starts_with("nb:")) {
        const auto family = parse_noise_family(text);
        m.kind = Kind::nb_fixed;
        m.r = std::get<NegativeBinomial>(family).r;
    } else {
        throw std::invalid_argument(
            fmt::format("unrecognised model '{}' (expected nb, nb:R, poisson or nb-approx-poisson)", text));
    }
    return m;
}

ObjectiveKind ModelSpec::objective_for(const NoiseFamily& noise) const {
    switch (kind) {
        case Kind::poisson:
            return Poisson{};
        case Kind::nb_fixed:
            return NegativeBinomial{r};
        case Kind::nb_matched:
            if (const auto* nb = std::get_if<NegativeBinomial>(&noise)) return *nb;
            return NegativeBinomial{kPoissonApproxDispersion};
    }
    return Poisson{};
}

void ExperimentPlan::validate() const {
    std::vector<std::string> problems;
    if (noise_list.empty()) problems.push_back("noise list is empty");
    if (q_list.empty()) problems.push_back("q list is empty");
    for (double q : q_list)
        if (!(q > 0.0 && q <= 1.0)) problems.push_back(fmt::format("q = {} is outside (0, 1]", q));
    if (models.empty()) problems.push_back("model list is empty");
    if (trials < 1) problems.push_back(fmt::format("trials must be at least 1 (got {})", trials));
    if (threads < 1) problems.push_back(fmt::format("threads must be at least 1 (got {})", threads));
    if (tau_grid.empty()) problems.push_back("tau grid is empty");
    for (double t : tau_grid)
        if (!(t > 0.0)) problems.push_back(fmt::format("tau grid value {} is not positive", t));
    if (solver.max_iters < 0) problems.push_back("max_iters must be nonnegative");
    if (!(solver.tol > 0.0)) problems.push_back("tol must be positive");
    if (!(solver.eta > 1.0)) problems.push_back("eta must exceed 1");
    if (!(solver.t0 > 0.0)) problems.push_back("t0 must be positive");
    if (solver.alpha && solver.beta && !(*solver.beta < *solver.alpha)) problems.push_back("beta must be below alpha");
    if (solver.beta && !(*solver.beta > 0.0)) problems.push_back("beta must be positive");
    switch (data.kind) {
        case DataSource::Kind::synthetic:
            if (data.rank < 1 || data.rank > std::min(data.rows, data.cols))
                problems.push_back(fmt::format("synthetic rank {} does not fit a {}x{} matrix", data.rank, data.rows,
                                               data.cols));
            if (!(data.min_value >= 0.0 && data.max_value > data.min_value))
                problems.push_back("synthetic range needs 0 <= min_value < max_value");
            break;
        case DataSource::Kind::csv:
        case DataSource::Kind::pgm:
            if (data.path.empty()) problems.push_back("data path is empty");
            else if (!std::filesystem::exists(data.path))
                problems.push_back(fmt::format("data file '{}' does not exist", data.path.string()));
            break;
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

DenseMatrix make_ground_truth(const DataSource& source, std::uint64_t seed, std::optional<PatchLayout>* layout) {
    DenseMatrix m;
    std::optional<PatchLayout> patches;
    switch (source.kind) {
        case DataSource::Kind::synthetic:
            m = synthetic_truth(source, seed);
            break;
        case DataSource::Kind::csv:
            m = load_matrix_csv(source.path);
            break;
        case DataSource::Kind::pgm: {
            const DenseMatrix image = load_pgm(source.path);
            patches = PatchLayout::make(image.rows(), image.cols(), source.patch_size);
            m = patchify(image, source.patch_size);
            break;
        }
    }
    if (source.truncate_rank) m = low_rank_approx(m, *source.truncate_rank);
    if (layout) *layout = patches;
    return m;
}

std::uint64_t case_seed(std::uint64_t master, const std::string& noise, double q, int trial, std::string_view purpose) {
    return derive_seed(master, {fnv1a64(noise), std::bit_cast<std::uint64_t>(q), static_cast<std::uint64_t>(trial),
                                fnv1a64(purpose)});
}

ExperimentOutcome run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    ExperimentOutcome outcome;
    outcome.ground_truth = make_ground_truth(plan.data, derive_seed(plan.master_seed, {fnv1a64("ground-truth")}),
                                             &outcome.layout);
    const DenseMatrix& truth = outcome.ground_truth;
    // Truncated SVDs can dip slightly below zero; the noise means cannot.
    const DenseMatrix noise_mean = truth.cwiseMax(0.0);

    std::vector<CaseKey> cases;
    for (std::size_t ni = 0; ni < plan.noise_list.size(); ++ni)
        for (std::size_t qi = 0; qi < plan.q_list.size(); ++qi)
            for (int t = 0; t < plan.trials; ++t) cases.push_back({ni, qi, t});

    const std::size_t n_models = plan.models.size();
    outcome.records.resize(cases.size() * n_models);
    if (plan.heatmaps) std::filesystem::create_directories(plan.output_dir / "heatmaps");
    std::mutex io_mutex;

    auto run_case = [&](std::size_t case_index) {
        const CaseKey& c = cases[case_index];
        const NoiseFamily& family = plan.noise_list[c.noise_index];
        const std::string nid = noise_id(family);
        const double q = plan.q_list[c.q_index];

        const CountMatrix y = corrupt(noise_mean, {family, case_seed(plan.master_seed, nid, q, c.trial, "noise")});
        const ObservedData obs =
            restrict(y, sample_mask(truth.rows(), truth.cols(), {q, case_seed(plan.master_seed, nid, q, c.trial, "mask")}));
        const Bounds derived = default_bounds(obs);

        SolverConfig base;
        base.eta = plan.solver.eta;
        base.max_iters = plan.solver.max_iters;
        base.tol = plan.solver.tol;
        base.t0 = plan.solver.t0;
        base.alpha = plan.solver.alpha.value_or(derived.upper);
        base.beta = plan.solver.beta.value_or(derived.lower);

        const bool draw = plan.heatmaps && c.trial == 0;
        const std::string prefix = fmt::format("{}_q{}", file_tag(nid), format_number(q));
        const double peak = truth.maxCoeff();
        if (draw) {
            std::lock_guard lock(io_mutex);
            const auto dir = plan.output_dir / "heatmaps";
            write_heatmap(truth, outcome.layout, peak, dir / (prefix + "_truth.pgm"));
            write_heatmap(obs.to_dense(0.0), outcome.layout, peak, dir / (prefix + "_observed.pgm"));
        }

        for (std::size_t mi = 0; mi < n_models; ++mi) {
            TrialRecord& rec = outcome.records[case_index * n_models + mi];
            rec.noise = nid;
            rec.q = q;
            rec.model = plan.models[mi].id;
            rec.trial = c.trial;
            SolverConfig config = base;
            config.objective = plan.models[mi].objective_for(family);
            try {
                auto search = grid_search_tau(obs, config, plan.tau_grid, truth);
                const MetricReport rep = evaluate(truth, search.best_result.estimate);
                rec.ok = true;
                rec.tau = search.best_tau;
                rec.psnr_db = rep.psnr_db;
                rec.nrmse = rep.nrmse;
                rec.iterations = search.best_result.iterations;
                rec.termination = to_string(search.best_result.termination);
                if (plan.trace) {
                    rec.objective_trace = std::move(search.best_result.objective_trace);
                    rec.data_fit_trace = std::move(search.best_result.data_fit_trace);
                }
                if (draw) {
                    std::lock_guard lock(io_mutex);
                    write_heatmap(search.best_result.estimate, outcome.layout, peak,
                                  plan.output_dir / "heatmaps" / (prefix + "_" + file_tag(rec.model) + ".pgm"));
                }
            } catch (const std::exception& ex) {
                rec.ok = false;
                rec.error = ex.what();
            }
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(1, plan.threads));
    if (workers == 1) {
        for (std::size_t i = 0; i < cases.size(); ++i) run_case(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, cases.size()); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cases.size(); i = next++) {
                    try {
                        run_case(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }

    outcome.table = aggregate(outcome.records);
    return outcome;
}

ResultTable aggregate(const std::vector<TrialRecord>& records) {
    ResultTable table;
    // Records arrive grouped by (noise, q) with models interleaved per trial.
    auto find_cell = [&](const TrialRecord& r) -> ResultCell& {
        for (auto& cell : table)
            if (cell.noise == r.noise && cell.q == r.q && cell.model == r.model) return cell;
        table.push_back({r.noise, r.q, r.model});
        return table.back();
    };
    std::vector<std::vector<const TrialRecord*>> members;
    for (const auto& r : records) {
        ResultCell& cell = find_cell(r);
        const auto idx = static_cast<std::size_t>(&cell - table.data());
        if (members.size() <= idx) members.resize(idx + 1);
        members[idx].push_back(&r);
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
        ResultCell& cell = table[i];
        std::vector<double> psnr, nrmse;
        for (const auto* r : members[i]) {
            if (r->ok) {
                psnr.push_back(r->psnr_db);
                nrmse.push_back(r->nrmse);
            } else {
                ++cell.n_failures;
            }
        }
        cell.n_trials = static_cast<int>(psnr.size());
        if (psnr.empty()) {
            throw std::runtime_error(fmt::format("every trial failed for noise={} q={} model={}: {}", cell.noise,
                                                 format_number(cell.q), cell.model, members[i].front()->error));
        }
        auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
            double sum = 0.0;
            for (double x : v) sum += x;
            mean = sum / static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        };
        mean_sd(psnr, cell.mean_psnr, cell.sd_psnr);
        mean_sd(nrmse, cell.mean_nrmse, cell.sd_nrmse);
    }
    return table;
}

std::string format_results_csv(const ResultTable& table) {
    std::string out = "noise,q,model,mean_psnr,sd_psnr,mean_nrmse,sd_nrmse,n_trials,n_failures\n";
    for (const auto& c : table) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", c.noise, format_number(c.q), c.model,
                           format_number(c.mean_psnr), format_number(c.sd_psnr), format_number(c.mean_nrmse),
                           format_number(c.sd_nrmse), c.n_trials, c.n_failures);
    }
    return out;
}

std::string format_summary(const ResultTable& table) {
    std::string out = fmt::format("{:<12} {:>6} {:<20} {:>18} {:>20} {:>7} {:>8}\n", "noise", "q", "model",
                                  "PSNR dB (sd)", "NRMSE % (sd)", "trials", "failed");
    for (const auto& c : table) {
        out += fmt::format("{:<12} {:>6} {:<20} {:>18} {:>20} {:>7} {:>8}\n", c.noise, format_number(c.q), c.model,
                           fmt::format("{:.2f} ({:.2f})", c.mean_psnr, c.sd_psnr),
                           fmt::format("{:.2f} ({:.2f})", 100.0 * c.mean_nrmse, 100.0 * c.sd_nrmse), c.n_trials,
                           c.n_failures);
    }
    return out;
}

std::string format_trials_csv(const std::vector<TrialRecord>& records) {
    std::string out = "noise,q,model,trial,status,tau,psnr,nrmse,iterations,termination\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.noise, format_number(r.q), r.model, r.trial,
                           r.ok ? "ok" : "failed", format_number(r.tau), format_number(r.psnr_db),
                           format_number(r.nrmse), r.iterations, r.ok ? r.termination : "error");
    }
    return out;
}

std::string format_trace_jsonl(const std::vector<TrialRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        if (!r.ok) continue;
        for (std::size_t k = 0; k < r.objective_trace.size(); ++k) {
            out += fmt::format(
                "{{\"noise\":\"{}\",\"q\":{},\"model\":\"{}\",\"trial\":{},\"tau\":{},\"iteration\":{},"
                "\"objective\":{:.17g},\"data_fit\":{:.17g}}}\n",
                r.noise, format_number(r.q), r.model, r.trial, format_number(r.tau), k, r.objective_trace[k],
                r.data_fit_trace[k]);
        }
    }
    return out;
}

void write_outputs(const ExperimentPlan& plan, const ExperimentOutcome& outcome) {
    std::filesystem::create_directories(plan.output_dir);
    write_file(plan.output_dir / "results.csv", format_results_csv(outcome.table));
    write_file(plan.output_dir / "summary.txt", format_summary(outcome.table));
    write_file(plan.output_dir / "trials.csv", format_trials_csv(outcome.records));
    if (plan.trace) write_file(plan.output_dir / "traces.jsonl", format_trace_jsonl(outcome.records));
}

ExperimentOutcome run_microscopy_pipeline(const ExperimentPlan& plan) {
    if (plan.data.kind != DataSource::Kind::pgm) {
        throw std::invalid_argument("the microscopy pipeline needs a pgm data source");
    }
    ExperimentPlan with_images = plan;
    with_images.heatmaps = true;
    ExperimentOutcome outcome = run_experiment(with_images);
    write_outputs(with_images, outcome);
    return outcome;
}

}  // namespace nbmc
