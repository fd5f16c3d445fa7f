#include "nbmc/solver.hpp"

#include "nbmc/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nbmc {

namespace {

struct Candidate {
    DenseMatrix x;
    double data_fit;
    double objective;
};

// Clamps observed entries into the box; returns whether anything moved.
bool clamp_observed(DenseMatrix& x, const ObservedData& obs, const Bounds& box) {
    bool moved = false;
    for (const auto& e : obs.entries()) {
        double& v = x(e.row, e.col);
        const double c = std::clamp(v, box.lower, box.upper);
        if (c != v) {
            v = c;
            moved = true;
        }
    }
    return moved;
}

Candidate evaluate_step(const DenseMatrix& x, const DenseMatrix& grad, double t, const ObservedData& obs,
                        const SolverConfig& config) {
    const DenseMatrix z = x - grad / t;
    auto thresholded = svt_with_norm(z, config.tau / t);
    double nuc = thresholded.nuclear_norm;
    if (clamp_observed(thresholded.value, obs, {config.beta, config.alpha})) nuc = nuclear_norm(thresholded.value);
    const double fit = negloglik(config.objective, thresholded.value, obs);
    return {std::move(thresholded.value), fit, fit + config.tau * nuc};
}

}  // namespace

void SolverConfig::validate() const {
    std::vector<std::string> problems;
    if (!(tau > 0.0) || !std::isfinite(tau)) problems.push_back(fmt::format("tau must be positive (got {})", tau));
    if (!(eta > 1.0) || !std::isfinite(eta)) problems.push_back(fmt::format("eta must exceed 1 (got {})", eta));
    if (!(beta > 0.0)) problems.push_back(fmt::format("beta must be positive (got {})", beta));
    if (!(beta < alpha) || !std::isfinite(alpha))
        problems.push_back(fmt::format("bounds need beta < alpha (got beta={}, alpha={})", beta, alpha));
    if (max_iters < 0) problems.push_back(fmt::format("max_iters must be nonnegative (got {})", max_iters));
    if (!(tol > 0.0)) problems.push_back(fmt::format("tol must be positive (got {})", tol));
    if (!(t0 > 0.0) || !std::isfinite(t0)) problems.push_back(fmt::format("t0 must be positive (got {})", t0));
    if (const auto* nb = std::get_if<NegativeBinomial>(&objective); nb && !(nb->r > 0.0 && std::isfinite(nb->r)))
        problems.push_back(fmt::format("dispersion r must be positive (got {})", nb->r));
    if (!problems.empty()) {
        throw std::invalid_argument(fmt::format("invalid solver config: {}", fmt::join(problems, "; ")));
    }
}

Bounds default_bounds(const ObservedData& obs) {
    const double lower = std::max(1e-6, 1e-3 * obs.min_positive_count());
    const double upper = std::max(1.5 * obs.max_count(), 2.0 * lower);
    return {lower, upper};
}

std::string to_string(Termination t) {
    return t == Termination::converged ? "converged" : "max_iters";
}

DenseMatrix init_estimate(const ObservedData& obs, const SolverConfig& config) {
    DenseMatrix x = DenseMatrix::Constant(obs.rows(), obs.cols(), 0.5 * (config.alpha + config.beta));
    for (const auto& e : obs.entries()) x(e.row, e.col) = std::max(e.count, config.beta);
    return x;
}

DenseMatrix prox_step(const DenseMatrix& x, const DenseMatrix& grad, double t, double tau) {
    if (!(t > 0.0)) throw std::invalid_argument(fmt::format("inverse step size must be positive, got {}", t));
    return svt(x - grad / t, tau / t);
}

DenseMatrix prox_step(const DenseMatrix& x, const DenseMatrix& grad, double t, double tau, const ObservedData& obs,
                      const Bounds& box) {
    DenseMatrix out = prox_step(x, grad, t, tau);
    clamp_observed(out, obs, box);
    return out;
}

SolveResult solve(const ObservedData& obs, const SolverConfig& config) {
    config.validate();
    return solve_from(obs, config, init_estimate(obs, config));
}

SolveResult solve_from(const ObservedData& obs, const SolverConfig& config, DenseMatrix start) {
    config.validate();
    if (obs.empty()) throw std::invalid_argument("solve needs at least one observed entry");
    if (start.rows() != obs.rows() || start.cols() != obs.cols()) {
        throw std::invalid_argument(fmt::format("start is {}x{} but observations are {}x{}", start.rows(),
                                                start.cols(), obs.rows(), obs.cols()));
    }
    require_finite(start, "starting estimate");

    SolveResult res;
    res.estimate = std::move(start);
    double fit = negloglik(config.objective, res.estimate, obs);
    double objective = fit + config.tau * nuclear_norm(res.estimate);
    if (!std::isfinite(objective)) {
        throw SolverError("starting estimate is outside the likelihood domain at an observed entry");
    }
    res.objective_trace.push_back(objective);
    res.data_fit_trace.push_back(fit);

    double t = config.t0;
    double err = std::numeric_limits<double>::infinity();
    int k = 0;
    while (k < config.max_iters && err > config.tol) {
        const DenseMatrix grad = gradient(config.objective, res.estimate, obs);
        Candidate next = evaluate_step(res.estimate, grad, t, obs, config);
        // Backtrack: grow the inverse step size until the objective does not increase.
        while (!(next.objective <= objective)) {
            t *= config.eta;
            if (++res.backtracks > kMaxBacktracks || !std::isfinite(t)) {
                throw SolverError(fmt::format("backtracking gave up at iteration {} after {} multiplications "
                                              "(t = {}, objective = {}, candidate = {})",
                                              k, res.backtracks, t, objective, next.objective));
            }
            next = evaluate_step(res.estimate, grad, t, obs, config);
        }
        err = objective - next.objective;
        res.estimate = std::move(next.x);
        objective = next.objective;
        fit = next.data_fit;
        res.objective_trace.push_back(objective);
        res.data_fit_trace.push_back(fit);
        ++k;
    }
    res.iterations = k;
    res.termination = err <= config.tol ? Termination::converged : Termination::max_iters;
    res.final_t = t;
    return res;
}

GridSearchResult grid_search_tau(const ObservedData& obs, const SolverConfig& config_template,
                                 std::span<const double> tau_grid, const DenseMatrix& ground_truth) {
    if (tau_grid.empty()) throw std::invalid_argument("tau grid is empty");
    GridSearchResult out;
    bool found = false;
    for (const double tau : tau_grid) {
        SolverConfig config = config_template;
        config.tau = tau;
        try {
            SolveResult res = solve(obs, config);
            const double score = evaluate(ground_truth, res.estimate).nrmse;
            out.nrmse_per_tau.emplace_back(score);
            const bool better = !found || score < out.best_nrmse || (score == out.best_nrmse && tau < out.best_tau);
            if (better) {
                found = true;
                out.best_tau = tau;
                out.best_nrmse = score;
                out.best_result = std::move(res);
            }
        } catch (const std::exception& ex) {
            out.nrmse_per_tau.emplace_back(std::nullopt);
            out.failures.push_back(fmt::format("tau={}: {}", tau, ex.what()));
        }
    }
    if (!found) {
        throw SolverError(fmt::format("every tau in the grid failed; first failure: {}", out.failures.front()));
    }
    return out;
}

std::vector<double> default_tau_grid() {
    std::vector<double> grid;
    for (int v = 10; v <= 310; v += 10) grid.push_back(v);
    return grid;
}

}  // namespace nbmc
