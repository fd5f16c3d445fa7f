#pragma once

#include "nbmc/linalg.hpp"
#include "nbmc/objective.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbmc {

/// Parameters of the proximal gradient solver for
///   min_X F(X) + tau * ||X||_*.
struct SolverConfig {
    double tau = 10.0;
    double eta = 1.1;     // backtracking multiplier on the inverse step size
    double alpha = 1.0;   // upper bound for observed entries
    double beta = 1e-6;   // lower bound for observed entries
    int max_iters = 2000;
    double tol = 1e-6;
    double t0 = 1.0;      // initial inverse step size
    ObjectiveKind objective = NegativeBinomial{10.0};

    /// Throws std::invalid_argument listing every violated constraint.
    void validate() const;
};

struct Bounds {
    double lower;
    double upper;
};

/// beta = max(1e-6, 1e-3 * smallest positive count), alpha = 1.5 * largest count.
Bounds default_bounds(const ObservedData& obs);

enum class Termination { converged, max_iters };

std::string to_string(Termination t);

struct SolveResult {
    DenseMatrix estimate;
    /// F(X^k) + tau * ||X^k||_* for X^0 and every accepted iterate.
    std::vector<double> objective_trace;
    /// F(X^k) alone, same indexing as objective_trace.
    std::vector<double> data_fit_trace;
    int iterations = 0;
    Termination termination = Termination::max_iters;
    double final_t = 0.0;
    std::int64_t backtracks = 0;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cumulative cap on backtracking multiplications within one solve.
inline constexpr std::int64_t kMaxBacktracks = 1'000'000;

/// Y on observed positions (zeros lifted to beta), (alpha + beta)/2 elsewhere.
DenseMatrix init_estimate(const ObservedData& obs, const SolverConfig& config);

/// svt(x - grad/t, tau/t) with no box constraint.
DenseMatrix prox_step(const DenseMatrix& x, const DenseMatrix& grad, double t, double tau);

/// svt(x - grad/t, tau/t), then observed positions clamped to [beta, alpha].
/// Unobserved positions are left as returned by the thresholding.
DenseMatrix prox_step(const DenseMatrix& x, const DenseMatrix& grad, double t, double tau, const ObservedData& obs,
                      const Bounds& box);

SolveResult solve(const ObservedData& obs, const SolverConfig& config);

/// Same iteration as solve() but started from `start` instead of init_estimate().
SolveResult solve_from(const ObservedData& obs, const SolverConfig& config, DenseMatrix start);

struct GridSearchResult {
    double best_tau = 0.0;
    SolveResult best_result;
    double best_nrmse = 0.0;
    /// NRMSE per grid entry, nullopt where the solve failed.
    std::vector<std::optional<double>> nrmse_per_tau;
    std::vector<std::string> failures;
};

/// Solves once per tau and keeps the one with the smallest NRMSE against the
/// ground truth; ties go to the smaller tau. Throws SolverError only when every
/// tau fails.
GridSearchResult grid_search_tau(const ObservedData& obs, const SolverConfig& config_template,
                                 std::span<const double> tau_grid, const DenseMatrix& ground_truth);

/// 10, 20, ..., 310.
std::vector<double> default_tau_grid();

}  // namespace nbmc
