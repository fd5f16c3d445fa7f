#pragma once

#include "nbmc/linalg.hpp"
#include "nbmc/objective.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace nbmc {

/// A full matrix of sampled counts. Entries are nonnegative integers stored as
/// doubles so they feed straight into the linear algebra.
using CountMatrix = DenseMatrix;

/// No corruption: the ground truth rounded to the nearest count.
struct NoNoise {};

using NoiseFamily = std::variant<NegativeBinomial, Poisson, NoNoise>;

struct NoiseSpec {
    NoiseFamily family = NegativeBinomial{10.0};
    std::uint64_t seed = 0;
};

struct MaskSpec {
    double q = 1.0;  // fraction of known entries, in (0, 1]
    std::uint64_t seed = 0;
};

/// Parses "nb:10", "poisson" or "none".
NoiseFamily parse_noise_family(std::string_view text);
/// Inverse of parse_noise_family, e.g. "nb:10".
std::string noise_id(const NoiseFamily& family);

/// Success probability p = r / (r + mean) of NB(r, p) with the given mean.
double nb_success_probability(double mean, double r);
/// Mean r (1 - p) / p of NB(r, p).
double nb_mean(double r, double p);

/// P(y; r, p) = C(r + y - 1, y) (1 - p)^y p^r, evaluated in log space with the
/// gamma function so that r may be any positive real.
double nb_pmf(std::int64_t y, double r, double p);

/// Entrywise Y ~ NB(r, r / (r + M)) via the Gamma-Poisson mixture
/// lambda ~ Gamma(r, M / r), Y ~ Poisson(lambda).
CountMatrix sample_nb_matrix(const DenseMatrix& m, double r, std::uint64_t seed);

/// Entrywise Y ~ Poisson(M).
CountMatrix sample_poisson_matrix(const DenseMatrix& m, std::uint64_t seed);

CountMatrix corrupt(const DenseMatrix& m, const NoiseSpec& spec);

/// round(q * rows * cols) distinct positions drawn uniformly, sorted row-major.
IndexSet sample_mask(Index rows, Index cols, const MaskSpec& spec);

/// Observations of `y_full` at the positions in `omega`.
ObservedData restrict(const CountMatrix& y_full, const IndexSet& omega);

}  // namespace nbmc
