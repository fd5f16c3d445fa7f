#include "nbmc/noise.hpp"

#include "nbmc/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nbmc {

namespace {

void require_nonnegative(const DenseMatrix& m) {
    require_finite(m, "noise mean matrix");
    if (m.size() > 0 && m.minCoeff() < 0.0) {
        throw std::invalid_argument("noise mean matrix has negative entries");
    }
}

}  // namespace

NoiseFamily parse_noise_family(std::string_view text) {
    if (text == "poisson") return Poisson{};
    if (text == "none") return NoNoise{};
    if (text.starts_with("nb:")) {
        const std::string_view num = text.substr(3);
        double r = 0.0;
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), r);
        if (ec == std::errc{} && ptr == num.data() + num.size() && r > 0.0 && std::isfinite(r)) {
            return NegativeBinomial{r};
        }
    }
    throw std::invalid_argument(fmt::format("unrecognised noise '{}' (expected nb:R, poisson or none)", text));
}

std::string noise_id(const NoiseFamily& family) {
    if (const auto* nb = std::get_if<NegativeBinomial>(&family)) return fmt::format("nb:{}", nb->r);
    if (std::holds_alternative<Poisson>(family)) return "poisson";
    return "none";
}

double nb_success_probability(double mean, double r) {
    return r / (r + mean);
}

double nb_mean(double r, double p) {
    return r * (1.0 - p) / p;
}

double nb_pmf(std::int64_t y, double r, double p) {
    if (y < 0 || !(r > 0.0) || !(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(fmt::format("nb_pmf needs y >= 0, r > 0, p in [0, 1] (got {}, {}, {})", y, r, p));
    }
    if (p == 0.0) return 0.0;
    if (p == 1.0) return y == 0 ? 1.0 : 0.0;
    const double yd = static_cast<double>(y);
    if (y == 0) return std::exp(r * std::log(p));
    const double log_binom = std::lgamma(r + yd) - std::lgamma(yd + 1.0) - std::lgamma(r);
    return std::exp(log_binom + yd * std::log1p(-p) + r * std::log(p));
}

CountMatrix sample_nb_matrix(const DenseMatrix& m, double r, std::uint64_t seed) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("NB dispersion r must be positive");
    require_nonnegative(m);
    Rng rng(seed);
    CountMatrix y(m.rows(), m.cols());
    // Row-major traversal fixes the stream order.
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            const double mean = m(i, j);
            if (mean == 0.0) {
                y(i, j) = 0.0;
                continue;
            }
            const double lambda = rng.gamma(r, mean / r);
            y(i, j) = static_cast<double>(rng.poisson(lambda));
        }
    }
    return y;
}

CountMatrix sample_poisson_matrix(const DenseMatrix& m, std::uint64_t seed) {
    require_nonnegative(m);
    Rng rng(seed);
    CountMatrix y(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) y(i, j) = static_cast<double>(rng.poisson(m(i, j)));
    return y;
}

CountMatrix corrupt(const DenseMatrix& m, const NoiseSpec& spec) {
    if (const auto* nb = std::get_if<NegativeBinomial>(&spec.family)) return sample_nb_matrix(m, nb->r, spec.seed);
    if (std::holds_alternative<Poisson>(spec.family)) return sample_poisson_matrix(m, spec.seed);
    require_nonnegative(m);
    return m.array().round().matrix();
}

IndexSet sample_mask(Index rows, Index cols, const MaskSpec& spec) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("mask dimensions must be positive");
    if (!(spec.q > 0.0 && spec.q <= 1.0)) {
        throw std::invalid_argument(fmt::format("mask fraction q must lie in (0, 1], got {}", spec.q));
    }
    const auto total = static_cast<std::uint64_t>(rows * cols);
    const auto count = static_cast<std::uint64_t>(std::llround(spec.q * static_cast<double>(total)));
    if (count == 0) {
        throw std::invalid_argument(fmt::format("q = {} selects no entries of a {}x{} matrix", spec.q, rows, cols));
    }
    std::vector<std::uint64_t> slots(total);
    std::iota(slots.begin(), slots.end(), std::uint64_t{0});
    // Partial Fisher-Yates: the first `count` slots end up a uniform sample.
    Rng rng(spec.seed);
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint64_t pick = k + rng.below(total - k);
        std::swap(slots[k], slots[pick]);
    }
    slots.resize(count);
    std::sort(slots.begin(), slots.end());
    IndexSet omega;
    omega.reserve(count);
    for (const auto s : slots) omega.push_back({static_cast<Index>(s) / cols, static_cast<Index>(s) % cols});
    return omega;
}

ObservedData restrict(const CountMatrix& y_full, const IndexSet& omega) {
    std::vector<Observation> entries;
    entries.reserve(omega.size());
    for (const auto& idx : omega) {
        if (idx.row < 0 || idx.row >= y_full.rows() || idx.col < 0 || idx.col >= y_full.cols()) {
            throw std::invalid_argument(fmt::format("mask index ({}, {}) outside a {}x{} matrix", idx.row, idx.col,
                                                    y_full.rows(), y_full.cols()));
        }
        entries.push_back({idx.row, idx.col, y_full(idx.row, idx.col)});
    }
    return ObservedData(y_full.rows(), y_full.cols(), std::move(entries));
}

}  // namespace nbmc
