#include "nbmc/linalg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace nbmc {

namespace {

constexpr unsigned kThinUV = Eigen::ComputeThinU | Eigen::ComputeThinV;

// Eigen's BDCSVD falls back to one-sided Jacobi below its block size, so this
// covers both small and large inputs.
template <int Options>
Eigen::BDCSVD<DenseMatrix> compute_svd(const DenseMatrix& a) {
    Eigen::BDCSVD<DenseMatrix> dec(a, Options);
    if (dec.info() != Eigen::Success) {
        throw SvdError(fmt::format("SVD of a {}x{} matrix failed to converge (Eigen info code {})",
                                   a.rows(), a.cols(), static_cast<int>(dec.info())));
    }
    return dec;
}

}  // namespace

DenseMatrix make_matrix(Index rows, Index cols, std::span<const double> row_major) {
    if (rows <= 0 || cols <= 0) {
        throw std::invalid_argument(fmt::format("matrix dimensions must be positive, got {}x{}", rows, cols));
    }
    if (static_cast<Index>(row_major.size()) != rows * cols) {
        throw std::invalid_argument(
            fmt::format("expected {} entries for a {}x{} matrix, got {}", rows * cols, rows, cols, row_major.size()));
    }
    DenseMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = row_major[static_cast<std::size_t>(i * cols + j)];
    require_finite(m, "matrix");
    return m;
}

void require_finite(const DenseMatrix& a, std::string_view what) {
    if (!a.allFinite()) {
        throw std::invalid_argument(fmt::format("{} contains non-finite entries", what));
    }
}

Index SvdFactorization::numerical_rank() const {
    if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
    const double floor = kRankTolerance * singular_values(0);
    return static_cast<Index>(std::count_if(singular_values.begin(), singular_values.end(),
                                            [floor](double s) { return s > floor; }));
}

DenseMatrix SvdFactorization::reconstruct() const {
    return u * singular_values.asDiagonal() * v.transpose();
}

SvdFactorization svd(const DenseMatrix& a) {
    require_finite(a, "svd input");
    auto dec = compute_svd<kThinUV>(a);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

Vector singular_values(const DenseMatrix& a) {
    require_finite(a, "svd input");
    return compute_svd<0>(a).singularValues();
}

double nuclear_norm(const DenseMatrix& a) {
    return singular_values(a).sum();
}

SvtResult svt_with_norm(const DenseMatrix& z, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument(fmt::format("svt threshold must be a finite nonnegative value, got {}", lambda));
    }
    if (lambda == 0.0) return {z, nuclear_norm(z)};

    require_finite(z, "svt input");
    auto dec = compute_svd<kThinUV>(z);
    const Vector& sigma = dec.singularValues();
    // sigma is sorted, so the surviving components form a prefix.
    Index keep = 0;
    while (keep < sigma.size() && sigma(keep) > lambda) ++keep;

    SvtResult out;
    if (keep == 0) {
        out.value = DenseMatrix::Zero(z.rows(), z.cols());
        return out;
    }
    const Vector shrunk = sigma.head(keep).array() - lambda;
    out.value.noalias() = dec.matrixU().leftCols(keep) * shrunk.asDiagonal() * dec.matrixV().leftCols(keep).transpose();
    out.nuclear_norm = shrunk.sum();
    return out;
}

DenseMatrix svt(const DenseMatrix& z, double lambda) {
    return svt_with_norm(z, lambda).value;
}

DenseMatrix low_rank_approx(const DenseMatrix& a, Index target_rank) {
    const Index full = std::min(a.rows(), a.cols());
    if (target_rank < 1 || target_rank > full) {
        throw std::invalid_argument(
            fmt::format("target rank {} outside [1, {}] for a {}x{} matrix", target_rank, full, a.rows(), a.cols()));
    }
    const auto f = svd(a);
    return f.u.leftCols(target_rank) * f.singular_values.head(target_rank).asDiagonal() *
           f.v.leftCols(target_rank).transpose();
}

}  // namespace nbmc
