#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nbmc {

using Index = Eigen::Index;
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Singular values below this fraction of the largest are treated as zero when
/// deciding numerical rank.
inline constexpr double kRankTolerance = 1e-12;

class SvdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Builds an m x n matrix from row-major data. Throws std::invalid_argument on a
/// size mismatch, empty dimensions or non-finite entries.
DenseMatrix make_matrix(Index rows, Index cols, std::span<const double> row_major);

/// Throws std::invalid_argument naming `what` if any entry is NaN or infinite.
void require_finite(const DenseMatrix& a, std::string_view what);

/// Thin SVD a = u * diag(singular_values) * v^T with l = min(m, n).
/// Zero singular values are kept so that u and v always have l columns.
struct SvdFactorization {
    DenseMatrix u;
    Vector singular_values;
    DenseMatrix v;

    Index rank() const { return singular_values.size(); }
    /// Number of singular values above kRankTolerance * sigma_1.
    Index numerical_rank() const;
    DenseMatrix reconstruct() const;
};

SvdFactorization svd(const DenseMatrix& a);

/// Singular values only, nonincreasing.
Vector singular_values(const DenseMatrix& a);

double nuclear_norm(const DenseMatrix& a);

struct SvtResult {
    DenseMatrix value;
    /// Nuclear norm of `value`, i.e. sum of (sigma_i - lambda)_+.
    double nuclear_norm = 0.0;
};

/// Singular value thresholding U * diag((sigma_i - lambda)_+) * V^T, the
/// proximal operator of lambda * ||.||_*. lambda = 0 returns z unchanged.
/// The result does not depend on the basis chosen inside repeated singular
/// values.
DenseMatrix svt(const DenseMatrix& z, double lambda);

/// svt() that also reports the nuclear norm of the result.
SvtResult svt_with_norm(const DenseMatrix& z, double lambda);

/// Best rank-`target_rank` approximation in Frobenius norm (truncated SVD).
DenseMatrix low_rank_approx(const DenseMatrix& a, Index target_rank);

}  // namespace nbmc
