#pragma once

#include "nbmc/linalg.hpp"

#include <string>
#include <variant>
#include <vector>

namespace nbmc {

struct MatrixIndex {
    Index row = 0;
    Index col = 0;

    friend bool operator==(const MatrixIndex&, const MatrixIndex&) = default;
    friend auto operator<=>(const MatrixIndex&, const MatrixIndex&) = default;
};

/// The index set Omega, kept sorted in row-major order.
using IndexSet = std::vector<MatrixIndex>;

struct Observation {
    Index row = 0;
    Index col = 0;
    double count = 0.0;  // nonnegative integer value
};

/// Observed counts Y restricted to Omega. Entries are validated (in bounds,
/// unique, nonnegative integral counts) and stored in row-major order so that
/// every reduction over them has a fixed summation order.
class ObservedData {
public:
    ObservedData(Index rows, Index cols, std::vector<Observation> entries);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Observation>& entries() const { return entries_; }

    IndexSet omega() const;
    /// 1 at observed positions, 0 elsewhere.
    DenseMatrix mask() const;
    /// Observed counts in place, `fill` elsewhere.
    DenseMatrix to_dense(double fill = 0.0) const;
    double max_count() const;
    /// Smallest strictly positive observed count, or 0 if there is none.
    double min_positive_count() const;

private:
    Index rows_;
    Index cols_;
    std::vector<Observation> entries_;
};

struct NegativeBinomial {
    double r = 10.0;
};
struct Poisson {};

using ObjectiveKind = std::variant<NegativeBinomial, Poisson>;

/// "nb(r=10)" / "poisson".
std::string describe(const ObjectiveKind& kind);

/// F(X) = sum over Omega of (r + Y) log(r + X) - Y log X.
/// Returns +infinity when X leaves the log domain at an observed position.
double nb_negloglik(const DenseMatrix& x, const ObservedData& obs, double r);

/// (r + Y)/(r + X) - Y/X on Omega, zero elsewhere.
/// Throws std::domain_error if an observed X entry is not positive.
DenseMatrix nb_grad(const DenseMatrix& x, const ObservedData& obs, double r);

/// sum over Omega of X - Y log X (constants in Y dropped).
double poisson_negloglik(const DenseMatrix& x, const ObservedData& obs);

/// 1 - Y/X on Omega, zero elsewhere.
DenseMatrix poisson_grad(const DenseMatrix& x, const ObservedData& obs);

double negloglik(const ObjectiveKind& kind, const DenseMatrix& x, const ObservedData& obs);
DenseMatrix gradient(const ObjectiveKind& kind, const DenseMatrix& x, const ObservedData& obs);

}  // namespace nbmc
