#include "nbmc/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nbmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier summation; the order of terms is fixed by ObservedData.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

void check_shape(const DenseMatrix& x, const ObservedData& obs) {
    if (x.rows() != obs.rows() || x.cols() != obs.cols()) {
        throw std::invalid_argument(fmt::format("estimate is {}x{} but observations are {}x{}", x.rows(), x.cols(),
                                                obs.rows(), obs.cols()));
    }
}

void check_dispersion(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument(fmt::format("dispersion r must be positive and finite, got {}", r));
    }
}

[[noreturn]] void domain_failure(const Observation& e, double x) {
    throw std::domain_error(
        fmt::format("gradient undefined: X({}, {}) = {} is not positive at an observed entry", e.row, e.col, x));
}

}  // namespace

ObservedData::ObservedData(Index rows, Index cols, std::vector<Observation> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows_ <= 0 || cols_ <= 0) {
        throw std::invalid_argument(fmt::format("observation dimensions must be positive, got {}x{}", rows_, cols_));
    }
    for (const auto& e : entries_) {
        if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_) {
            throw std::invalid_argument(
                fmt::format("observation ({}, {}) outside a {}x{} matrix", e.row, e.col, rows_, cols_));
        }
        if (!(e.count >= 0.0) || !std::isfinite(e.count) || e.count != std::floor(e.count)) {
            throw std::invalid_argument(
                fmt::format("observation ({}, {}) = {} is not a nonnegative integer count", e.row, e.col, e.count));
        }
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const Observation& a, const Observation& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    auto dup = std::adjacent_find(entries_.begin(), entries_.end(), [](const Observation& a, const Observation& b) {
        return a.row == b.row && a.col == b.col;
    });
    if (dup != entries_.end()) {
        throw std::invalid_argument(fmt::format("duplicate observation at ({}, {})", dup->row, dup->col));
    }
}

IndexSet ObservedData::omega() const {
    IndexSet out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.row, e.col});
    return out;
}

DenseMatrix ObservedData::mask() const {
    DenseMatrix m = DenseMatrix::Zero(rows_, cols_);
    for (const auto& e : entries_) m(e.row, e.col) = 1.0;
    return m;
}

DenseMatrix ObservedData::to_dense(double fill) const {
    DenseMatrix m = DenseMatrix::Constant(rows_, cols_, fill);
    for (const auto& e : entries_) m(e.row, e.col) = e.count;
    return m;
}

double ObservedData::max_count() const {
    double best = 0.0;
    for (const auto& e : entries_) best = std::max(best, e.count);
    return best;
}

double ObservedData::min_positive_count() const {
    double best = 0.0;
    for (const auto& e : entries_)
        if (e.count > 0.0 && (best == 0.0 || e.count < best)) best = e.count;
    return best;
}

std::string describe(const ObjectiveKind& kind) {
    if (const auto* nb = std::get_if<NegativeBinomial>(&kind)) return fmt::format("nb(r={})", nb->r);
    return "poisson";
}

double nb_negloglik(const DenseMatrix& x, const ObservedData& obs, double r) {
    check_shape(x, obs);
    check_dispersion(r);
    CompensatedSum total;
    for (const auto& e : obs.entries()) {
        const double xv = x(e.row, e.col);
        if (!(r + xv > 0.0)) return kInf;
        double term = (r + e.count) * std::log(r + xv);
        // 0 * log(0) is taken as 0.
        if (e.count > 0.0) {
            if (!(xv > 0.0)) return kInf;
            term -= e.count * std::log(xv);
        }
        total.add(term);
    }
    return total.value();
}

DenseMatrix nb_grad(const DenseMatrix& x, const ObservedData& obs, double r) {
    check_shape(x, obs);
    check_dispersion(r);
    DenseMatrix g = DenseMatrix::Zero(x.rows(), x.cols());
    for (const auto& e : obs.entries()) {
        const double xv = x(e.row, e.col);
        if (!(xv > 0.0)) domain_failure(e, xv);
        g(e.row, e.col) = (r + e.count) / (r + xv) - e.count / xv;
    }
    return g;
}

double poisson_negloglik(const DenseMatrix& x, const ObservedData& obs) {
    check_shape(x, obs);
    CompensatedSum total;
    for (const auto& e : obs.entries()) {
        const double xv = x(e.row, e.col);
        double term = xv;
        if (e.count > 0.0) {
            if (!(xv > 0.0)) return kInf;
            term -= e.count * std::log(xv);
        }
        total.add(term);
    }
    return total.value();
}

DenseMatrix poisson_grad(const DenseMatrix& x, const ObservedData& obs) {
    check_shape(x, obs);
    DenseMatrix g = DenseMatrix::Zero(x.rows(), x.cols());
    for (const auto& e : obs.entries()) {
        const double xv = x(e.row, e.col);
        if (!(xv > 0.0)) domain_failure(e, xv);
        g(e.row, e.col) = 1.0 - e.count / xv;
    }
    return g;
}

double negloglik(const ObjectiveKind& kind, const DenseMatrix& x, const ObservedData& obs) {
    if (const auto* nb = std::get_if<NegativeBinomial>(&kind)) return nb_negloglik(x, obs, nb->r);
    return poisson_negloglik(x, obs);
}

DenseMatrix gradient(const ObjectiveKind& kind, const DenseMatrix& x, const ObservedData& obs) {
    if (const auto* nb = std::get_if<NegativeBinomial>(&kind)) return nb_grad(x, obs, nb->r);
    return poisson_grad(x, obs);
}

}  // namespace nbmc
