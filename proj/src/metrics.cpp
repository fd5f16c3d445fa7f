#include "nbmc/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nbmc {

namespace {

void check_inputs(const DenseMatrix& truth, const DenseMatrix& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
        throw std::invalid_argument(fmt::format("ground truth is {}x{} but estimate is {}x{}", truth.rows(),
                                                truth.cols(), estimate.rows(), estimate.cols()));
    }
    require_finite(truth, "ground truth");
    require_finite(estimate, "estimate");
}

// Neumaier-compensated sum of squared errors in column-major order.
double squared_error(const DenseMatrix& truth, const DenseMatrix& estimate) {
    double sum = 0.0, comp = 0.0;
    for (Index j = 0; j < truth.cols(); ++j) {
        for (Index i = 0; i < truth.rows(); ++i) {
            const double d = estimate(i, j) - truth(i, j);
            const double v = d * d;
            const double t = sum + v;
            comp += (sum >= v) ? (sum - t) + v : (v - t) + sum;
            sum = t;
        }
    }
    return sum + comp;
}

double psnr_from(double m_max, double s, double mn) {
    return s > 0.0 ? 10.0 * std::log10(m_max * m_max * mn / s) : std::numeric_limits<double>::infinity();
}

}  // namespace

MetricReport evaluate(const DenseMatrix& truth, const DenseMatrix& estimate) {
    check_inputs(truth, estimate);
    MetricReport rep;
    rep.m_max = truth.maxCoeff();
    rep.m_min = truth.minCoeff();
    if (!(rep.m_max > rep.m_min)) {
        throw std::invalid_argument("ground truth is constant; NRMSE is undefined");
    }
    rep.s = squared_error(truth, estimate);
    const double mn = static_cast<double>(truth.size());
    rep.nrmse = std::sqrt(rep.s / mn) / (rep.m_max - rep.m_min);
    rep.psnr_db = psnr_from(rep.m_max, rep.s, mn);
    return rep;
}

double psnr_db(const DenseMatrix& truth, const DenseMatrix& estimate) {
    check_inputs(truth, estimate);
    return psnr_from(truth.maxCoeff(), squared_error(truth, estimate), static_cast<double>(truth.size()));
}

}  // namespace nbmc
