#pragma once

#include "nbmc/linalg.hpp"

namespace nbmc {

struct MetricReport {
    double psnr_db = 0.0;  // +infinity for an exact reconstruction
    double nrmse = 0.0;    // fraction, not percent
    double s = 0.0;        // sum of squared errors
    double m_max = 0.0;
    double m_min = 0.0;
};

/// PSNR = 10 log10(M_max^2 m n / S), NRMSE = sqrt(S / (m n)) / (M_max - M_min).
/// Throws std::invalid_argument on a shape mismatch or a constant ground truth.
MetricReport evaluate(const DenseMatrix& truth, const DenseMatrix& estimate);

/// PSNR alone. Defined for constant ground truths too (only M_max enters).
double psnr_db(const DenseMatrix& truth, const DenseMatrix& estimate);

}  // namespace nbmc
