#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "netresil/matrix.hpp"

namespace netresil {

struct ClassificationCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
};

struct ClassificationMetrics {
    double acc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some denominator was zero; affected metrics report 0
};

inline ClassificationMetrics classification_metrics(const ClassificationCounts& c) {
    if (c.total() == 0)
        throw std::invalid_argument("classification_metrics: no observations");
    ClassificationMetrics m;
    m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.degenerate = true;
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.degenerate = true;
    }
    return m;
}

struct RegressionMetrics {
    double mae = 0.0;
    double rmse = 0.0;        // per-entry root mean square error
    double rmse_paper = 0.0;  // mean over nodes of row 2-norms (as printed)
};

inline RegressionMetrics regression_metrics(const Matrix& predicted, const Matrix& truth) {
    if (!predicted.same_shape(truth))
        throw std::invalid_argument("regression_metrics: shape mismatch " +
                                    std::to_string(predicted.rows) + "x" +
                                    std::to_string(predicted.cols) + " vs " +
                                    std::to_string(truth.rows) + "x" + std::to_string(truth.cols));
    if (predicted.rows == 0) throw std::invalid_argument("regression_metrics: empty input");
    RegressionMetrics m;
    double abs_sum = 0.0, sq_sum = 0.0, norm_sum = 0.0;
    for (std::size_t i = 0; i < predicted.rows; ++i) {
        double row_sq = 0.0;
        for (std::size_t j = 0; j < predicted.cols; ++j) {
            double d = predicted.at(i, j) - truth.at(i, j);
            abs_sum += std::abs(d);
            row_sq += d * d;
        }
        sq_sum += row_sq;
        norm_sum += std::sqrt(row_sq);
    }
    double entries = static_cast<double>(predicted.rows * predicted.cols);
    m.mae = abs_sum / entries;
    m.rmse = std::sqrt(sq_sum / entries);
    m.rmse_paper = norm_sum / static_cast<double>(predicted.rows);
    return m;
}

// Sample mean and standard deviation (n-1 divisor).
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    bool degenerate = false;  // fewer than two samples; std not meaningful
};

inline MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) {
        out.degenerate = true;
        return out;
    }
    double s = 0.0;
    for (double v : values) s += v;
    out.mean = s / static_cast<double>(values.size());
    if (values.size() < 2) {
        out.degenerate = true;
        return out;
    }
    double acc = 0.0;
    for (double v : values) acc += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
    return out;
}

}  // namespace netresil
