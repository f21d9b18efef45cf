#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "netresil/matrix.hpp"

namespace netresil {

// Cyclic Jacobi eigenvalues of a symmetric matrix. Desk-scale diagnostics
// only (spectral checks in tests, zero-eigenvalue multiplicity).
inline std::vector<double> jacobi_eigenvalues(const Matrix& sym, std::size_t max_sweeps = 64,
                                              double tol = 1e-12) {
    if (sym.rows != sym.cols) throw std::invalid_argument("jacobi_eigenvalues: matrix not square");
    std::size_t n = sym.rows;
    Matrix a = sym;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off < tol * tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace netresil
