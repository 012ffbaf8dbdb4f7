#pragma once

#include <cstddef>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

// Dense row-major matrix of doubles. Just enough linear algebra for the two
// fixed network architectures; no views, no expression templates.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool operator==(const Matrix&) const = default;
};

// out[i][j] = sum_k in[i][k] * w[j][k] + b[j]   (w stored out_dim x in_dim)
inline void affine_forward(const Matrix& in, const double* w, const double* b,
                           std::size_t out_dim, Matrix& out) {
    out.rows = in.rows;
    out.cols = out_dim;
    out.data.assign(in.rows * out_dim, 0.0);
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double* x = in.row(i);
        double* o = out.row(i);
        for (std::size_t j = 0; j < out_dim; ++j) {
            const double* wr = w + j * in.cols;
            double acc = b[j];
            for (std::size_t k = 0; k < in.cols; ++k) acc += x[k] * wr[k];
            o[j] = acc;
        }
    }
}

// Accumulates dw[j][k] += sum_i dz[i][j] * in[i][k], db[j] += sum_i dz[i][j],
// and din[i][k] = sum_j dz[i][j] * w[j][k] when din is non-null.
inline void affine_backward(const Matrix& in, const double* w, const Matrix& dz,
                            double* dw, double* db, Matrix* din) {
    const std::size_t out_dim = dz.cols;
    if (din) {
        din->rows = in.rows;
        din->cols = in.cols;
        din->data.assign(in.rows * in.cols, 0.0);
    }
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double* x = in.row(i);
        const double* g = dz.row(i);
        for (std::size_t j = 0; j < out_dim; ++j) {
            const double gj = g[j];
            if (gj == 0.0) continue;
            double* dwr = dw + j * in.cols;
            for (std::size_t k = 0; k < in.cols; ++k) dwr[k] += gj * x[k];
            db[j] += gj;
        }
        if (din) {
            double* dx = din->row(i);
            for (std::size_t j = 0; j < out_dim; ++j) {
                const double gj = g[j];
                if (gj == 0.0) continue;
                const double* wr = w + j * in.cols;
                for (std::size_t k = 0; k < in.cols; ++k) dx[k] += gj * wr[k];
            }
        }
    }
}

}  // namespace fedsim
