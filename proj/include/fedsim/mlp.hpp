#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Activation { ReLU };

// Fully-connected classifier: input -> hidden layers (ReLU) -> linear logits.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_layers;
    std::size_t output_dim = 0;
    Activation activation = Activation::ReLU;

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_layers.begin(), hidden_layers.end());
        dims.push_back(output_dim);
        return dims;
    }

    void validate() const {
        if (input_dim < 1 || output_dim < 1)
            throw Error(ErrorCategory::Config, "MlpSpec: input_dim and output_dim must be >= 1");
        for (std::size_t h : hidden_layers)
            if (h < 1) throw Error(ErrorCategory::Config, "MlpSpec: hidden widths must be >= 1");
    }
};

inline ShapeMap mlp_shape_map(const MlpSpec& spec) {
    const auto dims = spec.layer_dims();
    ShapeMap shape;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::string base = "fc" + std::to_string(l);
        shape.push_back({base + ".W", {dims[l + 1], dims[l]}});
        shape.push_back({base + ".b", {dims[l + 1]}});
    }
    return shape;
}

inline void check_params_match(const ParamVector& params, const ShapeMap& expected,
                               const char* what) {
    if (params.shape == expected) return;
    for (std::size_t i = 0; i < expected.size() && i < params.shape.size(); ++i) {
        if (!(params.shape[i] == expected[i]))
            throw Error(ErrorCategory::Structure,
                        std::string(what) + ": layer '" + expected[i].name +
                            "' does not match the given parameters");
    }
    throw Error(ErrorCategory::Structure,
                std::string(what) + ": parameter shape map has wrong layer count");
}

// Glorot-uniform weights, zero biases.
inline ParamVector init_mlp_params(const MlpSpec& spec, Rng& rng) {
    ParamVector p(mlp_shape_map(spec));
    const auto dims = spec.layer_dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l];
        const std::size_t fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i)
            p.values[off + i] = rng.uniform(-bound, bound);
        off += fan_in * fan_out + fan_out;  // biases stay zero
    }
    return p;
}

namespace detail {

struct MlpTrace {
    std::vector<Matrix> activations;  // activations[0] = input batch
    Matrix logits;
};

inline void mlp_forward_impl(const ParamVector& params, const MlpSpec& spec,
                             const Matrix& batch, MlpTrace* trace, Matrix& logits) {
    check_params_match(params, mlp_shape_map(spec), "mlp_forward");
    if (batch.cols != spec.input_dim)
        throw Error(ErrorCategory::Structure,
                    "mlp_forward: batch has " + std::to_string(batch.cols) +
                        " columns, spec.input_dim is " + std::to_string(spec.input_dim));
    const auto dims = spec.layer_dims();
    if (trace) {
        trace->activations.clear();
        trace->activations.push_back(batch);
    }
    Matrix cur = batch;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double* w = params.values.data() + off;
        const double* b = w + dims[l] * dims[l + 1];
        Matrix next;
        affine_forward(cur, w, b, dims[l + 1], next);
        off += dims[l] * dims[l + 1] + dims[l + 1];
        const bool last = (l + 2 == dims.size());
        if (!last) {
            for (double& v : next.data) v = v > 0.0 ? v : 0.0;
            if (trace) trace->activations.push_back(next);
        }
        cur = std::move(next);
    }
    logits = std::move(cur);
    if (trace) trace->logits = logits;
}

}  // namespace detail

inline Matrix mlp_forward(const ParamVector& params, const MlpSpec& spec, const Matrix& batch) {
    Matrix logits;
    detail::mlp_forward_impl(params, spec, batch, nullptr, logits);
    return logits;
}

// Row-wise softmax with max subtraction; poisoned models can produce logits
// in the hundreds, so the naive form would overflow.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double* p = out.row(i);
        double mx = z[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p[j] = std::exp(z[j] - mx);
            sum += p[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) p[j] /= sum;
    }
    return out;
}

struct LossAndGrad {
    double loss = 0.0;
    ParamVector grad;
};

// Mean softmax cross-entropy over the batch and its gradient.
inline LossAndGrad mlp_backward(const ParamVector& params, const MlpSpec& spec,
                                const Matrix& batch, const std::vector<int>& labels) {
    if (batch.rows == 0) throw Error(ErrorCategory::Structure, "mlp_backward: empty batch");
    if (labels.size() != batch.rows)
        throw Error(ErrorCategory::Structure, "mlp_backward: labels/batch size mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= spec.output_dim)
            throw Error(ErrorCategory::Data,
                        "mlp_backward: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(spec.output_dim) + ")");

    detail::MlpTrace trace;
    Matrix logits;
    detail::mlp_forward_impl(params, spec, batch, &trace, logits);
    const Matrix probs = softmax_rows(logits);

    const double n = static_cast<double>(batch.rows);
    double loss = 0.0;
    Matrix dz = probs;  // dL/dlogits = (softmax - onehot) / n
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        loss -= std::log(std::max(probs(i, y), 1e-300));
        dz(i, y) -= 1.0;
    }
    loss /= n;
    for (double& v : dz.data) v /= n;

    LossAndGrad out;
    out.loss = loss;
    out.grad = ParamVector(params.shape);

    const auto dims = spec.layer_dims();
    // Per-layer flat offsets for walking backwards.
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        offsets.push_back(off);
        off += dims[l] * dims[l + 1] + dims[l + 1];
    }

    Matrix delta = std::move(dz);
    for (std::size_t l = dims.size() - 1; l-- > 0;) {
        const std::size_t in_dim = dims[l];
        const std::size_t out_dim = dims[l + 1];
        const double* w = params.values.data() + offsets[l];
        double* dw = out.grad.values.data() + offsets[l];
        double* db = dw + in_dim * out_dim;
        const Matrix& input = trace.activations[l];
        Matrix din;
        affine_backward(input, w, delta, dw, db, l > 0 ? &din : nullptr);
        if (l > 0) {
            // ReLU mask of the layer input (which is that layer's activation output).
            for (std::size_t i = 0; i < din.data.size(); ++i)
                if (input.data[i] <= 0.0) din.data[i] = 0.0;
            delta = std::move(din);
        }
    }
    return out;
}

}  // namespace fedsim
