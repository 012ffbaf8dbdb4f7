#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Recurrent Q-network: LSTM over the pseudo-state sequence, one ReLU FC
// layer on the final hidden state, then a linear Q head.
struct DrqnSpec {
    std::size_t obs_action_dim = 0;  // per-timestep input width
    std::size_t lstm_units = 0;
    std::size_t fc_units = 0;
    std::size_t action_count = 0;
    std::size_t sequence_len = 0;

    void validate() const {
        if (obs_action_dim < 1 || lstm_units < 1 || fc_units < 1 || action_count < 1 ||
            sequence_len < 1)
            throw Error(ErrorCategory::Config, "DrqnSpec: all dimensions must be >= 1");
    }
};

// Flat layout; LSTM gate blocks are stacked (input, forget, cell, output).
inline ShapeMap drqn_shape_map(const DrqnSpec& s) {
    return {
        {"lstm.Wx", {4 * s.lstm_units, s.obs_action_dim}},
        {"lstm.Wh", {4 * s.lstm_units, s.lstm_units}},
        {"lstm.b", {4 * s.lstm_units}},
        {"fc.W", {s.fc_units, s.lstm_units}},
        {"fc.b", {s.fc_units}},
        {"head.W", {s.action_count, s.fc_units}},
        {"head.b", {s.action_count}},
    };
}

inline ParamVector init_drqn_params(const DrqnSpec& spec, Rng& rng) {
    ParamVector p(drqn_shape_map(spec));
    const std::size_t H = spec.lstm_units;
    auto fill = [&](const std::string& name, std::size_t fan_in, std::size_t fan_out) {
        const std::size_t off = p.offset_of(name);
        const std::size_t n = [&] {
            for (const auto& l : p.shape)
                if (l.name == name) return l.count();
            return std::size_t{0};
        }();
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < n; ++i) p.values[off + i] = rng.uniform(-bound, bound);
    };
    fill("lstm.Wx", spec.obs_action_dim, H);
    fill("lstm.Wh", H, H);
    fill("fc.W", H, spec.fc_units);
    fill("head.W", spec.fc_units, spec.action_count);
    // Forget-gate bias starts at 1 so early training does not wash out the cell state.
    const std::size_t boff = p.offset_of("lstm.b");
    for (std::size_t j = 0; j < H; ++j) p.values[boff + H + j] = 1.0;
    return p;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct DrqnTrace {
    // Per timestep: gate activations and states after the step.
    std::vector<std::vector<double>> gi, gf, gg, go, c, h;
    std::vector<double> fc_pre;   // FC layer pre-activation
    std::vector<double> fc_out;   // after ReLU
    std::vector<double> q;
};

struct DrqnView {
    const double* wx;
    const double* wh;
    const double* b;
    const double* fw;
    const double* fb;
    const double* hw;
    const double* hb;
};

inline DrqnView view_params(const ParamVector& p, const DrqnSpec& s) {
    check_params_match(p, drqn_shape_map(s), "drqn");
    const double* base = p.values.data();
    DrqnView v;
    v.wx = base;
    v.wh = v.wx + 4 * s.lstm_units * s.obs_action_dim;
    v.b = v.wh + 4 * s.lstm_units * s.lstm_units;
    v.fw = v.b + 4 * s.lstm_units;
    v.fb = v.fw + s.fc_units * s.lstm_units;
    v.hw = v.fb + s.fc_units;
    v.hb = v.hw + s.action_count * s.fc_units;
    return v;
}

inline void drqn_forward_impl(const ParamVector& params, const DrqnSpec& spec,
                              const Matrix& sequence, DrqnTrace* trace,
                              std::vector<double>& q) {
    spec.validate();
    if (sequence.rows != spec.sequence_len || sequence.cols != spec.obs_action_dim)
        throw Error(ErrorCategory::Structure,
                    "drqn_forward: sequence is " + std::to_string(sequence.rows) + "x" +
                        std::to_string(sequence.cols) + ", expected " +
                        std::to_string(spec.sequence_len) + "x" +
                        std::to_string(spec.obs_action_dim));
    const DrqnView v = view_params(params, spec);
    const std::size_t H = spec.lstm_units;
    const std::size_t D = spec.obs_action_dim;

    std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
    for (std::size_t t = 0; t < spec.sequence_len; ++t) {
        const double* x = sequence.row(t);
        for (std::size_t j = 0; j < 4 * H; ++j) {
            const double* wx = v.wx + j * D;
            const double* wh = v.wh + j * H;
            double acc = v.b[j];
            for (std::size_t k = 0; k < D; ++k) acc += wx[k] * x[k];
            for (std::size_t k = 0; k < H; ++k) acc += wh[k] * h[k];
            z[j] = acc;
        }
        std::vector<double> gi(H), gf(H), gg(H), go(H);
        for (std::size_t j = 0; j < H; ++j) {
            gi[j] = sigmoid(z[j]);
            gf[j] = sigmoid(z[H + j]);
            gg[j] = std::tanh(z[2 * H + j]);
            go[j] = sigmoid(z[3 * H + j]);
            c[j] = gf[j] * c[j] + gi[j] * gg[j];
            h[j] = go[j] * std::tanh(c[j]);
        }
        if (trace) {
            trace->gi.push_back(gi);
            trace->gf.push_back(gf);
            trace->gg.push_back(gg);
            trace->go.push_back(go);
            trace->c.push_back(c);
            trace->h.push_back(h);
        }
    }

    std::vector<double> fc_pre(spec.fc_units), fc_out(spec.fc_units);
    for (std::size_t j = 0; j < spec.fc_units; ++j) {
        const double* w = v.fw + j * H;
        double acc = v.fb[j];
        for (std::size_t k = 0; k < H; ++k) acc += w[k] * h[k];
        fc_pre[j] = acc;
        fc_out[j] = acc > 0.0 ? acc : 0.0;
    }
    q.assign(spec.action_count, 0.0);
    for (std::size_t j = 0; j < spec.action_count; ++j) {
        const double* w = v.hw + j * spec.fc_units;
        double acc = v.hb[j];
        for (std::size_t k = 0; k < spec.fc_units; ++k) acc += w[k] * fc_out[k];
        q[j] = acc;
    }
    if (trace) {
        trace->fc_pre = std::move(fc_pre);
        trace->fc_out = std::move(fc_out);
        trace->q = q;
    }
}

}  // namespace detail

inline std::vector<double> drqn_forward(const ParamVector& params, const DrqnSpec& spec,
                                        const Matrix& sequence) {
    std::vector<double> q;
    detail::drqn_forward_impl(params, spec, sequence, nullptr, q);
    return q;
}

// Squared temporal-difference loss on the taken action, with gradients via
// backpropagation through time.
inline LossAndGrad drqn_backward(const ParamVector& params, const DrqnSpec& spec,
                                 const Matrix& sequence, const std::vector<double>& target_q,
                                 std::size_t action_taken) {
    if (action_taken >= spec.action_count)
        throw Error(ErrorCategory::Structure,
                    "drqn_backward: action " + std::to_string(action_taken) +
                        " outside [0, " + std::to_string(spec.action_count) + ")");
    if (target_q.size() != spec.action_count)
        throw Error(ErrorCategory::Structure, "drqn_backward: target_q has wrong length");

    detail::DrqnTrace trace;
    std::vector<double> q;
    detail::drqn_forward_impl(params, spec, sequence, &trace, q);
    const detail::DrqnView v = detail::view_params(params, spec);

    const std::size_t H = spec.lstm_units;
    const std::size_t D = spec.obs_action_dim;
    const std::size_t T = spec.sequence_len;

    const double residual = q[action_taken] - target_q[action_taken];
    LossAndGrad out;
    out.loss = residual * residual;
    out.grad = ParamVector(params.shape);

    double* g = out.grad.values.data();
    double* dwx = g;
    double* dwh = dwx + 4 * H * D;
    double* db = dwh + 4 * H * H;
    double* dfw = db + 4 * H;
    double* dfb = dfw + spec.fc_units * H;
    double* dhw = dfb + spec.fc_units;
    double* dhb = dhw + spec.action_count * spec.fc_units;

    // Head: only the taken action's row receives gradient.
    std::vector<double> dq(spec.action_count, 0.0);
    dq[action_taken] = 2.0 * residual;
    std::vector<double> du(spec.fc_units, 0.0);
    {
        const std::size_t a = action_taken;
        const double* w = v.hw + a * spec.fc_units;
        double* dw = dhw + a * spec.fc_units;
        for (std::size_t k = 0; k < spec.fc_units; ++k) {
            dw[k] += dq[a] * trace.fc_out[k];
            du[k] += dq[a] * w[k];
        }
        dhb[a] += dq[a];
    }

    // FC layer through the ReLU mask.
    std::vector<double> dh(H, 0.0);
    for (std::size_t j = 0; j < spec.fc_units; ++j) {
        const double dpre = trace.fc_pre[j] > 0.0 ? du[j] : 0.0;
        if (dpre == 0.0) continue;
        const double* w = v.fw + j * H;
        double* dw = dfw + j * H;
        const std::vector<double>& h_last = trace.h[T - 1];
        for (std::size_t k = 0; k < H; ++k) {
            dw[k] += dpre * h_last[k];
            dh[k] += dpre * w[k];
        }
        dfb[j] += dpre;
    }

    // Backpropagation through time.
    std::vector<double> dc(H, 0.0), dz(4 * H), dh_prev(H);
    for (std::size_t t = T; t-- > 0;) {
        const auto& gi = trace.gi[t];
        const auto& gf = trace.gf[t];
        const auto& gg = trace.gg[t];
        const auto& go = trace.go[t];
        const auto& ct = trace.c[t];
        const std::vector<double>* c_prev = t > 0 ? &trace.c[t - 1] : nullptr;
        const std::vector<double>* h_prev = t > 0 ? &trace.h[t - 1] : nullptr;

        for (std::size_t j = 0; j < H; ++j) {
            const double tc = std::tanh(ct[j]);
            const double do_ = dh[j] * tc;
            const double dcj = dc[j] + dh[j] * go[j] * (1.0 - tc * tc);
            const double di = dcj * gg[j];
            const double dg = dcj * gi[j];
            const double df = dcj * (c_prev ? (*c_prev)[j] : 0.0);
            dz[j] = di * gi[j] * (1.0 - gi[j]);
            dz[H + j] = df * gf[j] * (1.0 - gf[j]);
            dz[2 * H + j] = dg * (1.0 - gg[j] * gg[j]);
            dz[3 * H + j] = do_ * go[j] * (1.0 - go[j]);
            dc[j] = dcj * gf[j];
        }

        const double* x = sequence.row(t);
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        for (std::size_t j = 0; j < 4 * H; ++j) {
            const double dzj = dz[j];
            if (dzj == 0.0) continue;
            double* dx = dwx + j * D;
            for (std::size_t k = 0; k < D; ++k) dx[k] += dzj * x[k];
            double* dwr = dwh + j * H;
            const double* whr = v.wh + j * H;
            if (h_prev) {
                for (std::size_t k = 0; k < H; ++k) dwr[k] += dzj * (*h_prev)[k];
            }
            for (std::size_t k = 0; k < H; ++k) dh_prev[k] += dzj * whr[k];
            db[j] += dzj;
        }
        dh = dh_prev;
    }
    return out;
}

}  // namespace fedsim
