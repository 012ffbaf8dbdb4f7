#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "fedsim/adam.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/error.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/threat.hpp"

namespace fedsim {

enum class EdKind { SecureBenign, Vulnerable };

struct EDProfile {
    int id = 0;
    EdKind kind = EdKind::SecureBenign;
    double price = 0.0;                      // fee charged per participation request
    std::vector<std::size_t> shard;          // indices into the training dataset
    std::optional<Schedule> attack_schedule; // only for Vulnerable
};

struct ModelUpdate {
    int ed_id = 0;
    int round = 0;
    ParamVector delta;  // local params minus global params
    double fee = 0.0;
};

struct GlobalModel {
    ParamVector params;
    int round = 0;
    double last_accuracy = 0.0;
    std::deque<ParamVector> increment_history;  // most recent at the back
    std::size_t history_depth = 5;

    void push_increment(ParamVector inc) {
        increment_history.push_back(std::move(inc));
        while (increment_history.size() > history_depth) increment_history.pop_front();
    }
};

struct LedgerEntry {
    int round = 0;
    double fees_paid = 0.0;
    int benign_count = 0;
    double utility = 0.0;  // benign_count - fees_paid
};

struct TrainHyper {
    std::size_t batch_size = 100;
    int epochs = 1;
    double learning_rate = 0.01;
};

// One ED's local pass: copy the global parameters, run seeded-shuffled
// minibatch Adam over the shard, and return the increment. The fee is charged
// regardless of what the update turns out to be worth. Adam state is fresh
// each call; EDs may sit unselected for long stretches, so stale moments
// would be meaningless anyway.
inline ModelUpdate local_train(const ParamVector& global_params, const EDProfile& ed,
                               const LabeledDataset& dataset, const MlpSpec& spec,
                               const TrainHyper& hyper, Rng& rng, int round,
                               const std::vector<int>* label_override = nullptr) {
    if (ed.shard.empty())
        throw Error(ErrorCategory::Config,
                    "local_train: ED " + std::to_string(ed.id) + " has an empty shard");
    if (label_override && label_override->size() != ed.shard.size())
        throw Error(ErrorCategory::Structure, "local_train: label override size mismatch");

    ParamVector local = global_params;
    AdamState opt = AdamState::make(global_params.shape, hyper.learning_rate);

    std::vector<std::size_t> order(ed.shard.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t d = dataset.dim();
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t count = std::min(hyper.batch_size, order.size() - start);
            Matrix batch(count, d);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t pos = order[start + i];
                const double* src = dataset.features.row(ed.shard[pos]);
                std::copy(src, src + d, batch.row(i));
                labels[i] = label_override ? (*label_override)[pos] : dataset.labels[ed.shard[pos]];
            }
            const LossAndGrad lg = mlp_backward(local, spec, batch, labels);
            adam_step(local, lg.grad, opt);
        }
    }

    ModelUpdate update;
    update.ed_id = ed.id;
    update.round = round;
    update.delta = local - global_params;
    update.fee = ed.price;
    return update;
}

// FedAvg: add the componentwise mean of the deltas to the global model. An
// empty update list leaves the parameters untouched but the round counter
// still advances.
inline void aggregate_mean(GlobalModel& global, const std::vector<ModelUpdate>& updates) {
    global.round += 1;
    if (updates.empty()) return;
    ParamVector mean(updates.front().delta.shape);
    for (const ModelUpdate& u : updates) mean += u.delta;
    mean *= 1.0 / static_cast<double>(updates.size());
    global.params += mean;
    global.push_increment(std::move(mean));
}

// Applies an already-aggregated increment (robust aggregators).
inline void apply_increment(GlobalModel& global, ParamVector increment) {
    global.round += 1;
    global.params += increment;
    global.push_increment(std::move(increment));
}

// Top-1 accuracy; argmax ties break toward the lowest class index. With a
// subset, only those dataset rows are scored.
inline double evaluate(const ParamVector& params, const MlpSpec& spec,
                       const LabeledDataset& dataset,
                       const std::vector<std::size_t>* subset = nullptr) {
    const std::size_t n = subset ? subset->size() : dataset.size();
    if (n == 0) throw Error(ErrorCategory::Data, "evaluate: empty dataset");
    Matrix logits;
    if (subset) {
        Matrix batch(n, dataset.dim());
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = dataset.features.row((*subset)[i]);
            std::copy(src, src + dataset.dim(), batch.row(i));
        }
        logits = mlp_forward(params, spec, batch);
    } else {
        logits = mlp_forward(params, spec, dataset.features);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (z[j] > z[best]) best = j;
        const int label = dataset.labels[subset ? (*subset)[i] : i];
        if (static_cast<std::size_t>(label) == best) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace fedsim
