#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct LabeledDataset {
    Matrix features;           // n x d, values in [0, 1]
    std::vector<int> labels;   // n entries in [0, class_count)
    int class_count = 0;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }

    void validate() const {
        if (labels.size() != features.rows)
            throw Error(ErrorCategory::Data, "dataset: feature/label count mismatch");
        for (int y : labels)
            if (y < 0 || y >= class_count)
                throw Error(ErrorCategory::Data, "dataset: label outside [0, class_count)");
    }
};

struct Partition {
    std::vector<std::vector<std::size_t>> shards;  // one index list per ED
};

// Gaussian blobs: one seeded random center per class in [0,1]^dim, isotropic
// spread 0.15, samples clipped back into the unit cube. Class-major order.
inline LabeledDataset generate_synthetic(int class_count, std::size_t dim,
                                         std::size_t per_class, std::uint64_t seed) {
    if (class_count < 1 || dim < 1 || per_class < 1)
        throw Error(ErrorCategory::Config, "generate_synthetic: all arguments must be positive");
    constexpr double kSpread = 0.15;
    Rng rng = derive_rng(seed, Stream::DataGen);

    std::vector<std::vector<double>> centers(class_count, std::vector<double>(dim));
    for (auto& c : centers)
        for (double& v : c) v = rng.uniform01();

    const std::size_t n = static_cast<std::size_t>(class_count) * per_class;
    LabeledDataset ds;
    ds.features = Matrix(n, dim);
    ds.labels.resize(n);
    ds.class_count = class_count;
    std::size_t row = 0;
    for (int c = 0; c < class_count; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            double* x = ds.features.row(row);
            for (std::size_t k = 0; k < dim; ++k)
                x[k] = std::clamp(centers[c][k] + kSpread * rng.normal(), 0.0, 1.0);
            ds.labels[row] = c;
        }
    }
    return ds;
}

// Seeded shuffle followed by a round-robin split: shards are disjoint, cover
// all indices, and differ in size by at most one.
inline Partition partition_equal(const LabeledDataset& ds, std::size_t ed_count,
                                 std::uint64_t seed) {
    if (ed_count < 1)
        throw Error(ErrorCategory::Config, "partition_equal: ed_count must be >= 1");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_rng(seed, Stream::Partition);
    rng.shuffle(order);
    Partition p;
    p.shards.assign(ed_count, {});
    for (std::size_t i = 0; i < order.size(); ++i)
        p.shards[i % ed_count].push_back(order[i]);
    return p;
}

struct TrainTestSplit {
    LabeledDataset train;
    LabeledDataset test;
};

inline LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.features = Matrix(rows.size(), ds.dim());
    out.labels.resize(rows.size());
    out.class_count = ds.class_count;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = ds.features.row(rows[i]);
        std::copy(src, src + ds.dim(), out.features.row(i));
        out.labels[i] = ds.labels[rows[i]];
    }
    return out;
}

// Seeded shuffle split; the test part serves as the auxiliary set.
inline TrainTestSplit split_train_test(const LabeledDataset& ds, double test_fraction,
                                       std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw Error(ErrorCategory::Config, "split_train_test: test_fraction must be in [0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_rng(seed, Stream::Split);
    rng.shuffle(order);
    const std::size_t n_test = static_cast<std::size_t>(test_fraction * ds.size());
    TrainTestSplit out;
    out.test = take_rows(ds, {order.begin(), order.begin() + n_test});
    out.train = take_rows(ds, {order.begin() + n_test, order.end()});
    return out;
}

}  // namespace fedsim
