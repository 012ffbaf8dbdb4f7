#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedsim/adam.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/idx.hpp"
#include "fedsim/mlp.hpp"

using namespace fedsim;

namespace {

namespace fs = std::filesystem;

TEST(Synthetic, CountBookkeeping) {
    const LabeledDataset ds = generate_synthetic(2, 3, 50, 1);
    EXPECT_EQ(ds.size(), 100u);
    EXPECT_EQ(ds.dim(), 3u);
    EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 0), 50);
    EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 50);
    for (double v : ds.features.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Synthetic, DeterministicPerSeed) {
    const LabeledDataset a = generate_synthetic(3, 5, 20, 42);
    const LabeledDataset b = generate_synthetic(3, 5, 20, 42);
    const LabeledDataset c = generate_synthetic(3, 5, 20, 43);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.features, c.features);
}

TEST(Synthetic, RejectsNonPositiveArguments) {
    EXPECT_THROW(generate_synthetic(0, 3, 10, 1), Error);
    EXPECT_THROW(generate_synthetic(2, 0, 10, 1), Error);
    EXPECT_THROW(generate_synthetic(2, 3, 0, 1), Error);
}

// The blobs must be separable by construction: a fresh MLP reaches 90% train
// accuracy within 50 full-batch Adam steps.
TEST(Synthetic, BlobsAreTrainable) {
    const LabeledDataset ds = generate_synthetic(4, 8, 100, 7);
    MlpSpec spec{8, {16}, 4};
    Rng rng(99);
    ParamVector params = init_mlp_params(spec, rng);
    AdamState opt = AdamState::make(params.shape, 0.05);
    for (int step = 0; step < 50; ++step) {
        const LossAndGrad lg = mlp_backward(params, spec, ds.features, ds.labels);
        adam_step(params, lg.grad, opt);
    }
    EXPECT_GE(evaluate(params, spec, ds), 0.90);
}

TEST(Partition, EvenSplit) {
    const LabeledDataset ds = generate_synthetic(2, 2, 50, 3);
    const Partition p = partition_equal(ds, 10, 5);
    ASSERT_EQ(p.shards.size(), 10u);
    for (const auto& shard : p.shards) EXPECT_EQ(shard.size(), 10u);
}

TEST(Partition, RemainderRule) {
    LabeledDataset ds = generate_synthetic(1, 2, 101, 3);
    const Partition p = partition_equal(ds, 10, 5);
    std::vector<std::size_t> sizes;
    for (const auto& shard : p.shards) sizes.push_back(shard.size());
    EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 11u), 1);
    EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 10u), 9);
}

TEST(Partition, DisjointAndExhaustiveProperty) {
    Rng meta(123);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + meta.uniform_int(300);
        const std::size_t eds = 1 + meta.uniform_int(12);
        LabeledDataset ds = generate_synthetic(1, 2, n, trial);
        const Partition p = partition_equal(ds, eds, meta.next_u64());
        std::vector<std::size_t> all;
        std::size_t max_size = 0, min_size = n;
        for (const auto& shard : p.shards) {
            all.insert(all.end(), shard.begin(), shard.end());
            max_size = std::max(max_size, shard.size());
            min_size = std::min(min_size, shard.size());
        }
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(n);
        std::iota(expect.begin(), expect.end(), std::size_t{0});
        EXPECT_EQ(all, expect);
        EXPECT_LE(max_size - min_size, 1u);
    }
}

TEST(Split, SizesAndDeterminism) {
    const LabeledDataset ds = generate_synthetic(4, 3, 100, 11);
    const TrainTestSplit s1 = split_train_test(ds, 0.2, 9);
    const TrainTestSplit s2 = split_train_test(ds, 0.2, 9);
    EXPECT_EQ(s1.test.size(), 80u);
    EXPECT_EQ(s1.train.size(), 320u);
    EXPECT_EQ(s1.train.features, s2.train.features);
    EXPECT_EQ(s1.test.labels, s2.test.labels);
}

std::string temp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

void write_idx_fixture(const std::string& img_path, const std::string& lab_path,
                       const std::vector<unsigned char>& pixels,
                       const std::vector<unsigned char>& labels, std::uint32_t rows,
                       std::uint32_t cols, bool truncate_images = false,
                       std::uint32_t img_magic = kIdxImagesMagic,
                       std::uint32_t lab_magic = kIdxLabelsMagic,
                       std::uint32_t label_count_override = 0) {
    auto be = [](std::ofstream& out, std::uint32_t v) {
        const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                           static_cast<char>(v >> 8), static_cast<char>(v)};
        out.write(b, 4);
    };
    std::ofstream img(img_path, std::ios::binary);
    be(img, img_magic);
    be(img, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
    be(img, rows);
    be(img, cols);
    const std::size_t n = truncate_images ? pixels.size() - 1 : pixels.size();
    img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(n));
    img.close();
    std::ofstream lab(lab_path, std::ios::binary);
    be(lab, lab_magic);
    be(lab, label_count_override ? label_count_override
                                 : static_cast<std::uint32_t>(labels.size()));
    lab.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

TEST(Idx, ScalingEndpoints) {
    const std::string img = temp_path("fedsim_idx_img");
    const std::string lab = temp_path("fedsim_idx_lab");
    write_idx_fixture(img, lab, {0, 255}, {0, 1}, 1, 1);
    const LabeledDataset ds = load_idx(img, lab);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_DOUBLE_EQ(ds.features(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(ds.features(1, 0), 1.0);
    EXPECT_EQ(ds.class_count, 2);
    fs::remove(img);
    fs::remove(lab);
}

TEST(Idx, TruncatedFileFailsAtomically) {
    const std::string img = temp_path("fedsim_idx_img_t");
    const std::string lab = temp_path("fedsim_idx_lab_t");
    write_idx_fixture(img, lab, {1, 2, 3, 4}, {0, 1}, 1, 2, /*truncate_images=*/true);
    EXPECT_THROW(load_idx(img, lab), Error);
    fs::remove(img);
    fs::remove(lab);
}

TEST(Idx, BadMagicRejected) {
    const std::string img = temp_path("fedsim_idx_img_m");
    const std::string lab = temp_path("fedsim_idx_lab_m");
    write_idx_fixture(img, lab, {1}, {0}, 1, 1, false, 0x00000802);
    EXPECT_THROW(load_idx(img, lab), Error);
    write_idx_fixture(img, lab, {1}, {0}, 1, 1, false, kIdxImagesMagic, 0x00000802);
    EXPECT_THROW(load_idx(img, lab), Error);
    fs::remove(img);
    fs::remove(lab);
}

TEST(Idx, CountMismatchRejected) {
    const std::string img = temp_path("fedsim_idx_img_c");
    const std::string lab = temp_path("fedsim_idx_lab_c");
    write_idx_fixture(img, lab, {1, 2}, {0, 1}, 1, 1, false, kIdxImagesMagic, kIdxLabelsMagic,
                      /*label_count_override=*/3);
    EXPECT_THROW(load_idx(img, lab), Error);
    fs::remove(img);
    fs::remove(lab);
}

// Byte-valued features survive a save/load cycle exactly.
TEST(Idx, RoundTrip) {
    const std::string img = temp_path("fedsim_idx_img_rt");
    const std::string lab = temp_path("fedsim_idx_lab_rt");
    LabeledDataset ds;
    ds.features = Matrix(4, 3);
    Rng rng(8);
    for (double& v : ds.features.data)
        v = static_cast<double>(rng.uniform_int(256)) / 255.0;
    ds.labels = {0, 2, 1, 2};
    ds.class_count = 3;
    save_idx(ds, img, lab);
    const LabeledDataset back = load_idx(img, lab);
    EXPECT_EQ(back.features, ds.features);
    EXPECT_EQ(back.labels, ds.labels);
    fs::remove(img);
    fs::remove(lab);
}

}  // namespace
