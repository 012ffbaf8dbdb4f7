#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/error.hpp"

namespace fedsim {

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (in.gcount() != 4)
        throw Error(ErrorCategory::Data, "truncated IDX file '" + path + "'");
    return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
           (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                           static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(bytes, 4);
}

}  // namespace detail

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // ubyte, 3 dims
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // ubyte, 1 dim

// Loads an MNIST-style IDX image/label pair. Pixels are scaled to [0, 1];
// class count is taken from the largest label present. Throws before
// returning anything partial.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error(ErrorCategory::Io, "cannot open '" + images_path + "'");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error(ErrorCategory::Io, "cannot open '" + labels_path + "'");

    const std::uint32_t img_magic = detail::read_be_u32(img, images_path);
    if (img_magic != kIdxImagesMagic)
        throw Error(ErrorCategory::Data,
                    "bad IDX magic in '" + images_path + "': expected 0x00000803");
    const std::uint32_t n_images = detail::read_be_u32(img, images_path);
    const std::uint32_t rows = detail::read_be_u32(img, images_path);
    const std::uint32_t cols = detail::read_be_u32(img, images_path);

    const std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
    if (lab_magic != kIdxLabelsMagic)
        throw Error(ErrorCategory::Data,
                    "bad IDX magic in '" + labels_path + "': expected 0x00000801");
    const std::uint32_t n_labels = detail::read_be_u32(lab, labels_path);

    if (n_images != n_labels)
        throw Error(ErrorCategory::Data,
                    "IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                        std::to_string(n_labels) + " labels");

    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(std::size_t(n_images) * d);
    img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (static_cast<std::size_t>(img.gcount()) != pixels.size())
        throw Error(ErrorCategory::Data, "truncated IDX file '" + images_path + "'");

    std::vector<unsigned char> raw_labels(n_labels);
    lab.read(reinterpret_cast<char*>(raw_labels.data()),
             static_cast<std::streamsize>(raw_labels.size()));
    if (static_cast<std::size_t>(lab.gcount()) != raw_labels.size())
        throw Error(ErrorCategory::Data, "truncated IDX file '" + labels_path + "'");

    LabeledDataset ds;
    ds.features = Matrix(n_images, d);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.features.data[i] = static_cast<double>(pixels[i]) / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.class_count = max_label + 1;
    return ds;
}

// Writes a dataset back out as an IDX pair, quantizing features to bytes.
// Non-image data is stored as n x 1 x dim.
inline void save_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw Error(ErrorCategory::Io, "cannot open '" + images_path + "' for writing");
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error(ErrorCategory::Io, "cannot open '" + labels_path + "' for writing");

    detail::write_be_u32(img, kIdxImagesMagic);
    detail::write_be_u32(img, static_cast<std::uint32_t>(ds.size()));
    detail::write_be_u32(img, 1);
    detail::write_be_u32(img, static_cast<std::uint32_t>(ds.dim()));
    for (double v : ds.features.data) {
        const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        img.put(static_cast<char>(q));
    }

    detail::write_be_u32(lab, kIdxLabelsMagic);
    detail::write_be_u32(lab, static_cast<std::uint32_t>(ds.labels.size()));
    for (int y : ds.labels) lab.put(static_cast<char>(y));
    if (!img || !lab) throw Error(ErrorCategory::Io, "IDX write failed");
}

}  // namespace fedsim
