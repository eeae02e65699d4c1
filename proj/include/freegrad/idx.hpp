// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// IDX container reader and writer plus the supervised dataset it feeds. The
// format is the classic big-endian one used by the MNIST distribution: a
// magic word encoding element type and rank, one 32-bit dimension per axis,
// then the raw unsigned-byte payload. Images load as [0,1]-scaled columns,
// labels as one-hot columns with optional smoothing.

#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "freegrad/tensor.hpp"

namespace freegrad {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // unsigned byte, rank 3
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // unsigned byte, rank 1

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& context) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(context + ": truncated while reading a 32-bit field");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;

    std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
    std::size_t element_size() const {
        std::size_t n = 1;
        for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
        return n;
    }
};

// Parses the magic word and dimension list. The two top magic bytes must be
// zero and the element type must be unsigned byte (0x08); the low byte gives
// the rank.
inline IdxHeader read_idx_header(std::istream& in, const std::string& context = "idx") {
    IdxHeader h;
    h.magic = detail::read_be32(in, context);
    if ((h.magic >> 16) != 0 || ((h.magic >> 8) & 0xff) != 0x08) {
        std::ostringstream msg;
        msg << context << ": bad magic 0x" << std::hex << h.magic
            << " (expected an unsigned-byte IDX file)";
        throw std::runtime_error(msg.str());
    }
    const std::uint32_t rank = h.magic & 0xff;
    for (std::uint32_t d = 0; d < rank; ++d) {
        h.dims.push_back(detail::read_be32(in, context));
    }
    return h;
}

struct IdxData {
    IdxHeader header;
    std::vector<std::uint8_t> bytes;
};

inline IdxData read_idx(std::istream& in, std::uint32_t expected_magic,
                        const std::string& context) {
    IdxData d;
    d.header = read_idx_header(in, context);
    if (d.header.magic != expected_magic) {
        std::ostringstream msg;
        msg << context << ": magic 0x" << std::hex << d.header.magic << " but expected 0x"
            << expected_magic;
        throw std::runtime_error(msg.str());
    }
    std::size_t total = d.header.dims.empty() ? 0 : 1;
    for (std::uint32_t dim : d.header.dims) total *= dim;
    d.bytes.resize(total);
    in.read(reinterpret_cast<char*>(d.bytes.data()), std::streamsize(total));
    if (std::size_t(in.gcount()) != total) {
        std::ostringstream msg;
        msg << context << ": truncated payload, expected " << total << " bytes but found "
            << in.gcount();
        throw std::runtime_error(msg.str());
    }
    return d;
}

inline IdxData load_idx(const std::string& path, std::uint32_t expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_idx(in, expected_magic, path);
}

inline void write_idx(std::ostream& out, const IdxHeader& header,
                      const std::vector<std::uint8_t>& bytes) {
    detail::write_be32(out, header.magic);
    for (std::uint32_t d : header.dims) detail::write_be32(out, d);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline void save_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                            std::size_t cols, const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() != count * rows * cols) {
        throw std::invalid_argument("save_idx_images: payload size disagrees with dimensions");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    IdxHeader h;
    h.magic = kIdxImagesMagic;
    h.dims = {std::uint32_t(count), std::uint32_t(rows), std::uint32_t(cols)};
    write_idx(out, h, bytes);
}

inline void save_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    IdxHeader h;
    h.magic = kIdxLabelsMagic;
    h.dims = {std::uint32_t(labels.size())};
    write_idx(out, h, labels);
}

// Supervised image dataset in column form: one sample per column, pixels in
// [0,1], targets as (optionally smoothed) one-hot columns.
struct Dataset {
    Tensor images;  // pixels x count
    Tensor labels;  // classes x count
    std::vector<std::size_t> label_ids;
    std::size_t image_rows = 0;
    std::size_t image_cols = 0;

    std::size_t count() const { return label_ids.size(); }
    std::size_t pixels() const { return image_rows * image_cols; }
    std::size_t classes() const { return labels.rows(); }
};

// Loads paired image/label IDX files. A nonzero limit keeps only the leading
// samples, which is the deterministic subset rule every experiment uses.
// Smoothing s replaces the one-hot target by s/K + (1-s) at the true class.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              double label_smoothing = 0.0, std::size_t limit = 0) {
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw std::invalid_argument("load_mnist_idx: smoothing must lie in [0, 1)");
    }
    const IdxData images = load_idx(images_path, kIdxImagesMagic);
    const IdxData labels = load_idx(labels_path, kIdxLabelsMagic);
    if (images.header.count() != labels.header.count()) {
        std::ostringstream msg;
        msg << "load_mnist_idx: image count " << images.header.count()
            << " disagrees with label count " << labels.header.count();
        throw std::runtime_error(msg.str());
    }

    Dataset d;
    d.image_rows = images.header.dims[1];
    d.image_cols = images.header.dims[2];
    const std::size_t pixels = d.pixels();
    std::size_t count = images.header.count();
    if (limit > 0 && limit < count) count = limit;

    constexpr std::size_t classes = 10;
    d.images = Tensor({pixels, count});
    d.labels = Tensor({classes, count});
    d.label_ids.resize(count);
    const double off = label_smoothing / double(classes);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t p = 0; p < pixels; ++p) {
            d.images.at(p, s) = double(images.bytes[s * pixels + p]) / 255.0;
        }
        const std::uint8_t label = labels.bytes[s];
        if (label >= classes) {
            throw std::runtime_error("load_mnist_idx: label " + std::to_string(label) +
                                     " at sample " + std::to_string(s) + " is out of range");
        }
        d.label_ids[s] = label;
        for (std::size_t c = 0; c < classes; ++c) {
            d.labels.at(c, s) = off + (c == label ? 1.0 - label_smoothing : 0.0);
        }
    }
    return d;
}

// Gathers the given sample indices into contiguous input/target columns.
inline void dataset_batch(const Dataset& d, const std::vector<std::size_t>& order,
                          std::size_t start, std::size_t count, Tensor& input, Tensor& target) {
    if (start + count > order.size()) {
        throw std::invalid_argument("dataset_batch: batch range exceeds the sample order");
    }
    const std::size_t pixels = d.images.rows();
    const std::size_t classes = d.labels.rows();
    input = Tensor({pixels, count});
    target = Tensor({classes, count});
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t s = order[start + j];
        for (std::size_t p = 0; p < pixels; ++p) input.at(p, j) = d.images.at(p, s);
        for (std::size_t c = 0; c < classes; ++c) target.at(c, j) = d.labels.at(c, s);
    }
}

}  // namespace freegrad
