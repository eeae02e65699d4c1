// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic digit corpus. Digits are rendered as seven-segment
// glyphs on a 28x28 grid, jittered per sample by a small random affine map
// (shift, rotation, scale) with additive pixel noise, then quantized to bytes
// and written through the standard IDX container. The result is a
// self-contained classification task with the same shapes and loading path
// as the usual handwritten-digit files.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "freegrad/idx.hpp"
#include "freegrad/random.hpp"

namespace freegrad {

constexpr std::size_t kDigitRows = 28;
constexpr std::size_t kDigitCols = 28;

namespace detail {

// Axis-aligned segment boxes in pixel coordinates, [x0,x1] x [y0,y1]
// inclusive. Layout follows the usual seven-segment naming: A top bar,
// G middle, D bottom, F/B upper left/right posts, E/C lower left/right.
struct SegmentBox {
    int x0, x1, y0, y1;
};

inline const std::array<SegmentBox, 7>& segment_boxes() {
    static const std::array<SegmentBox, 7> boxes = {{
        {9, 19, 4, 6},    // A
        {19, 21, 5, 14},  // B
        {19, 21, 14, 23}, // C
        {9, 19, 22, 24},  // D
        {7, 9, 14, 23},   // E
        {7, 9, 5, 14},    // F
        {9, 19, 13, 15},  // G
    }};
    return boxes;
}

inline std::uint8_t digit_segment_mask(std::size_t digit) {
    // Bit k lights segment 'A' + k.
    static const std::array<std::uint8_t, 10> masks = {{
        0b0111111,  // 0: ABCDEF
        0b0000110,  // 1: BC
        0b1011011,  // 2: ABDEG
        0b1001111,  // 3: ABCDG
        0b1100110,  // 4: BCFG
        0b1101101,  // 5: ACDFG
        0b1111101,  // 6: ACDEFG
        0b0000111,  // 7: ABC
        0b1111111,  // 8
        0b1101111,  // 9: ABCDFG
    }};
    return masks[digit % 10];
}

}  // namespace detail

// Clean glyph for one digit: intensity 1 inside lit segments, 0 elsewhere,
// row-major 28x28.
inline std::vector<double> digit_stencil(std::size_t digit) {
    std::vector<double> img(kDigitRows * kDigitCols, 0.0);
    const std::uint8_t mask = detail::digit_segment_mask(digit);
    const auto& boxes = detail::segment_boxes();
    for (std::size_t s = 0; s < boxes.size(); ++s) {
        if (!(mask & (1u << s))) continue;
        for (int y = boxes[s].y0; y <= boxes[s].y1; ++y) {
            for (int x = boxes[s].x0; x <= boxes[s].x1; ++x) {
                img[std::size_t(y) * kDigitCols + std::size_t(x)] = 1.0;
            }
        }
    }
    return img;
}

// One jittered sample: the stencil is pulled through the inverse of a random
// affine map about the image center and sampled bilinearly, then corrupted
// with Gaussian pixel noise and quantized.
inline std::vector<std::uint8_t> render_digit(std::size_t digit, Rng& rng) {
    const std::vector<double> stencil = digit_stencil(digit);
    const double shift_x = rng.uniform(-2.0, 2.0);
    const double shift_y = rng.uniform(-2.0, 2.0);
    const double angle = rng.uniform(-0.12, 0.12);
    const double scale = rng.uniform(0.9, 1.08);
    const double noise_std = 0.06;
    const double cx = (double(kDigitCols) - 1.0) / 2.0;
    const double cy = (double(kDigitRows) - 1.0) / 2.0;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);

    std::vector<std::uint8_t> out(kDigitRows * kDigitCols);
    for (std::size_t y = 0; y < kDigitRows; ++y) {
        for (std::size_t x = 0; x < kDigitCols; ++x) {
            // Invert dest = center + shift + scale * R(angle) * (src - center).
            const double dx = double(x) - cx - shift_x;
            const double dy = double(y) - cy - shift_y;
            const double sx = cx + (ca * dx + sa * dy) / scale;
            const double sy = cy + (-sa * dx + ca * dy) / scale;

            double v = 0.0;
            const int x0 = int(std::floor(sx));
            const int y0 = int(std::floor(sy));
            const double fx = sx - double(x0);
            const double fy = sy - double(y0);
            for (int oy = 0; oy <= 1; ++oy) {
                for (int ox = 0; ox <= 1; ++ox) {
                    const int px = x0 + ox;
                    const int py = y0 + oy;
                    if (px < 0 || py < 0 || px >= int(kDigitCols) || py >= int(kDigitRows)) {
                        continue;
                    }
                    const double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
                    v += w * stencil[std::size_t(py) * kDigitCols + std::size_t(px)];
                }
            }
            v += noise_std * rng.normal();
            v = std::clamp(v, 0.0, 1.0);
            out[y * kDigitCols + x] = std::uint8_t(std::lround(v * 255.0));
        }
    }
    return out;
}

// Renders a balanced corpus (labels cycle 0..9) into IDX image/label files.
inline void write_synthetic_digits(const std::string& images_path, const std::string& labels_path,
                                   std::size_t count, RngSeed seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> pixels;
    pixels.reserve(count * kDigitRows * kDigitCols);
    std::vector<std::uint8_t> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t digit = i % 10;
        labels[i] = std::uint8_t(digit);
        const std::vector<std::uint8_t> img = render_digit(digit, rng);
        pixels.insert(pixels.end(), img.begin(), img.end());
    }
    save_idx_images(images_path, count, kDigitRows, kDigitCols, pixels);
    save_idx_labels(labels_path, labels);
}

// Materializes train/test splits under dir using the conventional file names,
// skipping any file that already exists. Returns the directory.
inline std::string ensure_synthetic_dataset(const std::string& dir, std::size_t train_count,
                                            std::size_t test_count, RngSeed seed = 7302) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string train_images = dir + "/train-images-idx3-ubyte";
    const std::string train_labels = dir + "/train-labels-idx1-ubyte";
    const std::string test_images = dir + "/t10k-images-idx3-ubyte";
    const std::string test_labels = dir + "/t10k-labels-idx1-ubyte";
    if (!fs::exists(train_images) || !fs::exists(train_labels)) {
        write_synthetic_digits(train_images, train_labels, train_count, seed);
    }
    if (!fs::exists(test_images) || !fs::exists(test_labels)) {
        write_synthetic_digits(test_images, test_labels, test_count, seed + 1);
    }
    return dir;
}

}  // namespace freegrad
