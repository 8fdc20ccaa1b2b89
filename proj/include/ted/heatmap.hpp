#pragma once

// Self-contained attention heatmap rendering: binary PGM (P5) with turn
// indices drawn in the margins from a tiny built-in digit font. Matrices are
// the ground truth; the image is a convenience view. Cells the causal mask
// or history window excludes are hatched.

#include <fstream>
#include <string>
#include <vector>

#include "ted/common.hpp"
#include "ted/tensor.hpp"

namespace ted {

namespace detail {

// 3x5 digit glyphs, one bit per pixel, row-major top to bottom.
inline const std::uint16_t* digit_font() {
    static const std::uint16_t glyphs[10] = {
        0b111101101101111,  // 0
        0b010110010010111,  // 1
        0b111001111100111,  // 2
        0b111001111001111,  // 3
        0b101101111001001,  // 4
        0b111100111001111,  // 5
        0b111100111101111,  // 6
        0b111001001001001,  // 7
        0b111101111101111,  // 8
        0b111101111001111,  // 9
    };
    return glyphs;
}

inline void draw_digit(std::vector<unsigned char>& img, std::size_t img_w, std::size_t x0,
                       std::size_t y0, int digit, unsigned char shade) {
    const std::uint16_t bits = digit_font()[digit];
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            if (bits >> (14 - (r * 3 + c)) & 1) img[(y0 + r) * img_w + (x0 + c)] = shade;
}

inline void draw_number(std::vector<unsigned char>& img, std::size_t img_w, std::size_t x0,
                        std::size_t y0, std::size_t value, unsigned char shade) {
    const std::string digits = std::to_string(value);
    for (std::size_t i = 0; i < digits.size(); ++i)
        draw_digit(img, img_w, x0 + 4 * i, y0, digits[i] - '0', shade);
}

}  // namespace detail

// Renders a turns x turns attention matrix. Valid cells map attention 0..1
// to black..white; cells outside the lower triangle or beyond the window are
// hatched mid-gray.
inline void write_attention_heatmap_pgm(const Tensor& matrix, std::size_t window,
                                        const std::string& path) {
    if (matrix.rank() != 2 || matrix.rows() != matrix.cols())
        throw DataError("heatmap: expected a square turns x turns matrix");
    const std::size_t n = matrix.rows();
    const std::size_t cell = 16, margin = 12;
    const std::size_t w = margin + n * cell, h = margin + n * cell;
    std::vector<unsigned char> img(w * h, 32);  // margin background

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const bool valid = j <= i && i < j + window;
            for (std::size_t py = 0; py < cell; ++py) {
                for (std::size_t px = 0; px < cell; ++px) {
                    const std::size_t y = margin + i * cell + py;
                    const std::size_t x = margin + j * cell + px;
                    unsigned char shade;
                    if (valid) {
                        double v = matrix.at(i, j);
                        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                        shade = static_cast<unsigned char>(v * 255.0 + 0.5);
                    } else {
                        shade = ((px + py) % 6 < 3) ? 88 : 64;  // hatched: masked
                    }
                    img[y * w + x] = shade;
                }
            }
        }
        // row / column turn labels
        detail::draw_number(img, w, 1, margin + i * cell + 5, i, 255);
        detail::draw_number(img, w, margin + i * cell + 4, 3, i, 255);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!out) throw DataError("failed writing heatmap to '" + path + "'");
}

// Delimited-text dump of one attention matrix with row/column turn labels.
inline std::string attention_matrix_to_tsv(const Tensor& matrix,
                                           const std::vector<std::string>& row_labels,
                                           const std::vector<std::string>& col_labels) {
    const std::size_t n = matrix.rows();
    std::string out = "turn";
    for (std::size_t j = 0; j < n; ++j)
        out += strf("\tt%zu:%s", j, j < col_labels.size() ? col_labels[j].c_str() : "");
    out += "\n";
    for (std::size_t i = 0; i < n; ++i) {
        out += strf("t%zu:%s", i, i < row_labels.size() ? row_labels[i].c_str() : "");
        for (std::size_t j = 0; j < n; ++j) out += strf("\t%.9f", matrix.at(i, j));
        out += "\n";
    }
    return out;
}

}  // namespace ted
