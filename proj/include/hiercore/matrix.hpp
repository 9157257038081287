#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace hiercore {

// Dense row-major f32 matrix. One row per observation.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Matrix(std::size_t r, std::size_t c, std::vector<float> values)
        : rows(r), cols(c), data(std::move(values)) {}

    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }

    float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool empty() const noexcept { return rows == 0; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Squared Euclidean distance, accumulated in double.
inline double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

inline double l2(std::span<const float> a, std::span<const float> b) noexcept {
    return std::sqrt(squared_l2(a, b));
}

// Throws ErrorKind::data when any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

}  // namespace hiercore
