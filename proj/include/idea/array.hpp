#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace idea::diff {

/// Row-major 2-D shape. Vectors are carried as 1xN rows, scalars as 1x1.
using Shape = std::array<std::size_t, 2>;

inline std::size_t numel(const Shape& s) { return s[0] * s[1]; }

inline std::string shape_str(const Shape& s) {
    return std::to_string(s[0]) + "x" + std::to_string(s[1]);
}

/// Double-precision numeric carrier. `grad` is empty until a backward pass
/// deposits into it; when present it has the same element count as `values`.
struct Array {
    Shape shape{1, 1};
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;

    Array() : values(1, 0.0) {}

    Array(std::size_t rows, std::size_t cols, bool req_grad = false)
        : shape{rows, cols}, values(rows * cols, 0.0), requires_grad(req_grad) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("Array: zero dimension in shape " + shape_str(shape));
        }
    }

    Array(std::size_t rows, std::size_t cols, std::vector<double> vals, bool req_grad = false)
        : shape{rows, cols}, values(std::move(vals)), requires_grad(req_grad) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("Array: zero dimension in shape " + shape_str(shape));
        }
        if (values.size() != rows * cols) {
            throw std::invalid_argument("Array: " + std::to_string(values.size()) +
                                        " values do not fill shape " + shape_str(shape));
        }
    }

    static Array row(std::vector<double> vals, bool req_grad = false) {
        std::size_t n = vals.size();
        return Array(1, n, std::move(vals), req_grad);
    }

    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape[1]; }
    std::size_t size() const { return values.size(); }

    double& at(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

    /// Gradient with zero-fill on first access; shape mirrors `values`.
    std::vector<double>& ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
        return grad;
    }

    void zero_grad() {
        if (!grad.empty()) grad.assign(values.size(), 0.0);
    }
};

}  // namespace idea::diff
