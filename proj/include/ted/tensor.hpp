#pragma once

// Dense row-major tensor of 64-bit floats, rank 1 to 3. This is the value
// type everything numeric flows through; autodiff lives in tape.hpp.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ted/common.hpp"

namespace ted {

class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_numel(shape_) != data_.size())
            throw ShapeError("Tensor: data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor row(std::vector<double> values) {
        std::size_t n = values.size();
        return Tensor({1, n}, std::move(values));
    }

    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values) {
        return Tensor({r, c}, std::move(values));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        require_rank2("rows");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols");
        return shape_[1];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) {
        require_rank2("at");
        return data_[i * shape_[1] + j];
    }
    double at(std::size_t i, std::size_t j) const {
        require_rank2("at");
        return data_[i * shape_[1] + j];
    }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool on) {
        requires_grad_ = on;
        return *this;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "x" : "") + std::to_string(shape_[i]);
        return s + "]";
    }

  private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        if (shape.empty() || shape.size() > 3)
            throw ShapeError("Tensor: rank must be between 1 and 3");
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeError("Tensor: zero extent");
            n *= d;
        }
        return n;
    }

    void require_rank2(const char* what) const {
        if (shape_.size() != 2)
            throw ShapeError(std::string("Tensor::") + what + " requires rank 2, have " + shape_str());
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

}  // namespace ted
