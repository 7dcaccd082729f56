#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "fourie/errors.hpp"

namespace fourie {

// Dense row-major tensor of doubles. The model only ever needs rank 1 and 2;
// scalars are stored as 1x1.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size()) {
            throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
        }
    }

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }
    static Tensor full(std::size_t r, std::size_t c, double v) { return Tensor({r, c}, v); }

    static Tensor eye(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    std::size_t numel() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t rows() const {
        require_rank2("rows");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols");
        return shape_[1];
    }

    double& at(std::size_t i, std::size_t j) {
        require_rank2("at");
        return data_[i * shape_[1] + j];
    }
    double at(std::size_t i, std::size_t j) const {
        require_rank2("at");
        return data_[i * shape_[1] + j];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        if (numel() != 1) {
            throw ContractError("item: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
        }
        return data_[0];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) os << 'x';
            os << shape_[i];
        }
        os << ']';
        return os.str();
    }

private:
    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    void require_rank2(const char* what) const {
        if (shape_.size() != 2) {
            throw ShapeError(std::string(what) + ": tensor is not rank 2, shape " + shape_str());
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace fourie
