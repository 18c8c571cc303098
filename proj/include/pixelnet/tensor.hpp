#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pixelnet/errors.hpp"

namespace pixelnet {

// Dense N-dimensional array, row-major, value semantics. The universal value
// type: images, feature maps, hypercolumn batches, and parameters all live in
// Tensor<float> (training) or Tensor<double> (gradient-check harnesses).
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != checked_size(shape_)) {
            throw ConfigError("tensor data size " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor full(std::vector<int> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    std::int64_t bytes() const { return size() * static_cast<std::int64_t>(sizeof(T)); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Row-major accessors for the common ranks.
    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * dim(1) + j]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * dim(1) + j]; }
    T& at(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    const T& at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    T& at(int i, int j, int k, int l) {
        return data_[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data_[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

    static std::string shape_string(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << "]";
        return os.str();
    }
    std::string shape_string() const { return shape_string(shape_); }

  private:
    static std::int64_t checked_size(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int e : shape) {
            if (e < 0) throw ConfigError("negative tensor extent in " + shape_string(shape));
            n *= e;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

}  // namespace pixelnet
