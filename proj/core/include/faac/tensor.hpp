#pragma once

#include <cstdint>
#include <vector>

#include "faac/common.hpp"
#include "faac/rng.hpp"

namespace faac {

// Dense float32 array used by the network. Contiguous row-major storage,
// NCHW for 4-d data. Value semantics throughout.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float value);
    static Tensor randn(std::vector<int> shape, Rng& rng, float stddev = 1.0f);

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-d accessor, [n, c, h, w]
    float& at(int n, int c, int h, int w) {
        return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    float at(int n, int c, int h, int w) const {
        return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    // 2-d accessor, [r, c]
    float& at(int r, int c) { return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)]; }
    float at(int r, int c) const { return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)]; }

    void fill(float v);
    void zero() { fill(0.0f); }
    void add_(const Tensor& other, float scale = 1.0f);
    void scale_(float s);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    Tensor reshaped(std::vector<int> shape) const;

  private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& a);

}  // namespace faac
