#include "faac/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace faac {

namespace {
int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = shape.empty() ? 0 : 1;
    for (int d : shape) {
        FAAC_REQUIRE(d >= 0, "tensor: negative dimension");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0f);
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, float stddev) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * static_cast<float>(rng.gaussian());
    return t;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other, float scale) {
    FAAC_REQUIRE(same_shape(other), "tensor: shape mismatch in add_");
    const float* src = other.data();
    float* dst = data();
    for (int64_t i = 0; i < numel(); ++i) dst[i] += scale * src[i];
}

void Tensor::scale_(float s) {
    for (float& v : data_) v *= s;
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    FAAC_REQUIRE(shape_numel(shape) == numel(), "tensor: reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    FAAC_REQUIRE(a.same_shape(b), "tensor: shape mismatch in max_abs_diff");
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

double sum_squares(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += double(a[i]) * double(a[i]);
    return s;
}

}  // namespace faac
