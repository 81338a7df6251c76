#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "faac/common.hpp"
#include "faac/rng.hpp"
#include "faac/tensor.hpp"

namespace faac {

// Double-precision [C, H, W] pixel array. The diffusion arithmetic runs in
// double so the algebraic identities (forward/inversion round trips) hold to
// tight tolerances; the network itself works in float32 Tensors.
struct Grid {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0) {}

    int64_t numel() const { return int64_t(c) * h * w; }
    double& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }

    bool same_shape(const Grid& o) const { return c == o.c && h == o.h && w == o.w; }
    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    static Grid randn(int c, int h, int w, Rng& rng) {
        Grid g(c, h, w);
        for (auto& x : g.v) x = rng.gaussian();
        return g;
    }
};

inline Tensor to_tensor(const Grid& g) {
    Tensor t({1, g.c, g.h, g.w});
    for (int64_t i = 0; i < g.numel(); ++i) t[i] = static_cast<float>(g.v[size_t(i)]);
    return t;
}

inline Grid to_grid(const Tensor& t, int n = 0) {
    FAAC_REQUIRE(t.ndim() == 4, "to_grid: expected 4-d tensor");
    Grid g(t.dim(1), t.dim(2), t.dim(3));
    const float* src = t.data() + int64_t(n) * g.numel();
    for (int64_t i = 0; i < g.numel(); ++i) g.v[size_t(i)] = src[i];
    return g;
}

inline double rms_diff(const Grid& a, const Grid& b) {
    FAAC_REQUIRE(a.same_shape(b), "rms_diff: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return std::sqrt(s / double(a.v.size()));
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
    FAAC_REQUIRE(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace faac
