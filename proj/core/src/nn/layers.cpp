#include "faac/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <omp.h>

#include "faac/common.hpp"
#include "faac/parallel.hpp"

namespace faac::nn {

namespace {

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Fixed shard boundaries derived from worker_count() so reduction order is
// identical whether or not the loop actually runs in parallel.
struct Shards {
    int count;
    int items;
    int begin(int s) const { return int(int64_t(s) * items / count); }
    int end(int s) const { return int(int64_t(s + 1) * items / count); }
};

Shards make_shards(int items) {
    int c = std::min(worker_count(), std::max(1, items));
    return Shards{c, items};
}

void im2col(const float* x, int c, int h, int w, int ksize, int stride, int pad, int oh, int ow,
            float* cols) {
    // cols: [c * k * k, oh * ow]
    const int64_t cols_w = int64_t(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                float* row = cols + ((int64_t(ci) * ksize + ky) * ksize + kx) * cols_w;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::memset(row + int64_t(oy) * ow, 0, sizeof(float) * size_t(ow));
                        continue;
                    }
                    const float* src = x + (int64_t(ci) * h + iy) * w;
                    float* dst = row + int64_t(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_add(const float* cols, int c, int h, int w, int ksize, int stride, int pad, int oh,
                int ow, float* x) {
    const int64_t cols_w = int64_t(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const float* row = cols + ((int64_t(ci) * ksize + ky) * ksize + kx) * cols_w;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    float* dst = x + (int64_t(ci) * h + iy) * w;
                    const float* src = row + int64_t(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamSet
// ---------------------------------------------------------------------------

Param* ParamSet::add(const std::string& name, std::vector<int> shape) {
    FAAC_REQUIRE(find(name) == nullptr, "param already registered: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = Tensor(shape);
    p->grad = Tensor(std::move(shape));
    params_.push_back(std::move(p));
    return params_.back().get();
}

Param* ParamSet::find(const std::string& name) const {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

void ParamSet::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

int64_t ParamSet::total_elements() const {
    int64_t n = 0;
    for (auto& p : params_) n += p->value.numel();
    return n;
}

uint64_t ParamSet::content_hash(const std::string& prefix) const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const void* data, size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    for (auto& p : params_) {
        if (p->name.rfind(prefix, 0) != 0) continue;
        feed(p->name.data(), p->name.size());
        feed(p->value.data(), sizeof(float) * size_t(p->value.numel()));
    }
    return h;
}

void ParamSet::set_frozen(const std::string& prefix, bool frozen) {
    for (auto& p : params_)
        if (p->name.rfind(prefix, 0) == 0) p->frozen = frozen;
}

// ---------------------------------------------------------------------------
// SiLU
// ---------------------------------------------------------------------------

Tensor silu_forward(const Tensor& x) {
    Tensor y(x.shape());
    const float* xv = x.data();
    float* yv = y.data();
    const int64_t n = x.numel();
#pragma omp parallel for if (n > 16384 && !omp_in_parallel()) schedule(static)
    for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] * sigmoidf(xv[i]);
    return y;
}

Tensor silu_backward(const Tensor& dy, const Tensor& x) {
    Tensor dx(x.shape());
    const float* xv = x.data();
    const float* dyv = dy.data();
    float* dxv = dx.data();
    const int64_t n = x.numel();
#pragma omp parallel for if (n > 16384 && !omp_in_parallel()) schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const float s = sigmoidf(xv[i]);
        dxv[i] = dyv[i] * s * (1.0f + xv[i] * (1.0f - s));
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

void Conv2d::init(ParamSet& ps, const std::string& name, int in_channels, int out_channels,
                  int kernel, int stride_, int pad_, Rng& rng, bool zero_init) {
    in_c = in_channels;
    out_c = out_channels;
    ksize = kernel;
    stride = stride_;
    pad = pad_;
    w = ps.add(name + ".w", {out_c, in_c * ksize * ksize});
    b = ps.add(name + ".b", {out_c});
    if (!zero_init) {
        const float std = 1.0f / std::sqrt(float(in_c * ksize * ksize));
        for (int64_t i = 0; i < w->value.numel(); ++i)
            w->value[i] = std * float(rng.gaussian());
    }
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
    FAAC_REQUIRE(x.ndim() == 4 && x.dim(1) == in_c, "conv: input shape mismatch");
    const int n = x.dim(0), h = x.dim(2), w_in = x.dim(3);
    const int oh = out_size(h), ow = out_size(w_in);
    const int kk = in_c * ksize * ksize;
    const int64_t cols_w = int64_t(oh) * ow;

    Tensor y({n, out_c, oh, ow});
    const bool plain_copy = (ksize == 1 && stride == 1 && pad == 0);

#pragma omp parallel if (n > 1 && !omp_in_parallel())
    {
        std::vector<float> cols(plain_copy ? 0 : size_t(kk) * cols_w);
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const float* xi = x.data() + int64_t(i) * in_c * h * w_in;
            const float* mat = xi;
            if (!plain_copy) {
                im2col(xi, in_c, h, w_in, ksize, stride, pad, oh, ow, cols.data());
                mat = cols.data();
            }
            float* yi = y.data() + int64_t(i) * out_c * cols_w;
            gemm(false, false, out_c, int(cols_w), kk, 1.0f, w->value.data(), kk, mat,
                 int(cols_w), 0.0f, yi, int(cols_w));
            for (int oc = 0; oc < out_c; ++oc) {
                const float bias = b->value[oc];
                float* row = yi + int64_t(oc) * cols_w;
                for (int64_t j = 0; j < cols_w; ++j) row[j] += bias;
            }
        }
    }
    if (cache) cache->x = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& cache) const {
    const Tensor& x = cache.x;
    FAAC_REQUIRE(!x.empty(), "conv backward: cache missing");
    const int n = x.dim(0), h = x.dim(2), w_in = x.dim(3);
    const int oh = out_size(h), ow = out_size(w_in);
    const int kk = in_c * ksize * ksize;
    const int64_t cols_w = int64_t(oh) * ow;
    const bool plain_copy = (ksize == 1 && stride == 1 && pad == 0);

    Tensor dx({n, in_c, h, w_in});

    // input gradient, parallel over samples (disjoint writes)
#pragma omp parallel if (n > 1 && !omp_in_parallel())
    {
        std::vector<float> dcols(size_t(kk) * cols_w);
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const float* dyi = dy.data() + int64_t(i) * out_c * cols_w;
            float* dxi = dx.data() + int64_t(i) * in_c * h * w_in;
            if (plain_copy) {
                gemm(true, false, kk, int(cols_w), out_c, 1.0f, w->value.data(), kk, dyi,
                     int(cols_w), 0.0f, dxi, int(cols_w));
            } else {
                gemm(true, false, kk, int(cols_w), out_c, 1.0f, w->value.data(), kk, dyi,
                     int(cols_w), 0.0f, dcols.data(), int(cols_w));
                col2im_add(dcols.data(), in_c, h, w_in, ksize, stride, pad, oh, ow, dxi);
            }
        }
    }

    if (!w->frozen) {
        // weight gradient as one big GEMM: gather dy into [out_c, n*oh*ow]
        // and cols into [kk, n*oh*ow]; a single GEMM keeps the result
        // independent of the worker count.
        Tensor dyt({out_c, int(n * cols_w)});
#pragma omp parallel for if (!omp_in_parallel()) schedule(static)
        for (int i = 0; i < n; ++i)
            for (int oc = 0; oc < out_c; ++oc)
                std::memcpy(dyt.data() + (int64_t(oc) * n + i) * cols_w,
                            dy.data() + (int64_t(i) * out_c + oc) * cols_w,
                            sizeof(float) * size_t(cols_w));

        Tensor cols_all({kk, int(n * cols_w)});
        if (plain_copy) {
#pragma omp parallel for if (!omp_in_parallel()) schedule(static)
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < in_c; ++c)
                    std::memcpy(cols_all.data() + (int64_t(c) * n + i) * cols_w,
                                x.data() + (int64_t(i) * in_c + c) * cols_w,
                                sizeof(float) * size_t(cols_w));
        } else {
            std::vector<float> cols(size_t(kk) * cols_w);
            for (int i = 0; i < n; ++i) {
                im2col(x.data() + int64_t(i) * in_c * h * w_in, in_c, h, w_in, ksize, stride, pad,
                       oh, ow, cols.data());
                for (int r = 0; r < kk; ++r)
                    std::memcpy(cols_all.data() + (int64_t(r) * n + i) * cols_w,
                                cols.data() + int64_t(r) * cols_w, sizeof(float) * size_t(cols_w));
            }
        }
        gemm(false, true, out_c, kk, int(n * cols_w), 1.0f, dyt.data(), int(n * cols_w),
             cols_all.data(), int(n * cols_w), 1.0f, w->grad.data(), kk);

        for (int oc = 0; oc < out_c; ++oc) {
            double s = 0.0;
            const float* row = dyt.data() + int64_t(oc) * n * cols_w;
            for (int64_t j = 0; j < int64_t(n) * cols_w; ++j) s += row[j];
            b->grad[oc] += float(s);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

void Linear::init(ParamSet& ps, const std::string& name, int in_features, int out_features,
                  Rng& rng, bool zero_init) {
    in_f = in_features;
    out_f = out_features;
    w = ps.add(name + ".w", {out_f, in_f});
    b = ps.add(name + ".b", {out_f});
    if (!zero_init) {
        const float std = 1.0f / std::sqrt(float(in_f));
        for (int64_t i = 0; i < w->value.numel(); ++i)
            w->value[i] = std * float(rng.gaussian());
    }
}

Tensor Linear::forward(const Tensor& x, Cache* cache) const {
    FAAC_REQUIRE(x.ndim() == 2 && x.dim(1) == in_f, "linear: input shape mismatch");
    const int n = x.dim(0);
    Tensor y({n, out_f});
    gemm(false, true, n, out_f, in_f, 1.0f, x.data(), in_f, w->value.data(), in_f, 0.0f, y.data(),
         out_f);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_f; ++j) y.at(i, j) += b->value[j];
    if (cache) cache->x = x;
    return y;
}

Tensor Linear::backward(const Tensor& dy, const Cache& cache) const {
    const Tensor& x = cache.x;
    FAAC_REQUIRE(!x.empty(), "linear backward: cache missing");
    const int n = x.dim(0);
    Tensor dx({n, in_f});
    gemm(false, false, n, in_f, out_f, 1.0f, dy.data(), out_f, w->value.data(), in_f, 0.0f,
         dx.data(), in_f);
    if (!w->frozen) {
        gemm(true, false, out_f, in_f, n, 1.0f, dy.data(), out_f, x.data(), in_f, 1.0f,
             w->grad.data(), in_f);
        for (int j = 0; j < out_f; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += dy.at(i, j);
            b->grad[j] += float(s);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GroupNorm
// ---------------------------------------------------------------------------

void GroupNorm::init(ParamSet& ps, const std::string& name, int channels_, int groups_) {
    channels = channels_;
    groups = groups_;
    FAAC_REQUIRE(channels % groups == 0, "groupnorm: channels must divide into groups");
    gamma = ps.add(name + ".gamma", {channels});
    beta = ps.add(name + ".beta", {channels});
    gamma->value.fill(1.0f);
}

Tensor GroupNorm::forward(const Tensor& x, Cache* cache) const {
    FAAC_REQUIRE(x.ndim() == 4 && x.dim(1) == channels, "groupnorm: input shape mismatch");
    const int n = x.dim(0), hw = x.dim(2) * x.dim(3);
    const int cpg = channels / groups;
    const int64_t gsize = int64_t(cpg) * hw;

    Tensor y(x.shape());
    Tensor mean({n, groups}), rstd({n, groups});

#pragma omp parallel for collapse(2) if (n * groups > 1 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < groups; ++g) {
            const float* xs = x.data() + (int64_t(i) * channels + int64_t(g) * cpg) * hw;
            double s = 0.0, s2 = 0.0;
            for (int64_t j = 0; j < gsize; ++j) {
                s += xs[j];
                s2 += double(xs[j]) * xs[j];
            }
            const double mu = s / double(gsize);
            const double var = std::max(0.0, s2 / double(gsize) - mu * mu);
            const float r = float(1.0 / std::sqrt(var + eps));
            mean.at(i, g) = float(mu);
            rstd.at(i, g) = r;
            float* ys = y.data() + (int64_t(i) * channels + int64_t(g) * cpg) * hw;
            for (int c = 0; c < cpg; ++c) {
                const float ga = gamma->value[g * cpg + c];
                const float be = beta->value[g * cpg + c];
                const float* xc = xs + int64_t(c) * hw;
                float* yc = ys + int64_t(c) * hw;
                for (int j = 0; j < hw; ++j) yc[j] = ga * (xc[j] - float(mu)) * r + be;
            }
        }
    }
    if (cache) {
        cache->x = x;
        cache->mean = std::move(mean);
        cache->rstd = std::move(rstd);
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy, const Cache& cache) const {
    const Tensor& x = cache.x;
    FAAC_REQUIRE(!x.empty(), "groupnorm backward: cache missing");
    const int n = x.dim(0), hw = x.dim(2) * x.dim(3);
    const int cpg = channels / groups;
    const int64_t gsize = int64_t(cpg) * hw;

    Tensor dx(x.shape());

#pragma omp parallel for collapse(2) if (n * groups > 1 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < groups; ++g) {
            const float mu = cache.mean.at(i, g);
            const float r = cache.rstd.at(i, g);
            const float* xs = x.data() + (int64_t(i) * channels + int64_t(g) * cpg) * hw;
            const float* dys = dy.data() + (int64_t(i) * channels + int64_t(g) * cpg) * hw;
            float* dxs = dx.data() + (int64_t(i) * channels + int64_t(g) * cpg) * hw;

            double sum1 = 0.0, sum2 = 0.0;
            for (int c = 0; c < cpg; ++c) {
                const float ga = gamma->value[g * cpg + c];
                const float* xc = xs + int64_t(c) * hw;
                const float* dyc = dys + int64_t(c) * hw;
                for (int j = 0; j < hw; ++j) {
                    const float xhat = (xc[j] - mu) * r;
                    sum1 += double(dyc[j]) * ga;
                    sum2 += double(dyc[j]) * ga * xhat;
                }
            }
            const float m1 = float(sum1 / double(gsize));
            const float m2 = float(sum2 / double(gsize));
            for (int c = 0; c < cpg; ++c) {
                const float ga = gamma->value[g * cpg + c];
                const float* xc = xs + int64_t(c) * hw;
                const float* dyc = dys + int64_t(c) * hw;
                float* dxc = dxs + int64_t(c) * hw;
                for (int j = 0; j < hw; ++j) {
                    const float xhat = (xc[j] - mu) * r;
                    dxc[j] = r * (dyc[j] * ga - m1 - xhat * m2);
                }
            }
        }
    }

    if (!gamma->frozen) {
        for (int i = 0; i < n; ++i)
            for (int g = 0; g < groups; ++g) {
                const float mu = cache.mean.at(i, g);
                const float r = cache.rstd.at(i, g);
                for (int c = 0; c < cpg; ++c) {
                    const int ch = g * cpg + c;
                    const float* xc = x.data() + (int64_t(i) * channels + ch) * hw;
                    const float* dyc = dy.data() + (int64_t(i) * channels + ch) * hw;
                    double dg = 0.0, db = 0.0;
                    for (int j = 0; j < hw; ++j) {
                        dg += double(dyc[j]) * (xc[j] - mu) * r;
                        db += dyc[j];
                    }
                    gamma->grad[ch] += float(dg);
                    beta->grad[ch] += float(db);
                }
            }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

void LayerNorm::init(ParamSet& ps, const std::string& name, int dim_) {
    dim = dim_;
    gamma = ps.add(name + ".gamma", {dim});
    beta = ps.add(name + ".beta", {dim});
    gamma->value.fill(1.0f);
}

Tensor LayerNorm::forward(const Tensor& x, Cache* cache) const {
    FAAC_REQUIRE(x.ndim() == 2 && x.dim(1) == dim, "layernorm: input shape mismatch");
    const int n = x.dim(0);
    Tensor y(x.shape()), mean({n}), rstd({n});
#pragma omp parallel for if (n > 256 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i) {
        const float* xi = x.data() + int64_t(i) * dim;
        double s = 0.0, s2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            s += xi[j];
            s2 += double(xi[j]) * xi[j];
        }
        const double mu = s / dim;
        const double var = std::max(0.0, s2 / dim - mu * mu);
        const float r = float(1.0 / std::sqrt(var + eps));
        mean[i] = float(mu);
        rstd[i] = r;
        float* yi = y.data() + int64_t(i) * dim;
        for (int j = 0; j < dim; ++j)
            yi[j] = gamma->value[j] * (xi[j] - float(mu)) * r + beta->value[j];
    }
    if (cache) {
        cache->x = x;
        cache->mean = std::move(mean);
        cache->rstd = std::move(rstd);
    }
    return y;
}

Tensor LayerNorm::backward(const Tensor& dy, const Cache& cache) const {
    const Tensor& x = cache.x;
    FAAC_REQUIRE(!x.empty(), "layernorm backward: cache missing");
    const int n = x.dim(0);
    Tensor dx(x.shape());
#pragma omp parallel for if (n > 256 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i) {
        const float mu = cache.mean[i];
        const float r = cache.rstd[i];
        const float* xi = x.data() + int64_t(i) * dim;
        const float* dyi = dy.data() + int64_t(i) * dim;
        float* dxi = dx.data() + int64_t(i) * dim;
        double sum1 = 0.0, sum2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            const float xhat = (xi[j] - mu) * r;
            sum1 += double(dyi[j]) * gamma->value[j];
            sum2 += double(dyi[j]) * gamma->value[j] * xhat;
        }
        const float m1 = float(sum1 / dim);
        const float m2 = float(sum2 / dim);
        for (int j = 0; j < dim; ++j) {
            const float xhat = (xi[j] - mu) * r;
            dxi[j] = r * (dyi[j] * gamma->value[j] - m1 - xhat * m2);
        }
    }
    if (!gamma->frozen) {
        for (int i = 0; i < n; ++i) {
            const float mu = cache.mean[i];
            const float r = cache.rstd[i];
            const float* xi = x.data() + int64_t(i) * dim;
            const float* dyi = dy.data() + int64_t(i) * dim;
            for (int j = 0; j < dim; ++j) {
                gamma->grad[j] += dyi[j] * (xi[j] - mu) * r;
                beta->grad[j] += dyi[j];
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

void Embedding::init(ParamSet& ps, const std::string& name, int vocab_, int dim_, Rng& rng) {
    vocab = vocab_;
    dim = dim_;
    table = ps.add(name, {vocab, dim});
    for (int64_t i = 0; i < table->value.numel(); ++i)
        table->value[i] = 0.1f * float(rng.gaussian());
}

Tensor Embedding::forward(const std::vector<int>& idx) const {
    Tensor y({int(idx.size()), dim});
    for (size_t i = 0; i < idx.size(); ++i) {
        FAAC_REQUIRE(idx[i] >= 0 && idx[i] < vocab, "embedding: index out of range");
        std::memcpy(y.data() + i * size_t(dim), table->value.data() + int64_t(idx[i]) * dim,
                    sizeof(float) * size_t(dim));
    }
    return y;
}

void Embedding::backward(const Tensor& dy, const std::vector<int>& idx) const {
    if (table->frozen) return;
    for (size_t i = 0; i < idx.size(); ++i) {
        float* g = table->grad.data() + int64_t(idx[i]) * dim;
        const float* d = dy.data() + i * size_t(dim);
        for (int j = 0; j < dim; ++j) g[j] += d[j];
    }
}

// ---------------------------------------------------------------------------
// Upsample / concat / sinusoidal
// ---------------------------------------------------------------------------

Tensor upsample2x_forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, 2 * h, 2 * w});
#pragma omp parallel for collapse(2) if (n * c > 1 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int yy = 0; yy < 2 * h; ++yy) {
                const float* src = x.data() + ((int64_t(i) * c + ci) * h + yy / 2) * w;
                float* dst = y.data() + ((int64_t(i) * c + ci) * 2 * h + yy) * 2 * w;
                for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
            }
    return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
    const int n = dy.dim(0), c = dy.dim(1), h2 = dy.dim(2), w2 = dy.dim(3);
    const int h = h2 / 2, w = w2 / 2;
    Tensor dx({n, c, h, w});
#pragma omp parallel for collapse(2) if (n * c > 1 && !omp_in_parallel()) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int yy = 0; yy < h2; ++yy) {
                const float* src = dy.data() + ((int64_t(i) * c + ci) * h2 + yy) * w2;
                float* dst = dx.data() + ((int64_t(i) * c + ci) * h + yy / 2) * w;
                for (int xx = 0; xx < w2; ++xx) dst[xx / 2] += src[xx];
            }
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    FAAC_REQUIRE(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                 "concat: shape mismatch");
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor y({n, ca + cb, a.dim(2), a.dim(3)});
    for (int i = 0; i < n; ++i) {
        std::memcpy(y.data() + int64_t(i) * (ca + cb) * hw, a.data() + int64_t(i) * ca * hw,
                    sizeof(float) * size_t(ca) * hw);
        std::memcpy(y.data() + (int64_t(i) * (ca + cb) + ca) * hw, b.data() + int64_t(i) * cb * hw,
                    sizeof(float) * size_t(cb) * hw);
    }
    return y;
}

void split_channels(const Tensor& dy, int c_a, Tensor& da, Tensor& db) {
    const int n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
    const int c_b = c - c_a;
    da = Tensor({n, c_a, dy.dim(2), dy.dim(3)});
    db = Tensor({n, c_b, dy.dim(2), dy.dim(3)});
    for (int i = 0; i < n; ++i) {
        std::memcpy(da.data() + int64_t(i) * c_a * hw, dy.data() + int64_t(i) * c * hw,
                    sizeof(float) * size_t(c_a) * hw);
        std::memcpy(db.data() + int64_t(i) * c_b * hw, dy.data() + (int64_t(i) * c + c_a) * hw,
                    sizeof(float) * size_t(c_b) * hw);
    }
}

Tensor sinusoidal_embedding(const std::vector<int>& t, int dim) {
    FAAC_REQUIRE(dim % 2 == 0, "sinusoidal embedding: dim must be even");
    const int half = dim / 2;
    Tensor y({int(t.size()), dim});
    for (size_t i = 0; i < t.size(); ++i) {
        for (int j = 0; j < half; ++j) {
            const double freq =
                std::exp(-std::log(10000.0) * (half > 1 ? double(j) / double(half - 1) : 0.0));
            const double ang = double(t[i]) * freq;
            y.at(int(i), j) = float(std::sin(ang));
            y.at(int(i), half + j) = float(std::cos(ang));
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::step(ParamSet& ps) {
    const auto& params = ps.all();
    if (m_.size() != params.size()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = Tensor(params[i]->value.shape());
            v_[i] = Tensor(params[i]->value.shape());
        }
    }
    ++t_;
    const float bc1 = 1.0f - std::pow(beta1_, float(t_));
    const float bc2 = 1.0f - std::pow(beta2_, float(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        if (p.frozen) continue;
        float* wv = p.value.data();
        const float* gv = p.grad.data();
        float* mv = m_[pi].data();
        float* vv = v_[pi].data();
        const int64_t n = p.value.numel();
#pragma omp parallel for if (n > 16384 && !omp_in_parallel()) schedule(static)
        for (int64_t i = 0; i < n; ++i) {
            mv[i] = beta1_ * mv[i] + (1.0f - beta1_) * gv[i];
            vv[i] = beta2_ * vv[i] + (1.0f - beta2_) * gv[i] * gv[i];
            const float mhat = mv[i] / bc1;
            const float vhat = vv[i] / bc2;
            wv[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace faac::nn
