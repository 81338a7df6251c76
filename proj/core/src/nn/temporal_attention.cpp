#include "faac/nn/temporal_attention.hpp"

#include <cmath>
#include <cstring>

#include <cblas.h>
#include <omp.h>

#include "faac/parallel.hpp"

namespace faac::nn {

namespace {

template <typename Real>
void tgemm(bool ta, bool tb, int m, int n, int k, const Real* a, int lda, const Real* b, int ldb,
           Real beta, Real* c, int ldc) {
    if constexpr (std::is_same_v<Real, float>) {
        gemm(ta, tb, m, n, k, 1.0f, a, lda, b, ldb, beta, c, ldc);
    } else {
        cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                    m, n, k, 1.0, a, lda, b, ldb, beta, c, ldc);
    }
}

// gather [F, C, P] -> tokens [P*F, C]
template <typename Real>
void gather_tokens(const Real* x, int f, int c, int p, Real* tok) {
    for (int pi = 0; pi < p; ++pi)
        for (int fi = 0; fi < f; ++fi)
            for (int ci = 0; ci < c; ++ci)
                tok[(int64_t(pi) * f + fi) * c + ci] = x[(int64_t(fi) * c + ci) * p + pi];
}

template <typename Real>
void layer_norm_tokens(const Real* x, int rows, int dim, const Real* gamma, const Real* beta,
                       Real* y, Real* mean, Real* rstd) {
    const Real eps = Real(1e-5);
    for (int i = 0; i < rows; ++i) {
        const Real* xi = x + int64_t(i) * dim;
        Real* yi = y + int64_t(i) * dim;
        double s = 0.0, s2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            s += double(xi[j]);
            s2 += double(xi[j]) * double(xi[j]);
        }
        const double mu = s / dim;
        const double var = std::max(0.0, s2 / dim - mu * mu);
        const Real r = Real(1.0 / std::sqrt(var + double(eps)));
        mean[i] = Real(mu);
        rstd[i] = r;
        for (int j = 0; j < dim; ++j) yi[j] = gamma[j] * (xi[j] - Real(mu)) * r + beta[j];
    }
}

}  // namespace

double AttentionMap::max_row_sum_error() const {
    double worst = 0.0;
    for (int h = 0; h < heads; ++h)
        for (int p = 0; p < positions; ++p)
            for (int i = 0; i < frames; ++i) {
                double s = 0.0;
                for (int j = 0; j < frames; ++j) s += at(h, p, i, j);
                worst = std::max(worst, std::abs(s - 1.0));
            }
    return worst;
}

std::vector<double> AttentionMap::averaged() const {
    std::vector<double> avg(size_t(frames) * frames, 0.0);
    for (int h = 0; h < heads; ++h)
        for (int p = 0; p < positions; ++p)
            for (int i = 0; i < frames; ++i)
                for (int j = 0; j < frames; ++j) avg[size_t(i) * frames + j] += at(h, p, i, j);
    const double denom = double(heads) * positions;
    for (auto& v : avg) v /= denom;
    return avg;
}

template <typename Real>
void temporal_attention_forward(const Real* x, int frames, int channels, int positions,
                                int anchor, const AttnWeights<Real>& w, Real* out,
                                AttnCache<Real>* cache) {
    FAAC_REQUIRE(anchor >= -1 && anchor < frames, "temporal attention: anchor out of range");
    FAAC_REQUIRE(channels % w.heads == 0, "temporal attention: heads must divide channels");
    const int f = frames, c = channels, p = positions;
    const int heads = w.heads, dh = c / heads;
    const int64_t rows = int64_t(p) * f;
    const Real inv_sqrt_d = Real(1.0 / std::sqrt(double(dh)));

    std::vector<Real> tok(size_t(rows) * c);
    gather_tokens(x, f, c, p, tok.data());

    std::vector<Real> un, ln_mean, ln_rstd;
    const Real* un_ptr = tok.data();
    if (w.ln_gamma) {
        un.resize(size_t(rows) * c);
        ln_mean.resize(size_t(rows));
        ln_rstd.resize(size_t(rows));
        layer_norm_tokens(tok.data(), int(rows), c, w.ln_gamma, w.ln_beta, un.data(),
                          ln_mean.data(), ln_rstd.data());
        un_ptr = un.data();
    }

    // positional embedding feeds the attention logits only (q/k path)
    std::vector<Real> unp(un_ptr, un_ptr + size_t(rows) * c);
    if (w.pos) {
        for (int pi = 0; pi < p; ++pi)
            for (int fi = 0; fi < f; ++fi) {
                Real* row = unp.data() + (int64_t(pi) * f + fi) * c;
                const Real* pe = w.pos + int64_t(fi) * c;
                for (int ci = 0; ci < c; ++ci) row[ci] += pe[ci];
            }
    }

    std::vector<Real> q(size_t(rows) * c), k(size_t(rows) * c), v(size_t(rows) * c);
    tgemm<Real>(false, true, int(rows), c, c, unp.data(), c, w.wq, c, Real(0), q.data(), c);
    tgemm<Real>(false, true, int(rows), c, c, unp.data(), c, w.wk, c, Real(0), k.data(), c);
    tgemm<Real>(false, true, int(rows), c, c, un_ptr, c, w.wv, c, Real(0), v.data(), c);

    std::vector<Real> head_out(size_t(rows) * c, Real(0));
    std::vector<Real> probs(cache ? size_t(p) * heads * f * f : size_t(heads) * f * f * 0);
    const bool keep_probs = cache != nullptr;

#pragma omp parallel for if (p > 1 && !omp_in_parallel()) schedule(static)
    for (int pi = 0; pi < p; ++pi) {
        std::vector<Real> local_a(size_t(f) * f);
        for (int h = 0; h < heads; ++h) {
            Real* a = keep_probs
                          ? probs.data() + ((int64_t(pi) * heads + h) * f) * f
                          : local_a.data();
            for (int i = 0; i < f; ++i) {
                Real* arow = a + int64_t(i) * f;
                if (i == anchor) {
                    for (int j = 0; j < f; ++j) arow[j] = (j == i) ? Real(1) : Real(0);
                    continue;
                }
                const Real* qi = q.data() + (int64_t(pi) * f + i) * c + h * dh;
                Real mx = -Real(1e30);
                for (int j = 0; j < f; ++j) {
                    const Real* kj = k.data() + (int64_t(pi) * f + j) * c + h * dh;
                    Real dot = Real(0);
                    for (int d = 0; d < dh; ++d) dot += qi[d] * kj[d];
                    arow[j] = dot * inv_sqrt_d;
                    mx = std::max(mx, arow[j]);
                }
                Real denom = Real(0);
                for (int j = 0; j < f; ++j) {
                    arow[j] = std::exp(arow[j] - mx);
                    denom += arow[j];
                }
                for (int j = 0; j < f; ++j) arow[j] /= denom;

                Real* ho = head_out.data() + (int64_t(pi) * f + i) * c + h * dh;
                for (int j = 0; j < f; ++j) {
                    const Real* vj = v.data() + (int64_t(pi) * f + j) * c + h * dh;
                    const Real aij = arow[j];
                    for (int d = 0; d < dh; ++d) ho[d] += aij * vj[d];
                }
            }
        }
    }

    std::vector<Real> o(size_t(rows) * c);
    tgemm<Real>(false, true, int(rows), c, c, head_out.data(), c, w.wo, c, Real(0), o.data(), c);
    if (w.bo) {
        for (int64_t r = 0; r < rows; ++r)
            for (int ci = 0; ci < c; ++ci) o[size_t(r) * c + ci] += w.bo[ci];
    }

    std::memcpy(out, x, sizeof(Real) * size_t(f) * c * p);
    for (int pi = 0; pi < p; ++pi)
        for (int fi = 0; fi < f; ++fi) {
            if (fi == anchor) continue;
            const Real* orow = o.data() + (int64_t(pi) * f + fi) * c;
            for (int ci = 0; ci < c; ++ci) out[(int64_t(fi) * c + ci) * p + pi] += orow[ci];
        }

    if (cache) {
        cache->frames = f;
        cache->channels = c;
        cache->positions = p;
        cache->anchor = anchor;
        cache->x.assign(x, x + size_t(f) * c * p);
        cache->un.assign(un_ptr, un_ptr + size_t(rows) * c);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->head_out = std::move(head_out);
        cache->ln_mean = std::move(ln_mean);
        cache->ln_rstd = std::move(ln_rstd);
    }
}

template <typename Real>
void temporal_attention_backward(const Real* dy, const AttnCache<Real>& cache,
                                 const AttnWeights<Real>& w, const AttnGrads<Real>& g, Real* dx) {
    const int f = cache.frames, c = cache.channels, p = cache.positions;
    const int anchor = cache.anchor;
    const int heads = w.heads, dh = c / heads;
    const int64_t rows = int64_t(p) * f;
    const Real inv_sqrt_d = Real(1.0 / std::sqrt(double(dh)));

    // residual path for every frame (the anchor's output is its input)
    std::memcpy(dx, dy, sizeof(Real) * size_t(f) * c * p);

    // output-projection gradient; anchor rows carry no attention output
    std::vector<Real> dO(size_t(rows) * c, Real(0));
    for (int pi = 0; pi < p; ++pi)
        for (int fi = 0; fi < f; ++fi) {
            if (fi == anchor) continue;
            Real* row = dO.data() + (int64_t(pi) * f + fi) * c;
            for (int ci = 0; ci < c; ++ci) row[ci] = dy[(int64_t(fi) * c + ci) * p + pi];
        }

    if (g.wo)
        tgemm<Real>(true, false, c, c, int(rows), dO.data(), c, cache.head_out.data(), c, Real(1),
                    g.wo, c);
    if (g.bo) {
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0;
            for (int64_t r = 0; r < rows; ++r) s += double(dO[size_t(r) * c + ci]);
            g.bo[ci] += Real(s);
        }
    }

    std::vector<Real> dH(size_t(rows) * c);
    tgemm<Real>(false, false, int(rows), c, c, dO.data(), c, w.wo, c, Real(0), dH.data(), c);

    std::vector<Real> dq(size_t(rows) * c, Real(0)), dk(size_t(rows) * c, Real(0)),
        dv(size_t(rows) * c, Real(0));

#pragma omp parallel for if (p > 1 && !omp_in_parallel()) schedule(static)
    for (int pi = 0; pi < p; ++pi) {
        std::vector<Real> da(size_t(f) * f), dlog(size_t(f) * f);
        for (int h = 0; h < heads; ++h) {
            const Real* a = cache.probs.data() + ((int64_t(pi) * heads + h) * f) * f;
            for (int i = 0; i < f; ++i) {
                const Real* dhi = dH.data() + (int64_t(pi) * f + i) * c + h * dh;
                for (int j = 0; j < f; ++j) {
                    const Real* vj = cache.v.data() + (int64_t(pi) * f + j) * c + h * dh;
                    Real dot = Real(0);
                    for (int d = 0; d < dh; ++d) dot += dhi[d] * vj[d];
                    da[size_t(i) * f + j] = dot;
                }
            }
            // dv_j += sum_i a_ij * dH_i
            for (int j = 0; j < f; ++j) {
                Real* dvj = dv.data() + (int64_t(pi) * f + j) * c + h * dh;
                for (int i = 0; i < f; ++i) {
                    const Real aij = a[size_t(i) * f + j];
                    if (aij == Real(0)) continue;
                    const Real* dhi = dH.data() + (int64_t(pi) * f + i) * c + h * dh;
                    for (int d = 0; d < dh; ++d) dvj[d] += aij * dhi[d];
                }
            }
            for (int i = 0; i < f; ++i) {
                double srow = 0.0;
                for (int j = 0; j < f; ++j)
                    srow += double(a[size_t(i) * f + j]) * double(da[size_t(i) * f + j]);
                for (int j = 0; j < f; ++j)
                    dlog[size_t(i) * f + j] =
                        a[size_t(i) * f + j] * (da[size_t(i) * f + j] - Real(srow));
            }
            // anchor row never contributed output; its dH rows are zero, so
            // dlog row anchor is exactly zero already
            for (int i = 0; i < f; ++i) {
                Real* dqi = dq.data() + (int64_t(pi) * f + i) * c + h * dh;
                for (int j = 0; j < f; ++j) {
                    const Real dl = dlog[size_t(i) * f + j] * inv_sqrt_d;
                    if (dl == Real(0)) continue;
                    const Real* kj = cache.k.data() + (int64_t(pi) * f + j) * c + h * dh;
                    Real* dkj = dk.data() + (int64_t(pi) * f + j) * c + h * dh;
                    const Real* qi = cache.q.data() + (int64_t(pi) * f + i) * c + h * dh;
                    for (int d = 0; d < dh; ++d) {
                        dqi[d] += dl * kj[d];
                        dkj[d] += dl * qi[d];
                    }
                }
            }
        }
    }

    // rebuild the q/k input (normed tokens plus positional embedding)
    std::vector<Real> unp(cache.un);
    if (w.pos) {
        for (int pi = 0; pi < p; ++pi)
            for (int fi = 0; fi < f; ++fi) {
                Real* row = unp.data() + (int64_t(pi) * f + fi) * c;
                const Real* pe = w.pos + int64_t(fi) * c;
                for (int ci = 0; ci < c; ++ci) row[ci] += pe[ci];
            }
    }

    if (g.wq) tgemm<Real>(true, false, c, c, int(rows), dq.data(), c, unp.data(), c, Real(1), g.wq, c);
    if (g.wk) tgemm<Real>(true, false, c, c, int(rows), dk.data(), c, unp.data(), c, Real(1), g.wk, c);
    if (g.wv)
        tgemm<Real>(true, false, c, c, int(rows), dv.data(), c, cache.un.data(), c, Real(1), g.wv, c);

    std::vector<Real> dunp(size_t(rows) * c);
    tgemm<Real>(false, false, int(rows), c, c, dq.data(), c, w.wq, c, Real(0), dunp.data(), c);
    tgemm<Real>(false, false, int(rows), c, c, dk.data(), c, w.wk, c, Real(1), dunp.data(), c);

    if (g.pos) {
        for (int fi = 0; fi < f; ++fi) {
            Real* gp = g.pos + int64_t(fi) * c;
            for (int ci = 0; ci < c; ++ci) {
                double s = 0.0;
                for (int pi = 0; pi < p; ++pi) s += double(dunp[(int64_t(pi) * f + fi) * c + ci]);
                gp[ci] += Real(s);
            }
        }
    }

    // dun = dv * Wv + dunp
    std::vector<Real> dun(size_t(rows) * c);
    tgemm<Real>(false, false, int(rows), c, c, dv.data(), c, w.wv, c, Real(0), dun.data(), c);
    for (size_t i = 0; i < dun.size(); ++i) dun[i] += dunp[i];

    std::vector<Real> dtok;
    const Real* dtok_ptr = dun.data();
    if (w.ln_gamma) {
        std::vector<Real> tok(size_t(rows) * c);
        gather_tokens(cache.x.data(), f, c, p, tok.data());
        dtok.assign(size_t(rows) * c, Real(0));
        for (int64_t r = 0; r < rows; ++r) {
            const Real mu = cache.ln_mean[size_t(r)];
            const Real rs = cache.ln_rstd[size_t(r)];
            const Real* xi = tok.data() + r * c;
            const Real* dyi = dun.data() + r * c;
            Real* dxi = dtok.data() + r * c;
            double sum1 = 0.0, sum2 = 0.0;
            for (int j = 0; j < c; ++j) {
                const Real xhat = (xi[j] - mu) * rs;
                sum1 += double(dyi[j]) * w.ln_gamma[j];
                sum2 += double(dyi[j]) * w.ln_gamma[j] * xhat;
                if (g.ln_gamma) g.ln_gamma[j] += dyi[j] * xhat;
                if (g.ln_beta) g.ln_beta[j] += dyi[j];
            }
            const Real m1 = Real(sum1 / c), m2 = Real(sum2 / c);
            for (int j = 0; j < c; ++j) {
                const Real xhat = (xi[j] - mu) * rs;
                dxi[j] = rs * (dyi[j] * w.ln_gamma[j] - m1 - xhat * m2);
            }
        }
        dtok_ptr = dtok.data();
    }

    // scatter token grads back onto [F, C, P]
    for (int pi = 0; pi < p; ++pi)
        for (int fi = 0; fi < f; ++fi) {
            const Real* row = dtok_ptr + (int64_t(pi) * f + fi) * c;
            for (int ci = 0; ci < c; ++ci) dx[(int64_t(fi) * c + ci) * p + pi] += row[ci];
        }
}

template void temporal_attention_forward<float>(const float*, int, int, int, int,
                                                const AttnWeights<float>&, float*,
                                                AttnCache<float>*);
template void temporal_attention_forward<double>(const double*, int, int, int, int,
                                                 const AttnWeights<double>&, double*,
                                                 AttnCache<double>*);
template void temporal_attention_backward<float>(const float*, const AttnCache<float>&,
                                                 const AttnWeights<float>&,
                                                 const AttnGrads<float>&, float*);
template void temporal_attention_backward<double>(const double*, const AttnCache<double>&,
                                                  const AttnWeights<double>&,
                                                  const AttnGrads<double>&, double*);

// ---------------------------------------------------------------------------
// TemporalAttention layer
// ---------------------------------------------------------------------------

void TemporalAttention::init(ParamSet& ps, const std::string& name, int channels_, int heads_,
                             int max_frames_, Rng& rng, bool with_norm) {
    channels = channels_;
    heads = heads_;
    max_frames = max_frames_;
    use_norm = with_norm;
    FAAC_REQUIRE(channels % heads == 0, "temporal attention: heads must divide channels");

    const float std = 1.0f / std::sqrt(float(channels));
    auto randn_init = [&](Param* p, float s) {
        for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] = s * float(rng.gaussian());
    };
    wq = ps.add(name + ".wq", {channels, channels});
    wk = ps.add(name + ".wk", {channels, channels});
    wv = ps.add(name + ".wv", {channels, channels});
    wo = ps.add(name + ".wo", {channels, channels});  // zero-init: untrained layer is a no-op
    bo = ps.add(name + ".bo", {channels});
    pos = ps.add(name + ".pos", {max_frames, channels});
    randn_init(wq, std);
    randn_init(wk, std);
    randn_init(wv, std);
    randn_init(pos, 0.1f);
    if (use_norm) ln.init(ps, name + ".ln", channels);
}

AttnWeights<float> TemporalAttention::weights() const {
    AttnWeights<float> w;
    w.wq = wq->value.data();
    w.wk = wk->value.data();
    w.wv = wv->value.data();
    w.wo = wo->value.data();
    w.bo = bo->value.data();
    w.pos = pos->value.data();
    if (use_norm) {
        w.ln_gamma = ln.gamma->value.data();
        w.ln_beta = ln.beta->value.data();
    }
    w.channels = channels;
    w.heads = heads;
    return w;
}

Tensor TemporalAttention::forward(const Tensor& x, int anchor, Cache* cache,
                                  AttentionMap* record) const {
    FAAC_REQUIRE(x.ndim() == 4 && x.dim(1) == channels, "temporal attention: shape mismatch");
    const int f = x.dim(0), p = x.dim(2) * x.dim(3);
    FAAC_REQUIRE(f <= max_frames, "temporal attention: clip longer than positional table");

    Cache local;
    Cache* use = cache ? cache : (record ? &local : nullptr);

    Tensor out(x.shape());
    temporal_attention_forward<float>(x.data(), f, channels, p, anchor, weights(), out.data(),
                                      use ? &use->core : nullptr);

    if (record) {
        record->heads = heads;
        record->positions = p;
        record->frames = f;
        record->probs.resize(size_t(heads) * p * f * f);
        const auto& probs = use->core.probs;  // [P, heads, F, F]
        for (int h = 0; h < heads; ++h)
            for (int pi = 0; pi < p; ++pi)
                std::memcpy(record->probs.data() + ((int64_t(h) * p + pi) * f) * f,
                            probs.data() + ((int64_t(pi) * heads + h) * f) * f,
                            sizeof(float) * size_t(f) * f);
    }
    return out;
}

Tensor TemporalAttention::backward(const Tensor& dy, const Cache& cache) const {
    Tensor dx(dy.shape());
    AttnGrads<float> g;
    if (!wq->frozen) g.wq = wq->grad.data();
    if (!wk->frozen) g.wk = wk->grad.data();
    if (!wv->frozen) g.wv = wv->grad.data();
    if (!wo->frozen) g.wo = wo->grad.data();
    if (!bo->frozen) g.bo = bo->grad.data();
    if (!pos->frozen) g.pos = pos->grad.data();
    if (use_norm && !ln.gamma->frozen) {
        g.ln_gamma = ln.gamma->grad.data();
        g.ln_beta = ln.beta->grad.data();
    }
    temporal_attention_backward<float>(dy.data(), cache.core, weights(), g, dx.data());
    return dx;
}

std::pair<Tensor, AttentionMap> temporal_anchor_attention(const Tensor& z, std::optional<int> k,
                                                          const TemporalAttention& state) {
    FAAC_REQUIRE(z.ndim() == 2, "temporal_anchor_attention: expected [F, C]");
    const int f = z.dim(0), c = z.dim(1);
    FAAC_REQUIRE(f >= 1, "temporal_anchor_attention: need at least one frame");
    FAAC_REQUIRE(c == state.channels, "temporal_anchor_attention: channel mismatch");
    const int anchor = k.has_value() ? *k : -1;
    FAAC_REQUIRE(anchor == -1 || (anchor >= 0 && anchor < f),
                 "temporal_anchor_attention: anchor index out of range");

    const Tensor x4 = z.reshaped({f, c, 1, 1});
    AttentionMap map;
    Tensor out = state.forward(x4, anchor, nullptr, &map);
    return {out.reshaped({f, c}), std::move(map)};
}

}  // namespace faac::nn
