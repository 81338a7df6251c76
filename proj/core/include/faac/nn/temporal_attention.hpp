#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faac/common.hpp"
#include "faac/nn/layers.hpp"
#include "faac/tensor.hpp"

namespace faac::nn {

// Attention probabilities recorded at one temporal site: [heads, positions,
// frames, frames], query frame x key frame. The anchor's query row is stored
// one-hot on itself by convention (no query is computed for it).
struct AttentionMap {
    int tier = 0;
    bool decoder = false;
    int timestep = 0;
    int heads = 0;
    int positions = 0;
    int frames = 0;
    std::vector<float> probs;

    float at(int head, int pos, int qf, int kf) const {
        return probs[size_t(((int64_t(head) * positions + pos) * frames + qf) * frames + kf)];
    }
    // max over rows of |sum(row) - 1|
    double max_row_sum_error() const;
    // mean over heads and positions -> [frames, frames]
    std::vector<double> averaged() const;
};

// Raw weight views for the templated core. Row-major [C, C] projections used
// as y = x * W^T, matching Linear. pos ([max_frames, C]) is added to the
// query/key inputs only; ln_* may be null for a norm-free state.
template <typename Real>
struct AttnWeights {
    const Real* wq = nullptr;
    const Real* wk = nullptr;
    const Real* wv = nullptr;
    const Real* wo = nullptr;
    const Real* bo = nullptr;
    const Real* pos = nullptr;
    const Real* ln_gamma = nullptr;
    const Real* ln_beta = nullptr;
    int channels = 0;
    int heads = 1;
};

template <typename Real>
struct AttnGrads {
    Real* wq = nullptr;
    Real* wk = nullptr;
    Real* wv = nullptr;
    Real* wo = nullptr;
    Real* bo = nullptr;
    Real* pos = nullptr;
    Real* ln_gamma = nullptr;
    Real* ln_beta = nullptr;
};

template <typename Real>
struct AttnCache {
    int frames = 0, channels = 0, positions = 0, anchor = -1;
    std::vector<Real> x;        // [F, C, P] input
    std::vector<Real> un;       // [P*F, C] normed tokens
    std::vector<Real> q, k, v;  // [P*F, C]
    std::vector<Real> probs;    // [P, heads, F, F]
    std::vector<Real> head_out; // [P*F, C]
    std::vector<Real> ln_mean, ln_rstd;  // [P*F]
};

// x: [F, C, P] (P spatial positions). anchor = -1 means no anchor (all
// queries active). out_i = x_i + OutProj(softmax(Q_i K^T / sqrt(d)) V) for
// i != anchor; out_anchor = x_anchor exactly. K and V are built from all
// frames including the anchor.
template <typename Real>
void temporal_attention_forward(const Real* x, int frames, int channels, int positions,
                                int anchor, const AttnWeights<Real>& w, Real* out,
                                AttnCache<Real>* cache);

// dy: [F, C, P]; returns dx through `dx`; accumulates into any non-null
// gradient views.
template <typename Real>
void temporal_attention_backward(const Real* dy, const AttnCache<Real>& cache,
                                 const AttnWeights<Real>& w, const AttnGrads<Real>& g, Real* dx);

// The trainable layer used inside the U-Net.
struct TemporalAttention {
    int channels = 0, heads = 1, max_frames = 0;
    bool use_norm = true;
    Param *wq = nullptr, *wk = nullptr, *wv = nullptr, *wo = nullptr, *bo = nullptr,
          *pos = nullptr;
    LayerNorm ln;

    void init(ParamSet& ps, const std::string& name, int channels_, int heads_, int max_frames_,
              Rng& rng, bool with_norm = true);

    struct Cache {
        AttnCache<float> core;
    };

    AttnWeights<float> weights() const;

    // x: [F, C, H, W]; anchor = -1 for none; record fills per-head/position
    // probabilities when non-null.
    Tensor forward(const Tensor& x, int anchor, Cache* cache = nullptr,
                   AttentionMap* record = nullptr) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

// The spec-level operation: one stack of per-frame feature vectors
// z ([F, C]) in, routed output plus the recorded map out.
std::pair<Tensor, AttentionMap> temporal_anchor_attention(const Tensor& z, std::optional<int> k,
                                                          const TemporalAttention& state);

}  // namespace faac::nn
