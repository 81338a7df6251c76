#include "faac/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace faac {

// ---------------------------------------------------------------------------
// DenoiserConfig / ConditionMap
// ---------------------------------------------------------------------------

std::vector<int> DenoiserConfig::tiers() const {
    std::vector<int> t(channels.size());
    for (size_t i = 0; i < channels.size(); ++i) t[i] = resolution >> int(i);
    return t;
}

void DenoiserConfig::validate() const {
    FAAC_REQUIRE(resolution >= 4, "config: resolution too small");
    FAAC_REQUIRE(channels.size() >= 2, "config: need at least two tiers");
    FAAC_REQUIRE(temporal_tier_mask.size() == channels.size(),
                 "config: temporal_tier_mask length must equal tier count");
    const auto tier_sizes = tiers();
    for (size_t i = 0; i < channels.size(); ++i) {
        FAAC_REQUIRE(tier_sizes[i] >= 1, "config: too many tiers for the resolution");
        FAAC_REQUIRE(i == 0 || tier_sizes[i] * 2 == tier_sizes[i - 1],
                     "config: tiers must halve monotonically");
        FAAC_REQUIRE(channels[i] % gn_groups == 0, "config: channels must divide gn_groups");
        FAAC_REQUIRE(channels[i] % num_heads == 0, "config: heads must divide channel width");
    }
    FAAC_REQUIRE(emb_dim % 2 == 0, "config: emb_dim must be even");
    FAAC_REQUIRE(n_identities >= 1 && n_backgrounds >= 1 && n_motions >= 1,
                 "config: empty prompt vocabulary");
    FAAC_REQUIRE(max_frames >= 1, "config: max_frames must be positive");
    FAAC_REQUIRE(num_steps >= 1, "config: num_steps must be positive");
    FAAC_REQUIRE(beta_start > 0 && beta_start <= beta_end && beta_end < 1,
                 "config: invalid beta range");
}

void ConditionMap::validate(int expected_frames, int resolution) const {
    FAAC_REQUIRE(int(slices.size()) == expected_frames,
                 "condition map: frame count must match the clip length");
    for (const auto& g : slices) {
        FAAC_REQUIRE(g.c == 1 && g.h == resolution && g.w == resolution,
                     "condition map: slice shape mismatch");
        for (double v : g.v)
            FAAC_REQUIRE(v >= 0.0 && v <= 1.0, "condition map: values must lie in [0, 1]");
    }
}

namespace nn {

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

void ResBlock::init(ParamSet& ps, const std::string& name, int in_channels, int out_channels,
                    int emb_dim, int gn_groups, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    gn1.init(ps, name + ".gn1", in_c, gn_groups);
    conv1.init(ps, name + ".conv1", in_c, out_c, 3, 1, 1, rng);
    emb_proj.init(ps, name + ".emb", emb_dim, out_c, rng);
    gn2.init(ps, name + ".gn2", out_c, gn_groups);
    conv2.init(ps, name + ".conv2", out_c, out_c, 3, 1, 1, rng, /*zero_init=*/true);
    has_skip = in_c != out_c;
    if (has_skip) skip.init(ps, name + ".skip", in_c, out_c, 1, 1, 0, rng);
}

Tensor ResBlock::forward(const Tensor& x, const Tensor& emb, Cache* cache) const {
    Tensor g1 = gn1.forward(x, cache ? &cache->gn1 : nullptr);
    if (cache) cache->silu1_in = g1;
    Tensor h = conv1.forward(silu_forward(g1), cache ? &cache->conv1 : nullptr);

    Tensor proj = emb_proj.forward(emb, cache ? &cache->emb_proj : nullptr);
    const int n = h.dim(0), hw = h.dim(2) * h.dim(3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < out_c; ++c) {
            float* p = h.data() + (int64_t(i) * out_c + c) * hw;
            const float add = proj.at(i, c);
            for (int j = 0; j < hw; ++j) p[j] += add;
        }

    Tensor g2 = gn2.forward(h, cache ? &cache->gn2 : nullptr);
    if (cache) cache->silu2_in = g2;
    Tensor h2 = conv2.forward(silu_forward(g2), cache ? &cache->conv2 : nullptr);

    if (has_skip) {
        Tensor sk = skip.forward(x, cache ? &cache->skip : nullptr);
        h2.add_(sk);
    } else {
        h2.add_(x);
    }
    return h2;
}

Tensor ResBlock::backward(const Tensor& dy, const Cache& cache, Tensor& demb) const {
    Tensor ds2 = conv2.backward(dy, cache.conv2);
    Tensor dg2 = silu_backward(ds2, cache.silu2_in);
    Tensor dh = gn2.backward(dg2, cache.gn2);

    const int n = dh.dim(0), hw = dh.dim(2) * dh.dim(3);
    Tensor dproj({n, out_c});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < out_c; ++c) {
            const float* p = dh.data() + (int64_t(i) * out_c + c) * hw;
            double s = 0.0;
            for (int j = 0; j < hw; ++j) s += p[j];
            dproj.at(i, c) = float(s);
        }
    demb.add_(emb_proj.backward(dproj, cache.emb_proj));

    Tensor ds1 = conv1.backward(dh, cache.conv1);
    Tensor dg1 = silu_backward(ds1, cache.silu1_in);
    Tensor dx = gn1.backward(dg1, cache.gn1);

    if (has_skip)
        dx.add_(skip.backward(dy, cache.skip));
    else
        dx.add_(dy);
    return dx;
}

// ---------------------------------------------------------------------------
// AdapterNet
// ---------------------------------------------------------------------------

void AdapterNet::init(ParamSet& ps, const std::string& name, const std::vector<int>& tier_channels,
                      int /*gn_groups*/, Rng& rng) {
    const int tiers = int(tier_channels.size());
    hidden.resize(size_t(tiers));
    for (int i = 0; i < tiers; ++i) hidden[size_t(i)] = std::min(64, 16 << i);

    stem.init(ps, name + ".stem", 1, hidden[0], 3, 1, 1, rng);
    down.resize(size_t(tiers) - 1);
    for (int i = 1; i < tiers; ++i)
        down[size_t(i) - 1].init(ps, name + ".down" + std::to_string(i), hidden[size_t(i) - 1],
                                 hidden[size_t(i)], 3, 2, 1, rng);
    out.resize(size_t(tiers));
    for (int i = 0; i < tiers; ++i)
        out[size_t(i)].init(ps, name + ".out" + std::to_string(i), hidden[size_t(i)],
                            tier_channels[size_t(i)], 1, 1, 0, rng, /*zero_init=*/true);
}

std::vector<Tensor> AdapterNet::forward(const Tensor& cond, Cache* cache) const {
    const int tiers = int(out.size());
    if (cache) {
        cache->down.resize(size_t(tiers) - 1);
        cache->out.resize(size_t(tiers));
        cache->silu_in.resize(size_t(tiers));
    }
    std::vector<Tensor> feats(size_t(tiers));
    Tensor pre = stem.forward(cond, cache ? &cache->stem : nullptr);
    if (cache) cache->silu_in[0] = pre;
    Tensor a = silu_forward(pre);
    feats[0] = out[0].forward(a, cache ? &cache->out[0] : nullptr);
    for (int i = 1; i < tiers; ++i) {
        pre = down[size_t(i) - 1].forward(a, cache ? &cache->down[size_t(i) - 1] : nullptr);
        if (cache) cache->silu_in[size_t(i)] = pre;
        a = silu_forward(pre);
        feats[size_t(i)] = out[size_t(i)].forward(a, cache ? &cache->out[size_t(i)] : nullptr);
    }
    return feats;
}

void AdapterNet::backward(const std::vector<Tensor>& dfeats, const Cache& cache) const {
    const int tiers = int(out.size());
    Tensor da;  // gradient w.r.t. the silu'd trunk activation of the current stage
    for (int i = tiers - 1; i >= 0; --i) {
        Tensor d = out[size_t(i)].backward(dfeats[size_t(i)], cache.out[size_t(i)]);
        if (i == tiers - 1)
            da = std::move(d);
        else
            da.add_(d);
        if (i > 0) {
            Tensor dpre = silu_backward(da, cache.silu_in[size_t(i)]);
            da = down[size_t(i) - 1].backward(dpre, cache.down[size_t(i) - 1]);
        }
    }
    Tensor dpre0 = silu_backward(da, cache.silu_in[0]);
    stem.backward(dpre0, cache.stem);  // condition input takes no gradient
}

}  // namespace nn

// ---------------------------------------------------------------------------
// UNet
// ---------------------------------------------------------------------------

UNet::UNet(DenoiserConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(init_seed, "unet-init"));
    const int tiers = cfg_.tier_count();
    const auto& ch = cfg_.channels;

    stem_.init(params_, "unet.stem", cfg_.in_channels, ch[0], 3, 1, 1, rng);
    time_fc1_.init(params_, "unet.time.fc1", cfg_.emb_dim, cfg_.emb_dim, rng);
    time_fc2_.init(params_, "unet.time.fc2", cfg_.emb_dim, cfg_.emb_dim, rng);
    emb_id_.init(params_, "unet.emb.id", cfg_.n_identities + 1, cfg_.emb_dim, rng);
    emb_bg_.init(params_, "unet.emb.bg", cfg_.n_backgrounds + 1, cfg_.emb_dim, rng);
    emb_mo_.init(params_, "unet.emb.mo", cfg_.n_motions + 1, cfg_.emb_dim, rng);

    enc_.resize(size_t(tiers));
    down_.resize(size_t(tiers) - 1);
    for (int i = 0; i < tiers; ++i) {
        enc_[size_t(i)].init(params_, "unet.enc" + std::to_string(i), ch[size_t(i)], ch[size_t(i)],
                             cfg_.emb_dim, cfg_.gn_groups, rng);
        if (i + 1 < tiers)
            down_[size_t(i)].init(params_, "unet.down" + std::to_string(i), ch[size_t(i)],
                                  ch[size_t(i) + 1], 3, 2, 1, rng);
    }
    mid_.init(params_, "unet.mid", ch.back(), ch.back(), cfg_.emb_dim, cfg_.gn_groups, rng);

    dec_.resize(size_t(tiers));
    up_.resize(size_t(tiers) - 1);
    for (int i = tiers - 1; i >= 0; --i) {
        // decoder input channels: deepest tier consumes the middle block,
        // the others consume the upsample conv's output at their width
        const int main_c = ch[size_t(i)];
        dec_[size_t(i)].init(params_, "unet.dec" + std::to_string(i), main_c + ch[size_t(i)],
                             ch[size_t(i)], cfg_.emb_dim, cfg_.gn_groups, rng);
        if (i > 0)
            up_[size_t(i) - 1].init(params_, "unet.up" + std::to_string(i), ch[size_t(i)],
                                    ch[size_t(i) - 1], 3, 1, 1, rng);
    }
    head_gn_.init(params_, "unet.head.gn", ch[0], cfg_.gn_groups);
    head_conv_.init(params_, "unet.head.conv", ch[0], cfg_.in_channels, 3, 1, 1, rng,
                    /*zero_init=*/true);

    enc_attn_.resize(size_t(tiers));
    dec_attn_.resize(size_t(tiers));
    for (int i = 0; i < tiers; ++i) {
        enc_attn_[size_t(i)].init(params_, "temporal.enc" + std::to_string(i), ch[size_t(i)],
                                  cfg_.num_heads, cfg_.max_frames, rng);
        dec_attn_[size_t(i)].init(params_, "temporal.dec" + std::to_string(i), ch[size_t(i)],
                                  cfg_.num_heads, cfg_.max_frames, rng);
    }

    if (cfg_.adapter_enabled) adapter_.init(params_, "adapter", ch, cfg_.gn_groups, rng);
}

std::unique_ptr<UNet::Tape> UNet::make_tape() const {
    auto tape = std::make_unique<Tape>();
    const int tiers = cfg_.tier_count();
    tape->enc.resize(size_t(tiers));
    tape->dec.resize(size_t(tiers));
    tape->down.resize(size_t(tiers) - 1);
    tape->up.resize(size_t(tiers) - 1);
    tape->enc_attn.resize(size_t(tiers));
    tape->dec_attn.resize(size_t(tiers));
    tape->ran_enc_attn.assign(size_t(tiers), false);
    tape->ran_dec_attn.assign(size_t(tiers), false);
    return tape;
}

Tensor UNet::embed(const std::vector<int>& t, const std::vector<PromptAttributes>& prompts,
                   bool uncond, Tape* tape) const {
    const int n = int(t.size());
    Tensor sin = nn::sinusoidal_embedding(t, cfg_.emb_dim);
    Tensor a = time_fc1_.forward(sin, tape ? &tape->time_fc1 : nullptr);
    if (tape) tape->time_silu_in = a;
    Tensor e = time_fc2_.forward(nn::silu_forward(a), tape ? &tape->time_fc2 : nullptr);

    std::vector<int> id_idx(size_t(n)), bg_idx(size_t(n)), mo_idx(size_t(n));
    for (int i = 0; i < n; ++i) {
        const auto& p = prompts[size_t(i)];
        if (uncond) {
            id_idx[size_t(i)] = cfg_.n_identities;
            bg_idx[size_t(i)] = cfg_.n_backgrounds;
            mo_idx[size_t(i)] = cfg_.n_motions;
        } else {
            FAAC_REQUIRE(p.identity_id >= 0 && p.identity_id < cfg_.n_identities,
                         "prompt: identity_id out of range");
            FAAC_REQUIRE(p.background_id >= 0 && p.background_id < cfg_.n_backgrounds,
                         "prompt: background_id out of range");
            FAAC_REQUIRE(p.motion_id >= 0 && p.motion_id < cfg_.n_motions,
                         "prompt: motion_id out of range");
            id_idx[size_t(i)] = p.identity_id;
            bg_idx[size_t(i)] = p.background_id;
            mo_idx[size_t(i)] = p.motion_id;
        }
    }
    e.add_(emb_id_.forward(id_idx));
    e.add_(emb_bg_.forward(bg_idx));
    e.add_(emb_mo_.forward(mo_idx));
    if (tape) {
        tape->t_idx = t;
        tape->id_idx = std::move(id_idx);
        tape->bg_idx = std::move(bg_idx);
        tape->mo_idx = std::move(mo_idx);
        tape->emb = e;
    }
    return e;
}

Tensor UNet::forward(const Tensor& x, const std::vector<int>& t,
                     const std::vector<PromptAttributes>& prompts, bool uncond,
                     const Tensor* cond, const TemporalContext* tctx, Tape* tape) const {
    const int n = x.dim(0);
    FAAC_REQUIRE(x.ndim() == 4 && x.dim(1) == cfg_.in_channels && x.dim(2) == cfg_.resolution &&
                     x.dim(3) == cfg_.resolution,
                 "denoiser: input shape mismatch");
    FAAC_REQUIRE(int(t.size()) == n && int(prompts.size()) == n,
                 "denoiser: t/prompts must match the batch");
    const int tiers = cfg_.tier_count();

    const std::vector<bool>* mask = &cfg_.temporal_tier_mask;
    if (tctx) {
        FAAC_REQUIRE(n <= cfg_.max_frames, "denoiser: clip longer than max_frames");
        FAAC_REQUIRE(tctx->anchor >= -1 && tctx->anchor < n, "denoiser: anchor out of range");
        for (int i = 1; i < n; ++i)
            FAAC_REQUIRE(t[size_t(i)] == t[0], "denoiser: clip frames must share one timestep");
        if (tctx->tier_mask) {
            FAAC_REQUIRE(int(tctx->tier_mask->size()) == tiers,
                         "denoiser: tier mask length must equal tier count");
            mask = tctx->tier_mask;
        }
    }

    Tensor e = embed(t, prompts, uncond, tape);
    Tensor se = nn::silu_forward(e);

    std::vector<Tensor> feats;
    if (cond) {
        FAAC_CHECK_CONFIG(cfg_.adapter_enabled,
                          "denoiser: condition map given but the adapter is disabled");
        FAAC_REQUIRE(cond->dim(0) == n, "denoiser: condition batch mismatch");
        feats = adapter_.forward(*cond, tape ? &tape->adapter : nullptr);
        if (tape) tape->used_adapter = true;
    }

    auto run_temporal = [&](const nn::TemporalAttention& attn, Tensor h, int tier, bool decoder,
                            nn::TemporalAttention::Cache* cache) {
        AttentionMap* rec = nullptr;
        if (tctx->record) {
            tctx->record->emplace_back();
            rec = &tctx->record->back();
            rec->tier = tier;
            rec->decoder = decoder;
            rec->timestep = tctx->record_timestep;
        }
        return attn.forward(h, tctx->anchor, cache, rec);
    };

    Tensor h = stem_.forward(x, tape ? &tape->stem : nullptr);
    std::vector<Tensor> skips(size_t(tiers));
    for (int i = 0; i < tiers; ++i) {
        if (!feats.empty()) h.add_(feats[size_t(i)]);
        h = enc_[size_t(i)].forward(h, se, tape ? &tape->enc[size_t(i)] : nullptr);
        if (tctx && (*mask)[size_t(i)]) {
            h = run_temporal(enc_attn_[size_t(i)], std::move(h), i, false,
                             tape ? &tape->enc_attn[size_t(i)] : nullptr);
            if (tape) tape->ran_enc_attn[size_t(i)] = true;
        }
        skips[size_t(i)] = h;
        if (i + 1 < tiers) h = down_[size_t(i)].forward(h, tape ? &tape->down[size_t(i)] : nullptr);
    }

    h = mid_.forward(h, se, tape ? &tape->mid : nullptr);

    for (int i = tiers - 1; i >= 0; --i) {
        Tensor cat = nn::concat_channels(h, skips[size_t(i)]);
        h = dec_[size_t(i)].forward(cat, se, tape ? &tape->dec[size_t(i)] : nullptr);
        if (tctx && (*mask)[size_t(i)]) {
            h = run_temporal(dec_attn_[size_t(i)], std::move(h), i, true,
                             tape ? &tape->dec_attn[size_t(i)] : nullptr);
            if (tape) tape->ran_dec_attn[size_t(i)] = true;
        }
        if (i > 0)
            h = up_[size_t(i) - 1].forward(nn::upsample2x_forward(h),
                                           tape ? &tape->up[size_t(i) - 1] : nullptr);
    }

    Tensor g = head_gn_.forward(h, tape ? &tape->head_gn : nullptr);
    if (tape) tape->head_silu_in = g;
    return head_conv_.forward(nn::silu_forward(g), tape ? &tape->head_conv : nullptr);
}

void UNet::backward(const Tensor& d_eps, Tape& tape) const {
    const int tiers = cfg_.tier_count();
    const int n = d_eps.dim(0);

    Tensor dsg = head_conv_.backward(d_eps, tape.head_conv);
    Tensor dg = nn::silu_backward(dsg, tape.head_silu_in);
    Tensor dh = head_gn_.backward(dg, tape.head_gn);

    Tensor d_se({n, cfg_.emb_dim});
    std::vector<Tensor> dskips(size_t(tiers));

    for (int i = 0; i < tiers; ++i) {
        if (tape.ran_dec_attn[size_t(i)])
            dh = dec_attn_[size_t(i)].backward(dh, tape.dec_attn[size_t(i)]);
        Tensor dcat = dec_[size_t(i)].backward(dh, tape.dec[size_t(i)], d_se);
        Tensor dmain;
        nn::split_channels(dcat, dcat.dim(1) - cfg_.channels[size_t(i)], dmain,
                           dskips[size_t(i)]);
        if (i + 1 < tiers) {
            Tensor dup = up_[size_t(i)].backward(dmain, tape.up[size_t(i)]);
            dh = nn::upsample2x_backward(dup);
        } else {
            dh = std::move(dmain);
        }
    }

    dh = mid_.backward(dh, tape.mid, d_se);

    std::vector<Tensor> dfeats(tape.used_adapter ? size_t(tiers) : 0);
    for (int i = tiers - 1; i >= 0; --i) {
        dh.add_(dskips[size_t(i)]);
        if (tape.ran_enc_attn[size_t(i)])
            dh = enc_attn_[size_t(i)].backward(dh, tape.enc_attn[size_t(i)]);
        dh = enc_[size_t(i)].backward(dh, tape.enc[size_t(i)], d_se);
        if (tape.used_adapter) dfeats[size_t(i)] = dh;
        if (i > 0) dh = down_[size_t(i) - 1].backward(dh, tape.down[size_t(i) - 1]);
    }
    stem_.backward(dh, tape.stem);

    if (tape.used_adapter) adapter_.backward(dfeats, tape.adapter);

    // embedding path: blocks consumed silu(emb)
    Tensor de = nn::silu_backward(d_se, tape.emb);
    emb_id_.backward(de, tape.id_idx);
    emb_bg_.backward(de, tape.bg_idx);
    emb_mo_.backward(de, tape.mo_idx);
    Tensor da = time_fc2_.backward(de, tape.time_fc2);
    Tensor dsin = time_fc1_.backward(nn::silu_backward(da, tape.time_silu_in), tape.time_fc1);
    (void)dsin;  // sinusoidal features are fixed
}

NoiseSample UNet::denoise_frame(const FrameLatent& x_t, int t, const PromptAttributes& prompt,
                                const Grid* cond_slice, bool uncond) const {
    FAAC_REQUIRE(t >= 1 && t <= cfg_.num_steps, "denoise_frame: t out of range");
    FAAC_REQUIRE(x_t.t == t, "denoise_frame: latent timestep disagrees with t");
    FAAC_REQUIRE(x_t.data.c == cfg_.in_channels && x_t.data.h == cfg_.resolution &&
                     x_t.data.w == cfg_.resolution,
                 "denoise_frame: latent shape mismatch");

    Tensor x = to_tensor(x_t.data);
    Tensor cond;
    const Tensor* cond_ptr = nullptr;
    if (cond_slice) {
        FAAC_CHECK_CONFIG(cfg_.adapter_enabled,
                          "denoise_frame: condition given but the adapter is disabled");
        cond = to_tensor(*cond_slice);
        cond_ptr = &cond;
    }
    Tensor eps = forward(x, {t}, {prompt}, uncond, cond_ptr, nullptr, nullptr);
    return NoiseSample{to_grid(eps, 0), NoiseOrigin::gaussian};
}

DenoiseClipResult UNet::denoise_clip(const std::vector<FrameLatent>& xs, int t,
                                     const PromptAttributes& prompt, std::optional<int> k,
                                     const ConditionMap* cond, bool record_maps,
                                     const std::vector<bool>* tier_mask, bool uncond) const {
    const int f = int(xs.size());
    FAAC_REQUIRE(f >= 1, "denoise_clip: empty clip");
    FAAC_REQUIRE(t >= 1 && t <= cfg_.num_steps, "denoise_clip: t out of range");
    FAAC_REQUIRE(!k.has_value() || (*k >= 0 && *k < f), "denoise_clip: anchor out of range");

    Tensor x({f, cfg_.in_channels, cfg_.resolution, cfg_.resolution});
    for (int i = 0; i < f; ++i) {
        FAAC_REQUIRE(xs[size_t(i)].t == t, "denoise_clip: all frames must share timestep t");
        FAAC_REQUIRE(xs[size_t(i)].data.c == cfg_.in_channels &&
                         xs[size_t(i)].data.h == cfg_.resolution &&
                         xs[size_t(i)].data.w == cfg_.resolution,
                     "denoise_clip: inconsistent frame shapes");
        const auto& g = xs[size_t(i)].data;
        float* dst = x.data() + int64_t(i) * g.numel();
        for (int64_t j = 0; j < g.numel(); ++j) dst[j] = float(g.v[size_t(j)]);
    }

    Tensor cond_t;
    const Tensor* cond_ptr = nullptr;
    if (cond) {
        FAAC_CHECK_CONFIG(cfg_.adapter_enabled,
                          "denoise_clip: condition given but the adapter is disabled");
        cond->validate(f, cfg_.resolution);
        cond_t = Tensor({f, 1, cfg_.resolution, cfg_.resolution});
        for (int i = 0; i < f; ++i) {
            const auto& g = cond->slices[size_t(i)];
            float* dst = cond_t.data() + int64_t(i) * g.numel();
            for (int64_t j = 0; j < g.numel(); ++j) dst[j] = float(g.v[size_t(j)]);
        }
        cond_ptr = &cond_t;
    }

    DenoiseClipResult result;
    TemporalContext tctx;
    tctx.anchor = k.has_value() ? *k : -1;
    tctx.tier_mask = tier_mask;
    tctx.record = record_maps ? &result.maps : nullptr;
    tctx.record_timestep = t;

    Tensor eps = forward(x, std::vector<int>(size_t(f), t),
                         std::vector<PromptAttributes>(size_t(f), prompt), uncond, cond_ptr,
                         &tctx, nullptr);

    result.eps.resize(size_t(f));
    for (int i = 0; i < f; ++i)
        result.eps[size_t(i)] = NoiseSample{to_grid(eps, i), NoiseOrigin::gaussian};
    return result;
}

std::vector<Tensor> UNet::adapter_features(const ConditionMap& cond) const {
    FAAC_CHECK_CONFIG(cfg_.adapter_enabled, "adapter_features: adapter is disabled");
    cond.validate(cond.frames(), cfg_.resolution);
    FAAC_REQUIRE(cond.frames() >= 1, "adapter_features: empty condition map");
    Tensor c({cond.frames(), 1, cfg_.resolution, cfg_.resolution});
    for (int i = 0; i < cond.frames(); ++i) {
        const auto& g = cond.slices[size_t(i)];
        float* dst = c.data() + int64_t(i) * g.numel();
        for (int64_t j = 0; j < g.numel(); ++j) dst[j] = float(g.v[size_t(j)]);
    }
    return adapter_.forward(c, nullptr);
}

}  // namespace faac
