#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faac/diffusion.hpp"
#include "faac/grid.hpp"
#include "faac/nn/layers.hpp"
#include "faac/nn/temporal_attention.hpp"
#include "faac/prompt.hpp"
#include "faac/schedule.hpp"

namespace faac {

using nn::AttentionMap;

// The frame-wise denoising network plus its temporal and adapter extensions.
// Channel/tier defaults mirror the reference architecture one octave down.
struct DenoiserConfig {
    int resolution = 32;
    int in_channels = 3;
    std::vector<int> channels = {32, 64, 128, 128};
    std::vector<bool> temporal_tier_mask = {true, true, true, true};
    int num_heads = 4;
    int n_identities = 16;
    int n_backgrounds = 4;
    int n_motions = 4;
    bool adapter_enabled = false;
    int max_frames = 16;
    int emb_dim = 128;
    int gn_groups = 8;

    // schedule parameters travel with the model
    int num_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    int tier_count() const { return int(channels.size()); }
    std::vector<int> tiers() const;  // spatial size per tier, halving
    void validate() const;
    NoiseSchedule schedule() const { return build_schedule(num_steps, beta_start, beta_end); }
};

// Per-frame guidance images, one [1, H, W] slice per frame, values in [0, 1].
struct ConditionMap {
    std::vector<Grid> slices;

    int frames() const { return int(slices.size()); }
    void validate(int expected_frames, int resolution) const;
};

namespace nn {

struct ResBlock {
    GroupNorm gn1, gn2;
    Conv2d conv1, conv2;
    Linear emb_proj;
    Conv2d skip;  // 1x1, only when in_c != out_c
    bool has_skip = false;
    int in_c = 0, out_c = 0;

    void init(ParamSet& ps, const std::string& name, int in_channels, int out_channels,
              int emb_dim, int gn_groups, Rng& rng);

    struct Cache {
        GroupNorm::Cache gn1, gn2;
        Tensor silu1_in, silu2_in;
        Conv2d::Cache conv1, conv2, skip;
        Linear::Cache emb_proj;
    };

    // x: [N, in_c, H, W]; emb: [N, emb_dim]
    Tensor forward(const Tensor& x, const Tensor& emb, Cache* cache = nullptr) const;
    // returns dx and adds this block's embedding gradient into demb
    Tensor backward(const Tensor& dy, const Cache& cache, Tensor& demb) const;
};

// Condition-map feature pyramid, one additive map per encoder tier.
// Final 1x1 convs are zero-initialized so an untrained adapter is inert.
struct AdapterNet {
    Conv2d stem;
    std::vector<Conv2d> down;  // stride-2 trunk, tier 1..
    std::vector<Conv2d> out;   // per-tier 1x1 heads
    std::vector<int> hidden;

    void init(ParamSet& ps, const std::string& name, const std::vector<int>& tier_channels,
              int gn_groups, Rng& rng);

    struct Cache {
        Conv2d::Cache stem;
        std::vector<Conv2d::Cache> down, out;
        std::vector<Tensor> silu_in;  // trunk activations pre-silu
    };

    std::vector<Tensor> forward(const Tensor& cond, Cache* cache = nullptr) const;
    void backward(const std::vector<Tensor>& dfeats, const Cache& cache) const;
};

}  // namespace nn

struct DenoiseClipResult {
    std::vector<NoiseSample> eps;
    std::vector<AttentionMap> maps;
};

class UNet {
  public:
    UNet(DenoiserConfig cfg, uint64_t init_seed);

    const DenoiserConfig& config() const { return cfg_; }
    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }

    struct TemporalContext {
        int anchor = -1;  // -1 = attend all-to-all, no ghost routing
        const std::vector<bool>* tier_mask = nullptr;  // override, else config mask
        std::vector<AttentionMap>* record = nullptr;
        int record_timestep = 0;
    };

    struct Tape;

    // x: [N, in_c, H, W]; t and prompts sized N. With tctx, N is the clip
    // length and the batch axis is the frame axis.
    Tensor forward(const Tensor& x, const std::vector<int>& t,
                   const std::vector<PromptAttributes>& prompts, bool uncond, const Tensor* cond,
                   const TemporalContext* tctx, Tape* tape) const;

    // Accumulates parameter gradients for the most recent forward recorded
    // on `tape`. Frozen parameters receive nothing.
    void backward(const Tensor& d_eps, Tape& tape) const;

    // Frame-wise prediction through the frozen image path only.
    NoiseSample denoise_frame(const FrameLatent& x_t, int t, const PromptAttributes& prompt,
                              const Grid* cond_slice = nullptr, bool uncond = false) const;

    // Clip prediction with temporal attention at masked tiers. When k is
    // set, the anchor frame's output equals denoise_frame on that frame (the
    // ghost route: it contributes keys/values only).
    DenoiseClipResult denoise_clip(const std::vector<FrameLatent>& xs, int t,
                                   const PromptAttributes& prompt, std::optional<int> k,
                                   const ConditionMap* cond = nullptr, bool record_maps = false,
                                   const std::vector<bool>* tier_mask = nullptr,
                                   bool uncond = false) const;

    // Adapter feature pyramid for a condition map; requires adapter_enabled.
    std::vector<Tensor> adapter_features(const ConditionMap& cond) const;

    // Parameter-group freezing. Groups: "unet." (frame-wise path, time and
    // prompt embeddings), "temporal.", "adapter.".
    void set_frozen(const std::string& group_prefix, bool frozen) {
        params_.set_frozen(group_prefix, frozen);
    }
    uint64_t group_hash(const std::string& group_prefix) const {
        return params_.content_hash(group_prefix);
    }

    std::unique_ptr<Tape> make_tape() const;

    // temporal layer access for the spec-level attention op and tests
    const nn::TemporalAttention& encoder_attention(int tier) const { return enc_attn_[size_t(tier)]; }
    const nn::TemporalAttention& decoder_attention(int tier) const { return dec_attn_[size_t(tier)]; }

  private:
    Tensor embed(const std::vector<int>& t, const std::vector<PromptAttributes>& prompts,
                 bool uncond, Tape* tape) const;

    DenoiserConfig cfg_;
    nn::ParamSet params_;

    nn::Conv2d stem_;
    nn::Linear time_fc1_, time_fc2_;
    nn::Embedding emb_id_, emb_bg_, emb_mo_;
    std::vector<nn::ResBlock> enc_;
    std::vector<nn::Conv2d> down_;
    nn::ResBlock mid_;
    std::vector<nn::ResBlock> dec_;
    std::vector<nn::Conv2d> up_;
    nn::GroupNorm head_gn_;
    nn::Conv2d head_conv_;
    std::vector<nn::TemporalAttention> enc_attn_, dec_attn_;
    nn::AdapterNet adapter_;
};

struct UNet::Tape {
    // embedding path
    std::vector<int> t_idx, id_idx, bg_idx, mo_idx;
    nn::Linear::Cache time_fc1, time_fc2;
    Tensor time_silu_in;
    Tensor emb;  // pre-silu combined embedding
    // trunk
    nn::Conv2d::Cache stem;
    std::vector<nn::ResBlock::Cache> enc, dec;
    nn::ResBlock::Cache mid;
    std::vector<nn::Conv2d::Cache> down, up;
    std::vector<nn::TemporalAttention::Cache> enc_attn, dec_attn;
    std::vector<bool> ran_enc_attn, ran_dec_attn;
    nn::GroupNorm::Cache head_gn;
    Tensor head_silu_in;
    nn::Conv2d::Cache head_conv;
    // adapter
    bool used_adapter = false;
    nn::AdapterNet::Cache adapter;
    int skip_channels0 = 0;  // decoder concat bookkeeping
};

}  // namespace faac
