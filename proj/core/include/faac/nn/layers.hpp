#pragma once

#include <memory>
#include <string>
#include <vector>

#include "faac/rng.hpp"
#include "faac/tensor.hpp"

namespace faac::nn {

// A named parameter with its gradient buffer. `frozen` params receive no
// gradient at all (backward skips the accumulation), which is what makes
// the frozen-weight contract exact rather than approximate.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;

    void zero_grad() { grad.zero(); }
};

class ParamSet {
  public:
    Param* add(const std::string& name, std::vector<int> shape);
    Param* find(const std::string& name) const;
    const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
    void zero_grads();
    int64_t total_elements() const;

    // FNV-1a over the value bytes of every param whose name starts with
    // `prefix` (in registration order). Used by the freeze contract tests.
    uint64_t content_hash(const std::string& prefix = "") const;

    // Sets `frozen` on every param whose name starts with `prefix`.
    void set_frozen(const std::string& prefix, bool frozen);

  private:
    std::vector<std::unique_ptr<Param>> params_;
};

// out = silu(x) elementwise
Tensor silu_forward(const Tensor& x);
Tensor silu_backward(const Tensor& dy, const Tensor& x);

// 3x3 / 1x1 convolution over [N, C, H, W], im2col + sgemm.
struct Conv2d {
    int in_c = 0, out_c = 0, ksize = 3, stride = 1, pad = 1;
    Param* w = nullptr;  // [out_c, in_c * k * k]
    Param* b = nullptr;  // [out_c]

    void init(ParamSet& ps, const std::string& name, int in_channels, int out_channels,
              int kernel, int stride_, int pad_, Rng& rng, bool zero_init = false);

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    // Returns dx; accumulates into w->grad / b->grad unless frozen.
    Tensor backward(const Tensor& dy, const Cache& cache) const;

    int out_size(int in) const { return (in + 2 * pad - ksize) / stride + 1; }
};

struct Linear {
    int in_f = 0, out_f = 0;
    Param* w = nullptr;  // [out_f, in_f]
    Param* b = nullptr;  // [out_f]

    void init(ParamSet& ps, const std::string& name, int in_features, int out_features, Rng& rng,
              bool zero_init = false);

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;  // x: [N, in_f]
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

struct GroupNorm {
    int channels = 0, groups = 8;
    float eps = 1e-5f;
    Param* gamma = nullptr;
    Param* beta = nullptr;

    void init(ParamSet& ps, const std::string& name, int channels_, int groups_);

    struct Cache {
        Tensor x;
        Tensor mean;  // [N, groups]
        Tensor rstd;  // [N, groups]
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;  // [N, C, H, W]
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

// LayerNorm over the last dimension of [N, D] token matrices.
struct LayerNorm {
    int dim = 0;
    float eps = 1e-5f;
    Param* gamma = nullptr;
    Param* beta = nullptr;

    void init(ParamSet& ps, const std::string& name, int dim_);

    struct Cache {
        Tensor x;
        Tensor mean;  // [N]
        Tensor rstd;  // [N]
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

struct Embedding {
    int vocab = 0, dim = 0;
    Param* table = nullptr;  // [vocab, dim]

    void init(ParamSet& ps, const std::string& name, int vocab_, int dim_, Rng& rng);

    // rows[i] = table[idx[i]]
    Tensor forward(const std::vector<int>& idx) const;
    void backward(const Tensor& dy, const std::vector<int>& idx) const;
};

// nearest-neighbor 2x upsample
Tensor upsample2x_forward(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

// concat along channel dim
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& dy, int c_a, Tensor& da, Tensor& db);

// classic transformer sinusoidal embedding of integer timesteps
Tensor sinusoidal_embedding(const std::vector<int>& t, int dim);

class Adam {
  public:
    explicit Adam(float lr = 1e-4f, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamSet& ps);
    float learning_rate() const { return lr_; }
    void set_learning_rate(float lr) { lr_ = lr; }

  private:
    float lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;  // parallel to ParamSet registration order
};

}  // namespace faac::nn
