#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcmk/ops.hpp"
#include "rcmk/tensor.hpp"
#include "rcmk/util.hpp"

namespace rcmk {

enum class Mode { Train, Eval };

struct Conv2dParams {
    Tensor weight;  // [C_out, C_in/groups, kh, kw]
    Tensor bias;    // optional [C_out]; undefined tensor = no bias
    std::int64_t stride = 1;
    std::int64_t padding = 0;
    std::int64_t groups = 1;
};

// (k-1)/2; throws on even k, which cannot preserve spatial size.
std::int64_t same_padding(std::int64_t kernel);

// Cross-correlation with zero padding. Differentiable w.r.t. input, weight
// and bias. H' = (H + 2*pad - kh)/stride + 1.
Tensor conv2d(const Tensor& x, const Conv2dParams& p);

// He fan-in normal initialization for a conv weight of the given shape.
Tensor he_normal(Shape shape, DType dtype, Rng& rng);

// y = sgn(x) * (|x| - tau) where |x| >= tau, else 0. Gradient is 1 strictly
// beyond the threshold and 0 in the dead zone and at |x| == tau.
Tensor soft_threshold(const Tensor& x, double tau);

// Per-sample standardization over (C,H,W): (x - mean) / sqrt(var + eps) with
// population variance. Non-parametric; fully differentiable through the
// sample statistics.
Tensor sample_norm(const Tensor& x, double eps = 1e-5);

// Shared state for batch normalization and for the normalized soft
// thresholding operator built on top of it (tau is ignored by plain BN use).
struct NSTState {
    double tau = 1e-4;
    double momentum = 0.1;
    double eps = 1e-5;
    Tensor gamma, beta;                // [C] learnable affine
    Tensor running_mean, running_var;  // [C] buffers

    static NSTState create(std::int64_t channels, DType dtype = DType::Float32,
                           double tau = 1e-4);
    NSTState clone() const;  // deep copy (fresh storage)
    std::int64_t channels() const { return gamma.defined() ? gamma.numel() : 0; }
};

// Train mode normalizes by batch statistics (biased variance) and updates the
// running buffers: running <- (1-momentum)*running + momentum*batch, with the
// unbiased variance stored. Eval mode uses the stored buffers and is a pure
// function of the single input sample. Backward flows through the batch
// statistics in train mode.
Tensor batch_norm(const Tensor& x, NSTState& s, Mode mode);

// soft_threshold(batch_norm(sample_norm(x)), tau) -- the full denoiser.
Tensor nst_forward(const Tensor& x, NSTState& s, Mode mode);

// Mean over the batch of -log softmax(logits)[label]; max-subtraction
// stabilized. labels must lie in [0, K).
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

struct SgdOptions {
    double lr = 0.1;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v
class Sgd {
public:
    Sgd(std::vector<Tensor> params, SgdOptions opts);

    void step();
    void zero_grad();

    void set_lr(double lr) { opts_.lr = lr; }
    double lr() const { return opts_.lr; }
    const std::vector<Tensor>& params() const { return params_; }
    std::vector<Tensor>& velocities() { return velocity_; }

private:
    std::vector<Tensor> params_;
    std::vector<Tensor> velocity_;
    SgdOptions opts_;
};

}  // namespace rcmk
