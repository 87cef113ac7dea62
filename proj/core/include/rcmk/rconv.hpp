#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcmk/dct.hpp"
#include "rcmk/nn.hpp"
#include "rcmk/tensor.hpp"

namespace rcmk {

// Block variants under comparison. MK is the full method; UK uses one kernel
// size for all channels; RMK mirrors the kernel-to-frequency assignment;
// DMK/LMK/SMK strip the denoiser down to nothing / sample-norm only /
// soft-threshold only; Conv2d and Conv2dMK operate in the spatial domain
// without the channel transform.
enum class Variant { MK, UK, RMK, DMK, LMK, SMK, Conv2d, Conv2dMK };

std::string_view variant_name(Variant v);
Variant variant_from_string(std::string_view name);

enum class ResizePosition { Before, After };

struct RConvConfig {
    std::int64_t c_in = 0;
    std::int64_t c_out = 0;
    std::int64_t k = 3;  // base kernel size, odd
    std::int64_t a = 1;  // depthwise expansion rate
    std::int64_t stride = 1;
    std::int64_t m = 3;  // number of kernels
    // Defaults when empty: kernel_sizes = [k+2, k, 1]; split_ratio = 1:3:2
    // for k=3 and 1:2:1 for k=5. kernel_sizes must be strictly decreasing,
    // odd, and contain k.
    std::vector<std::int64_t> kernel_sizes;
    std::vector<std::int64_t> split_ratio;
    Variant variant = Variant::MK;
    ResizePosition resize_position = ResizePosition::After;
    double tau = 1e-4;
    DType dtype = DType::Float32;
};

// Fills defaults and validates the invariants; throws ValueError on a
// malformed config. Idempotent.
RConvConfig resolve_config(RConvConfig cfg);

// Splits c_s channels proportionally to `ratio` by largest-remainder
// rounding. Counts sum to c_s, every count >= 1, ties go to the earlier
// (lower-frequency) group.
std::vector<std::int64_t> partition_channels(std::int64_t c_s,
                                             std::span<const std::int64_t> ratio);

// One robust convolution block. Channel convention: after t_c, channel index
// 0 is the lowest frequency. t_s holds the learnable per-branch filter sets
// [a^2, 1, kj, kj]; each set is shared by every channel of its branch (the
// grouped depthwise weight is materialized by tiling), so a branch costs
// a^2*kj^2 parameters regardless of its width.
struct RConvBlock {
    RConvConfig cfg;  // resolved
    // transform-domain variants
    Conv2dParams t_c;           // square PWConv, DCT-initialized
    std::vector<Tensor> t_s;    // per-branch shared DWConv filters
    Conv2dParams t_r;           // PWConv resize, He-initialized, zero bias
    NSTState nst_c, nst_s;      // denoiser state at the two sites
    // spatial-domain variants (Conv2d, Conv2dMK)
    std::vector<Conv2dParams> spatial_convs;

    std::vector<std::int64_t> split;           // channels per branch, frequency order
    std::vector<std::int64_t> branch_kernels;  // kernel per branch, frequency order
    std::vector<std::int64_t> out_split;       // Conv2dMK only: output channels per branch

    std::int64_t c_s() const;  // internal channel width of the transform path

    RConvBlock clone() const;  // deep copy (fresh parameter/buffer storage)

    using ParamVisitor = std::function<void(const std::string&, Tensor&)>;
    void visit_params(const ParamVisitor& cb);
    void visit_buffers(const ParamVisitor& cb);
};

RConvBlock build_block(const RConvConfig& cfg, std::uint64_t seed);

Tensor block_forward(RConvBlock& b, const Tensor& x, Mode mode);

struct ParamCounts {
    std::int64_t total = 0;
    std::int64_t t_r = 0;
    std::int64_t t_c = 0;
    std::int64_t t_s = 0;  // spatial transform (holds the conv weights for spatial variants)
    std::int64_t extra_vs_lst = 0;
};

// Exact learnable-parameter counts. extra_vs_lst is the closed form
// a^2 * sum_{kj != k} kj^2: the cost of the multi-kernel spatial transform
// over a uniform-kernel block with the same config.
ParamCounts count_params(const RConvBlock& b);
std::int64_t extra_params_closed_form(const RConvConfig& cfg);

}  // namespace rcmk
