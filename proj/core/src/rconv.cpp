#include "rcmk/rconv.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "rcmk/ops.hpp"
#include "rcmk/util.hpp"

namespace rcmk {

namespace {

bool is_spatial(Variant v) { return v == Variant::Conv2d || v == Variant::Conv2dMK; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::MK: return "MK";
        case Variant::UK: return "UK";
        case Variant::RMK: return "RMK";
        case Variant::DMK: return "DMK";
        case Variant::LMK: return "LMK";
        case Variant::SMK: return "SMK";
        case Variant::Conv2d: return "Conv2d";
        case Variant::Conv2dMK: return "Conv2dMK";
    }
    throw ValueError("unknown variant");
}

Variant variant_from_string(std::string_view name) {
    std::string n = lower(name);
    if (n == "mk") return Variant::MK;
    if (n == "uk") return Variant::UK;
    if (n == "rmk") return Variant::RMK;
    if (n == "dmk") return Variant::DMK;
    if (n == "lmk") return Variant::LMK;
    if (n == "smk") return Variant::SMK;
    if (n == "conv2d") return Variant::Conv2d;
    if (n == "conv2dmk") return Variant::Conv2dMK;
    throw ValueError("unknown variant '" + std::string(name) + "'");
}

RConvConfig resolve_config(RConvConfig cfg) {
    if (cfg.c_in < 1 || cfg.c_out < 1)
        throw ValueError("block needs positive channel counts");
    if (cfg.k < 1 || cfg.k % 2 == 0)
        throw ValueError("base kernel size must be odd and positive, got " +
                         std::to_string(cfg.k));
    if (cfg.a < 1) throw ValueError("expansion rate must be >= 1");
    if (cfg.stride < 1) throw ValueError("stride must be >= 1");
    if (cfg.tau < 0.0) throw ValueError("tau must be >= 0");

    if (cfg.variant == Variant::UK) {
        cfg.kernel_sizes = {cfg.k};
        cfg.split_ratio = {1};
    } else {
        if (cfg.kernel_sizes.empty()) cfg.kernel_sizes = {cfg.k + 2, cfg.k, 1};
        if (cfg.split_ratio.empty()) {
            if (cfg.k == 3)
                cfg.split_ratio = {1, 3, 2};
            else if (cfg.k == 5)
                cfg.split_ratio = {1, 2, 1};
            else
                throw ValueError("no default split ratio for k=" + std::to_string(cfg.k) +
                                 "; set split_ratio explicitly");
        }
    }
    cfg.m = static_cast<std::int64_t>(cfg.kernel_sizes.size());
    if (cfg.split_ratio.size() != cfg.kernel_sizes.size())
        throw ValueError("split_ratio and kernel_sizes must have the same length");
    bool has_base = false;
    for (std::size_t i = 0; i < cfg.kernel_sizes.size(); ++i) {
        std::int64_t kj = cfg.kernel_sizes[i];
        if (kj < 1 || kj % 2 == 0)
            throw ValueError("kernel sizes must be odd and positive");
        if (i > 0 && kj >= cfg.kernel_sizes[i - 1])
            throw ValueError("kernel sizes must be strictly decreasing");
        if (kj == cfg.k) has_base = true;
    }
    if (!has_base) throw ValueError("kernel size list must contain the base kernel");
    for (std::int64_t r : cfg.split_ratio)
        if (r < 1) throw ValueError("split ratio entries must be positive");

    if (!is_spatial(cfg.variant) && cfg.resize_position == ResizePosition::Before) {
        std::int64_t a2 = cfg.a * cfg.a;
        if (cfg.c_out % a2 != 0)
            throw ValueError("resize-before needs c_out divisible by a^2 (" +
                             std::to_string(cfg.c_out) + " % " + std::to_string(a2) + " != 0)");
    }
    return cfg;
}

std::vector<std::int64_t> partition_channels(std::int64_t c_s,
                                             std::span<const std::int64_t> ratio) {
    if (ratio.empty()) throw ValueError("partition needs a non-empty ratio");
    const std::int64_t g = static_cast<std::int64_t>(ratio.size());
    for (std::int64_t r : ratio)
        if (r < 1) throw ValueError("ratio entries must be positive");
    if (c_s < g)
        throw ValueError("cannot give " + std::to_string(g) + " groups at least one of " +
                         std::to_string(c_s) + " channels");
    std::int64_t total = std::accumulate(ratio.begin(), ratio.end(), std::int64_t{0});

    // Largest-remainder rounding in exact integer arithmetic: quota_i =
    // c_s*r_i/total, remainders c_s*r_i mod total. Ties go to the earlier
    // (lower-frequency) group.
    std::vector<std::int64_t> counts(static_cast<std::size_t>(g));
    std::vector<std::int64_t> rem(static_cast<std::size_t>(g));
    std::int64_t assigned = 0;
    for (std::int64_t i = 0; i < g; ++i) {
        std::int64_t num = c_s * ratio[static_cast<std::size_t>(i)];
        counts[static_cast<std::size_t>(i)] = num / total;
        rem[static_cast<std::size_t>(i)] = num % total;
        assigned += counts[static_cast<std::size_t>(i)];
    }
    std::vector<std::int64_t> order(static_cast<std::size_t>(g));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
        return rem[static_cast<std::size_t>(x)] > rem[static_cast<std::size_t>(y)];
    });
    for (std::int64_t left = c_s - assigned, i = 0; left > 0; --left, ++i)
        ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];

    // Floor clamp: every group keeps at least one channel, refilled from the
    // largest group (highest index on ties, away from the low-frequency end).
    for (std::int64_t i = 0; i < g; ++i) {
        while (counts[static_cast<std::size_t>(i)] == 0) {
            std::int64_t donor = 0;
            for (std::int64_t j = 1; j < g; ++j)
                if (counts[static_cast<std::size_t>(j)] >= counts[static_cast<std::size_t>(donor)])
                    donor = j;
            --counts[static_cast<std::size_t>(donor)];
            ++counts[static_cast<std::size_t>(i)];
        }
    }
    return counts;
}

std::int64_t RConvBlock::c_s() const {
    if (is_spatial(cfg.variant)) return cfg.c_in;
    return cfg.resize_position == ResizePosition::After ? cfg.c_in
                                                        : cfg.c_out / (cfg.a * cfg.a);
}

namespace {

Conv2dParams clone_conv(const Conv2dParams& p) {
    Conv2dParams out;
    out.weight = p.weight.defined() ? p.weight.clone() : Tensor();
    out.bias = p.bias.defined() ? p.bias.clone() : Tensor();
    out.stride = p.stride;
    out.padding = p.padding;
    out.groups = p.groups;
    return out;
}

}  // namespace

RConvBlock RConvBlock::clone() const {
    RConvBlock b;
    b.cfg = cfg;
    b.t_c = clone_conv(t_c);
    for (const Tensor& t : t_s) b.t_s.push_back(t.clone());
    b.t_r = clone_conv(t_r);
    b.nst_c = nst_c.clone();
    b.nst_s = nst_s.clone();
    for (const Conv2dParams& p : spatial_convs) b.spatial_convs.push_back(clone_conv(p));
    b.split = split;
    b.branch_kernels = branch_kernels;
    b.out_split = out_split;
    return b;
}

void RConvBlock::visit_params(const ParamVisitor& cb) {
    if (t_c.weight.defined()) cb("t_c.weight", t_c.weight);
    for (std::size_t j = 0; j < t_s.size(); ++j) cb("t_s." + std::to_string(j), t_s[j]);
    if (t_r.weight.defined()) cb("t_r.weight", t_r.weight);
    if (t_r.bias.defined()) cb("t_r.bias", t_r.bias);
    if (nst_c.gamma.defined()) {
        cb("nst_c.gamma", nst_c.gamma);
        cb("nst_c.beta", nst_c.beta);
    }
    if (nst_s.gamma.defined()) {
        cb("nst_s.gamma", nst_s.gamma);
        cb("nst_s.beta", nst_s.beta);
    }
    for (std::size_t j = 0; j < spatial_convs.size(); ++j) {
        cb("conv." + std::to_string(j) + ".weight", spatial_convs[j].weight);
        if (spatial_convs[j].bias.defined())
            cb("conv." + std::to_string(j) + ".bias", spatial_convs[j].bias);
    }
}

void RConvBlock::visit_buffers(const ParamVisitor& cb) {
    if (nst_c.running_mean.defined()) {
        cb("nst_c.running_mean", nst_c.running_mean);
        cb("nst_c.running_var", nst_c.running_var);
    }
    if (nst_s.running_mean.defined()) {
        cb("nst_s.running_mean", nst_s.running_mean);
        cb("nst_s.running_var", nst_s.running_var);
    }
}

RConvBlock build_block(const RConvConfig& raw, std::uint64_t seed) {
    RConvBlock b;
    b.cfg = resolve_config(raw);
    const RConvConfig& cfg = b.cfg;
    const std::int64_t a2 = cfg.a * cfg.a;

    if (cfg.variant == Variant::Conv2d) {
        Conv2dParams p;
        Rng rng(mix_seed(seed, "conv.0.weight"));
        p.weight = he_normal({cfg.c_out, cfg.c_in, cfg.k, cfg.k}, cfg.dtype, rng);
        p.weight.set_requires_grad(true);
        p.stride = cfg.stride;
        p.padding = same_padding(cfg.k);
        b.spatial_convs.push_back(std::move(p));
        b.split = {cfg.c_in};
        b.branch_kernels = {cfg.k};
        b.out_split = {cfg.c_out};
        return b;
    }
    if (cfg.variant == Variant::Conv2dMK) {
        b.split = partition_channels(cfg.c_in, cfg.split_ratio);
        b.out_split = partition_channels(cfg.c_out, cfg.split_ratio);
        b.branch_kernels = cfg.kernel_sizes;
        for (std::size_t j = 0; j < b.branch_kernels.size(); ++j) {
            std::int64_t kj = b.branch_kernels[j];
            Conv2dParams p;
            Rng rng(mix_seed(seed, "conv." + std::to_string(j) + ".weight"));
            p.weight = he_normal({b.out_split[j], b.split[j], kj, kj}, cfg.dtype, rng);
            p.weight.set_requires_grad(true);
            p.stride = cfg.stride;
            p.padding = same_padding(kj);
            b.spatial_convs.push_back(std::move(p));
        }
        return b;
    }

    // transform path
    const std::int64_t cs =
        cfg.resize_position == ResizePosition::After ? cfg.c_in : cfg.c_out / a2;
    b.branch_kernels = cfg.kernel_sizes;
    std::vector<std::int64_t> ratio = cfg.split_ratio;
    if (cfg.variant == Variant::RMK) {
        // exact mirror: high frequencies get the assignment (kernel and
        // group width) that low frequencies had
        std::reverse(b.branch_kernels.begin(), b.branch_kernels.end());
        std::reverse(ratio.begin(), ratio.end());
    }
    b.split = partition_channels(cs, ratio);

    b.t_c.weight = reshape(dct_matrix(cfg.c_in, cfg.dtype), {cfg.c_in, cfg.c_in, 1, 1});
    b.t_c.weight.set_requires_grad(true);

    for (std::int64_t kj : b.branch_kernels) {
        std::int64_t kk = kj * kj;
        auto filters = dct2_filters(kj, std::min(a2, kk), cfg.dtype);
        Tensor w = Tensor::zeros({a2, 1, kj, kj}, cfg.dtype);
        // walk the frequency ladder, wrapping round when a^2 exceeds the
        // number of distinct kj x kj basis functions
        for (std::int64_t t = 0; t < a2; ++t) {
            const Tensor& f = filters[static_cast<std::size_t>(t % kk)];
            for (std::int64_t i = 0; i < kk; ++i)
                w.set_value_at(t * kk + i, f.value_at(i));
        }
        w.set_requires_grad(true);
        b.t_s.push_back(std::move(w));
    }

    const std::int64_t tr_in = cfg.resize_position == ResizePosition::After ? a2 * cs : cfg.c_in;
    const std::int64_t tr_out = cfg.resize_position == ResizePosition::After ? cfg.c_out : cs;
    Rng rng(mix_seed(seed, "t_r.weight"));
    b.t_r.weight = he_normal({tr_out, tr_in, 1, 1}, cfg.dtype, rng);
    b.t_r.weight.set_requires_grad(true);
    b.t_r.bias = Tensor::zeros({tr_out}, cfg.dtype, true);

    if (cfg.variant == Variant::MK || cfg.variant == Variant::UK ||
        cfg.variant == Variant::RMK) {
        b.nst_c = NSTState::create(cfg.c_in, cfg.dtype, cfg.tau);
        b.nst_s = NSTState::create(a2 * cs, cfg.dtype, cfg.tau);
    }
    return b;
}

namespace {

Tensor denoise(RConvBlock& b, const Tensor& h, NSTState& state, Mode mode) {
    switch (b.cfg.variant) {
        case Variant::MK:
        case Variant::UK:
        case Variant::RMK:
            return nst_forward(h, state, mode);
        case Variant::DMK:
            return h;
        case Variant::LMK:
            return sample_norm(h);
        case Variant::SMK:
            return soft_threshold(h, b.cfg.tau);
        default:
            throw ValueError("denoiser reached on a spatial variant");
    }
}

}  // namespace

Tensor block_forward(RConvBlock& b, const Tensor& x, Mode mode) {
    const RConvConfig& cfg = b.cfg;
    if (x.ndim() != 4) throw ShapeError("block input must be NCHW");
    if (x.dim(1) != cfg.c_in)
        throw ShapeError("block expected " + std::to_string(cfg.c_in) + " channels, got " +
                         std::to_string(x.dim(1)));
    if (x.dtype() != cfg.dtype) throw DtypeError("block input dtype mismatch");

    if (cfg.variant == Variant::Conv2d) return conv2d(x, b.spatial_convs[0]);
    if (cfg.variant == Variant::Conv2dMK) {
        std::vector<Tensor> outs;
        std::int64_t off = 0;
        for (std::size_t j = 0; j < b.spatial_convs.size(); ++j) {
            Tensor part = slice_channels(x, off, off + b.split[j]);
            outs.push_back(conv2d(part, b.spatial_convs[j]));
            off += b.split[j];
        }
        return concat_channels(outs);
    }

    Tensor h = conv2d(x, b.t_c);
    h = denoise(b, h, b.nst_c, mode);
    if (cfg.resize_position == ResizePosition::Before) h = conv2d(h, b.t_r);

    std::vector<Tensor> outs;
    std::int64_t off = 0;
    for (std::size_t j = 0; j < b.t_s.size(); ++j) {
        const std::int64_t cj = b.split[j];
        Tensor part = slice_channels(h, off, off + cj);
        Conv2dParams dw;
        dw.weight = tile_first_dim(b.t_s[j], cj);  // [cj*a^2, 1, kj, kj]
        dw.stride = cfg.stride;
        dw.padding = same_padding(b.branch_kernels[j]);
        dw.groups = cj;
        outs.push_back(conv2d(part, dw));
        off += cj;
    }
    h = concat_channels(outs);
    h = denoise(b, h, b.nst_s, mode);
    if (cfg.resize_position == ResizePosition::After) h = conv2d(h, b.t_r);
    return h;
}

ParamCounts count_params(const RConvBlock& b) {
    ParamCounts c;
    auto add = [](const Tensor& t) { return t.defined() ? t.numel() : 0; };
    c.t_c = add(b.t_c.weight) + add(b.t_c.bias);
    for (const Tensor& t : b.t_s) c.t_s += t.numel();
    for (const Conv2dParams& p : b.spatial_convs) c.t_s += add(p.weight) + add(p.bias);
    c.t_r = add(b.t_r.weight) + add(b.t_r.bias);
    c.total = c.t_c + c.t_s + c.t_r + add(b.nst_c.gamma) + add(b.nst_c.beta) +
              add(b.nst_s.gamma) + add(b.nst_s.beta);
    c.extra_vs_lst = extra_params_closed_form(b.cfg);
    return c;
}

std::int64_t extra_params_closed_form(const RConvConfig& raw) {
    RConvConfig cfg = resolve_config(raw);
    std::int64_t extra = 0;
    for (std::int64_t kj : cfg.kernel_sizes)
        if (kj != cfg.k) extra += kj * kj;
    return cfg.a * cfg.a * extra;
}

}  // namespace rcmk
