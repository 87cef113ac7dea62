#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "rcmk/dct.hpp"
#include "rcmk/error.hpp"
#include "rcmk/ops.hpp"
#include "rcmk/rconv.hpp"
#include "rcmk/util.hpp"

using namespace rcmk;

namespace {

Tensor rand_input(Shape shape, std::uint64_t seed, DType dtype) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(std::move(shape), dtype);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.normal());
    return t;
}

RConvConfig mk_cfg(std::int64_t c_in, std::int64_t c_out, Variant v = Variant::MK,
                   std::int64_t k = 3, std::int64_t a = 1) {
    RConvConfig cfg;
    cfg.c_in = c_in;
    cfg.c_out = c_out;
    cfg.variant = v;
    cfg.k = k;
    cfg.a = a;
    return cfg;
}

std::vector<std::int64_t> part(std::int64_t c, std::vector<std::int64_t> ratio) {
    return partition_channels(c, ratio);
}

}  // namespace

TEST_CASE("variant names round-trip") {
    for (int i = 0; i < 8; ++i) {
        Variant v = static_cast<Variant>(i);
        CHECK(variant_from_string(variant_name(v)) == v);
    }
    CHECK(variant_from_string("mk") == Variant::MK);
    CHECK_THROWS_AS(variant_from_string("nope"), ValueError);
}

TEST_CASE("resolve_config fills the default kernel ladder and ratios") {
    RConvConfig r3 = resolve_config(mk_cfg(8, 8, Variant::MK, 3));
    CHECK(r3.kernel_sizes == std::vector<std::int64_t>{5, 3, 1});
    CHECK(r3.split_ratio == std::vector<std::int64_t>{1, 3, 2});

    RConvConfig r5 = resolve_config(mk_cfg(8, 8, Variant::MK, 5));
    CHECK(r5.kernel_sizes == std::vector<std::int64_t>{7, 5, 1});
    CHECK(r5.split_ratio == std::vector<std::int64_t>{1, 2, 1});

    RConvConfig uk = resolve_config(mk_cfg(8, 8, Variant::UK, 3));
    CHECK(uk.kernel_sizes == std::vector<std::int64_t>{3});
    CHECK(uk.split_ratio == std::vector<std::int64_t>{1});
}

TEST_CASE("resolve_config rejects malformed kernel ladders") {
    RConvConfig cfg = mk_cfg(8, 8);
    cfg.kernel_sizes = {4, 3, 1};  // even kernel
    CHECK_THROWS_AS(resolve_config(cfg), ValueError);
    cfg.kernel_sizes = {1, 3, 5};  // increasing
    CHECK_THROWS_AS(resolve_config(cfg), ValueError);
    cfg.kernel_sizes = {7, 5, 1};  // does not contain k=3
    CHECK_THROWS_AS(resolve_config(cfg), ValueError);
    cfg.kernel_sizes = {5, 3, 1};
    cfg.split_ratio = {1, -3, 2};  // nonpositive ratio entry
    CHECK_THROWS_AS(resolve_config(cfg), ValueError);
    cfg.split_ratio = {1, 3};  // length mismatch
    CHECK_THROWS_AS(resolve_config(cfg), ValueError);

    RConvConfig before = mk_cfg(8, 10);
    before.a = 2;
    before.resize_position = ResizePosition::Before;  // 10 % 4 != 0
    CHECK_THROWS_AS(resolve_config(before), ValueError);
}

TEST_CASE("partition_channels reproduces the pinned splits") {
    CHECK(part(96, {1, 3, 2}) == std::vector<std::int64_t>{16, 48, 32});
    CHECK(part(64, {1, 2, 1}) == std::vector<std::int64_t>{16, 32, 16});
    CHECK(part(6, {1, 3, 2}) == std::vector<std::int64_t>{1, 3, 2});
    CHECK(part(100, {1, 3, 2}) == std::vector<std::int64_t>{17, 50, 33});
    CHECK(part(16, {1, 3, 2}) == std::vector<std::int64_t>{3, 8, 5});
    CHECK(part(4, {1, 3, 2}) == std::vector<std::int64_t>{1, 2, 1});
    // floor clamp: every branch keeps at least one channel
    CHECK(part(2, {1, 100}) == std::vector<std::int64_t>{1, 1});
}

TEST_CASE("partition_channels preserves totals over the full range") {
    for (std::vector<std::int64_t> ratio : {std::vector<std::int64_t>{1, 3, 2},
                                            std::vector<std::int64_t>{1, 2, 1}}) {
        for (std::int64_t c = 3; c <= 512; ++c) {
            auto p = partition_channels(c, ratio);
            CHECK(std::accumulate(p.begin(), p.end(), std::int64_t{0}) == c);
            CHECK(*std::min_element(p.begin(), p.end()) >= 1);
        }
    }
}

TEST_CASE("extra parameter count is 104 at (a=2,k=3) and matches MK-vs-UK diffs") {
    for (std::int64_t a : {std::int64_t{1}, std::int64_t{2}})
        for (std::int64_t k : {std::int64_t{3}, std::int64_t{5}}) {
            RConvConfig cfg = mk_cfg(16, 16, Variant::MK, k, a);
            std::int64_t closed = extra_params_closed_form(cfg);
            RConvBlock mk = build_block(cfg, 1);
            RConvBlock uk = build_block(mk_cfg(16, 16, Variant::UK, k, a), 1);
            std::int64_t diff = count_params(mk).total - count_params(uk).total;
            CHECK(closed == diff);
            CHECK(count_params(mk).extra_vs_lst == closed);
            if (a == 2 && k == 3) CHECK(closed == 104);
            if (a == 1 && k == 3) CHECK(closed == 26);
            if (a == 2 && k == 5) CHECK(closed == 200);
        }
}

TEST_CASE("t_c is initialized to the DCT basis") {
    RConvBlock b = build_block(mk_cfg(8, 8), 3);
    Tensor d = dct_matrix(8, DType::Float32);
    Tensor w = b.t_c.weight;  // [8,8,1,1]
    REQUIRE(w.shape() == Shape{8, 8, 1, 1});
    for (std::int64_t i = 0; i < 64; ++i) CHECK(w.value_at(i) == d.value_at(i));
}

TEST_CASE("t_s banks hold DCT-II filters, cycling when a^2 exceeds k_j^2") {
    RConvConfig cfg = mk_cfg(8, 8, Variant::MK, 3, 2);
    RConvBlock b = build_block(cfg, 3);
    REQUIRE(b.t_s.size() == 3);
    // branch kernels 5,3,1 with a^2 = 4 filters each
    CHECK(b.t_s[0].shape() == Shape{4, 1, 5, 5});
    CHECK(b.t_s[1].shape() == Shape{4, 1, 3, 3});
    CHECK(b.t_s[2].shape() == Shape{4, 1, 1, 1});
    // the 1x1 branch cycles its single (DC) filter, which is the constant 1
    for (std::int64_t i = 0; i < 4; ++i) CHECK(b.t_s[2].value_at(i) == 1.0);
    // first filter of each bank is the DC filter 1/k
    for (std::int64_t i = 0; i < 25; ++i)
        CHECK(b.t_s[0].value_at(i) == doctest::Approx(1.0 / 5.0).epsilon(1e-6));
    for (std::int64_t i = 0; i < 9; ++i)
        CHECK(b.t_s[1].value_at(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("RMK mirrors the kernel ladder and split") {
    RConvBlock mk = build_block(mk_cfg(96, 96), 5);
    RConvBlock rmk = build_block(mk_cfg(96, 96, Variant::RMK), 5);
    CHECK(mk.branch_kernels == std::vector<std::int64_t>{5, 3, 1});
    CHECK(rmk.branch_kernels == std::vector<std::int64_t>{1, 3, 5});
    CHECK(mk.split == std::vector<std::int64_t>{16, 48, 32});
    CHECK(rmk.split == std::vector<std::int64_t>{32, 48, 16});
}

TEST_CASE("DMK block equals the hand-composed transform pipeline") {
    // DMK has no denoiser, so the block must be exactly T_r . concat(DW_j) . T_c
    for (auto pos : {ResizePosition::After, ResizePosition::Before}) {
        RConvConfig cfg = mk_cfg(6, 12, Variant::DMK, 3, 2);
        cfg.dtype = DType::Float64;
        cfg.stride = 2;
        cfg.resize_position = pos;
        RConvBlock b = build_block(cfg, 9);
        Tensor x = rand_input({2, 6, 8, 8}, 17, DType::Float64);

        NoGradGuard guard;
        Tensor h = conv2d(x, b.t_c);
        if (pos == ResizePosition::Before) h = conv2d(h, b.t_r);
        std::vector<Tensor> parts;
        std::int64_t off = 0;
        for (std::size_t j = 0; j < b.split.size(); ++j) {
            Tensor part = slice_channels(h, off, off + b.split[j]);
            off += b.split[j];
            Conv2dParams dw;
            dw.weight = tile_first_dim(b.t_s[j], b.split[j]);
            dw.stride = cfg.stride;
            dw.padding = (b.branch_kernels[j] - 1) / 2;
            dw.groups = b.split[j];
            parts.push_back(conv2d(part, dw));
        }
        Tensor manual = concat_channels(parts);
        if (pos == ResizePosition::After) manual = conv2d(manual, b.t_r);

        Tensor got = block_forward(b, x, Mode::Train);
        REQUIRE(got.shape() == manual.shape());
        CHECK(bitwise_equal(got, manual));
    }
}

TEST_CASE("Conv2dMK equals per-group convolutions over the same split") {
    RConvConfig cfg = mk_cfg(12, 18, Variant::Conv2dMK);
    cfg.dtype = DType::Float64;
    RConvBlock b = build_block(cfg, 4);
    Tensor x = rand_input({2, 12, 5, 5}, 21, DType::Float64);

    NoGradGuard guard;
    std::vector<Tensor> parts;
    std::int64_t off = 0;
    for (std::size_t j = 0; j < b.spatial_convs.size(); ++j) {
        parts.push_back(conv2d(slice_channels(x, off, off + b.split[j]), b.spatial_convs[j]));
        off += b.split[j];
    }
    Tensor manual = concat_channels(parts);
    Tensor got = block_forward(b, x, Mode::Train);
    CHECK(bitwise_equal(got, manual));
    // output channels follow the same ratio partition
    CHECK(b.out_split == partition_channels(18, b.cfg.split_ratio));
}

TEST_CASE("block output shapes track stride, expansion and resize position") {
    for (std::int64_t stride : {std::int64_t{1}, std::int64_t{2}}) {
        for (auto pos : {ResizePosition::After, ResizePosition::Before}) {
            RConvConfig cfg = mk_cfg(8, 12, Variant::MK, 3, 2);
            cfg.stride = stride;
            cfg.resize_position = pos;
            RConvBlock b = build_block(cfg, 5);
            Tensor x = Tensor::zeros({2, 8, 12, 12});
            Tensor y = block_forward(b, x, Mode::Train);
            CHECK(y.shape() == Shape{2, 12, 12 / stride, 12 / stride});
        }
    }
}

TEST_CASE("c_s depends on the resize position") {
    RConvConfig after = mk_cfg(8, 12, Variant::MK, 3, 2);
    CHECK(build_block(after, 1).c_s() == 8);  // resize after: transform width = c_in
    RConvConfig before = mk_cfg(8, 12, Variant::MK, 3, 2);
    before.resize_position = ResizePosition::Before;
    CHECK(build_block(before, 1).c_s() == 3);  // c_out / a^2
}

TEST_CASE("block_forward validates input channels and dtype") {
    RConvBlock b = build_block(mk_cfg(8, 8), 1);
    Tensor wrong_c = Tensor::zeros({1, 5, 8, 8});
    CHECK_THROWS_AS(block_forward(b, wrong_c, Mode::Train), ShapeError);
    Tensor wrong_dtype = Tensor::zeros({1, 8, 8, 8}, DType::Float64);
    CHECK_THROWS_AS(block_forward(b, wrong_dtype, Mode::Train), DtypeError);
}

TEST_CASE("NST states exist only for denoised variants") {
    CHECK(build_block(mk_cfg(8, 8, Variant::MK), 1).nst_c.gamma.defined());
    CHECK(build_block(mk_cfg(8, 8, Variant::UK), 1).nst_c.gamma.defined());
    CHECK(build_block(mk_cfg(8, 8, Variant::RMK), 1).nst_c.gamma.defined());
    CHECK(!build_block(mk_cfg(8, 8, Variant::DMK), 1).nst_c.gamma.defined());
    CHECK(!build_block(mk_cfg(8, 8, Variant::LMK), 1).nst_c.gamma.defined());
    CHECK(!build_block(mk_cfg(8, 8, Variant::SMK), 1).nst_c.gamma.defined());
}

TEST_CASE("parameter names are stable and unique") {
    RConvBlock b = build_block(mk_cfg(8, 8, Variant::MK, 3, 2), 1);
    std::vector<std::string> names;
    b.visit_params([&](const std::string& n, Tensor&) { names.push_back(n); });
    std::vector<std::string> want = {"t_c.weight", "t_s.0",      "t_s.1",      "t_s.2",
                                     "t_r.weight", "t_r.bias",   "nst_c.gamma", "nst_c.beta",
                                     "nst_s.gamma", "nst_s.beta"};
    CHECK(names == want);

    std::vector<std::string> buffers;
    b.visit_buffers([&](const std::string& n, Tensor&) { buffers.push_back(n); });
    CHECK(buffers == std::vector<std::string>{"nst_c.running_mean", "nst_c.running_var",
                                              "nst_s.running_mean", "nst_s.running_var"});
}

TEST_CASE("clone is deep and forward-equivalent") {
    RConvConfig cfg = mk_cfg(6, 8, Variant::MK, 3, 2);
    RConvBlock b = build_block(cfg, 2);
    RConvBlock c = b.clone();
    Tensor x = rand_input({2, 6, 6, 6}, 3, DType::Float32);
    NoGradGuard guard;
    // identical state, identical outputs (eval mode leaves buffers untouched)
    CHECK(bitwise_equal(block_forward(b, x, Mode::Eval), block_forward(c, x, Mode::Eval)));
    // deep: mutating the clone leaves the original alone
    c.t_c.weight.set_value_at(0, 99.0);
    CHECK(b.t_c.weight.value_at(0) != 99.0);
}

TEST_CASE("variant outputs differ where they should") {
    // LMK applies only normalization, SMK only shrinkage; with tau tiny the
    // SMK output stays close to DMK while LMK rescales it.
    RConvConfig base = mk_cfg(6, 6, Variant::DMK);
    base.dtype = DType::Float64;
    Tensor x = rand_input({2, 6, 6, 6}, 8, DType::Float64);
    NoGradGuard guard;
    RConvBlock dmk = build_block(base, 7);
    base.variant = Variant::SMK;
    RConvBlock smk = build_block(base, 7);
    base.variant = Variant::LMK;
    RConvBlock lmk = build_block(base, 7);

    Tensor yd = block_forward(dmk, x, Mode::Train);
    Tensor ys = block_forward(smk, x, Mode::Train);
    Tensor yl = block_forward(lmk, x, Mode::Train);
    REQUIRE(yd.shape() == ys.shape());
    REQUIRE(yd.shape() == yl.shape());
    double max_sd = 0, max_ld = 0;
    for (std::int64_t i = 0; i < yd.numel(); ++i) {
        max_sd = std::max(max_sd, std::abs(ys.value_at(i) - yd.value_at(i)));
        max_ld = std::max(max_ld, std::abs(yl.value_at(i) - yd.value_at(i)));
    }
    CHECK(max_sd < 1e-3);   // shrinkage by tau=1e-4 at two sites
    CHECK(max_sd > 0.0);    // but not a no-op
    CHECK(max_ld > 1e-3);   // normalization changes the scale outright
}
