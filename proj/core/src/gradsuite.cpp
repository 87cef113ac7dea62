#include "rcmk/gradsuite.hpp"

#include <algorithm>
#include <sstream>

#include "rcmk/nn.hpp"
#include "rcmk/ops.hpp"
#include "rcmk/rconv.hpp"
#include "rcmk/util.hpp"

namespace rcmk {

namespace {

Tensor randn(Shape shape, Rng& rng, double scale = 1.0) {
    std::int64_t n = shape_numel(shape);
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (double& v : vals) v = rng.normal() * scale;
    return Tensor::from(std::move(shape), std::move(vals));
}

// scalar-valued readout that touches every output coordinate
Tensor probe_sum(const Tensor& y, const Tensor& probe) { return sum(mul(y, probe)); }

using CaseFn = std::function<GradcheckReport(std::uint64_t)>;

struct Case {
    std::string name;
    CaseFn run;
};

GradcheckReport conv_case(std::uint64_t seed, Shape xs, Shape ws, std::int64_t stride,
                          std::int64_t pad, std::int64_t groups, bool bias, int wrt) {
    Rng rng(seed);
    Tensor x = randn(xs, rng);
    Tensor w = randn(ws, rng, 0.5);
    Tensor b = bias ? randn({ws[0]}, rng, 0.2) : Tensor();
    // fixed probe over the conv output
    std::int64_t ho = (xs[2] + 2 * pad - ws[2]) / stride + 1;
    std::int64_t wo = (xs[3] + 2 * pad - ws[3]) / stride + 1;
    Tensor probe = randn({xs[0], ws[0], ho, wo}, rng);

    auto f = [&, wrt](const Tensor& v) {
        Conv2dParams p;
        p.weight = wrt == 1 ? v : w;
        p.bias = wrt == 2 ? v : b;
        p.stride = stride;
        p.padding = pad;
        p.groups = groups;
        return probe_sum(conv2d(wrt == 0 ? v : x, p), probe);
    };
    return gradcheck(f, wrt == 0 ? x : (wrt == 1 ? w : b));
}

GradcheckReport block_case(std::uint64_t seed, RConvConfig cfg, int wrt) {
    cfg.dtype = DType::Float64;
    RConvBlock block = build_block(cfg, seed);
    Rng rng(mix_seed(seed, "block_case"));
    Tensor x = randn({2, cfg.c_in, 6, 6}, rng);
    Tensor y0;
    {
        // shape probe from a throwaway clone (train mode mutates buffers)
        RConvBlock tmp = block.clone();
        NoGradGuard guard;
        y0 = block_forward(tmp, x, Mode::Train);
    }
    Tensor probe = randn(y0.shape(), rng);

    if (wrt == 0) {
        auto f = [&](const Tensor& v) {
            RConvBlock b = block.clone();
            return probe_sum(block_forward(b, v, Mode::Train), probe);
        };
        return gradcheck(f, x);
    }
    // wrt == 1: first spatial filter bank
    auto f = [&](const Tensor& v) {
        RConvBlock b = block.clone();
        b.t_s[0] = v;
        return probe_sum(block_forward(b, x, Mode::Train), probe);
    };
    return gradcheck(f, block.t_s[0].detach());
}

std::vector<Case> make_cases() {
    std::vector<Case> cases;
    auto add = [&](std::string name, CaseFn fn) {
        cases.push_back({std::move(name), std::move(fn)});
    };

    add("conv2d/input", [](std::uint64_t s) {
        return conv_case(s, {2, 3, 5, 5}, {4, 3, 3, 3}, 1, 1, 1, true, 0);
    });
    add("conv2d/weight", [](std::uint64_t s) {
        return conv_case(s, {2, 3, 5, 5}, {4, 3, 3, 3}, 1, 1, 1, true, 1);
    });
    add("conv2d/bias", [](std::uint64_t s) {
        return conv_case(s, {2, 3, 5, 5}, {4, 3, 3, 3}, 1, 1, 1, true, 2);
    });
    add("conv2d/strided_input", [](std::uint64_t s) {
        return conv_case(s, {1, 2, 7, 7}, {3, 2, 5, 5}, 2, 2, 1, false, 0);
    });
    add("conv2d/grouped_weight", [](std::uint64_t s) {
        return conv_case(s, {2, 4, 5, 5}, {6, 2, 3, 3}, 1, 1, 2, false, 1);
    });
    add("conv2d/depthwise_input", [](std::uint64_t s) {
        return conv_case(s, {2, 3, 6, 6}, {6, 1, 3, 3}, 1, 1, 3, false, 0);
    });
    add("conv2d/pointwise_weight", [](std::uint64_t s) {
        return conv_case(s, {2, 5, 4, 4}, {7, 5, 1, 1}, 1, 0, 1, true, 1);
    });

    add("sample_norm/input", [](std::uint64_t s) {
        Rng rng(s);
        Tensor x = randn({3, 4, 5, 5}, rng, 2.0);
        Tensor probe = randn(x.shape(), rng);
        auto f = [&](const Tensor& v) { return probe_sum(sample_norm(v), probe); };
        return gradcheck(f, x);
    });

    for (int wrt = 0; wrt < 3; ++wrt) {
        const char* names[] = {"batch_norm/input", "batch_norm/gamma", "batch_norm/beta"};
        add(names[wrt], [wrt](std::uint64_t s) {
            Rng rng(s);
            Tensor x = randn({3, 4, 5, 5}, rng, 2.0);
            NSTState state = NSTState::create(4, DType::Float64);
            // non-trivial affine so gamma gradients are exercised
            for (std::int64_t i = 0; i < 4; ++i) {
                state.gamma.set_value_at(i, 0.5 + rng.uniform());
                state.beta.set_value_at(i, rng.normal() * 0.3);
            }
            Tensor probe = randn(x.shape(), rng);
            auto f = [&, wrt](const Tensor& v) {
                NSTState st = state.clone();
                if (wrt == 1) st.gamma = v;
                if (wrt == 2) st.beta = v;
                return probe_sum(batch_norm(wrt == 0 ? v : x, st, Mode::Train), probe);
            };
            Tensor at = wrt == 0 ? x : (wrt == 1 ? state.gamma.detach() : state.beta.detach());
            return gradcheck(f, at);
        });
    }

    add("soft_threshold/input", [](std::uint64_t s) {
        Rng rng(s);
        Tensor x = randn({40}, rng);
        Tensor probe = randn(x.shape(), rng);
        auto f = [&](const Tensor& v) { return probe_sum(soft_threshold(v, 0.25), probe); };
        return gradcheck(f, x);
    });

    add("denoiser/input", [](std::uint64_t s) {
        Rng rng(s);
        Tensor x = randn({3, 4, 4, 4}, rng, 2.0);
        NSTState state = NSTState::create(4, DType::Float64, 0.05);
        Tensor probe = randn(x.shape(), rng);
        auto f = [&](const Tensor& v) {
            NSTState st = state.clone();
            return probe_sum(nst_forward(v, st, Mode::Train), probe);
        };
        return gradcheck(f, x);
    });

    auto base_cfg = [] {
        RConvConfig cfg;
        cfg.c_in = 6;
        cfg.c_out = 8;
        cfg.k = 3;
        cfg.a = 2;
        return cfg;
    };
    const Variant block_variants[] = {Variant::MK,  Variant::UK,  Variant::RMK, Variant::DMK,
                                      Variant::LMK, Variant::SMK, Variant::Conv2dMK};
    for (Variant v : block_variants) {
        RConvConfig cfg = base_cfg();
        cfg.variant = v;
        add("block/" + std::string(variant_name(v)) + "/input",
            [cfg](std::uint64_t s) { return block_case(s, cfg, 0); });
    }
    {
        RConvConfig cfg = base_cfg();
        add("block/MK/filters", [cfg](std::uint64_t s) { return block_case(s, cfg, 1); });
        RConvConfig strided = base_cfg();
        strided.stride = 2;
        add("block/MK/stride2_input",
            [strided](std::uint64_t s) { return block_case(s, strided, 0); });
        RConvConfig before = base_cfg();
        before.c_out = 12;
        before.resize_position = ResizePosition::Before;
        add("block/MK/resize_before_input",
            [before](std::uint64_t s) { return block_case(s, before, 0); });
    }
    return cases;
}

}  // namespace

bool GradSuiteResult::all_passed() const {
    for (const GradSuiteCase& c : cases)
        if (!c.report.pass) return false;
    return !cases.empty();
}

double GradSuiteResult::worst_rel_err() const {
    double worst = 0.0;
    for (const GradSuiteCase& c : cases) worst = std::max(worst, c.report.max_rel_err);
    return worst;
}

GradSuiteResult run_gradcheck_suite(std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ValueError("gradcheck suite needs at least one seed");
    GradSuiteResult result;
    for (const Case& c : make_cases())
        for (std::uint64_t seed : seeds)
            result.cases.push_back({c.name, seed, c.run(seed)});
    return result;
}

std::string format_gradsuite(const GradSuiteResult& r) {
    std::ostringstream os;
    for (const GradSuiteCase& c : r.cases) {
        os << (c.report.pass ? "pass" : "FAIL") << "  " << c.name << "  seed=" << c.seed
           << "  max_rel_err=" << format_double(c.report.max_rel_err, 3)
           << "  checked=" << c.report.checked << "  kinks_excluded=" << c.report.excluded.size();
        if (!c.report.pass && !c.report.worst.empty()) os << "  [" << c.report.worst << "]";
        os << "\n";
    }
    os << (r.all_passed() ? "all gradient checks passed" : "GRADIENT CHECK FAILURES") << "\n";
    return os.str();
}

}  // namespace rcmk
