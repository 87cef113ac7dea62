#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "rcmk/data.hpp"
#include "rcmk/error.hpp"
#include "rcmk/model.hpp"
#include "rcmk/ops.hpp"

using namespace rcmk;

TEST_CASE("spec text round-trips every field") {
    ModelSpec spec;
    spec.widths = {4, 8};
    spec.blocks_per_stage = 2;
    spec.variant = Variant::RMK;
    spec.num_classes = 7;
    spec.in_channels = 3;
    spec.in_h = 32;
    spec.in_w = 30;
    spec.skip_connections = false;
    spec.k = 5;
    spec.a = 2;
    spec.tau = 1.0 / 3.0;  // needs full precision to survive the round trip
    spec.dtype = DType::Float64;
    CHECK(spec_from_text(spec_to_text(spec)) == spec);
    CHECK(spec_from_text(spec_to_text(tiny_spec())) == tiny_spec());
}

TEST_CASE("spec text is a stable golden format") {
    std::string txt = spec_to_text(tiny_spec(Variant::MK));
    CHECK(txt ==
          "widths = 8,16,32\n"
          "blocks_per_stage = 1\n"
          "variant = MK\n"
          "num_classes = 10\n"
          "in_channels = 1\n"
          "in_h = 28\n"
          "in_w = 28\n"
          "skip_connections = 1\n"
          "k = 3\n"
          "a = 1\n"
          "tau = 0.0001\n"
          "dtype = float32\n");
    CHECK_THROWS_AS(spec_from_text("widths = 8\nbogus_key = 1\n"), ValueError);
}

TEST_CASE("build_model is deterministic and name-keyed across variants") {
    ModelSpec spec = tiny_spec(Variant::MK);
    Model a = build_model(spec, 42);
    Model b = build_model(spec, 42);
    auto pa = a.named_params();
    auto pb = b.named_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(bitwise_equal(pa[i].second, pb[i].second));
    }

    // same seed, different site variant: shared parameters initialize the same
    Model c = build_model(tiny_spec(Variant::DMK), 42);
    auto pc = c.named_params();
    for (const auto& [name, t] : pa) {
        if (name.find("site.") != std::string::npos) continue;
        for (const auto& [cname, ct] : pc)
            if (cname == name) CHECK(bitwise_equal(t, ct));
    }

    Model d = build_model(spec, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        any_diff = any_diff || !bitwise_equal(pa[i].second, d.named_params()[i].second);
    CHECK(any_diff);
}

TEST_CASE("parameter names are unique and counted once") {
    Model m = build_model(tiny_spec(Variant::MK), 1);
    std::set<std::string> names;
    std::int64_t total = 0;
    for (auto& [name, t] : m.named_params()) {
        CHECK(names.insert(name).second);
        total += t.numel();
    }
    CHECK(total == m.param_count());
    CHECK(total == 2643);  // tiny MK at widths 8,16,32
}

TEST_CASE("forward produces [N,num_classes] logits") {
    Model m = build_model(tiny_spec(Variant::MK), 3);
    Tensor x = Tensor::zeros({5, 1, 28, 28});
    Tensor y = forward(m, x, Mode::Eval);
    CHECK(y.shape() == Shape{5, 10});
}

TEST_CASE("projection shortcuts appear exactly at shape changes") {
    Model m = build_model(tiny_spec(Variant::MK), 3);
    // stage 0 keeps width 8: no projection; stages 1,2 change width+stride
    CHECK(!m.stages[0][0].has_projection);
    CHECK(m.stages[1][0].has_projection);
    CHECK(m.stages[2][0].has_projection);

    ModelSpec noskip = tiny_spec(Variant::MK);
    noskip.skip_connections = false;
    Model n = build_model(noskip, 3);
    CHECK(!n.stages[1][0].has_projection);
}

TEST_CASE("model clone is deep") {
    Model m = build_model(tiny_spec(Variant::MK), 5);
    Model c = m.clone();
    c.head_bias.set_value_at(0, 123.0);
    CHECK(m.head_bias.value_at(0) != 123.0);
    Tensor x = Tensor::zeros({2, 1, 28, 28});
    NoGradGuard guard;
    Tensor ym = forward(m, x, Mode::Eval);
    // clone diverged at the head, outputs must differ
    Tensor yc = forward(c, x, Mode::Eval);
    CHECK(!bitwise_equal(ym, yc));
    CHECK(bitwise_equal(ym, forward(m, x, Mode::Eval)));
}

TEST_CASE("evaluate reports coherent, deterministic metrics") {
    Dataset ds = synth_digits(128, 3);
    Model m = build_model(tiny_spec(Variant::MK), 7);
    EvalReport a = evaluate(m, ds, 32, 1);
    EvalReport b = evaluate(m, ds, 64, 1);   // batch size must not matter
    EvalReport c = evaluate(m, ds, 32, 4);   // nor the worker count
    CHECK(a.count == 128);
    CHECK(a.top1_error_percent == b.top1_error_percent);
    CHECK(a.top1_error_percent == c.top1_error_percent);
    CHECK(a.mean_loss == doctest::Approx(b.mean_loss).epsilon(1e-12));
    REQUIRE(a.top5_error_percent.has_value());
    CHECK(*a.top5_error_percent <= a.top1_error_percent);
    CHECK(a.top1_error_percent >= 0.0);
    CHECK(a.top1_error_percent <= 100.0);
    // untrained 10-class model: loss should sit in the neighborhood of ln(10)
    CHECK(a.mean_loss > 0.5);
    CHECK(a.mean_loss < 8.0);
    CHECK(accuracy_percent(a) == 100.0 - a.top1_error_percent);

    Dataset empty;
    CHECK_THROWS_AS(evaluate(m, empty, 32, 1), ValueError);
}

TEST_CASE("dtype mismatches are handled by casting inputs") {
    ModelSpec spec = tiny_spec(Variant::MK);
    spec.dtype = DType::Float64;
    Model m = build_model(spec, 2);
    Tensor x32 = Tensor::zeros({1, 1, 28, 28}, DType::Float32);
    NoGradGuard guard;
    Tensor y = forward(m, x32, Mode::Eval);  // silently promoted
    CHECK(y.dtype() == DType::Float64);
}
