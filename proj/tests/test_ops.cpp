#include <doctest.h>

#include <cmath>
#include <vector>

#include "rcmk/error.hpp"
#include "rcmk/ops.hpp"
#include "rcmk/util.hpp"

using namespace rcmk;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, DType dtype = DType::Float64) {
    Tensor t = Tensor::zeros(std::move(shape), dtype);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.normal());
    return t;
}

}  // namespace

TEST_CASE("broadcast_shape follows right-aligned numpy rules") {
    CHECK(broadcast_shape({2, 3, 4}, {3, 4}) == Shape{2, 3, 4});
    CHECK(broadcast_shape({2, 1, 4}, {1, 3, 1}) == Shape{2, 3, 4});
    CHECK(broadcast_shape({5}, {}) == Shape{5});
    CHECK_THROWS_AS(broadcast_shape({2, 3}, {4, 3}), ShapeError);
}

TEST_CASE("broadcast binary ops match the materialized-expansion reference") {
    Rng rng(3);
    struct Pair {
        Shape a, b;
    };
    for (const Pair& p : {Pair{{2, 3, 4}, {1, 3, 1}}, Pair{{4}, {2, 3, 4}},
                          Pair{{2, 1}, {1, 5}}, Pair{{3, 1, 2}, {3, 4, 1}}}) {
        Tensor a = rand_tensor(p.a, rng);
        Tensor b = rand_tensor(p.b, rng);
        Shape full = broadcast_shape(p.a, p.b);
        Tensor ea = expand_to(a, full);
        Tensor eb = expand_to(b, full);
        for (auto op : {add, sub, mul}) {
            Tensor fast = op(a, b);
            Tensor slow = op(ea, eb);
            REQUIRE(fast.shape() == full);
            CHECK(bitwise_equal(fast, slow));
        }
    }
}

TEST_CASE("sum_to undoes expand_to") {
    Rng rng(4);
    Tensor a = rand_tensor({2, 1, 3}, rng);
    Tensor e = expand_to(a, {4, 2, 5, 3});
    Tensor back = sum_to(e, {2, 1, 3});
    for (std::int64_t i = 0; i < a.numel(); ++i)
        CHECK(back.value_at(i) == doctest::Approx(a.value_at(i) * 20).epsilon(1e-12));
}

TEST_CASE("scalar ops and neg") {
    Tensor a = Tensor::from({3}, std::vector<double>{1, -2, 3});
    CHECK(add_scalar(a, 2.5).value_at(1) == 0.5);
    CHECK(mul_scalar(a, -2.0).value_at(2) == -6.0);
    CHECK(neg(a).value_at(0) == -1.0);
}

TEST_CASE("elementwise nonlinearities at and around their corners") {
    Tensor x = Tensor::from(
        {7}, std::vector<double>{-2.0, -0.5, 0.0, 0.5, 2.0, 1e-300, -1e-300});
    Tensor r = relu(x);
    CHECK(r.value_at(0) == 0.0);
    CHECK(r.value_at(2) == 0.0);
    CHECK(r.value_at(4) == 2.0);
    Tensor a = abs(x);
    CHECK(a.value_at(0) == 2.0);
    CHECK(a.value_at(2) == 0.0);
    Tensor s = sign(x);
    CHECK(s.value_at(0) == -1.0);
    CHECK(s.value_at(2) == 0.0);
    CHECK(s.value_at(5) == 1.0);
    Tensor c = clamp(x, -1.0, 1.0);
    CHECK(c.value_at(0) == -1.0);
    CHECK(c.value_at(3) == 0.5);
    CHECK(c.value_at(4) == 1.0);
}

TEST_CASE("clamp gradient is zero at and beyond the bounds") {
    Tensor x = Tensor::from({4}, std::vector<double>{-2.0, -1.0, 0.3, 1.5});
    TapeScope scope;
    Tensor leaf = x.clone();
    leaf.set_requires_grad(true);
    backward(sum(clamp(leaf, -1.0, 1.0)));
    CHECK(leaf.grad().value_at(0) == 0.0);
    CHECK(leaf.grad().value_at(1) == 0.0);  // exactly at the bound
    CHECK(leaf.grad().value_at(2) == 1.0);
    CHECK(leaf.grad().value_at(3) == 0.0);
}

TEST_CASE("matmul matches a naive triple loop") {
    Rng rng(5);
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4, 5}, rng);
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{3, 5});
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 5; ++j) {
            double acc = 0;
            for (std::int64_t k = 0; k < 4; ++k)
                acc += a.value_at(i * 4 + k) * b.value_at(k * 5 + j);
            CHECK(c.value_at(i * 5 + j) == doctest::Approx(acc).epsilon(1e-12));
        }
    CHECK_THROWS_AS(matmul(a, rand_tensor({3, 5}, rng)), ShapeError);
}

TEST_CASE("sum and mean reduce to exact scalars") {
    Tensor a = Tensor::from({4}, std::vector<double>{1, 2, 3, 4});
    CHECK(sum(a).item() == 10.0);
    CHECK(mean(a).item() == 2.5);
}

TEST_CASE("reshape preserves values and validates the element count") {
    Tensor a = Tensor::from({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor r = reshape(a, {3, 2});
    CHECK(r.value_at(4) == 5.0);
    CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("channel concat and slice are inverse") {
    Rng rng(6);
    Tensor a = rand_tensor({2, 3, 4, 4}, rng);
    Tensor b = rand_tensor({2, 5, 4, 4}, rng);
    std::vector<Tensor> parts = {a, b};
    Tensor cat = concat_channels(parts);
    REQUIRE(cat.shape() == Shape{2, 8, 4, 4});
    CHECK(bitwise_equal(slice_channels(cat, 0, 3), a));
    CHECK(bitwise_equal(slice_channels(cat, 3, 8), b));
    CHECK_THROWS_AS(slice_channels(cat, 3, 2), ShapeError);
}

TEST_CASE("tile_first_dim repeats values and sums gradients over repeats") {
    Tensor w = Tensor::from({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor t = tile_first_dim(w, 3);
    REQUIRE(t.shape() == Shape{6, 3});
    CHECK(t.value_at(0) == 1.0);
    CHECK(t.value_at(6) == 1.0);   // second repeat starts
    CHECK(t.value_at(17) == 6.0);  // last element of third repeat

    TapeScope scope;
    Tensor leaf = w.clone();
    leaf.set_requires_grad(true);
    backward(sum(tile_first_dim(leaf, 3)));
    for (std::int64_t i = 0; i < leaf.numel(); ++i) CHECK(leaf.grad().value_at(i) == 3.0);

    auto f = [](const Tensor& v) { return sum(mul(tile_first_dim(v, 2), tile_first_dim(v, 2))); };
    CHECK(gradcheck(f, w).pass);
}

TEST_CASE("global_avg_pool averages each plane") {
    Tensor x = Tensor::from({1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, 10, 20, 30, 40});
    Tensor y = global_avg_pool(x);
    REQUIRE(y.shape() == Shape{1, 2});
    CHECK(y.value_at(0) == 2.5);
    CHECK(y.value_at(1) == 25.0);
}

TEST_CASE("binary ops require matching dtypes") {
    Tensor a = Tensor::ones({2}, DType::Float32);
    Tensor b = Tensor::ones({2}, DType::Float64);
    CHECK_THROWS_AS(add(a, b), DtypeError);
}
