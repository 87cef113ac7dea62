#include <doctest.h>

#include <vector>

#include "rcmk/error.hpp"
#include "rcmk/tensor.hpp"

using namespace rcmk;

TEST_CASE("factories produce the requested shape, dtype and fill") {
    Tensor z = Tensor::zeros({2, 3}, DType::Float32);
    CHECK(z.numel() == 6);
    CHECK(z.dtype() == DType::Float32);
    for (float v : z.data<float>()) CHECK(v == 0.0f);

    Tensor o = Tensor::ones({4}, DType::Float64);
    for (double v : o.data<double>()) CHECK(v == 1.0);

    Tensor f = Tensor::full({2, 2}, 0.25, DType::Float32);
    for (float v : f.data<float>()) CHECK(v == 0.25f);
}

TEST_CASE("from() validates the value count") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    Tensor t = Tensor::from({2, 2}, std::vector<float>{1, 2, 3, 4});
    CHECK(t.value_at(3) == 4.0);
}

TEST_CASE("typed access is dtype-checked") {
    Tensor t = Tensor::zeros({2}, DType::Float32);
    CHECK_THROWS_AS(t.data<double>(), DtypeError);
    Tensor d = Tensor::zeros({2}, DType::Float64);
    CHECK_THROWS_AS(d.data<float>(), DtypeError);
}

TEST_CASE("clone copies values and flags but not storage or grad") {
    Tensor t = Tensor::from({3}, std::vector<float>{1, 2, 3}, /*requires_grad=*/true);
    Tensor c = t.clone();
    CHECK(c.requires_grad());
    CHECK(!c.grad().defined());
    c.set_value_at(0, 9.0);
    CHECK(t.value_at(0) == 1.0);
    CHECK(c.value_at(0) == 9.0);
}

TEST_CASE("detach drops gradient tracking") {
    Tensor t = Tensor::ones({2}, DType::Float32);
    t.set_requires_grad(true);
    Tensor d = t.detach();
    CHECK(!d.requires_grad());
    CHECK(d.value_at(1) == 1.0);
}

TEST_CASE("astype converts values and preserves shape") {
    Tensor t = Tensor::from({2, 2}, std::vector<float>{0.5f, -1.5f, 2.0f, 3.25f});
    Tensor d = t.astype(DType::Float64);
    CHECK(d.dtype() == DType::Float64);
    CHECK(d.value_at(1) == -1.5);
    Tensor back = d.astype(DType::Float32);
    CHECK(bitwise_equal(back, t));
}

TEST_CASE("bitwise_equal distinguishes shape, dtype and value changes") {
    Tensor a = Tensor::ones({2, 2});
    CHECK(bitwise_equal(a, a.clone()));
    CHECK(!bitwise_equal(a, Tensor::ones({4})));
    CHECK(!bitwise_equal(a, Tensor::ones({2, 2}, DType::Float64)));
    Tensor b = a.clone();
    b.set_value_at(2, 1.0000001);
    CHECK(!bitwise_equal(a, b));
}

TEST_CASE("shape helpers") {
    CHECK(shape_numel({2, 3, 4}) == 24);
    CHECK(shape_numel({}) == 1);  // rank-0 scalar
    Tensor t = Tensor::zeros({2, 3, 4});
    CHECK(t.ndim() == 3);
    CHECK(t.dim(1) == 3);
}
