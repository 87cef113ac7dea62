#include "rcmk/dct.hpp"

#include <cmath>

namespace rcmk {

Tensor dct_matrix(std::int64_t n, DType dtype) {
    if (n < 1) throw ValueError("dct_matrix needs n >= 1");
    Tensor out = Tensor::zeros({n, n}, DType::Float64);
    auto d = out.raw_data<double>();
    const double pi = 3.14159265358979323846;
    for (std::int64_t r = 0; r < n; ++r) {
        double scale = std::sqrt((r == 0 ? 1.0 : 2.0) / static_cast<double>(n));
        for (std::int64_t i = 0; i < n; ++i)
            d[r * n + i] = scale * std::cos(pi * (2.0 * i + 1.0) * r / (2.0 * n));
    }
    return dtype == DType::Float64 ? out : out.astype(DType::Float32);
}

std::vector<std::pair<std::int64_t, std::int64_t>> zigzag_order(std::int64_t k) {
    if (k < 1) throw ValueError("zigzag_order needs k >= 1");
    std::vector<std::pair<std::int64_t, std::int64_t>> order;
    order.reserve(static_cast<std::size_t>(k * k));
    for (std::int64_t s = 0; s <= 2 * (k - 1); ++s) {
        std::int64_t lo = std::max<std::int64_t>(0, s - k + 1);
        std::int64_t hi = std::min<std::int64_t>(s, k - 1);
        if (s % 2 == 1) {
            for (std::int64_t u = lo; u <= hi; ++u) order.emplace_back(u, s - u);
        } else {
            for (std::int64_t u = hi; u >= lo; --u) order.emplace_back(u, s - u);
        }
    }
    return order;
}

std::vector<Tensor> dct2_filters(std::int64_t k, std::int64_t count, DType dtype) {
    if (count < 0 || count > k * k)
        throw ValueError("dct2_filters: count must lie in [0, k*k]");
    Tensor basis = dct_matrix(k, DType::Float64);
    auto b = basis.data<double>();
    auto order = zigzag_order(k);
    std::vector<Tensor> filters;
    filters.reserve(static_cast<std::size_t>(count));
    for (std::int64_t t = 0; t < count; ++t) {
        auto [u, v] = order[static_cast<std::size_t>(t)];
        Tensor f = Tensor::zeros({k, k}, DType::Float64);
        auto d = f.raw_data<double>();
        // outer product of two unit-norm basis rows; Frobenius norm is 1
        for (std::int64_t i = 0; i < k; ++i)
            for (std::int64_t j = 0; j < k; ++j) d[i * k + j] = b[u * k + i] * b[v * k + j];
        filters.push_back(dtype == DType::Float64 ? f : f.astype(DType::Float32));
    }
    return filters;
}

}  // namespace rcmk
