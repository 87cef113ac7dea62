#include "rcmk/ops.hpp"

#include <cmath>
#include <cstring>
#include <utility>
#include <vector>

namespace rcmk {

namespace {

void check_same_dtype(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype())
        throw DtypeError(std::string("dtype mismatch: ") + std::string(dtype_name(a.dtype())) +
                         " vs " + std::string(dtype_name(b.dtype())));
}

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 0);
    std::int64_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

// Strides of `in` viewed in the frame of `out` (right-aligned); broadcast
// dimensions get stride 0.
std::vector<std::int64_t> frame_strides(const Shape& in, const Shape& out) {
    auto ist = contiguous_strides(in);
    std::vector<std::int64_t> st(out.size(), 0);
    std::size_t off = out.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == out[off + i])
            st[off + i] = ist[i];
        else if (in[i] == 1)
            st[off + i] = 0;
        else
            throw ShapeError("cannot broadcast " + shape_to_string(in) + " to " +
                             shape_to_string(out));
    }
    return st;
}

template <typename T, typename Fn>
void binary_loop(const Tensor& a, const Tensor& b, Tensor& out, Fn fn) {
    const Shape& os = out.shape();
    auto ast = frame_strides(a.shape(), os);
    auto bst = frame_strides(b.shape(), os);
    auto da = a.data<T>();
    auto db = b.data<T>();
    auto dout = out.raw_data<T>();
    const std::int64_t n = out.numel();
    std::vector<std::int64_t> idx(os.size(), 0);
    std::int64_t ai = 0, bi = 0;
    for (std::int64_t lin = 0; lin < n; ++lin) {
        dout[lin] = fn(da[ai], db[bi]);
        for (std::size_t d = os.size(); d-- > 0;) {
            ++idx[d];
            ai += ast[d];
            bi += bst[d];
            if (idx[d] < os[d]) break;
            idx[d] = 0;
            ai -= ast[d] * os[d];
            bi -= bst[d] * os[d];
        }
    }
}

template <typename FnF, typename FnD>
Tensor binary_op(const Tensor& a, const Tensor& b, FnF f32, FnD f64) {
    check_same_dtype(a, b);
    Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor out = Tensor::zeros(os, a.dtype());
    if (a.dtype() == DType::Float32)
        binary_loop<float>(a, b, out, f32);
    else
        binary_loop<double>(a, b, out, f64);
    return out;
}

template <typename T, typename Fn>
void unary_loop(const Tensor& a, Tensor& out, Fn fn) {
    auto da = a.data<T>();
    auto dout = out.raw_data<T>();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) dout[i] = fn(da[i]);
}

template <typename FnF, typename FnD>
Tensor unary_op(const Tensor& a, FnF f32, FnD f64) {
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    if (a.dtype() == DType::Float32)
        unary_loop<float>(a, out, f32);
    else
        unary_loop<double>(a, out, f64);
    return out;
}

void record_unary(const Tensor& a, Tensor& out, std::function<Tensor(const Tensor&)> pullback) {
    if (!should_record({&a})) return;
    out.set_requires_grad(true);
    Tensor in = a, res = out;
    Tape::active().record([in, res, pb = std::move(pullback)] {
        Tensor g = res.grad();
        if (!g.defined()) return;
        if (in.requires_grad()) accumulate_grad(in, pb(g));
    });
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
    Shape out(std::max(a.size(), b.size()), 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::int64_t da = i < out.size() - a.size() ? 1 : a[i - (out.size() - a.size())];
        std::int64_t db = i < out.size() - b.size() ? 1 : b[i - (out.size() - b.size())];
        if (da == db || db == 1)
            out[i] = da;
        else if (da == 1)
            out[i] = db;
        else
            throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " +
                             shape_to_string(b));
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = binary_op(a, b, [](float x, float y) { return x + y; },
                           [](double x, double y) { return x + y; });
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ta = a, tb = b, res = out;
        Tape::active().record([ta, tb, res] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            if (ta.requires_grad()) accumulate_grad(ta, sum_to(g, ta.shape()));
            if (tb.requires_grad()) accumulate_grad(tb, sum_to(g, tb.shape()));
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor out = binary_op(a, b, [](float x, float y) { return x - y; },
                           [](double x, double y) { return x - y; });
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ta = a, tb = b, res = out;
        Tape::active().record([ta, tb, res] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            if (ta.requires_grad()) accumulate_grad(ta, sum_to(g, ta.shape()));
            if (tb.requires_grad()) accumulate_grad(tb, neg(sum_to(g, tb.shape())));
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Tensor out = binary_op(a, b, [](float x, float y) { return x * y; },
                           [](double x, double y) { return x * y; });
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ta = a, tb = b, res = out;
        Tape::active().record([ta, tb, res] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            if (ta.requires_grad()) accumulate_grad(ta, sum_to(mul(g, tb), ta.shape()));
            if (tb.requires_grad()) accumulate_grad(tb, sum_to(mul(g, ta), tb.shape()));
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    float sf = static_cast<float>(s);
    Tensor out = unary_op(a, [sf](float x) { return x + sf; },
                          [s](double x) { return x + s; });
    record_unary(a, out, [](const Tensor& g) { return g.clone(); });
    return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
    float sf = static_cast<float>(s);
    Tensor out = unary_op(a, [sf](float x) { return x * sf; },
                          [s](double x) { return x * s; });
    record_unary(a, out, [s](const Tensor& g) { return mul_scalar(g, s); });
    return out;
}

Tensor neg(const Tensor& a) {
    Tensor out = unary_op(a, [](float x) { return -x; }, [](double x) { return -x; });
    record_unary(a, out, [](const Tensor& g) { return neg(g); });
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = unary_op(a, [](float x) { return x > 0.0f ? x : 0.0f; },
                          [](double x) { return x > 0.0 ? x : 0.0; });
    Tensor in = a;
    record_unary(a, out, [in](const Tensor& g) {
        // subgradient 0 at x == 0
        return mul(g, binary_op(in, in, [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; },
                                [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }));
    });
    return out;
}

Tensor abs(const Tensor& a) {
    Tensor out = unary_op(a, [](float x) { return std::fabs(x); },
                          [](double x) { return std::fabs(x); });
    Tensor in = a;
    record_unary(a, out, [in](const Tensor& g) {
        // d|x|/dx = sign(x), 0 at the origin
        return mul(g, sign(in));
    });
    return out;
}

Tensor sign(const Tensor& a) {
    // Derivative is zero almost everywhere, so the output is deliberately
    // detached from the tape.
    return unary_op(a, [](float x) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); },
                    [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ValueError("clamp: lo > hi");
    float lof = static_cast<float>(lo), hif = static_cast<float>(hi);
    Tensor out = unary_op(a, [lof, hif](float x) { return std::min(std::max(x, lof), hif); },
                          [lo, hi](double x) { return std::min(std::max(x, lo), hi); });
    Tensor in = a;
    record_unary(a, out, [in, lo, hi](const Tensor& g) {
        // gradient passes only strictly inside (lo, hi)
        float lof = static_cast<float>(lo), hif = static_cast<float>(hi);
        Tensor mask = binary_op(
            in, in, [lof, hif](float x, float) { return (x > lof && x < hif) ? 1.0f : 0.0f; },
            [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
        return mul(g, mask);
    });
    return out;
}

namespace {

// C = A[m,k] x B[k,n] with double accumulation in i-k-j order.
template <typename T>
void gemm_ikj(std::span<const T> a, std::span<const T> b, std::span<T> c, std::int64_t m,
              std::int64_t k, std::int64_t n) {
    std::vector<double> acc(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t kk = 0; kk < k; ++kk) {
            double aik = static_cast<double>(a[i * k + kk]);
            const T* brow = b.data() + kk * n;
            double* crow = acc.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * static_cast<double>(brow[j]);
        }
    for (std::int64_t i = 0; i < m * n; ++i) c[i] = static_cast<T>(acc[i]);
}

template <typename T>
void matmul_backward_t(std::span<const T> a, std::span<const T> b, std::span<const T> g,
                       std::span<T> ga, std::span<T> gb, bool want_a, bool want_b,
                       std::int64_t m, std::int64_t k, std::int64_t n) {
    if (want_a) {
        // gA[i,kk] = sum_j g[i,j] * B[kk,j]
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t kk = 0; kk < k; ++kk) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < n; ++j)
                    acc += static_cast<double>(g[i * n + j]) * static_cast<double>(b[kk * n + j]);
                ga[i * k + kk] = static_cast<T>(acc);
            }
    }
    if (want_b) {
        // gB[kk,j] = sum_i A[i,kk] * g[i,j]
        for (std::int64_t kk = 0; kk < k; ++kk)
            for (std::int64_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < m; ++i)
                    acc += static_cast<double>(a[i * k + kk]) * static_cast<double>(g[i * n + j]);
                gb[kk * n + j] = static_cast<T>(acc);
            }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_same_dtype(a, b);
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul expects rank-2 tensors");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n}, a.dtype());
    if (a.dtype() == DType::Float32)
        gemm_ikj<float>(a.data<float>(), b.data<float>(), out.raw_data<float>(), m, k, n);
    else
        gemm_ikj<double>(a.data<double>(), b.data<double>(), out.raw_data<double>(), m, k, n);

    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ta = a, tb = b, res = out;
        Tape::active().record([ta, tb, res, m, k, n] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            bool wa = ta.requires_grad(), wb = tb.requires_grad();
            Tensor ga = wa ? Tensor::zeros(ta.shape(), ta.dtype()) : Tensor();
            Tensor gb = wb ? Tensor::zeros(tb.shape(), tb.dtype()) : Tensor();
            if (ta.dtype() == DType::Float32)
                matmul_backward_t<float>(ta.data<float>(), tb.data<float>(), g.data<float>(),
                                         wa ? ga.raw_data<float>() : std::span<float>(),
                                         wb ? gb.raw_data<float>() : std::span<float>(), wa, wb,
                                         m, k, n);
            else
                matmul_backward_t<double>(ta.data<double>(), tb.data<double>(), g.data<double>(),
                                          wa ? ga.raw_data<double>() : std::span<double>(),
                                          wb ? gb.raw_data<double>() : std::span<double>(), wa,
                                          wb, m, k, n);
            if (wa) accumulate_grad(ta, ga);
            if (wb) accumulate_grad(tb, gb);
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    const std::int64_t n = a.numel();
    if (a.dtype() == DType::Float32) {
        auto d = a.data<float>();
        for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(d[i]);
    } else {
        auto d = a.data<double>();
        for (std::int64_t i = 0; i < n; ++i) acc += d[i];
    }
    Tensor out = Tensor::scalar(acc, a.dtype());
    Tensor in = a;
    record_unary(a, out, [in](const Tensor& g) {
        return Tensor::full(in.shape(), g.item(), in.dtype());
    });
    return out;
}

Tensor mean(const Tensor& a) {
    const std::int64_t n = a.numel();
    if (n == 0) throw ShapeError("mean of empty tensor");
    Tensor s = sum(a);  // records its own step; chain through mul_scalar
    return mul_scalar(s, 1.0 / static_cast<double>(n));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape " + shape_to_string(a.shape()) + " -> " +
                         shape_to_string(shape) + " changes element count");
    Tensor out = Tensor::zeros(shape, a.dtype());
    if (a.dtype() == DType::Float32) {
        auto src = a.data<float>();
        std::memcpy(out.raw_data<float>().data(), src.data(), src.size() * sizeof(float));
    } else {
        auto src = a.data<double>();
        std::memcpy(out.raw_data<double>().data(), src.data(), src.size() * sizeof(double));
    }
    Tensor in = a;
    record_unary(a, out, [in](const Tensor& g) { return reshape(g, in.shape()); });
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ValueError("concat_channels of zero tensors");
    const Tensor& p0 = parts[0];
    if (p0.ndim() != 4) throw ShapeError("concat_channels expects NCHW tensors");
    std::int64_t n = p0.dim(0), h = p0.dim(2), w = p0.dim(3), c_total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != 4 || p.dim(0) != n || p.dim(2) != h || p.dim(3) != w)
            throw ShapeError("concat_channels shape mismatch");
        if (p.dtype() != p0.dtype()) throw DtypeError("concat_channels dtype mismatch");
        c_total += p.dim(1);
    }
    Tensor out = Tensor::zeros({n, c_total, h, w}, p0.dtype());
    const std::int64_t plane = h * w;
    auto copy_all = [&](auto dst_span) {
        using T = typename decltype(dst_span)::value_type;
        for (std::int64_t ni = 0; ni < n; ++ni) {
            std::int64_t c_off = 0;
            for (const Tensor& p : parts) {
                std::int64_t pc = p.dim(1);
                auto src = p.data<T>();
                std::memcpy(dst_span.data() + (ni * c_total + c_off) * plane,
                            src.data() + ni * pc * plane,
                            static_cast<std::size_t>(pc * plane) * sizeof(T));
                c_off += pc;
            }
        }
    };
    if (p0.dtype() == DType::Float32)
        copy_all(out.raw_data<float>());
    else
        copy_all(out.raw_data<double>());

    bool any_grad = false;
    for (const Tensor& p : parts)
        if (should_record({&p})) any_grad = true;
    if (any_grad) {
        out.set_requires_grad(true);
        std::vector<Tensor> held(parts.begin(), parts.end());
        Tensor res = out;
        Tape::active().record([held, res] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            std::int64_t c_off = 0;
            for (const Tensor& p : held) {
                std::int64_t pc = p.dim(1);
                if (p.requires_grad())
                    accumulate_grad(p, slice_channels(g, c_off, c_off + pc));
                c_off += pc;
            }
        });
    }
    return out;
}

Tensor slice_channels(const Tensor& a, std::int64_t begin, std::int64_t end) {
    if (a.ndim() != 4) throw ShapeError("slice_channels expects an NCHW tensor");
    std::int64_t c = a.dim(1);
    if (begin < 0 || end > c || begin >= end)
        throw ShapeError("slice_channels range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of [0," + std::to_string(c) + ")");
    std::int64_t n = a.dim(0), h = a.dim(2), w = a.dim(3), cs = end - begin;
    const std::int64_t plane = h * w;
    Tensor out = Tensor::zeros({n, cs, h, w}, a.dtype());
    auto copy_all = [&](auto dst_span, auto src_span) {
        using T = typename decltype(dst_span)::value_type;
        for (std::int64_t ni = 0; ni < n; ++ni)
            std::memcpy(dst_span.data() + ni * cs * plane,
                        src_span.data() + (ni * c + begin) * plane,
                        static_cast<std::size_t>(cs * plane) * sizeof(T));
    };
    if (a.dtype() == DType::Float32)
        copy_all(out.raw_data<float>(), a.data<float>());
    else
        copy_all(out.raw_data<double>(), a.data<double>());

    Tensor in = a;
    record_unary(a, out, [in, begin, n, c, plane, cs](const Tensor& g) {
        Tensor full = Tensor::zeros(in.shape(), in.dtype());
        if (in.dtype() == DType::Float32) {
            auto dst = full.raw_data<float>();
            auto src = g.data<float>();
            for (std::int64_t ni = 0; ni < n; ++ni)
                std::memcpy(dst.data() + (ni * c + begin) * plane, src.data() + ni * cs * plane,
                            static_cast<std::size_t>(cs * plane) * sizeof(float));
        } else {
            auto dst = full.raw_data<double>();
            auto src = g.data<double>();
            for (std::int64_t ni = 0; ni < n; ++ni)
                std::memcpy(dst.data() + (ni * c + begin) * plane, src.data() + ni * cs * plane,
                            static_cast<std::size_t>(cs * plane) * sizeof(double));
        }
        return full;
    });
    return out;
}

Tensor tile_first_dim(const Tensor& a, std::int64_t times) {
    if (a.ndim() == 0) throw ShapeError("tile_first_dim needs at least one dimension");
    if (times < 1) throw ValueError("tile_first_dim: times must be >= 1");
    Shape os = a.shape();
    os[0] *= times;
    Tensor out = Tensor::zeros(os, a.dtype());
    const std::int64_t block = a.numel();
    if (a.dtype() == DType::Float32) {
        auto src = a.data<float>();
        auto dst = out.raw_data<float>();
        for (std::int64_t t = 0; t < times; ++t)
            std::memcpy(dst.data() + t * block, src.data(),
                        static_cast<std::size_t>(block) * sizeof(float));
    } else {
        auto src = a.data<double>();
        auto dst = out.raw_data<double>();
        for (std::int64_t t = 0; t < times; ++t)
            std::memcpy(dst.data() + t * block, src.data(),
                        static_cast<std::size_t>(block) * sizeof(double));
    }
    Tensor in = a;
    record_unary(a, out, [in, times, block](const Tensor& g) {
        // sum the gradient over the repeats (weight tying)
        Tensor acc = Tensor::zeros(in.shape(), in.dtype());
        if (in.dtype() == DType::Float32) {
            auto dst = acc.raw_data<float>();
            auto src = g.data<float>();
            for (std::int64_t t = 0; t < times; ++t)
                for (std::int64_t i = 0; i < block; ++i) dst[i] += src[t * block + i];
        } else {
            auto dst = acc.raw_data<double>();
            auto src = g.data<double>();
            for (std::int64_t t = 0; t < times; ++t)
                for (std::int64_t i = 0; i < block; ++i) dst[i] += src[t * block + i];
        }
        return acc;
    });
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("global_avg_pool expects an NCHW tensor");
    std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h * w == 0) throw ShapeError("global_avg_pool on empty plane");
    Tensor out = Tensor::zeros({n, c}, x.dtype());
    const std::int64_t plane = h * w;
    const double inv = 1.0 / static_cast<double>(plane);
    auto pool = [&](auto src, auto dst) {
        using T = typename decltype(dst)::value_type;
        for (std::int64_t i = 0; i < n * c; ++i) {
            double acc = 0.0;
            for (std::int64_t p = 0; p < plane; ++p)
                acc += static_cast<double>(src[i * plane + p]);
            dst[i] = static_cast<T>(acc * inv);
        }
    };
    if (x.dtype() == DType::Float32)
        pool(x.data<float>(), out.raw_data<float>());
    else
        pool(x.data<double>(), out.raw_data<double>());

    Tensor in = x;
    record_unary(x, out, [in, plane, inv](const Tensor& g) {
        Tensor gx = Tensor::zeros(in.shape(), in.dtype());
        std::int64_t rows = g.numel();
        if (in.dtype() == DType::Float32) {
            auto dst = gx.raw_data<float>();
            auto src = g.data<float>();
            for (std::int64_t i = 0; i < rows; ++i) {
                float v = static_cast<float>(static_cast<double>(src[i]) * inv);
                for (std::int64_t p = 0; p < plane; ++p) dst[i * plane + p] = v;
            }
        } else {
            auto dst = gx.raw_data<double>();
            auto src = g.data<double>();
            for (std::int64_t i = 0; i < rows; ++i) {
                double v = src[i] * inv;
                for (std::int64_t p = 0; p < plane; ++p) dst[i * plane + p] = v;
            }
        }
        return gx;
    });
    return out;
}

Tensor expand_to(const Tensor& a, const Shape& target) {
    // reference implementation: explicit element copies, no autograd
    Shape check = broadcast_shape(a.shape(), target);
    if (check != target)
        throw ShapeError("cannot expand " + shape_to_string(a.shape()) + " to " +
                         shape_to_string(target));
    Tensor out = Tensor::zeros(target, a.dtype());
    auto ast = frame_strides(a.shape(), target);
    std::vector<std::int64_t> idx(target.size(), 0);
    const std::int64_t n = out.numel();
    std::int64_t ai = 0;
    for (std::int64_t lin = 0; lin < n; ++lin) {
        out.set_value_at(lin, a.value_at(ai));
        for (std::size_t d = target.size(); d-- > 0;) {
            ++idx[d];
            ai += ast[d];
            if (idx[d] < target[d]) break;
            idx[d] = 0;
            ai -= ast[d] * target[d];
        }
    }
    return out;
}

Tensor sum_to(const Tensor& g, const Shape& shape) {
    if (g.shape() == shape) return g;
    Shape check = broadcast_shape(shape, g.shape());
    if (check != g.shape())
        throw ShapeError("sum_to: " + shape_to_string(shape) + " does not broadcast to " +
                         shape_to_string(g.shape()));
    Tensor out = Tensor::zeros(shape, g.dtype());
    auto ost = frame_strides(shape, g.shape());
    const Shape& gs = g.shape();
    std::vector<std::int64_t> idx(gs.size(), 0);
    const std::int64_t n = g.numel();
    std::int64_t oi = 0;
    if (g.dtype() == DType::Float32) {
        auto src = g.data<float>();
        auto dst = out.raw_data<float>();
        for (std::int64_t lin = 0; lin < n; ++lin) {
            dst[oi] += src[lin];
            for (std::size_t d = gs.size(); d-- > 0;) {
                ++idx[d];
                oi += ost[d];
                if (idx[d] < gs[d]) break;
                idx[d] = 0;
                oi -= ost[d] * gs[d];
            }
        }
    } else {
        auto src = g.data<double>();
        auto dst = out.raw_data<double>();
        for (std::int64_t lin = 0; lin < n; ++lin) {
            dst[oi] += src[lin];
            for (std::size_t d = gs.size(); d-- > 0;) {
                ++idx[d];
                oi += ost[d];
                if (idx[d] < gs[d]) break;
                idx[d] = 0;
                oi -= ost[d] * gs[d];
            }
        }
    }
    return out;
}

}  // namespace rcmk
