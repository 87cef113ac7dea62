#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "rcmk/nn.hpp"

namespace rcmk {

std::int64_t same_padding(std::int64_t kernel) {
    if (kernel < 1 || kernel % 2 == 0)
        throw ValueError("same padding needs an odd kernel, got " + std::to_string(kernel));
    return (kernel - 1) / 2;
}

namespace {

struct ConvDims {
    std::int64_t n, c_in, h, w;
    std::int64_t c_out, cg, kh, kw;  // cg = input channels per group
    std::int64_t og;                 // output channels per group
    std::int64_t stride, pad, groups;
    std::int64_t h_out, w_out;
};

ConvDims check_conv(const Tensor& x, const Conv2dParams& p) {
    if (x.ndim() != 4) throw ShapeError("conv2d input must be NCHW");
    if (p.weight.ndim() != 4) throw ShapeError("conv2d weight must be [C_out,C_in/g,kh,kw]");
    if (p.weight.dtype() != x.dtype()) throw DtypeError("conv2d weight/input dtype mismatch");
    if (p.bias.defined() && p.bias.dtype() != x.dtype())
        throw DtypeError("conv2d bias/input dtype mismatch");
    ConvDims d{};
    d.n = x.dim(0);
    d.c_in = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.c_out = p.weight.dim(0);
    d.cg = p.weight.dim(1);
    d.kh = p.weight.dim(2);
    d.kw = p.weight.dim(3);
    d.stride = p.stride;
    d.pad = p.padding;
    d.groups = p.groups;
    if (d.stride < 1) throw ValueError("conv2d stride must be >= 1");
    if (d.pad < 0) throw ValueError("conv2d padding must be >= 0");
    if (d.groups < 1) throw ValueError("conv2d groups must be >= 1");
    if (d.c_in % d.groups != 0 || d.c_out % d.groups != 0)
        throw ShapeError("conv2d channels not divisible by groups");
    if (d.cg != d.c_in / d.groups)
        throw ShapeError("conv2d weight dim 1 must equal C_in/groups");
    if (p.bias.defined() && (p.bias.ndim() != 1 || p.bias.dim(0) != d.c_out))
        throw ShapeError("conv2d bias must be [C_out]");
    d.og = d.c_out / d.groups;
    d.h_out = (d.h + 2 * d.pad - d.kh) / d.stride + 1;
    d.w_out = (d.w + 2 * d.pad - d.kw) / d.stride + 1;
    if (d.h + 2 * d.pad < d.kh || d.w + 2 * d.pad < d.kw)
        throw ShapeError("conv2d kernel larger than padded input");
    return d;
}

// col[(ci*kh + u)*kw + v][oh*w_out + ow] for one (sample, group).
template <typename T>
void im2col(const T* x_plane,  // points at x[n][g*cg][0][0]
            const ConvDims& d, std::vector<T>& col) {
    const std::int64_t patch = d.cg * d.kh * d.kw;
    const std::int64_t cols = d.h_out * d.w_out;
    col.assign(static_cast<std::size_t>(patch * cols), T(0));
    for (std::int64_t ci = 0; ci < d.cg; ++ci)
        for (std::int64_t u = 0; u < d.kh; ++u)
            for (std::int64_t v = 0; v < d.kw; ++v) {
                T* dst = col.data() + ((ci * d.kh + u) * d.kw + v) * cols;
                const T* src = x_plane + ci * d.h * d.w;
                for (std::int64_t oh = 0; oh < d.h_out; ++oh) {
                    std::int64_t ih = oh * d.stride - d.pad + u;
                    if (ih < 0 || ih >= d.h) continue;
                    for (std::int64_t ow = 0; ow < d.w_out; ++ow) {
                        std::int64_t iw = ow * d.stride - d.pad + v;
                        if (iw < 0 || iw >= d.w) continue;
                        dst[oh * d.w_out + ow] = src[ih * d.w + iw];
                    }
                }
            }
}

template <typename T>
void conv_forward(const Tensor& x, const Conv2dParams& p, const ConvDims& d, Tensor& out) {
    auto xd = x.data<T>();
    auto wd = p.weight.data<T>();
    auto od = out.raw_data<T>();
    const T* bias = nullptr;
    if (p.bias.defined()) bias = p.bias.data<T>().data();
    const std::int64_t patch = d.cg * d.kh * d.kw;
    const std::int64_t cols = d.h_out * d.w_out;
    std::vector<T> col;
    std::vector<double> acc(static_cast<std::size_t>(d.og * cols));
    for (std::int64_t n = 0; n < d.n; ++n)
        for (std::int64_t g = 0; g < d.groups; ++g) {
            im2col(xd.data() + (n * d.c_in + g * d.cg) * d.h * d.w, d, col);
            std::fill(acc.begin(), acc.end(), 0.0);
            // i-k-j: for each output channel, walk the patch in (ci,u,v)
            // order; the reduction order matches a direct nested-loop
            // convolution exactly, which the tests rely on.
            for (std::int64_t i = 0; i < d.og; ++i) {
                const T* wrow = wd.data() + (g * d.og + i) * patch;
                double* crow = acc.data() + i * cols;
                for (std::int64_t kk = 0; kk < patch; ++kk) {
                    double wv = static_cast<double>(wrow[kk]);
                    const T* colrow = col.data() + kk * cols;
                    for (std::int64_t j = 0; j < cols; ++j)
                        crow[j] += wv * static_cast<double>(colrow[j]);
                }
            }
            for (std::int64_t i = 0; i < d.og; ++i) {
                std::int64_t co = g * d.og + i;
                double b = bias ? static_cast<double>(bias[co]) : 0.0;
                T* orow = od.data() + (n * d.c_out + co) * cols;
                const double* crow = acc.data() + i * cols;
                for (std::int64_t j = 0; j < cols; ++j)
                    orow[j] = static_cast<T>(crow[j] + b);
            }
        }
}

template <typename T>
void conv_backward(const Tensor& x, const Conv2dParams& p, const ConvDims& d, const Tensor& g,
                   bool want_x, bool want_w, bool want_b, Tensor& gx, Tensor& gw, Tensor& gb) {
    auto xd = x.data<T>();
    auto wd = p.weight.data<T>();
    auto gd = g.data<T>();
    const std::int64_t patch = d.cg * d.kh * d.kw;
    const std::int64_t cols = d.h_out * d.w_out;

    std::vector<double> gw_acc;
    if (want_w) gw_acc.assign(static_cast<std::size_t>(p.weight.numel()), 0.0);
    std::vector<double> gb_acc;
    if (want_b) gb_acc.assign(static_cast<std::size_t>(d.c_out), 0.0);
    std::vector<T> col;
    std::vector<double> gcol(static_cast<std::size_t>(patch * cols));

    T* gxd = nullptr;
    if (want_x) gxd = gx.raw_data<T>().data();

    for (std::int64_t n = 0; n < d.n; ++n)
        for (std::int64_t gi = 0; gi < d.groups; ++gi) {
            const T* gout = gd.data() + (n * d.c_out + gi * d.og) * cols;
            if (want_b) {
                for (std::int64_t i = 0; i < d.og; ++i) {
                    double acc = 0.0;
                    for (std::int64_t j = 0; j < cols; ++j)
                        acc += static_cast<double>(gout[i * cols + j]);
                    gb_acc[gi * d.og + i] += acc;
                }
            }
            if (want_w) {
                im2col(xd.data() + (n * d.c_in + gi * d.cg) * d.h * d.w, d, col);
                // gW[i][kk] += sum_j g[i][j] * col[kk][j]
                for (std::int64_t i = 0; i < d.og; ++i) {
                    double* grow = gw_acc.data() + (gi * d.og + i) * patch;
                    for (std::int64_t kk = 0; kk < patch; ++kk) {
                        double acc = 0.0;
                        const T* colrow = col.data() + kk * cols;
                        for (std::int64_t j = 0; j < cols; ++j)
                            acc += static_cast<double>(gout[i * cols + j]) *
                                   static_cast<double>(colrow[j]);
                        grow[kk] += acc;
                    }
                }
            }
            if (want_x) {
                // gcol = W^T x g, then scatter back (col2im)
                std::fill(gcol.begin(), gcol.end(), 0.0);
                for (std::int64_t kk = 0; kk < patch; ++kk) {
                    double* grow = gcol.data() + kk * cols;
                    for (std::int64_t i = 0; i < d.og; ++i) {
                        double wv = static_cast<double>(wd[(gi * d.og + i) * patch + kk]);
                        const T* gr = gout + i * cols;
                        for (std::int64_t j = 0; j < cols; ++j)
                            grow[j] += wv * static_cast<double>(gr[j]);
                    }
                }
                T* gx_plane = gxd + (n * d.c_in + gi * d.cg) * d.h * d.w;
                for (std::int64_t ci = 0; ci < d.cg; ++ci)
                    for (std::int64_t u = 0; u < d.kh; ++u)
                        for (std::int64_t v = 0; v < d.kw; ++v) {
                            const double* grow =
                                gcol.data() + ((ci * d.kh + u) * d.kw + v) * cols;
                            T* dst = gx_plane + ci * d.h * d.w;
                            for (std::int64_t oh = 0; oh < d.h_out; ++oh) {
                                std::int64_t ih = oh * d.stride - d.pad + u;
                                if (ih < 0 || ih >= d.h) continue;
                                for (std::int64_t ow = 0; ow < d.w_out; ++ow) {
                                    std::int64_t iw = ow * d.stride - d.pad + v;
                                    if (iw < 0 || iw >= d.w) continue;
                                    dst[ih * d.w + iw] +=
                                        static_cast<T>(grow[oh * d.w_out + ow]);
                                }
                            }
                        }
            }
        }

    if (want_w) {
        if (p.weight.dtype() == DType::Float32) {
            auto dst = gw.raw_data<float>();
            for (std::size_t i = 0; i < gw_acc.size(); ++i)
                dst[i] = static_cast<float>(gw_acc[i]);
        } else {
            auto dst = gw.raw_data<double>();
            for (std::size_t i = 0; i < gw_acc.size(); ++i) dst[i] = gw_acc[i];
        }
    }
    if (want_b) {
        if (p.bias.dtype() == DType::Float32) {
            auto dst = gb.raw_data<float>();
            for (std::size_t i = 0; i < gb_acc.size(); ++i)
                dst[i] = static_cast<float>(gb_acc[i]);
        } else {
            auto dst = gb.raw_data<double>();
            for (std::size_t i = 0; i < gb_acc.size(); ++i) dst[i] = gb_acc[i];
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Conv2dParams& p) {
    ConvDims d = check_conv(x, p);
    Tensor out = Tensor::zeros({d.n, d.c_out, d.h_out, d.w_out}, x.dtype());
    if (x.dtype() == DType::Float32)
        conv_forward<float>(x, p, d, out);
    else
        conv_forward<double>(x, p, d, out);

    if (should_record({&x, &p.weight, &p.bias})) {
        out.set_requires_grad(true);
        Tensor tx = x, tw = p.weight, tb = p.bias, res = out;
        Conv2dParams held = p;
        Tape::active().record([tx, tw, tb, held, d, res] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            bool wx = tx.requires_grad();
            bool ww = tw.requires_grad();
            bool wb = tb.defined() && tb.requires_grad();
            if (!wx && !ww && !wb) return;
            Tensor gx = wx ? Tensor::zeros(tx.shape(), tx.dtype()) : Tensor();
            Tensor gw = ww ? Tensor::zeros(tw.shape(), tw.dtype()) : Tensor();
            Tensor gb = wb ? Tensor::zeros(tb.shape(), tb.dtype()) : Tensor();
            if (tx.dtype() == DType::Float32)
                conv_backward<float>(tx, held, d, g, wx, ww, wb, gx, gw, gb);
            else
                conv_backward<double>(tx, held, d, g, wx, ww, wb, gx, gw, gb);
            if (wx) accumulate_grad(tx, gx);
            if (ww) accumulate_grad(tw, gw);
            if (wb) accumulate_grad(tb, gb);
        });
    }
    return out;
}

Tensor he_normal(Shape shape, DType dtype, Rng& rng) {
    if (shape.empty()) throw ShapeError("he_normal needs a non-empty shape");
    // fan-in: conv [C_out, C_in/g, kh, kw] -> product of dims 1..; matrix
    // [in, out] used as x*W -> dim 0.
    std::int64_t fan_in = 1;
    if (shape.size() >= 2) {
        for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
        if (shape.size() == 2) fan_in = shape[0];
    }
    double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::int64_t n = shape_numel(shape);
    Tensor out = Tensor::zeros(std::move(shape), dtype);
    if (dtype == DType::Float32) {
        auto d = out.raw_data<float>();
        for (std::int64_t i = 0; i < n; ++i)
            d[i] = static_cast<float>(rng.normal() * std_dev);
    } else {
        auto d = out.raw_data<double>();
        for (std::int64_t i = 0; i < n; ++i) d[i] = rng.normal() * std_dev;
    }
    return out;
}

}  // namespace rcmk
