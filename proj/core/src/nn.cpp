#include "rcmk/nn.hpp"

#include <cmath>
#include <vector>

namespace rcmk {

Tensor soft_threshold(const Tensor& x, double tau) {
    if (tau < 0.0) throw ValueError("soft_threshold: tau must be >= 0");
    float tf = static_cast<float>(tau);
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const std::int64_t n = x.numel();
    if (x.dtype() == DType::Float32) {
        auto src = x.data<float>();
        auto dst = out.raw_data<float>();
        for (std::int64_t i = 0; i < n; ++i) {
            float v = src[i];
            dst[i] = v > tf ? v - tf : (v < -tf ? v + tf : 0.0f);
        }
    } else {
        auto src = x.data<double>();
        auto dst = out.raw_data<double>();
        for (std::int64_t i = 0; i < n; ++i) {
            double v = src[i];
            dst[i] = v > tau ? v - tau : (v < -tau ? v + tau : 0.0);
        }
    }
    if (should_record({&x})) {
        out.set_requires_grad(true);
        Tensor in = x, res = out;
        Tape::active().record([in, res, tau] {
            Tensor g = res.grad();
            if (!g.defined() || !in.requires_grad()) return;
            Tensor gx = Tensor::zeros(in.shape(), in.dtype());
            const std::int64_t n = in.numel();
            // pass-through strictly beyond the threshold, zero in the dead
            // zone and at |x| == tau
            if (in.dtype() == DType::Float32) {
                float tf = static_cast<float>(tau);
                auto xv = in.data<float>();
                auto gv = g.data<float>();
                auto dst = gx.raw_data<float>();
                for (std::int64_t i = 0; i < n; ++i)
                    dst[i] = (xv[i] > tf || xv[i] < -tf) ? gv[i] : 0.0f;
            } else {
                auto xv = in.data<double>();
                auto gv = g.data<double>();
                auto dst = gx.raw_data<double>();
                for (std::int64_t i = 0; i < n; ++i)
                    dst[i] = (xv[i] > tau || xv[i] < -tau) ? gv[i] : 0.0;
            }
            accumulate_grad(in, gx);
        });
    }
    return out;
}

namespace {

template <typename T>
void sample_norm_forward(std::span<const T> x, std::span<T> y, std::int64_t n, std::int64_t m,
                         double eps, std::vector<double>& sigma) {
    sigma.resize(static_cast<std::size_t>(n));
    for (std::int64_t s = 0; s < n; ++s) {
        const T* xs = x.data() + s * m;
        double mean = 0.0;
        for (std::int64_t i = 0; i < m; ++i) mean += static_cast<double>(xs[i]);
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            double d = static_cast<double>(xs[i]) - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        double sd = std::sqrt(var + eps);
        sigma[static_cast<std::size_t>(s)] = sd;
        T* ys = y.data() + s * m;
        for (std::int64_t i = 0; i < m; ++i)
            ys[i] = static_cast<T>((static_cast<double>(xs[i]) - mean) / sd);
    }
}

template <typename T>
void sample_norm_backward(std::span<const T> y, std::span<const T> g, std::span<T> gx,
                          std::int64_t n, std::int64_t m, const std::vector<double>& sigma) {
    for (std::int64_t s = 0; s < n; ++s) {
        const T* ys = y.data() + s * m;
        const T* gs = g.data() + s * m;
        double mean_g = 0.0, mean_gy = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            mean_g += static_cast<double>(gs[i]);
            mean_gy += static_cast<double>(gs[i]) * static_cast<double>(ys[i]);
        }
        mean_g /= static_cast<double>(m);
        mean_gy /= static_cast<double>(m);
        double inv_sd = 1.0 / sigma[static_cast<std::size_t>(s)];
        T* dst = gx.data() + s * m;
        for (std::int64_t i = 0; i < m; ++i)
            dst[i] = static_cast<T>(
                (static_cast<double>(gs[i]) - mean_g - static_cast<double>(ys[i]) * mean_gy) *
                inv_sd);
    }
}

}  // namespace

Tensor sample_norm(const Tensor& x, double eps) {
    if (x.ndim() < 2) throw ShapeError("sample_norm needs at least 2 dimensions");
    if (eps <= 0.0) throw ValueError("sample_norm: eps must be > 0");
    const std::int64_t n = x.dim(0);
    const std::int64_t m = n > 0 ? x.numel() / n : 0;
    if (m == 0) throw ShapeError("sample_norm on empty sample");
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    std::vector<double> sigma;
    if (x.dtype() == DType::Float32)
        sample_norm_forward<float>(x.data<float>(), out.raw_data<float>(), n, m, eps, sigma);
    else
        sample_norm_forward<double>(x.data<double>(), out.raw_data<double>(), n, m, eps, sigma);

    if (should_record({&x})) {
        out.set_requires_grad(true);
        Tensor in = x, res = out;
        Tape::active().record([in, res, n, m, sigma = std::move(sigma)] {
            Tensor g = res.grad();
            if (!g.defined() || !in.requires_grad()) return;
            Tensor gx = Tensor::zeros(in.shape(), in.dtype());
            if (in.dtype() == DType::Float32)
                sample_norm_backward<float>(res.data<float>(), g.data<float>(),
                                            gx.raw_data<float>(), n, m, sigma);
            else
                sample_norm_backward<double>(res.data<double>(), g.data<double>(),
                                             gx.raw_data<double>(), n, m, sigma);
            accumulate_grad(in, gx);
        });
    }
    return out;
}

NSTState NSTState::create(std::int64_t channels, DType dtype, double tau) {
    if (channels < 1) throw ValueError("NSTState needs at least one channel");
    NSTState s;
    s.tau = tau;
    s.gamma = Tensor::ones({channels}, dtype);
    s.gamma.set_requires_grad(true);
    s.beta = Tensor::zeros({channels}, dtype, true);
    s.running_mean = Tensor::zeros({channels}, dtype);
    s.running_var = Tensor::ones({channels}, dtype);
    return s;
}

NSTState NSTState::clone() const {
    NSTState s;
    s.tau = tau;
    s.momentum = momentum;
    s.eps = eps;
    s.gamma = gamma.defined() ? gamma.clone() : Tensor();
    s.beta = beta.defined() ? beta.clone() : Tensor();
    s.running_mean = running_mean.defined() ? running_mean.clone() : Tensor();
    s.running_var = running_var.defined() ? running_var.clone() : Tensor();
    return s;
}

namespace {

template <typename T>
void bn_stats(std::span<const T> x, std::int64_t n, std::int64_t c, std::int64_t plane,
              std::vector<double>& mean, std::vector<double>& var) {
    mean.assign(static_cast<std::size_t>(c), 0.0);
    var.assign(static_cast<std::size_t>(c), 0.0);
    const std::int64_t m = n * plane;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (std::int64_t ni = 0; ni < n; ++ni) {
            const T* p = x.data() + (ni * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
        }
        mean[static_cast<std::size_t>(ci)] = acc / static_cast<double>(m);
    }
    for (std::int64_t ci = 0; ci < c; ++ci) {
        double mu = mean[static_cast<std::size_t>(ci)];
        double acc = 0.0;
        for (std::int64_t ni = 0; ni < n; ++ni) {
            const T* p = x.data() + (ni * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                double d = static_cast<double>(p[i]) - mu;
                acc += d * d;
            }
        }
        var[static_cast<std::size_t>(ci)] = acc / static_cast<double>(m);
    }
}

}  // namespace

Tensor batch_norm(const Tensor& x, NSTState& s, Mode mode) {
    if (x.ndim() != 4) throw ShapeError("batch_norm expects an NCHW tensor");
    if (!s.gamma.defined()) throw ValueError("batch_norm on an empty state");
    if (x.dtype() != s.gamma.dtype()) throw DtypeError("batch_norm dtype mismatch");
    const std::int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    if (c != s.channels()) throw ShapeError("batch_norm channel mismatch");
    if (n * plane == 0) throw ShapeError("batch_norm on empty batch");

    std::vector<double> mu(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
    if (mode == Mode::Train) {
        if (x.dtype() == DType::Float32)
            bn_stats<float>(x.data<float>(), n, c, plane, mu, var);
        else
            bn_stats<double>(x.data<double>(), n, c, plane, mu, var);
        // running <- (1-momentum)*running + momentum*batch, variance stored
        // unbiased
        const std::int64_t m = n * plane;
        double unb = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
        for (std::int64_t ci = 0; ci < c; ++ci) {
            double rm = s.running_mean.value_at(ci);
            double rv = s.running_var.value_at(ci);
            s.running_mean.set_value_at(ci, (1.0 - s.momentum) * rm + s.momentum * mu[ci]);
            s.running_var.set_value_at(ci, (1.0 - s.momentum) * rv + s.momentum * var[ci] * unb);
        }
    } else {
        for (std::int64_t ci = 0; ci < c; ++ci) {
            mu[static_cast<std::size_t>(ci)] = s.running_mean.value_at(ci);
            var[static_cast<std::size_t>(ci)] = s.running_var.value_at(ci);
        }
    }

    std::vector<double> inv_sd(static_cast<std::size_t>(c));
    for (std::int64_t ci = 0; ci < c; ++ci)
        inv_sd[static_cast<std::size_t>(ci)] = 1.0 / std::sqrt(var[ci] + s.eps);

    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    auto apply = [&](auto src, auto dst, auto gamma, auto beta) {
        using T = typename decltype(dst)::value_type;
        for (std::int64_t ni = 0; ni < n; ++ni)
            for (std::int64_t ci = 0; ci < c; ++ci) {
                const double gsc = static_cast<double>(gamma[ci]) * inv_sd[ci];
                const double b = static_cast<double>(beta[ci]);
                const double m0 = mu[ci];
                const auto* p = src.data() + (ni * c + ci) * plane;
                auto* q = dst.data() + (ni * c + ci) * plane;
                for (std::int64_t i = 0; i < plane; ++i)
                    q[i] = static_cast<T>((static_cast<double>(p[i]) - m0) * gsc + b);
            }
    };
    if (x.dtype() == DType::Float32)
        apply(x.data<float>(), out.raw_data<float>(), s.gamma.data<float>(),
              s.beta.data<float>());
    else
        apply(x.data<double>(), out.raw_data<double>(), s.gamma.data<double>(),
              s.beta.data<double>());

    if (should_record({&x, &s.gamma, &s.beta})) {
        out.set_requires_grad(true);
        Tensor in = x, gam = s.gamma, bet = s.beta, res = out;
        bool train = mode == Mode::Train;
        Tape::active().record([in, gam, bet, res, n, c, plane, mu = std::move(mu),
                               inv_sd = std::move(inv_sd), train] {
            Tensor g = res.grad();
            if (!g.defined()) return;
            bool wx = in.requires_grad(), wg = gam.requires_grad(), wb = bet.requires_grad();
            if (!wx && !wg && !wb) return;
            const std::int64_t m = n * plane;
            Tensor gx = wx ? Tensor::zeros(in.shape(), in.dtype()) : Tensor();
            Tensor gg = wg ? Tensor::zeros(gam.shape(), gam.dtype()) : Tensor();
            Tensor gb = wb ? Tensor::zeros(bet.shape(), bet.dtype()) : Tensor();
            auto run = [&](auto xv, auto gv, auto gammav) {
                using T = typename decltype(xv)::value_type;
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double isd = inv_sd[static_cast<std::size_t>(ci)];
                    const double m0 = mu[static_cast<std::size_t>(ci)];
                    double sum_g = 0.0, sum_gxh = 0.0;
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* xp = xv.data() + (ni * c + ci) * plane;
                        const T* gp = gv.data() + (ni * c + ci) * plane;
                        for (std::int64_t i = 0; i < plane; ++i) {
                            double xh = (static_cast<double>(xp[i]) - m0) * isd;
                            sum_g += static_cast<double>(gp[i]);
                            sum_gxh += static_cast<double>(gp[i]) * xh;
                        }
                    }
                    if (wg) gg.set_value_at(ci, sum_gxh);
                    if (wb) gb.set_value_at(ci, sum_g);
                    if (wx) {
                        const double gsc = static_cast<double>(gammav[ci]) * isd;
                        const double mg = sum_g / static_cast<double>(m);
                        const double mgxh = sum_gxh / static_cast<double>(m);
                        auto dst = gx.raw_data<T>();
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            const T* xp = xv.data() + (ni * c + ci) * plane;
                            const T* gp = gv.data() + (ni * c + ci) * plane;
                            T* q = dst.data() + (ni * c + ci) * plane;
                            for (std::int64_t i = 0; i < plane; ++i) {
                                double xh = (static_cast<double>(xp[i]) - m0) * isd;
                                double v = static_cast<double>(gp[i]);
                                // eval mode treats mean/var as constants
                                if (train) v -= mg + xh * mgxh;
                                q[i] = static_cast<T>(v * gsc);
                            }
                        }
                    }
                }
            };
            if (in.dtype() == DType::Float32)
                run(in.data<float>(), g.data<float>(), gam.data<float>());
            else
                run(in.data<double>(), g.data<double>(), gam.data<double>());
            if (wx) accumulate_grad(in, gx);
            if (wg) accumulate_grad(gam, gg);
            if (wb) accumulate_grad(bet, gb);
        });
    }
    return out;
}

Tensor nst_forward(const Tensor& x, NSTState& s, Mode mode) {
    return soft_threshold(batch_norm(sample_norm(x, s.eps), s, mode), s.tau);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy expects [N,K] logits");
    const std::int64_t b = logits.dim(0), k = logits.dim(1);
    if (b == 0) throw ShapeError("cross_entropy on an empty batch");
    if (static_cast<std::int64_t>(labels.size()) != b)
        throw ShapeError("cross_entropy label count mismatch");
    for (std::int32_t l : labels)
        if (l < 0 || l >= k) throw ValueError("cross_entropy label out of range");

    double total = 0.0;
    for (std::int64_t i = 0; i < b; ++i) {
        double mx = logits.value_at(i * k);
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, logits.value_at(i * k + j));
        double lse = 0.0;
        for (std::int64_t j = 0; j < k; ++j) lse += std::exp(logits.value_at(i * k + j) - mx);
        lse = mx + std::log(lse);
        total += lse - logits.value_at(i * k + labels[i]);
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(b), logits.dtype());

    if (should_record({&logits})) {
        out.set_requires_grad(true);
        Tensor in = logits, res = out;
        std::vector<std::int32_t> lab(labels.begin(), labels.end());
        Tape::active().record([in, res, lab, b, k] {
            Tensor g = res.grad();
            if (!g.defined() || !in.requires_grad()) return;
            const double gs = g.item() / static_cast<double>(b);
            Tensor gx = Tensor::zeros(in.shape(), in.dtype());
            for (std::int64_t i = 0; i < b; ++i) {
                double mx = in.value_at(i * k);
                for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, in.value_at(i * k + j));
                double denom = 0.0;
                for (std::int64_t j = 0; j < k; ++j)
                    denom += std::exp(in.value_at(i * k + j) - mx);
                for (std::int64_t j = 0; j < k; ++j) {
                    double p = std::exp(in.value_at(i * k + j) - mx) / denom;
                    double t = j == lab[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    gx.set_value_at(i * k + j, (p - t) * gs);
                }
            }
            accumulate_grad(in, gx);
        });
    }
    return out;
}

Sgd::Sgd(std::vector<Tensor> params, SgdOptions opts)
    : params_(std::move(params)), opts_(opts) {
    velocity_.resize(params_.size());
}

void Sgd::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        Tensor g = p.grad();
        if (!g.defined()) continue;  // untouched by this backward pass
        if (!velocity_[i].defined()) velocity_[i] = Tensor::zeros(p.shape(), p.dtype());
        Tensor& v = velocity_[i];
        const std::int64_t n = p.numel();
        if (p.dtype() == DType::Float32) {
            auto pv = p.raw_data<float>();
            auto vv = v.raw_data<float>();
            auto gv = g.data<float>();
            const float mom = static_cast<float>(opts_.momentum);
            const float wd = static_cast<float>(opts_.weight_decay);
            const float lr = static_cast<float>(opts_.lr);
            for (std::int64_t j = 0; j < n; ++j) {
                vv[j] = mom * vv[j] + gv[j] + wd * pv[j];
                pv[j] -= lr * vv[j];
            }
        } else {
            auto pv = p.raw_data<double>();
            auto vv = v.raw_data<double>();
            auto gv = g.data<double>();
            for (std::int64_t j = 0; j < n; ++j) {
                vv[j] = opts_.momentum * vv[j] + gv[j] + opts_.weight_decay * pv[j];
                pv[j] -= opts_.lr * vv[j];
            }
        }
    }
}

void Sgd::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

}  // namespace rcmk
