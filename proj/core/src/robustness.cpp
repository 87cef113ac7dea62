#include "rcmk/robustness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "rcmk/ops.hpp"

namespace rcmk {

namespace {

constexpr std::array<CorruptionKind, 6> kAllCorruptions = {
    CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise, CorruptionKind::ImpulseNoise,
    CorruptionKind::BoxBlur,       CorruptionKind::Contrast,  CorruptionKind::Brightness,
};

constexpr std::array<double, 5> kGaussianSigma = {0.04, 0.08, 0.12, 0.18, 0.26};
constexpr std::array<double, 5> kShotPhotons = {60.0, 25.0, 12.0, 5.0, 3.0};
constexpr std::array<double, 5> kImpulseFraction = {0.03, 0.06, 0.09, 0.17, 0.27};
constexpr std::array<double, 5> kBlurRadius = {1.0, 2.0, 3.0, 4.0, 5.0};
constexpr std::array<double, 5> kContrastFactor = {0.60, 0.45, 0.30, 0.20, 0.10};
constexpr std::array<double, 5> kBrightnessShift = {0.10, 0.20, 0.30, 0.40, 0.50};

float clip01(double v) {
    return static_cast<float>(std::min(1.0, std::max(0.0, v)));
}

}  // namespace

std::string_view corruption_name(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::ShotNoise: return "shot_noise";
        case CorruptionKind::ImpulseNoise: return "impulse_noise";
        case CorruptionKind::BoxBlur: return "box_blur";
        case CorruptionKind::Contrast: return "contrast";
        case CorruptionKind::Brightness: return "brightness";
    }
    throw ValueError("unknown corruption kind");
}

CorruptionKind corruption_from_string(std::string_view name) {
    for (CorruptionKind k : kAllCorruptions)
        if (corruption_name(k) == name) return k;
    throw ValueError("unknown corruption '" + std::string(name) + "'");
}

std::span<const CorruptionKind> all_corruptions() { return kAllCorruptions; }

std::span<const double> severity_params(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::GaussianNoise: return kGaussianSigma;
        case CorruptionKind::ShotNoise: return kShotPhotons;
        case CorruptionKind::ImpulseNoise: return kImpulseFraction;
        case CorruptionKind::BoxBlur: return kBlurRadius;
        case CorruptionKind::Contrast: return kContrastFactor;
        case CorruptionKind::Brightness: return kBrightnessShift;
    }
    throw ValueError("unknown corruption kind");
}

Tensor corrupt(const Tensor& images, const CorruptionSpec& spec) {
    if (images.ndim() != 4) throw ShapeError("corrupt expects an NCHW batch");
    if (images.dtype() != DType::Float32)
        throw DtypeError("corrupt expects float32 images");
    if (spec.severity < 0 || spec.severity > 5)
        throw ValueError("severity must lie in [0,5]");
    Tensor out = images.clone();
    if (spec.severity == 0) return out;

    const double param = severity_params(spec.kind)[static_cast<std::size_t>(spec.severity - 1)];
    const std::int64_t n = images.dim(0), c = images.dim(1), h = images.dim(2),
                       w = images.dim(3);
    auto px = out.raw_data<float>();
    Rng rng(spec.seed);

    switch (spec.kind) {
        case CorruptionKind::GaussianNoise:
            for (std::int64_t i = 0; i < out.numel(); ++i)
                px[i] = clip01(static_cast<double>(px[i]) + param * rng.normal());
            break;
        case CorruptionKind::ShotNoise:
            for (std::int64_t i = 0; i < out.numel(); ++i) {
                double photons =
                    static_cast<double>(rng.poisson(static_cast<double>(px[i]) * param));
                px[i] = clip01(photons / param);
            }
            break;
        case CorruptionKind::ImpulseNoise:
            for (std::int64_t i = 0; i < out.numel(); ++i)
                if (rng.uniform() < param) px[i] = rng.uniform() < 0.5 ? 0.0f : 1.0f;
            break;
        case CorruptionKind::BoxBlur: {
            const std::int64_t rad = static_cast<std::int64_t>(param);
            const double inv = 1.0 / static_cast<double>((2 * rad + 1) * (2 * rad + 1));
            std::vector<float> plane(static_cast<std::size_t>(h * w));
            for (std::int64_t img = 0; img < n * c; ++img) {
                float* p = px.data() + img * h * w;
                for (std::int64_t r = 0; r < h; ++r)
                    for (std::int64_t cc = 0; cc < w; ++cc) {
                        double acc = 0.0;
                        for (std::int64_t dr = -rad; dr <= rad; ++dr) {
                            std::int64_t sr = std::min(h - 1, std::max<std::int64_t>(0, r + dr));
                            for (std::int64_t dc = -rad; dc <= rad; ++dc) {
                                std::int64_t sc =
                                    std::min(w - 1, std::max<std::int64_t>(0, cc + dc));
                                acc += static_cast<double>(p[sr * w + sc]);
                            }
                        }
                        plane[static_cast<std::size_t>(r * w + cc)] = clip01(acc * inv);
                    }
                std::copy(plane.begin(), plane.end(), p);
            }
            break;
        }
        case CorruptionKind::Contrast:
            for (std::int64_t img = 0; img < n; ++img) {
                float* p = px.data() + img * c * h * w;
                const std::int64_t m = c * h * w;
                double mean = 0.0;
                for (std::int64_t i = 0; i < m; ++i) mean += static_cast<double>(p[i]);
                mean /= static_cast<double>(m);
                for (std::int64_t i = 0; i < m; ++i)
                    p[i] = clip01(mean + param * (static_cast<double>(p[i]) - mean));
            }
            break;
        case CorruptionKind::Brightness:
            for (std::int64_t i = 0; i < out.numel(); ++i)
                px[i] = clip01(static_cast<double>(px[i]) + param);
            break;
    }
    return out;
}

Dataset corrupt_dataset(const Dataset& ds, const CorruptionSpec& spec) {
    Dataset out = ds;
    out.images = corrupt(ds.images, spec);
    return out;
}

CorruptionReport corruption_error(const ErrorFn& model_error, const ErrorFn& baseline_error,
                                  const Dataset& clean, std::span<const CorruptionKind> kinds,
                                  std::span<const int> severities, std::uint64_t seed) {
    if (kinds.empty() || severities.empty())
        throw ValueError("corruption_error needs kinds and severities");
    CorruptionReport rep;
    for (CorruptionKind kind : kinds) {
        double sum_model = 0.0, sum_base = 0.0;
        for (int sev : severities) {
            CorruptionSpec cs;
            cs.kind = kind;
            cs.severity = sev;
            cs.seed = mix_seed(seed, std::string(corruption_name(kind)) + "/" +
                                         std::to_string(sev));
            Dataset corrupted = corrupt_dataset(clean, cs);
            double em = model_error(corrupted);
            double eb = baseline_error(corrupted);
            rep.cells.push_back({kind, sev, em, eb});
            sum_model += em;
            sum_base += eb;
        }
        if (sum_base > 0.0)
            rep.ce.emplace_back(kind, sum_model / sum_base * 100.0);
        else
            rep.undefined.push_back(kind);
    }
    if (!rep.ce.empty()) {
        double acc = 0.0;
        for (const auto& [kind, ce] : rep.ce) acc += ce;
        rep.mce = acc / static_cast<double>(rep.ce.size());
    }
    return rep;
}

CorruptionReport corruption_error(Model& model, Model& baseline, const Dataset& clean,
                                  std::span<const CorruptionKind> kinds,
                                  std::span<const int> severities, std::uint64_t seed,
                                  int workers) {
    ErrorFn me = [&](const Dataset& ds) {
        return evaluate(model, ds, 256, workers).top1_error_percent;
    };
    ErrorFn be = [&](const Dataset& ds) {
        return evaluate(baseline, ds, 256, workers).top1_error_percent;
    };
    return corruption_error(me, be, clean, kinds, severities, seed);
}

std::string_view attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::FGSM: return "fgsm";
        case AttackKind::FFGSM: return "ffgsm";
        case AttackKind::PGD: return "pgd";
    }
    throw ValueError("unknown attack kind");
}

AttackKind attack_from_string(std::string_view name) {
    if (name == "fgsm") return AttackKind::FGSM;
    if (name == "ffgsm") return AttackKind::FFGSM;
    if (name == "pgd") return AttackKind::PGD;
    throw ValueError("unknown attack '" + std::string(name) + "'");
}

double ffgsm_default_step(double epsilon) { return 1.25 * epsilon; }

namespace {

// One signed-gradient step followed by projection onto the l-inf ball around
// the clean input and the [0,1] pixel box. Every attack funnels through this
// helper so single-step PGD and FGSM run the exact same float sequence.
// The nextafter nudges repair the rounding of x +/- eps so |adv - x| <= eps
// holds as a float comparison; clipping into [0,1] afterwards never widens
// the gap because the clean pixels already lie inside the box.
template <typename T>
void project_and_clip(std::span<T> adv, std::span<const T> x, double eps_d) {
    const T eps = static_cast<T>(eps_d);
    const T inf = std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < adv.size(); ++i) {
        T v = std::min(std::max(adv[i], x[i] - eps), x[i] + eps);
        while (v - x[i] > eps) v = std::nextafter(v, -inf);
        while (x[i] - v > eps) v = std::nextafter(v, inf);
        adv[i] = std::min(std::max(v, T(0)), T(1));
    }
}

template <typename T>
void signed_step(std::span<T> adv, std::span<const T> cur, std::span<const T> g, double step_d) {
    const T step = static_cast<T>(step_d);
    for (std::size_t i = 0; i < adv.size(); ++i) {
        T s = g[i] > T(0) ? T(1) : (g[i] < T(0) ? T(-1) : T(0));
        adv[i] = cur[i] + step * s;
    }
}

Tensor input_grad(const LossFn& loss, const Tensor& at) {
    Tensor leaf = at.clone();
    leaf.set_requires_grad(true);
    Tape::active().reset();
    Tensor l = loss(leaf);
    if (!l.defined() || l.numel() != 1) throw ShapeError("attack loss must be a scalar");
    backward(l);
    Tensor g = leaf.grad();
    return g.defined() ? g : Tensor::zeros(at.shape(), at.dtype());
}

Tensor attack_step(const LossFn& loss, const Tensor& cur, const Tensor& x, double eps,
                   double step) {
    Tensor g = input_grad(loss, cur);
    Tensor adv = Tensor::zeros(x.shape(), x.dtype());
    if (x.dtype() == DType::Float32) {
        signed_step<float>(adv.raw_data<float>(), cur.data<float>(), g.data<float>(), step);
        project_and_clip<float>(adv.raw_data<float>(), x.data<float>(), eps);
    } else {
        signed_step<double>(adv.raw_data<double>(), cur.data<double>(), g.data<double>(), step);
        project_and_clip<double>(adv.raw_data<double>(), x.data<double>(), eps);
    }
    return adv;
}

Tensor random_init(const Tensor& x, double eps, Rng& rng) {
    Tensor cur = x.clone();
    if (x.dtype() == DType::Float32) {
        auto d = cur.raw_data<float>();
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = static_cast<float>(static_cast<double>(d[i]) + rng.uniform(-eps, eps));
        project_and_clip<float>(d, x.data<float>(), eps);
    } else {
        auto d = cur.raw_data<double>();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += rng.uniform(-eps, eps);
        project_and_clip<double>(d, x.data<double>(), eps);
    }
    return cur;
}

void check_attack(const AttackSpec& spec) {
    if (spec.epsilon < 0.0) throw ValueError("attack epsilon must be >= 0");
    if (spec.num_steps < 1) throw ValueError("attack needs at least one step");
}

}  // namespace

Tensor fgsm(const LossFn& loss, const Tensor& x, const AttackSpec& spec) {
    check_attack(spec);
    if (spec.epsilon == 0.0) return x.clone();
    return attack_step(loss, x, x, spec.epsilon, spec.epsilon);
}

Tensor ffgsm(const LossFn& loss, const Tensor& x, const AttackSpec& spec) {
    check_attack(spec);
    if (spec.epsilon == 0.0) return x.clone();
    const double step =
        spec.step_size > 0.0 ? spec.step_size : ffgsm_default_step(spec.epsilon);
    Rng rng(spec.seed);
    Tensor start = random_init(x, spec.epsilon, rng);
    return attack_step(loss, start, x, spec.epsilon, step);
}

Tensor pgd(const LossFn& loss, const Tensor& x, const AttackSpec& spec) {
    check_attack(spec);
    if (spec.epsilon == 0.0) return x.clone();
    if (spec.step_size <= 0.0) throw ValueError("pgd needs a positive step size");
    Rng rng(spec.seed);
    Tensor cur = spec.random_start ? random_init(x, spec.epsilon, rng) : x.clone();
    for (int i = 0; i < spec.num_steps; ++i)
        cur = attack_step(loss, cur, x, spec.epsilon, spec.step_size);
    return cur;
}

namespace {

// Temporarily freezes parameter gradients so attack backward passes do not
// leak gradient into the model.
class FreezeParams {
  public:
    explicit FreezeParams(Model& m) : params_(m.parameters()) {
        prev_.reserve(params_.size());
        for (Tensor& p : params_) {
            prev_.push_back(p.requires_grad());
            p.set_requires_grad(false);
        }
    }
    ~FreezeParams() {
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i].set_requires_grad(prev_[i]);
    }

  private:
    std::vector<Tensor> params_;
    std::vector<bool> prev_;
};

}  // namespace

Tensor run_attack(Model& m, const Tensor& x, std::span<const std::int32_t> labels,
                  const AttackSpec& spec) {
    check_attack(spec);
    if (spec.epsilon == 0.0) return x.clone();
    FreezeParams freeze(m);
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    LossFn loss = [&m, lab](const Tensor& xin) {
        return cross_entropy(forward(m, xin, Mode::Eval), lab);
    };
    switch (spec.kind) {
        case AttackKind::FGSM: return fgsm(loss, x, spec);
        case AttackKind::FFGSM: return ffgsm(loss, x, spec);
        case AttackKind::PGD: return pgd(loss, x, spec);
    }
    throw ValueError("unknown attack kind");
}

double robust_accuracy(Model& m, const Dataset& ds, const AttackSpec& spec,
                       std::int64_t batch_size, int workers) {
    const std::int64_t n = ds.size();
    if (n == 0) throw ValueError("robust_accuracy on an empty dataset");
    if (batch_size < 1) throw ValueError("batch_size must be >= 1");
    const std::int64_t nb = (n + batch_size - 1) / batch_size;
    std::vector<std::int64_t> correct(static_cast<std::size_t>(nb), 0);

    parallel_for(nb, workers, [&](std::int64_t lo, std::int64_t hi) {
        // each worker owns a clone so tape passes never share tensors
        Model local = workers > 1 ? m.clone() : Model();
        Model& mm = workers > 1 ? local : m;
        const std::int64_t k = mm.spec.num_classes;
        for (std::int64_t bi = lo; bi < hi; ++bi) {
            std::int64_t begin = bi * batch_size;
            std::int64_t end = std::min(n, begin + batch_size);
            std::vector<std::int64_t> idx(static_cast<std::size_t>(end - begin));
            std::iota(idx.begin(), idx.end(), begin);
            Tensor batch = gather_batch(ds, idx);
            auto labels = gather_labels(ds, idx);
            AttackSpec bs = spec;
            bs.seed = mix_seed(spec.seed, "batch" + std::to_string(bi));
            Tensor adv = run_attack(mm, batch, labels, bs);
            NoGradGuard guard;
            Tensor logits = forward(mm, adv, Mode::Eval);
            for (std::int64_t r = 0; r < end - begin; ++r) {
                std::int64_t arg = 0;
                double mx = logits.value_at(r * k);
                for (std::int64_t j = 1; j < k; ++j)
                    if (logits.value_at(r * k + j) > mx) {
                        mx = logits.value_at(r * k + j);
                        arg = j;
                    }
                if (arg == labels[static_cast<std::size_t>(r)])
                    ++correct[static_cast<std::size_t>(bi)];
            }
        }
    });

    std::int64_t total = std::accumulate(correct.begin(), correct.end(), std::int64_t{0});
    return 100.0 * static_cast<double>(total) / static_cast<double>(n);
}

TrainReport train_model(Model& m, const Dataset& train, const TrainConfig& cfg,
                        const AttackSpec* attack, Sgd* optim) {
    if (train.size() == 0) throw ValueError("train_model on an empty dataset");
    if (cfg.batch_size < 1) throw ValueError("batch_size must be >= 1");
    if (cfg.epochs < 0) throw ValueError("epochs must be >= 0");

    Sgd local(m.parameters(), {cfg.lr, cfg.momentum, cfg.weight_decay});
    Sgd& opt = optim ? *optim : local;
    Rng data_rng(mix_seed(cfg.seed, "data"));
    Rng attack_rng(mix_seed(cfg.seed, "attack"));

    std::vector<std::int64_t> indices(static_cast<std::size_t>(train.size()));
    std::iota(indices.begin(), indices.end(), 0);

    TrainReport rep;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        int drops = 0;
        for (int d : cfg.lr_drop_epochs)
            if (d <= epoch) ++drops;
        opt.set_lr(cfg.lr * std::pow(cfg.lr_drop_factor, drops));
        if (cfg.shuffle) shuffle_indices(indices, data_rng);

        for (std::int64_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
            std::int64_t end = std::min<std::int64_t>(train.size(), begin + cfg.batch_size);
            std::span<const std::int64_t> bidx(indices.data() + begin,
                                               static_cast<std::size_t>(end - begin));
            Tensor xb = gather_batch(train, bidx);
            auto yb = gather_labels(train, bidx);
            if (cfg.hflip || cfg.crop_pad > 0)
                augment_batch(xb, data_rng, cfg.hflip, cfg.crop_pad);
            if (attack) {
                AttackSpec as = *attack;
                as.seed = attack_rng.next_u64();
                xb = run_attack(m, xb, yb, as);
            }
            Tape::active().reset();
            Tensor loss = cross_entropy(forward(m, xb, Mode::Train), yb);
            opt.zero_grad();
            backward(loss);
            opt.step();
            ++rep.steps;
            rep.history.push_back({epoch, rep.steps, loss.item(), opt.lr()});
        }
    }
    return rep;
}

}  // namespace rcmk
