#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rcmk/data.hpp"
#include "rcmk/model.hpp"
#include "rcmk/nn.hpp"

namespace rcmk {

// ---------------------------------------------------------------------------
// Corruptions
// ---------------------------------------------------------------------------

enum class CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    BoxBlur,
    Contrast,
    Brightness,
};

std::string_view corruption_name(CorruptionKind k);
CorruptionKind corruption_from_string(std::string_view name);
std::span<const CorruptionKind> all_corruptions();

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int severity = 1;  // 1..5; 0 is the identity
    std::uint64_t seed = 0;
};

// Severity parameter tables (index = severity-1). Desk-scale analogues of the
// ImageNet-C settings, fixed here as repo constants:
//   gaussian sigma      {0.04, 0.08, 0.12, 0.18, 0.26}
//   shot photon count   {60, 25, 12, 5, 3}
//   impulse fraction    {0.03, 0.06, 0.09, 0.17, 0.27}
//   box blur radius     {1, 2, 3, 4, 5}
//   contrast factor     {0.60, 0.45, 0.30, 0.20, 0.10}
//   brightness shift    {0.10, 0.20, 0.30, 0.40, 0.50}
std::span<const double> severity_params(CorruptionKind k);

// Applies the corruption to a [N,C,H,W] batch in [0,1]; output is clipped to
// [0,1]. Deterministic given spec.seed. severity 0 returns the input values
// unchanged.
Tensor corrupt(const Tensor& images, const CorruptionSpec& spec);
Dataset corrupt_dataset(const Dataset& ds, const CorruptionSpec& spec);

// ---------------------------------------------------------------------------
// Corruption error / mCE
// ---------------------------------------------------------------------------

struct CorruptionCell {
    CorruptionKind kind;
    int severity;
    double model_error;     // top-1 error %
    double baseline_error;  // top-1 error %
};

struct CorruptionReport {
    std::vector<CorruptionCell> cells;
    std::vector<std::pair<CorruptionKind, double>> ce;  // per kind, defined cells only
    std::vector<CorruptionKind> undefined;  // kinds with a zero-error baseline
    double mce = 0.0;                       // mean CE over defined kinds
};

using ErrorFn = std::function<double(const Dataset&)>;  // top-1 error %

// CE_c = sum_s E_model(c,s) / sum_s E_baseline(c,s) * 100; mCE is the mean
// over kinds. Each corrupted set is generated once per (kind, severity) from
// `seed` and evaluated by both functions. Kinds whose baseline error sums to
// zero are excluded and reported as undefined.
CorruptionReport corruption_error(const ErrorFn& model_error, const ErrorFn& baseline_error,
                                  const Dataset& clean, std::span<const CorruptionKind> kinds,
                                  std::span<const int> severities, std::uint64_t seed);

CorruptionReport corruption_error(Model& model, Model& baseline, const Dataset& clean,
                                  std::span<const CorruptionKind> kinds,
                                  std::span<const int> severities, std::uint64_t seed,
                                  int workers = 1);

// ---------------------------------------------------------------------------
// L-inf attacks
// ---------------------------------------------------------------------------

enum class AttackKind { FGSM, FFGSM, PGD };

std::string_view attack_name(AttackKind k);
AttackKind attack_from_string(std::string_view name);

struct AttackSpec {
    AttackKind kind = AttackKind::PGD;
    double epsilon = 8.0 / 255.0;
    double step_size = 2.0 / 255.0;
    int num_steps = 10;        // PGD only
    bool random_start = false; // PGD: uniform start in the eps-ball
    std::uint64_t seed = 0;
};

// FFGSM convention when no explicit step size is configured.
double ffgsm_default_step(double epsilon);

// Scalar loss as a function of the input batch; attacks only need its input
// gradient. The Model overloads below wrap eval-mode cross-entropy.
using LossFn = std::function<Tensor(const Tensor&)>;

// All attacks return outputs inside both boxes: [0,1] pixel range and the
// l-inf epsilon ball around x. epsilon == 0 returns x bitwise.
Tensor fgsm(const LossFn& loss, const Tensor& x, const AttackSpec& spec);
Tensor ffgsm(const LossFn& loss, const Tensor& x, const AttackSpec& spec);
Tensor pgd(const LossFn& loss, const Tensor& x, const AttackSpec& spec);

Tensor run_attack(Model& m, const Tensor& x, std::span<const std::int32_t> labels,
                  const AttackSpec& spec);

// Robust top-1 accuracy (%) under the attack, batched over the dataset.
double robust_accuracy(Model& m, const Dataset& ds, const AttackSpec& spec,
                       std::int64_t batch_size = 128, int workers = 1);

// ---------------------------------------------------------------------------
// Training (standard and adversarial)
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 5;
    std::int64_t batch_size = 64;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    std::vector<int> lr_drop_epochs;  // 1-based epoch numbers
    double lr_drop_factor = 0.1;
    std::uint64_t seed = 0;
    bool shuffle = true;
    bool hflip = false;
    std::int64_t crop_pad = 0;
};

struct TrainRecord {
    int epoch;
    std::int64_t step;
    double loss;
    double lr;
};

struct TrainReport {
    std::vector<TrainRecord> history;  // one record per optimizer step
    std::int64_t steps = 0;
};

// Minibatch SGD on cross-entropy. When `attack` is given, each batch is
// replaced by its adversarial counterpart before the training step;
// adversarial examples are generated in eval-mode normalization with the
// attack's own RNG stream, so an epsilon-0 attack reproduces standard
// training exactly. Optimizer state persists across calls via `optim`.
TrainReport train_model(Model& m, const Dataset& train, const TrainConfig& cfg,
                        const AttackSpec* attack = nullptr, Sgd* optim = nullptr);

}  // namespace rcmk
