#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rcmk/data.hpp"
#include "rcmk/rconv.hpp"

namespace rcmk {

// A stage-structured classifier: plain conv stem, stages of block units with
// stride-2 downsampling at stage boundaries, global average pool and a linear
// head. Every internal 3x3 site is instantiated with the configured variant
// so Table-style comparisons hold the rest of the network fixed.
struct ModelSpec {
    std::vector<std::int64_t> widths = {8, 16, 32};
    std::int64_t blocks_per_stage = 1;
    Variant variant = Variant::MK;
    std::int64_t num_classes = 10;
    std::int64_t in_channels = 1;
    std::int64_t in_h = 28;
    std::int64_t in_w = 28;
    bool skip_connections = true;
    std::int64_t k = 3;
    std::int64_t a = 1;
    double tau = 1e-4;
    DType dtype = DType::Float32;
};

ModelSpec tiny_spec(Variant v = Variant::MK);   // MNIST scale: widths 8,16,32
ModelSpec small_spec(Variant v = Variant::MK);  // CIFAR-10 scale: widths 16,32,64

bool operator==(const ModelSpec& a, const ModelSpec& b);

// Canonical key=value lines; the checkpoint header stores this and loading
// diffs it field by field.
std::string spec_to_text(const ModelSpec& spec);
ModelSpec spec_from_text(const std::string& text);

class Model {
public:
    ModelSpec spec;

    struct Unit {
        RConvBlock site;
        NSTState bn;
        bool has_projection = false;   // 1x1 conv shortcut when shape changes
        Conv2dParams projection;
        NSTState projection_bn;
    };

    Conv2dParams stem;
    NSTState stem_bn;
    std::vector<std::vector<Unit>> stages;
    Tensor head_weight;  // [C_last, K]
    Tensor head_bias;    // [K]

    std::vector<std::pair<std::string, Tensor>> named_params();
    std::vector<std::pair<std::string, Tensor>> named_buffers();
    std::vector<Tensor> parameters();
    std::int64_t param_count();

    Model clone() const;
};

// Deterministic given (spec, seed): every parameter draws from its own RNG
// stream keyed by name, so identical names initialize identically across
// variant swaps.
Model build_model(const ModelSpec& spec, std::uint64_t seed);

Tensor forward(Model& m, const Tensor& x, Mode mode);

struct EvalReport {
    double top1_error_percent = 0.0;
    std::optional<double> top5_error_percent;
    double mean_loss = 0.0;
    std::int64_t count = 0;
};

// Top-1 error percentage and mean cross-entropy over the dataset; top-5 is
// reported when the class count is at least 5. Throws on an empty dataset.
EvalReport evaluate(Model& m, const Dataset& ds, std::int64_t batch_size = 256,
                    int workers = 1);

double accuracy_percent(const EvalReport& r);

}  // namespace rcmk
