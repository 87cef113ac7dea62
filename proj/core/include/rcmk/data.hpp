#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rcmk/tensor.hpp"
#include "rcmk/util.hpp"

namespace rcmk {

struct Dataset {
    Tensor images;  // [N,C,H,W] float32 in [0,1]
    std::vector<std::int32_t> labels;
    std::int64_t num_classes = 10;
    std::string name;
    std::string split;  // "train" or "test"

    std::int64_t size() const { return images.defined() ? images.dim(0) : 0; }
};

// IDX (big-endian headers): magic 0x00000803 for image files, 0x00000801 for
// label files. Pixel bytes are scaled by 1/255. Throws IoError on bad magic,
// truncation, or image/label count mismatch.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Standard MNIST file names under `dir` ({train,t10k}-images-idx3-ubyte ...).
Dataset load_mnist(const std::filesystem::path& dir, std::string_view split);

// CIFAR binary batches: 3073-byte records (CIFAR-10) or 3074-byte records
// (CIFAR-100, coarse label ignored). `variant` is 10 or 100, `split` is
// "train" or "test". Throws IoError listing the expected file names when
// they are missing, and on record-length mismatch.
Dataset load_cifar(const std::filesystem::path& dir, int variant, std::string_view split);

// Deterministic prefix of a seeded shuffle; n == 0 or n >= size returns a copy.
Dataset subset(const Dataset& ds, std::int64_t n, std::uint64_t seed);

// Deterministic synthetic 28x28 digit classification set: rendered glyphs
// under random affine jitter, contrast jitter and pixel noise. Stands in for
// MNIST in offline environments; same tensor layout and label range.
Dataset synth_digits(std::int64_t n, std::uint64_t seed, double noise_std = 0.05);

// Rows of ds.images selected by index, as one [B,C,H,W] batch.
Tensor gather_batch(const Dataset& ds, std::span<const std::int64_t> indices);
std::vector<std::int32_t> gather_labels(const Dataset& ds, std::span<const std::int64_t> indices);

// Train-time augmentation: horizontal flip (p=0.5) and random crop after
// reflective padding by `crop_pad`. In-place on a gathered batch.
void augment_batch(Tensor& batch, Rng& rng, bool hflip, std::int64_t crop_pad);

// In-place Fisher-Yates with the library Rng (stable across platforms).
void shuffle_indices(std::vector<std::int64_t>& indices, Rng& rng);

}  // namespace rcmk
