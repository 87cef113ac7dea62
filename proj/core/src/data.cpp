#include "rcmk/data.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <numeric>

namespace rcmk {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<unsigned char> buf(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw IoError("short read on " + path.string());
    return buf;
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    auto img = read_file(images_path);
    if (img.size() < 16) throw IoError("truncated image file " + images_path.string());
    if (be32(img.data()) != 0x00000803u)
        throw IoError("bad image magic in " + images_path.string());
    const std::int64_t n = be32(img.data() + 4);
    const std::int64_t h = be32(img.data() + 8);
    const std::int64_t w = be32(img.data() + 12);
    if (static_cast<std::int64_t>(img.size()) != 16 + n * h * w)
        throw IoError("image payload size mismatch in " + images_path.string());

    auto lab = read_file(labels_path);
    if (lab.size() < 8) throw IoError("truncated label file " + labels_path.string());
    if (be32(lab.data()) != 0x00000801u)
        throw IoError("bad label magic in " + labels_path.string());
    const std::int64_t ln = be32(lab.data() + 4);
    if (static_cast<std::int64_t>(lab.size()) != 8 + ln)
        throw IoError("label payload size mismatch in " + labels_path.string());
    if (ln != n)
        throw IoError("image/label count mismatch: " + std::to_string(n) + " vs " +
                      std::to_string(ln));

    Dataset ds;
    ds.images = Tensor::zeros({n, 1, h, w});
    auto px = ds.images.raw_data<float>();
    const unsigned char* src = img.data() + 16;
    for (std::int64_t i = 0; i < n * h * w; ++i)
        px[i] = static_cast<float>(src[i]) * (1.0f / 255.0f);
    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        unsigned char l = lab[static_cast<std::size_t>(8 + i)];
        if (l > 9) throw IoError("label out of range in " + labels_path.string());
        ds.labels[static_cast<std::size_t>(i)] = l;
    }
    ds.num_classes = 10;
    return ds;
}

Dataset load_mnist(const std::filesystem::path& dir, std::string_view split) {
    std::string images, labels;
    if (split == "train") {
        images = "train-images-idx3-ubyte";
        labels = "train-labels-idx1-ubyte";
    } else if (split == "test") {
        images = "t10k-images-idx3-ubyte";
        labels = "t10k-labels-idx1-ubyte";
    } else {
        throw ValueError("split must be 'train' or 'test'");
    }
    Dataset ds = load_idx(dir / images, dir / labels);
    ds.name = "mnist";
    ds.split = std::string(split);
    return ds;
}

Dataset load_cifar(const std::filesystem::path& dir, int variant, std::string_view split) {
    if (variant != 10 && variant != 100) throw ValueError("cifar variant must be 10 or 100");
    if (split != "train" && split != "test") throw ValueError("split must be 'train' or 'test'");
    std::vector<std::string> files;
    if (variant == 10) {
        if (split == "train")
            files = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                     "data_batch_4.bin", "data_batch_5.bin"};
        else
            files = {"test_batch.bin"};
    } else {
        files = {split == "train" ? "train.bin" : "test.bin"};
    }
    // accept the files either directly in dir or in the standard archive dir
    std::filesystem::path base = dir;
    if (!std::filesystem::exists(base / files[0])) {
        std::filesystem::path sub =
            dir / (variant == 10 ? "cifar-10-batches-bin" : "cifar-100-binary");
        if (std::filesystem::exists(sub / files[0])) base = sub;
    }

    const std::int64_t record = variant == 10 ? 3073 : 3074;
    const std::int64_t label_off = variant == 10 ? 0 : 1;  // skip the coarse label byte
    std::vector<unsigned char> all;
    for (const std::string& f : files) {
        std::filesystem::path p = base / f;
        if (!std::filesystem::exists(p)) throw IoError("missing CIFAR file " + p.string());
        auto buf = read_file(p);
        if (buf.empty() || static_cast<std::int64_t>(buf.size()) % record != 0)
            throw IoError("record size mismatch in " + p.string() + " (expected multiples of " +
                          std::to_string(record) + " bytes)");
        all.insert(all.end(), buf.begin(), buf.end());
    }
    const std::int64_t n = static_cast<std::int64_t>(all.size()) / record;

    Dataset ds;
    ds.images = Tensor::zeros({n, 3, 32, 32});
    auto px = ds.images.raw_data<float>();
    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const unsigned char* rec = all.data() + i * record;
        unsigned char l = rec[label_off];
        if (l >= variant) throw IoError("label out of range in CIFAR record");
        ds.labels[static_cast<std::size_t>(i)] = l;
        // payload: 1024 red, 1024 green, 1024 blue row-major bytes
        const unsigned char* pix = rec + label_off + 1;
        for (std::int64_t j = 0; j < 3 * 32 * 32; ++j)
            px[i * 3 * 32 * 32 + j] = static_cast<float>(pix[j]) * (1.0f / 255.0f);
    }
    ds.num_classes = variant;
    ds.name = variant == 10 ? "cifar10" : "cifar100";
    ds.split = std::string(split);
    return ds;
}

Dataset subset(const Dataset& ds, std::int64_t n, std::uint64_t seed) {
    if (n <= 0 || n >= ds.size()) {
        Dataset copy = ds;
        copy.images = ds.images.clone();
        return copy;
    }
    std::vector<std::int64_t> idx(static_cast<std::size_t>(ds.size()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle_indices(idx, rng);
    idx.resize(static_cast<std::size_t>(n));
    Dataset out;
    out.images = gather_batch(ds, idx);
    out.labels = gather_labels(ds, idx);
    out.num_classes = ds.num_classes;
    out.name = ds.name;
    out.split = ds.split;
    return out;
}

namespace {

// 5x7 digit glyphs; '#' marks an on pixel.
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
}};

}  // namespace

Dataset synth_digits(std::int64_t n, std::uint64_t seed, double noise_std) {
    if (n < 1) throw ValueError("synth_digits needs n >= 1");
    const std::int64_t side = 28;
    Dataset ds;
    ds.images = Tensor::zeros({n, 1, side, side});
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.num_classes = 10;
    ds.name = "synth";
    auto px = ds.images.raw_data<float>();
    Rng rng(seed);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t digit = static_cast<std::int64_t>(rng.below(10));
        ds.labels[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(digit);
        const std::int64_t scale = 2 + static_cast<std::int64_t>(rng.below(2));  // 2 or 3
        const std::int64_t gw = 5 * scale, gh = 7 * scale;
        const std::int64_t dx = static_cast<std::int64_t>(rng.below(
            static_cast<std::uint64_t>(side - gw + 1)));
        const std::int64_t dy = static_cast<std::int64_t>(rng.below(
            static_cast<std::uint64_t>(side - gh + 1)));
        const double ink = rng.uniform(0.65, 1.0);
        float* img = px.data() + i * side * side;
        for (std::int64_t r = 0; r < gh; ++r)
            for (std::int64_t c = 0; c < gw; ++c)
                if (kGlyphs[static_cast<std::size_t>(digit)][static_cast<std::size_t>(r / scale)]
                           [static_cast<std::size_t>(c / scale)] == '#')
                    img[(dy + r) * side + dx + c] = static_cast<float>(ink);
        if (noise_std > 0.0)
            for (std::int64_t p = 0; p < side * side; ++p) {
                double v = static_cast<double>(img[p]) + noise_std * rng.normal();
                img[p] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
    }
    return ds;
}

Tensor gather_batch(const Dataset& ds, std::span<const std::int64_t> indices) {
    if (!ds.images.defined()) throw ValueError("gather_batch on an empty dataset");
    const std::int64_t c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const std::int64_t row = c * h * w;
    Tensor out = Tensor::zeros({static_cast<std::int64_t>(indices.size()), c, h, w});
    auto src = ds.images.data<float>();
    auto dst = out.raw_data<float>();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::int64_t idx = indices[i];
        if (idx < 0 || idx >= ds.size()) throw ValueError("gather index out of range");
        std::memcpy(dst.data() + static_cast<std::int64_t>(i) * row, src.data() + idx * row,
                    static_cast<std::size_t>(row) * sizeof(float));
    }
    return out;
}

std::vector<std::int32_t> gather_labels(const Dataset& ds,
                                        std::span<const std::int64_t> indices) {
    std::vector<std::int32_t> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::int64_t idx = indices[i];
        if (idx < 0 || idx >= ds.size()) throw ValueError("gather index out of range");
        out[i] = ds.labels[static_cast<std::size_t>(idx)];
    }
    return out;
}

void augment_batch(Tensor& batch, Rng& rng, bool hflip, std::int64_t crop_pad) {
    if (!hflip && crop_pad <= 0) return;
    if (batch.ndim() != 4) throw ShapeError("augment_batch expects NCHW");
    const std::int64_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    auto px = batch.raw_data<float>();
    std::vector<float> padded;
    for (std::int64_t i = 0; i < n; ++i) {
        float* img = px.data() + i * c * h * w;
        if (hflip && rng.uniform() < 0.5)
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t r = 0; r < h; ++r) {
                    float* rowp = img + (ch * h + r) * w;
                    std::reverse(rowp, rowp + w);
                }
        if (crop_pad > 0) {
            const std::int64_t ph = h + 2 * crop_pad, pw = w + 2 * crop_pad;
            padded.assign(static_cast<std::size_t>(c * ph * pw), 0.0f);
            // reflective padding
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t r = 0; r < ph; ++r) {
                    std::int64_t sr = r - crop_pad;
                    if (sr < 0) sr = -sr;
                    if (sr >= h) sr = 2 * h - 2 - sr;
                    for (std::int64_t cc = 0; cc < pw; ++cc) {
                        std::int64_t sc = cc - crop_pad;
                        if (sc < 0) sc = -sc;
                        if (sc >= w) sc = 2 * w - 2 - sc;
                        padded[static_cast<std::size_t>((ch * ph + r) * pw + cc)] =
                            img[(ch * h + sr) * w + sc];
                    }
                }
            const std::int64_t dy = static_cast<std::int64_t>(
                rng.below(static_cast<std::uint64_t>(2 * crop_pad + 1)));
            const std::int64_t dx = static_cast<std::int64_t>(
                rng.below(static_cast<std::uint64_t>(2 * crop_pad + 1)));
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t r = 0; r < h; ++r)
                    for (std::int64_t cc = 0; cc < w; ++cc)
                        img[(ch * h + r) * w + cc] =
                            padded[static_cast<std::size_t>((ch * ph + r + dy) * pw + cc + dx)];
        }
    }
}

void shuffle_indices(std::vector<std::int64_t>& indices, Rng& rng) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(indices[i - 1], indices[j]);
    }
}

}  // namespace rcmk
