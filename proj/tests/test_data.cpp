#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "rcmk/data.hpp"
#include "rcmk/error.hpp"

using namespace rcmk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::current_path() / ("rcmk_tmp_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

std::vector<unsigned char> idx_images(std::uint32_t magic, std::int64_t n, std::int64_t h,
                                      std::int64_t w, const std::vector<unsigned char>& px) {
    std::vector<unsigned char> v;
    push_be32(v, magic);
    push_be32(v, static_cast<std::uint32_t>(n));
    push_be32(v, static_cast<std::uint32_t>(h));
    push_be32(v, static_cast<std::uint32_t>(w));
    v.insert(v.end(), px.begin(), px.end());
    return v;
}

std::vector<unsigned char> idx_labels(std::uint32_t magic,
                                      const std::vector<unsigned char>& labels) {
    std::vector<unsigned char> v;
    push_be32(v, magic);
    push_be32(v, static_cast<std::uint32_t>(labels.size()));
    v.insert(v.end(), labels.begin(), labels.end());
    return v;
}

}  // namespace

TEST_CASE("load_idx reads a handcrafted pair of files") {
    TempDir tmp("idx");
    std::vector<unsigned char> px = {0, 255, 128, 1, 2, 3,      // image 0, 2x3
                                     10, 20, 30, 40, 50, 60};   // image 1
    write_bytes(tmp.path / "img", idx_images(0x803, 2, 2, 3, px));
    write_bytes(tmp.path / "lab", idx_labels(0x801, {7, 0}));

    Dataset ds = load_idx(tmp.path / "img", tmp.path / "lab");
    CHECK(ds.size() == 2);
    CHECK(ds.images.shape() == Shape{2, 1, 2, 3});
    CHECK(ds.labels == std::vector<std::int32_t>{7, 0});
    auto v = ds.images.data<float>();
    for (std::size_t i = 0; i < px.size(); ++i)
        CHECK(v[i] == static_cast<float>(px[i]) * (1.0f / 255.0f));
}

TEST_CASE("load_idx rejects malformed files") {
    TempDir tmp("idxbad");
    std::vector<unsigned char> px(12, 0);
    auto good_img = idx_images(0x803, 2, 2, 3, px);
    auto good_lab = idx_labels(0x801, {1, 2});
    write_bytes(tmp.path / "img", good_img);
    write_bytes(tmp.path / "lab", good_lab);

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_idx(tmp.path / "nope", tmp.path / "lab"), IoError);
    }
    SUBCASE("bad image magic") {
        write_bytes(tmp.path / "img", idx_images(0x804, 2, 2, 3, px));
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
    SUBCASE("truncated image header") {
        write_bytes(tmp.path / "img", {0, 0, 8, 3});
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
    SUBCASE("image payload shorter than the header claims") {
        auto bad = good_img;
        bad.pop_back();
        write_bytes(tmp.path / "img", bad);
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
    SUBCASE("bad label magic") {
        write_bytes(tmp.path / "lab", idx_labels(0x802, {1, 2}));
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
    SUBCASE("count mismatch between images and labels") {
        write_bytes(tmp.path / "lab", idx_labels(0x801, {1, 2, 3}));
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
    SUBCASE("label value out of range") {
        write_bytes(tmp.path / "lab", idx_labels(0x801, {1, 10}));
        CHECK_THROWS_AS(load_idx(tmp.path / "img", tmp.path / "lab"), IoError);
    }
}

TEST_CASE("load_mnist applies the conventional file names") {
    TempDir tmp("mnist");
    std::vector<unsigned char> px(4, 9);
    write_bytes(tmp.path / "t10k-images-idx3-ubyte", idx_images(0x803, 1, 2, 2, px));
    write_bytes(tmp.path / "t10k-labels-idx1-ubyte", idx_labels(0x801, {3}));
    Dataset ds = load_mnist(tmp.path, "test");
    CHECK(ds.name == "mnist");
    CHECK(ds.split == "test");
    CHECK(ds.labels == std::vector<std::int32_t>{3});
    CHECK_THROWS_AS(load_mnist(tmp.path, "train"), IoError);     // files absent
    CHECK_THROWS_AS(load_mnist(tmp.path, "valid"), ValueError);  // unknown split
}

TEST_CASE("load_cifar parses 10- and 100-class record layouts") {
    TempDir tmp("cifar");

    SUBCASE("cifar10 test batch, including the archive subdirectory fallback") {
        std::vector<unsigned char> buf;
        for (int rec = 0; rec < 2; ++rec) {
            buf.push_back(static_cast<unsigned char>(rec == 0 ? 5 : 9));
            for (int j = 0; j < 3072; ++j)
                buf.push_back(static_cast<unsigned char>((rec * 31 + j) % 251));
        }
        fs::create_directories(tmp.path / "cifar-10-batches-bin");
        write_bytes(tmp.path / "cifar-10-batches-bin" / "test_batch.bin", buf);

        Dataset ds = load_cifar(tmp.path, 10, "test");
        CHECK(ds.images.shape() == Shape{2, 3, 32, 32});
        CHECK(ds.num_classes == 10);
        CHECK(ds.name == "cifar10");
        CHECK(ds.labels == std::vector<std::int32_t>{5, 9});
        auto v = ds.images.data<float>();
        // channel planes follow the label byte directly: 1024 R, 1024 G, 1024 B
        for (int j : {0, 1, 1023, 1024, 3071})
            CHECK(v[static_cast<std::size_t>(j)] ==
                  static_cast<float>(buf[static_cast<std::size_t>(1 + j)]) * (1.0f / 255.0f));
        CHECK(v[3073] ==
              static_cast<float>(buf[static_cast<std::size_t>(3073 + 1 + 1)]) * (1.0f / 255.0f));
    }

    SUBCASE("cifar100 uses the fine label after the coarse byte") {
        std::vector<unsigned char> buf;
        buf.push_back(13);  // coarse, ignored
        buf.push_back(42);  // fine
        for (int j = 0; j < 3072; ++j) buf.push_back(7);
        write_bytes(tmp.path / "train.bin", buf);
        Dataset ds = load_cifar(tmp.path, 100, "train");
        CHECK(ds.num_classes == 100);
        CHECK(ds.labels == std::vector<std::int32_t>{42});
    }

    SUBCASE("train split requires all five batch files") {
        std::vector<unsigned char> buf(3073, 0);
        write_bytes(tmp.path / "data_batch_1.bin", buf);
        CHECK_THROWS_AS(load_cifar(tmp.path, 10, "train"), IoError);
    }
    SUBCASE("partial record is rejected") {
        std::vector<unsigned char> buf(3072, 0);
        write_bytes(tmp.path / "test_batch.bin", buf);
        CHECK_THROWS_AS(load_cifar(tmp.path, 10, "test"), IoError);
    }
    SUBCASE("bad arguments") {
        CHECK_THROWS_AS(load_cifar(tmp.path, 20, "test"), ValueError);
        CHECK_THROWS_AS(load_cifar(tmp.path, 10, "dev"), ValueError);
    }
}

TEST_CASE("subset draws a deterministic sample without replacement") {
    Dataset ds = synth_digits(50, 11);
    Dataset s1 = subset(ds, 20, 4);
    Dataset s2 = subset(ds, 20, 4);
    Dataset s3 = subset(ds, 20, 5);
    CHECK(s1.size() == 20);
    CHECK(bitwise_equal(s1.images, s2.images));
    CHECK(s1.labels == s2.labels);
    CHECK(!bitwise_equal(s1.images, s3.images));

    // every sampled image exists in the source, and no duplicates are drawn
    std::set<std::vector<float>> source;
    auto src = ds.images.data<float>();
    const std::int64_t row = 28 * 28;
    for (std::int64_t i = 0; i < ds.size(); ++i)
        source.emplace(src.begin() + i * row, src.begin() + (i + 1) * row);
    std::set<std::vector<float>> seen;
    auto sv = s1.images.data<float>();
    for (std::int64_t i = 0; i < s1.size(); ++i) {
        std::vector<float> img(sv.begin() + i * row, sv.begin() + (i + 1) * row);
        CHECK(source.count(img) == 1);
        CHECK(seen.insert(std::move(img)).second);
    }

    // n >= size or n <= 0 hands back the whole set
    CHECK(subset(ds, 0, 1).size() == 50);
    CHECK(subset(ds, 500, 1).size() == 50);
    CHECK(bitwise_equal(subset(ds, 500, 1).images, ds.images));
}

TEST_CASE("synth_digits is deterministic with bounded pixels") {
    Dataset a = synth_digits(64, 123);
    Dataset b = synth_digits(64, 123);
    Dataset c = synth_digits(64, 124);
    CHECK(a.images.shape() == Shape{64, 1, 28, 28});
    CHECK(a.num_classes == 10);
    CHECK(a.name == "synth");
    CHECK(bitwise_equal(a.images, b.images));
    CHECK(a.labels == b.labels);
    CHECK(!bitwise_equal(a.images, c.images));
    for (float v : a.images.data<float>()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    std::set<std::int32_t> classes(a.labels.begin(), a.labels.end());
    CHECK(classes.size() >= 5);  // 64 draws cover most digits
    for (std::int32_t l : a.labels) {
        CHECK(l >= 0);
        CHECK(l <= 9);
    }
    CHECK_THROWS_AS(synth_digits(0, 1), ValueError);

    // without noise the image is exactly glyph ink on a zero background
    Dataset clean = synth_digits(8, 9, 0.0);
    for (float v : clean.images.data<float>()) CHECK((v == 0.0f || v >= 0.65f));
}

TEST_CASE("gather_batch copies rows bitwise and validates indices") {
    Dataset ds = synth_digits(10, 3);
    std::vector<std::int64_t> idx = {7, 0, 7};
    Tensor b = gather_batch(ds, idx);
    CHECK(b.shape() == Shape{3, 1, 28, 28});
    auto src = ds.images.data<float>();
    auto dst = b.data<float>();
    const std::int64_t row = 28 * 28;
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t p = 0; p < row; ++p)
            REQUIRE(dst[i * row + p] == src[idx[static_cast<std::size_t>(i)] * row + p]);
    CHECK(gather_labels(ds, idx) ==
          std::vector<std::int32_t>{ds.labels[7], ds.labels[0], ds.labels[7]});

    std::vector<std::int64_t> bad = {10};
    CHECK_THROWS_AS(gather_batch(ds, bad), ValueError);
    CHECK_THROWS_AS(gather_labels(ds, bad), ValueError);
}

TEST_CASE("augment_batch is the identity when disabled") {
    Dataset ds = synth_digits(6, 21);
    std::vector<std::int64_t> idx(6);
    std::iota(idx.begin(), idx.end(), 0);
    Tensor batch = gather_batch(ds, idx);
    Tensor before = batch.clone();
    Rng rng(5);
    augment_batch(batch, rng, false, 0);
    CHECK(bitwise_equal(batch, before));
}

TEST_CASE("augment_batch flip and crop preserve shape and pixel budget") {
    Dataset ds = synth_digits(8, 22);
    std::vector<std::int64_t> idx(8);
    std::iota(idx.begin(), idx.end(), 0);
    Tensor batch = gather_batch(ds, idx);
    Tensor before = batch.clone();
    Rng rng(77);
    augment_batch(batch, rng, true, 2);
    CHECK(batch.shape() == before.shape());
    bool changed = !bitwise_equal(batch, before);
    CHECK(changed);  // with 8 samples some flip or shift fires
    for (float v : batch.data<float>()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);  // reflect-pad cropping introduces no new values
    }

    // two hflip passes over identical rng streams flip the same rows twice
    Tensor twice = before.clone();
    Rng r1(400), r2(400);
    augment_batch(twice, r1, true, 0);
    augment_batch(twice, r2, true, 0);
    CHECK(bitwise_equal(twice, before));
}

TEST_CASE("shuffle_indices permutes deterministically") {
    std::vector<std::int64_t> a(100), b(100);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Rng r1(9), r2(9);
    shuffle_indices(a, r1);
    shuffle_indices(b, r2);
    CHECK(a == b);
    CHECK(!std::is_sorted(a.begin(), a.end()));
    std::vector<std::int64_t> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::int64_t i = 0; i < 100; ++i) REQUIRE(sorted[static_cast<std::size_t>(i)] == i);
}
