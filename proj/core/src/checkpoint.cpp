#include "rcmk/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rcmk {

namespace {

std::array<std::uint32_t, 256> build_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_i64(std::string& out, std::int64_t v) {
    auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
  public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + 1]))
                           << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::int64_t i64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return static_cast<std::int64_t>(v);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

  private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size()) throw IoError("truncated checkpoint " + path_);
    }
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::vector<std::pair<std::string, Tensor>> all_tensors(Model& m) {
    auto out = m.named_params();
    auto buf = m.named_buffers();
    out.insert(out.end(), buf.begin(), buf.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    static const std::array<std::uint32_t, 256> table = build_crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const Model& m, const std::string& path) {
    Model& mm = const_cast<Model&>(m);
    auto tensors = all_tensors(mm);
    for (const auto& [name, t] : tensors)
        if (t.dtype() != DType::Float32)
            throw DtypeError("checkpoint format stores float32 only; tensor '" + name +
                             "' is " + std::string(dtype_name(t.dtype())));

    std::string out;
    out += "RCMK";
    put_u16(out, kCheckpointVersion);
    std::string spec = spec_to_text(m.spec);
    put_u32(out, static_cast<std::uint32_t>(spec.size()));
    out += spec;
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.ndim()));
        for (std::size_t i = 0; i < t.ndim(); ++i) put_i64(out, t.dim(i));
        auto d = t.data<float>();
        for (float v : d) put_f32(out, v);
    }
    put_u32(out, crc32(out.data(), out.size()));

    // write-then-rename so a crash never leaves a half-written checkpoint
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("short write on " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

namespace {

std::string read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

Model load_impl(const std::string& path, Model* into) {
    std::string buf = read_all(path);
    if (buf.size() < 4 + 2 + 4 + 4 + 4) throw IoError("truncated checkpoint " + path);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(
                          static_cast<std::uint8_t>(buf[buf.size() - 4 + i]))
                      << (8 * i);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw IoError("checksum mismatch in " + path);

    Reader r(buf, path);
    if (r.bytes(4) != "RCMK") throw IoError("bad magic in " + path);
    std::uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    std::string spec_text = r.bytes(r.u32());

    Model model;
    Model* target = into;
    if (into) {
        if (spec_text != spec_to_text(into->spec))
            throw IoError("checkpoint spec does not match the target model");
    } else {
        model = build_model(spec_from_text(spec_text), 0);
        target = &model;
    }

    auto tensors = all_tensors(*target);
    std::uint32_t count = r.u32();
    if (count != tensors.size())
        throw IoError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                      std::to_string(tensors.size()));
    for (auto& [name, t] : tensors) {
        std::string stored_name = r.bytes(r.u32());
        if (stored_name != name)
            throw IoError("unexpected tensor '" + stored_name + "' (wanted '" + name + "')");
        std::uint8_t rank = static_cast<std::uint8_t>(r.bytes(1)[0]);
        Shape shape(rank);
        for (std::uint8_t i = 0; i < rank; ++i) shape[i] = r.i64();
        if (shape != t.shape())
            throw IoError("shape mismatch for '" + name + "': file has " +
                          shape_to_string(shape) + ", model has " + shape_to_string(t.shape()));
        auto d = t.raw_data<float>();
        for (float& v : d) v = r.f32();
    }
    if (r.pos() != buf.size() - 4) throw IoError("trailing bytes in " + path);
    return into ? Model() : std::move(model);
}

}  // namespace

Model load_checkpoint(const std::string& path) { return load_impl(path, nullptr); }

void load_checkpoint_into(Model& m, const std::string& path) { load_impl(path, &m); }

}  // namespace rcmk
