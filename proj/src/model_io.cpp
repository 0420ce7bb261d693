#include "advkit/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "advkit/errors.hpp"

namespace advkit {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'V', 'F'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "weight file writer assumes a little-endian host");

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path + " for writing");
        path_ = path;
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }
    void f32s(const std::vector<float>& v) { raw(v.data(), v.size() * 4); }
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failure on " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open " + path + " for reading");
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    float f32() {
        float v;
        raw(&v, 4);
        return v;
    }
    void f32s(std::vector<float>& v) { raw(v.data(), v.size() * 4); }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw FormatError(path_ + ": truncated at byte offset " + std::to_string(offset_));
        offset_ += n;
    }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }
    std::size_t offset() const { return offset_; }

private:
    std::ifstream in_;
    std::string path_;
    std::size_t offset_ = 0;
};

} // namespace

void save_weights(const Classifier& m, const std::string& path) {
    m.validate();
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(m.num_layers()));
    for (std::size_t d : m.dims) w.u32(static_cast<std::uint32_t>(d));
    w.f32(m.logit_scale);
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        w.f32s(m.weights[k]);
        w.f32s(m.biases[k]);
    }
}

Classifier load_weights(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic bytes (not a weight file)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError(path + ": unsupported format version " + std::to_string(version) +
                          ", expected " + std::to_string(kVersion));
    const std::uint32_t layers = r.u32();
    if (layers == 0 || layers > 64)
        throw FormatError(path + ": implausible layer count " + std::to_string(layers));
    Classifier m;
    m.dims.resize(layers + 1);
    for (std::uint32_t i = 0; i <= layers; ++i) {
        m.dims[i] = r.u32();
        if (m.dims[i] == 0)
            throw FormatError(path + ": zero dimension at layer boundary " + std::to_string(i));
    }
    m.logit_scale = r.f32();
    if (!(m.logit_scale > 0.0f))
        throw FormatError(path + ": non-positive logit scale");
    for (std::uint32_t k = 0; k < layers; ++k) {
        std::vector<float> w(m.dims[k + 1] * m.dims[k]);
        std::vector<float> b(m.dims[k + 1]);
        r.f32s(w);
        r.f32s(b);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    if (!r.at_eof())
        throw FormatError(path + ": trailing bytes after byte offset " +
                          std::to_string(r.offset()));
    m.validate();
    return m;
}

} // namespace advkit
