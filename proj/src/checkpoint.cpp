#include "checkpoint.hpp"

#include "error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace foleygram {

namespace {

void put_u16(std::vector<std::uint8_t> & out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t> & out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t> & bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    void need(size_t n) const {
        if (bytes_.size() - pos_ < n) fail(ErrorCode::CorruptHeader, "checkpoint truncated");
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    void raw(void * dst, size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

private:
    const std::vector<std::uint8_t> & bytes_;
    size_t pos_ = 0;
};

} // namespace

void Checkpoint::add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
    size_t count = 1;
    for (auto d : dims) count *= d;
    if (count != data.size()) {
        fail(ErrorCode::ShapeMismatch, "tensor " + name + " payload does not match its dims");
    }
    tensors_.push_back(NamedTensor{std::move(name), std::move(dims), std::move(data)});
}

void Checkpoint::add_u64(std::string name, std::uint64_t value) {
    std::vector<float> chunks(4);
    for (int i = 0; i < 4; ++i) chunks[static_cast<size_t>(i)] = static_cast<float>((value >> (16 * i)) & 0xffff);
    add(std::move(name), {4}, std::move(chunks));
}

const NamedTensor * Checkpoint::find(const std::string & name) const {
    for (const auto & t : tensors_)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensor & Checkpoint::get(const std::string & name) const {
    const NamedTensor * t = find(name);
    if (!t) fail(ErrorCode::CorruptHeader, "checkpoint has no tensor named " + name);
    return *t;
}

std::uint64_t Checkpoint::get_u64(const std::string & name) const {
    const NamedTensor & t = get(name);
    if (t.data.size() != 4) fail(ErrorCode::CorruptHeader, "tensor " + name + " is not an integer record");
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint64_t>(t.data[static_cast<size_t>(i)]) << (16 * i);
    }
    return v;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    static_assert(std::endian::native == std::endian::little, "payload copy assumes a little-endian host");
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u16(out, kCheckpointVersion);
    for (const auto & t : tensors_) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put_u32(out, d);
        const auto * p = reinterpret_cast<const std::uint8_t *>(t.data.data());
        out.insert(out.end(), p, p + t.data.size() * sizeof(float));
    }
    return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t> & bytes) {
    Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) fail(ErrorCode::CorruptHeader, "bad checkpoint magic");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        fail(ErrorCode::UnsupportedFormat, "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    while (!r.done()) {
        NamedTensor t;
        const std::uint32_t name_len = r.u32();
        r.need(name_len);
        t.name.resize(name_len);
        r.raw(t.name.data(), name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) fail(ErrorCode::CorruptHeader, "tensor " + t.name + " has implausible rank");
        size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.dims.push_back(r.u32());
            count *= t.dims.back();
        }
        r.need(count * sizeof(float));
        t.data.resize(count);
        r.raw(t.data.data(), count * sizeof(float));
        ck.tensors_.push_back(std::move(t));
    }
    return ck;
}

void Checkpoint::save(const std::filesystem::path & path) const {
    const auto bytes = serialize();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorCode::Io, "failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace foleygram
