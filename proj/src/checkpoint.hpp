#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace foleygram {

// GFCK container: "GFCK", u16 version, then until EOF a sequence of
// (u32 name length, name bytes, u32 rank, rank × u32 dims, f32 payload).
// All integers and floats little-endian.
inline constexpr char kCheckpointMagic[4] = {'G', 'F', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

class Checkpoint {
public:
    void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data);
    // Stores an integer exactly as four 16-bit chunks.
    void add_u64(std::string name, std::uint64_t value);

    const NamedTensor & get(const std::string & name) const;
    const NamedTensor * find(const std::string & name) const;
    std::uint64_t get_u64(const std::string & name) const;

    const std::vector<NamedTensor> & tensors() const { return tensors_; }

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(const std::vector<std::uint8_t> & bytes);

    void save(const std::filesystem::path & path) const;
    static Checkpoint load(const std::filesystem::path & path);

private:
    std::vector<NamedTensor> tensors_;
};

} // namespace foleygram
