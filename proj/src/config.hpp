#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace foleygram {

/// Malformed config text or a value of the wrong type. Kept apart from
/// module errors so front ends can report it with its own exit status.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// key = value text with optional [section] headers. Keys inside a section
/// are addressed as "section.key". '#' and ';' start comments.
class Config {
public:
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path & path);

    void set(const std::string & key, std::string value);
    bool has(const std::string & key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string & key, const std::string & fallback = {}) const;
    long long get_int(const std::string & key, long long fallback) const;
    std::uint64_t get_u64(const std::string & key, std::uint64_t fallback) const;
    double get_double(const std::string & key, double fallback) const;

    /// Normalized text, sorted by section then key. The output directory is
    /// not part of it so results do not depend on where they are written.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 12 hex digits.
    std::string hash() const;

    const std::map<std::string, std::string> & values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace foleygram
