#include "config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace foleygram {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool valid_name(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

[[noreturn]] void bad_value(const std::string & key, const std::string & value, const char * type) {
    throw ConfigError("config key '" + key + "' expects " + type + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string & key, const std::string & value, const char * type) {
    T out{};
    const char * end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value, type);
    return out;
}

} // namespace

Config Config::parse(std::string_view text) {
    Config cfg;
    std::string section;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string_view::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (!valid_name(name)) throw ConfigError("line " + std::to_string(line_no) + ": bad section name");
            section = std::string(name);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        if (!valid_name(key)) throw ConfigError("line " + std::to_string(line_no) + ": bad key");
        const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        cfg.values_[full] = std::string(trim(line.substr(eq + 1)));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Config::set(const std::string & key, std::string value) { values_[key] = std::move(value); }

std::string Config::get_string(const std::string & key, const std::string & fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long long Config::get_int(const std::string & key, long long fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number<long long>(key, it->second, "an integer");
}

std::uint64_t Config::get_u64(const std::string & key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second, "an unsigned integer");
}

double Config::get_double(const std::string & key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number<double>(key, it->second, "a number");
}

std::string Config::canonical() const {
    std::string top;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    for (const auto & [key, value] : values_) {
        if (key == "out") continue;
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            top += key + " = " + value + "\n";
        } else {
            sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
        }
    }
    std::string out = top;
    for (const auto & [name, entries] : sections) {
        out += "\n[" + name + "]\n";
        for (const auto & [key, value] : entries) out += key + " = " + value + "\n";
    }
    return out;
}

std::string Config::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 12);
}

} // namespace foleygram
