#include "cbsde/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "cbsde/errors.hpp"

namespace cbsde {

namespace {

std::string trim(const std::string& s) {
    const std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, std::string origin) {
    ConfigMap map;
    map.origin = std::move(origin);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(map.origin + ":" + std::to_string(lineno) +
                                  ": expected `key = value`, got `" + stripped + "`");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError(map.origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (value.empty()) {
            throw ValidationError(map.origin + ":" + std::to_string(lineno) +
                                  ": empty value for key `" + key + "`");
        }
        if (!map.entries.emplace(key, value).second) {
            throw ValidationError(map.origin + ":" + std::to_string(lineno) +
                                  ": duplicate key `" + key + "`");
        }
    }
    return map;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open `" + path + "`");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

bool ConfigReader::has(const std::string& key) const {
    return map_.entries.count(key) != 0;
}

std::string ConfigReader::take(const std::string& key) {
    const auto it = map_.entries.find(key);
    if (it == map_.entries.end()) {
        throw ValidationError(map_.origin + ": missing required key `" + key + "`");
    }
    consumed_[key] = it->second;
    return it->second;
}

std::string ConfigReader::get_string(const std::string& key) { return take(key); }

std::string ConfigReader::get_string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? take(key) : fallback;
}

double ConfigReader::get_double(const std::string& key) {
    return parse_double_strict(take(key), map_.origin + ": key `" + key + "`");
}

double ConfigReader::get_double_or(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
}

int ConfigReader::get_int(const std::string& key) {
    return parse_int_strict(take(key), map_.origin + ": key `" + key + "`");
}

int ConfigReader::get_int_or(const std::string& key, int fallback) {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigReader::get_u64_or(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return parse_u64_strict(take(key), map_.origin + ": key `" + key + "`");
}

bool ConfigReader::get_bool_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    return parse_bool_strict(take(key), map_.origin + ": key `" + key + "`");
}

void ConfigReader::finish() const {
    std::string leftover;
    for (const auto& [key, value] : map_.entries) {
        if (consumed_.count(key)) continue;
        if (!leftover.empty()) leftover += ", ";
        leftover += "`" + key + "`";
    }
    if (!leftover.empty()) {
        throw ValidationError(map_.origin + ": unknown or unused keys: " + leftover);
    }
}

std::vector<std::pair<std::string, std::string>> ConfigReader::consumed() const {
    return {consumed_.begin(), consumed_.end()};
}

double parse_double_strict(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || text.empty()) {
        throw ValidationError(what + ": `" + text + "` is not a real number");
    }
    if (errno == ERANGE || !std::isfinite(v)) {
        throw ValidationError(what + ": `" + text + "` is out of range");
    }
    return v;
}

int parse_int_strict(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || text.empty()) {
        throw ValidationError(what + ": `" + text + "` is not an integer");
    }
    if (errno == ERANGE || v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max()) {
        throw ValidationError(what + ": `" + text + "` is out of range");
    }
    return static_cast<int>(v);
}

std::uint64_t parse_u64_strict(const std::string& text, const std::string& what) {
    if (text.empty() || text[0] == '-') {
        throw ValidationError(what + ": `" + text + "` is not an unsigned integer");
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size()) {
        throw ValidationError(what + ": `" + text + "` is not an unsigned integer");
    }
    if (errno == ERANGE) {
        throw ValidationError(what + ": `" + text + "` is out of range");
    }
    return static_cast<std::uint64_t>(v);
}

bool parse_bool_strict(const std::string& text, const std::string& what) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ValidationError(what + ": `" + text + "` is not `true` or `false`");
}

}  // namespace cbsde
