#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cbsde {

// Flat key-value experiment config: one `section.key = value` per line, `#`
// comments, duplicate keys rejected. Parsing is strict — every key present
// must be consumed by the command that runs, unknown keys are errors.
struct ConfigMap {
    std::map<std::string, std::string> entries;
    std::string origin;  // file path or label, for error messages
};

ConfigMap parse_config_file(const std::string& path);
ConfigMap parse_config_text(const std::string& text, std::string origin);

// Typed, consumption-tracking view over a ConfigMap. Commands read the keys
// they understand and then call finish(), which rejects anything left over.
class ConfigReader {
public:
    explicit ConfigReader(const ConfigMap& map) : map_(map) {}

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key);
    std::string get_string_or(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double_or(const std::string& key, double fallback);
    int get_int(const std::string& key);
    int get_int_or(const std::string& key, int fallback);
    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback);
    bool get_bool_or(const std::string& key, bool fallback);

    // Throws ValidationError naming every key that was never consumed.
    void finish() const;

    // Consumed keys with their raw values, sorted — the config echo.
    std::vector<std::pair<std::string, std::string>> consumed() const;

private:
    std::string take(const std::string& key);
    const ConfigMap& map_;
    std::map<std::string, std::string> consumed_;
};

double parse_double_strict(const std::string& text, const std::string& what);
int parse_int_strict(const std::string& text, const std::string& what);
std::uint64_t parse_u64_strict(const std::string& text, const std::string& what);
bool parse_bool_strict(const std::string& text, const std::string& what);

}  // namespace cbsde
