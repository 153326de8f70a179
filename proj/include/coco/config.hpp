#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace coco {

// Flat key-value configuration: one `key = value` per line, full-line #
// comments, later keys override earlier ones.  Dotted keys are plain
// strings here; the grouping convention (scenario.kind, optim.eta, ...)
// lives in the CLI.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    // Command-line override, accepts "key=value" or separate parts.
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);

    bool has(const std::string& key) const;
    std::vector<std::string> keys() const;

    // Getters with defaults; parse failures throw std::invalid_argument
    // naming the key.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated lists; empty value gives an empty list.
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key,
                                         const std::vector<std::string>& fallback) const;

    // Required variants: throw when the key is absent.
    std::string require_string(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace coco
