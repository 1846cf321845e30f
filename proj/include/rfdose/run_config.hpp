#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfdose/errors.hpp"

namespace rfdose {

// Line-oriented `key = value` config. '#' starts a comment. Unknown keys are
// rejected so typos fail loudly instead of silently using a default.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text, const std::string& base_dir = ".");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const;
    std::vector<std::int64_t> get_int_list(const std::string& key, std::vector<std::int64_t> fallback) const;

    // Relative paths are resolved against the config file's directory.
    std::string resolve_path(const std::string& value) const;

    const std::string& base_dir() const { return base_dir_; }
    std::string canonical_text() const;

private:
    std::map<std::string, std::string> values_;
    std::string base_dir_ = ".";
};

const std::vector<std::string>& known_config_keys();

} // namespace rfdose
