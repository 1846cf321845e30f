#include "rfdose/run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rfdose {

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "frequency",
        "tau",
        "seed",
        "out_dir",
        "labels_path",
        "t1_path",
        "t2_path",
        "phantom.preset",
        "phantom.size",
        "phantom.voxel_mm",
        "phantom.noise_std",
        "train.subjects",
        "train.epochs",
        "train.batch",
        "train.lr",
        "train.input_size",
        "train.checkpoint",
        "train.max_slices",
        "fdtd.voxel_mm",
        "fdtd.cpml_depth",
        "fdtd.padding_cells",
        "fdtd.standoff_mm",
        "fdtd.power_w",
        "fdtd.max_periods",
        "fdtd.tol",
        "sweep.tau",
        "sweep.subjects",
        "pipeline.stage",
    };
    return keys;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string dir = std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    return parse_text(buf.str(), dir);
}

RunConfig RunConfig::parse_text(const std::string& text, const std::string& base_dir) {
    RunConfig cfg;
    cfg.base_dir_ = base_dir;
    const auto& known = known_config_keys();

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (cfg.values_.count(key))
            throw UsageError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string RunConfig::require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("config is missing required key '" + key + "'");
    return it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not a number: '" + it->second + "'");
    }
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not an integer: '" + it->second + "'");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw UsageError("config key '" + key + "': not a boolean: '" + it->second + "'");
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& raw, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw UsageError("config key '" + key + "': empty list element");
        try {
            std::size_t pos = 0;
            out.push_back(parse(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw UsageError("config key '" + key + "': bad list element '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("config key '" + key + "': empty list");
    return out;
}

} // namespace

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_list<double>(key, it->second,
                              [](const std::string& s, std::size_t* pos) { return std::stod(s, pos); });
}

std::vector<std::int64_t> RunConfig::get_int_list(const std::string& key,
                                                  std::vector<std::int64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_list<std::int64_t>(
        key, it->second,
        [](const std::string& s, std::size_t* pos) { return std::int64_t(std::stoll(s, pos)); });
}

std::string RunConfig::resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(base_dir_) / p).string();
}

std::string RunConfig::canonical_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

} // namespace rfdose
