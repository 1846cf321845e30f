#include "rfdose/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace rfdose {

namespace {

void put_f64_le(std::ostream& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64_le(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw IoError(path + ": truncated tensor payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

void save_checkpoint(CondNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint '" + path + "' for writing");

    auto tensors = net.state_tensors();
    out << "CNET1\n";
    out << "m " << net.config().m << "\n";
    out << "V " << net.config().V << "\n";
    out << "seed " << net.config().seed << "\n";
    out << "tensors " << tensors.size() << "\n";
    for (const auto& [name, t] : tensors)
        out << name << " " << t->n << " " << t->c << " " << t->h << " " << t->w << "\n";
    out << "data\n";
    for (const auto& [name, t] : tensors)
        for (double x : t->v) put_f64_le(out, x);
    if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

CondNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");

    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw IoError(path + ": truncated header, missing " + what);
        return line;
    };
    if (next_line("magic") != "CNET1") throw IoError(path + ": not a CNET1 checkpoint");

    CondNetConfig cfg;
    std::size_t count = 0;
    auto parse_kv = [&](const char* key) {
        std::istringstream ss(next_line(key));
        std::string k;
        // Seeds span the full unsigned range; a signed read would overflow.
        unsigned long long v = 0;
        ss >> k >> v;
        if (k != key || ss.fail()) throw IoError(path + ": malformed '" + key + "' line");
        return v;
    };
    cfg.m = static_cast<int>(parse_kv("m"));
    cfg.V = static_cast<int>(parse_kv("V"));
    cfg.seed = static_cast<std::uint64_t>(parse_kv("seed"));
    count = static_cast<std::size_t>(parse_kv("tensors"));

    struct Entry {
        std::string name;
        std::size_t n, c, h, w;
    };
    std::vector<Entry> manifest;
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream ss(next_line("tensor entry"));
        Entry e;
        ss >> e.name >> e.n >> e.c >> e.h >> e.w;
        if (ss.fail()) throw IoError(path + ": malformed tensor entry " + std::to_string(i));
        manifest.push_back(e);
    }
    if (next_line("data") != "data") throw IoError(path + ": missing data marker");

    CondNet net(cfg);
    auto tensors = net.state_tensors();
    if (tensors.size() != manifest.size())
        throw IoError(path + ": manifest has " + std::to_string(manifest.size()) +
                      " tensors, network needs " + std::to_string(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, t] = tensors[i];
        const Entry& e = manifest[i];
        if (e.name != name)
            throw IoError(path + ": tensor " + std::to_string(i) + " is '" + e.name +
                          "', expected '" + name + "'");
        if (e.n != t->n || e.c != t->c || e.h != t->h || e.w != t->w)
            throw IoError(path + ": shape mismatch for '" + name + "'");
        for (std::size_t k = 0; k < t->size(); ++k) t->v[k] = get_f64_le(in, path);
    }
    char extra;
    if (in.read(&extra, 1)) throw IoError(path + ": trailing bytes after payload");
    return net;
}

} // namespace rfdose
