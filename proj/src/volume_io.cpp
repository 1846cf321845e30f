#include "rfdose/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace rfdose {

namespace {

void put_u16_le(std::vector<unsigned char>& buf, std::uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xff));
    buf.push_back(static_cast<unsigned char>(v >> 8));
}

void put_f64_le(std::vector<unsigned char>& buf, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

std::uint16_t get_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

const char* kind_name(VolumeKind k) {
    switch (k) {
        case VolumeKind::label_u16: return "label-u16";
        case VolumeKind::real_f64: return "real-f64";
        case VolumeKind::complex_f64: return "complex-f64";
    }
    return "?";
}

VolumeKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "label-u16") return VolumeKind::label_u16;
    if (s == "real-f64") return VolumeKind::real_f64;
    if (s == "complex-f64") return VolumeKind::complex_f64;
    throw IoError(path + ": unknown volume kind '" + s + "'");
}

std::size_t kind_size(VolumeKind k) {
    switch (k) {
        case VolumeKind::label_u16: return 2;
        case VolumeKind::real_f64: return 8;
        case VolumeKind::complex_f64: return 16;
    }
    return 0;
}

struct Header {
    std::size_t nx = 0, ny = 0, nz = 0;
    double voxel_mm = 0.0;
    VolumeKind kind = VolumeKind::real_f64;
};

void write_header(std::ostream& out, const Header& h) {
    out << "DVOL1\n";
    out << "dims " << h.nx << " " << h.ny << " " << h.nz << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", h.voxel_mm);
    out << "voxel_mm " << buf << "\n";
    out << "kind " << kind_name(h.kind) << "\n";
    out << "byteorder little\n";
    out << "data\n";
}

Header read_header(std::istream& in, const std::string& path) {
    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(in, line)) throw IoError(path + ": truncated header, missing " + what);
        return line;
    };
    if (next_line("magic") != "DVOL1") throw IoError(path + ": bad magic, not a DVOL1 file");

    Header h;
    {
        std::istringstream ss(next_line("dims"));
        std::string key;
        long long nx = -1, ny = -1, nz = -1;
        ss >> key >> nx >> ny >> nz;
        if (key != "dims" || ss.fail() || nx < 1 || ny < 1 || nz < 1)
            throw IoError(path + ": malformed dims line (each dim must be >= 1)");
        h.nx = static_cast<std::size_t>(nx);
        h.ny = static_cast<std::size_t>(ny);
        h.nz = static_cast<std::size_t>(nz);
    }
    {
        std::istringstream ss(next_line("voxel_mm"));
        std::string key;
        ss >> key >> h.voxel_mm;
        if (key != "voxel_mm" || ss.fail() || !(h.voxel_mm > 0))
            throw IoError(path + ": malformed voxel_mm line");
    }
    {
        std::istringstream ss(next_line("kind"));
        std::string key, val;
        ss >> key >> val;
        if (key != "kind" || ss.fail()) throw IoError(path + ": malformed kind line");
        h.kind = parse_kind(val, path);
    }
    if (next_line("byteorder") != "byteorder little")
        throw IoError(path + ": unsupported byte order");
    if (next_line("data") != "data") throw IoError(path + ": missing data marker");
    return h;
}

std::vector<unsigned char> read_payload(std::istream& in, const Header& h, const std::string& path) {
    const std::size_t want = h.nx * h.ny * h.nz * kind_size(h.kind);
    std::vector<unsigned char> buf(want);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(want));
    if (static_cast<std::size_t>(in.gcount()) != want)
        throw IoError(path + ": truncated payload, expected " + std::to_string(want) + " bytes");
    char extra;
    if (in.read(&extra, 1))
        throw IoError(path + ": trailing bytes after payload");
    return buf;
}

void write_file(const std::string& path, const Header& h, const std::vector<unsigned char>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_header(out, h);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace

void write_volume(const LabelVolume& v, const std::string& path) {
    validate_labels(v);
    Header h{v.labels.nx(), v.labels.ny(), v.labels.nz(), v.voxel_size_mm, VolumeKind::label_u16};
    std::vector<unsigned char> payload;
    payload.reserve(v.labels.size() * 2);
    for (std::size_t i = 0; i < v.labels.size(); ++i) put_u16_le(payload, v.labels[i]);
    write_file(path, h, payload);
}

void write_volume(const GridD& v, double voxel_mm, const std::string& path) {
    if (v.empty()) throw DomainError("refusing to write empty volume");
    Header h{v.nx(), v.ny(), v.nz(), voxel_mm, VolumeKind::real_f64};
    std::vector<unsigned char> payload;
    payload.reserve(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) put_f64_le(payload, v[i]);
    write_file(path, h, payload);
}

void write_volume(const GridC& v, double voxel_mm, const std::string& path) {
    if (v.empty()) throw DomainError("refusing to write empty volume");
    Header h{v.nx(), v.ny(), v.nz(), voxel_mm, VolumeKind::complex_f64};
    std::vector<unsigned char> payload;
    payload.reserve(v.size() * 16);
    for (std::size_t i = 0; i < v.size(); ++i) {
        put_f64_le(payload, v[i].real());
        put_f64_le(payload, v[i].imag());
    }
    write_file(path, h, payload);
}

VolumeKind peek_volume_kind(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_header(in, path).kind;
}

LabelVolume read_label_volume(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    Header h = read_header(in, path);
    if (h.kind != VolumeKind::label_u16)
        throw IoError(path + ": expected label-u16 volume, found " + kind_name(h.kind));
    auto payload = read_payload(in, h, path);

    LabelVolume v;
    v.voxel_size_mm = h.voxel_mm;
    v.labels = GridU8(h.nx, h.ny, h.nz, 0);
    for (std::size_t i = 0; i < v.labels.size(); ++i) {
        const std::uint16_t raw = get_u16_le(payload.data() + 2 * i);
        if (raw > kNumTissues)
            throw IoError(path + ": label " + std::to_string(raw) + " out of range 0..13 at index " +
                          std::to_string(i));
        v.labels[i] = static_cast<std::uint8_t>(raw);
    }
    return v;
}

GridD read_real_volume(const std::string& path, double* voxel_mm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    Header h = read_header(in, path);
    if (h.kind != VolumeKind::real_f64)
        throw IoError(path + ": expected real-f64 volume, found " + kind_name(h.kind));
    auto payload = read_payload(in, h, path);
    if (voxel_mm) *voxel_mm = h.voxel_mm;

    GridD v(h.nx, h.ny, h.nz);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = get_f64_le(payload.data() + 8 * i);
    return v;
}

GridC read_complex_volume(const std::string& path, double* voxel_mm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    Header h = read_header(in, path);
    if (h.kind != VolumeKind::complex_f64)
        throw IoError(path + ": expected complex-f64 volume, found " + kind_name(h.kind));
    auto payload = read_payload(in, h, path);
    if (voxel_mm) *voxel_mm = h.voxel_mm;

    GridC v(h.nx, h.ny, h.nz);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = {get_f64_le(payload.data() + 16 * i), get_f64_le(payload.data() + 16 * i + 8)};
    return v;
}

} // namespace rfdose
