#include "rfdose/tissue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rfdose {

double band_hz(Band b) {
    switch (b) {
        case Band::f900MHz: return 0.9e9;
        case Band::f1800MHz: return 1.8e9;
        case Band::f3000MHz: return 3.0e9;
    }
    throw DomainError("invalid band");
}

double band_ghz(Band b) { return band_hz(b) * 1e-9; }

Band parse_band(const std::string& text) {
    if (text == "0.9" || text == "900" || text == "0.9GHz" || text == "900MHz") return Band::f900MHz;
    if (text == "1.8" || text == "1800" || text == "1.8GHz" || text == "1800MHz") return Band::f1800MHz;
    if (text == "3.0" || text == "3" || text == "3000" || text == "3.0GHz" || text == "3000MHz") return Band::f3000MHz;
    throw UsageError("unknown frequency '" + text + "', expected 0.9, 1.8 or 3.0 (GHz)");
}

std::string band_name(Band b) {
    switch (b) {
        case Band::f900MHz: return "0.9";
        case Band::f1800MHz: return "1.8";
        case Band::f3000MHz: return "3.0";
    }
    return "?";
}

namespace {

std::vector<TissueEntry> builtin_entries() {
    // id, name, rho, {sigma @ 0.9/1.8/3.0 GHz}, {epsilon @ 0.9/1.8/3.0 GHz}
    return {
        {1, "Blood", 1050, {1.54, 2.04, 3.05}, {61.36, 59.37, 57.35}},
        {2, "Bone (Cancellous)", 1178, {0.34, 0.59, 1.01}, {20.79, 19.34, 17.94}},
        {3, "Bone (Cortical)", 1908, {0.14, 0.28, 0.51}, {12.45, 11.78, 11.07}},
        {4, "Brain (Grey Matter)", 1145, {0.94, 1.39, 2.22}, {52.73, 50.08, 48.05}},
        {5, "Brain (White Matter)", 1041, {0.59, 0.91, 1.51}, {38.89, 37.01, 35.54}},
        {6, "Cerebellum", 1045, {1.26, 1.71, 2.48}, {49.44, 46.11, 43.90}},
        {7, "Cerebro Spinal Fluid", 1007, {2.41, 2.92, 4.01}, {68.64, 67.20, 65.39}},
        {8, "Dura", 1174, {0.96, 1.32, 2.01}, {44.43, 42.89, 41.34}},
        {9, "Fat", 911, {0.05, 0.08, 0.13}, {5.46, 5.35, 5.22}},
        {10, "Mucous tissue", 1102, {0.84, 1.23, 1.95}, {46.08, 43.85, 42.11}},
        {11, "Muscle", 1090, {0.94, 1.34, 2.14}, {55.03, 53.55, 52.06}},
        {12, "Skin", 1109, {0.87, 1.18, 1.74}, {41.41, 38.87, 37.45}},
        {13, "Vitreous Humor", 1005, {1.64, 2.03, 2.96}, {68.90, 68.57, 67.82}},
    };
}

} // namespace

TissueTable::TissueTable(std::vector<TissueEntry> entries) : entries_(std::move(entries)) {
    validate();
}

void TissueTable::validate() const {
    if (entries_.size() != kNumTissues)
        throw DomainError("tissue table must have exactly 13 entries, got " +
                          std::to_string(entries_.size()));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const TissueEntry& e = entries_[i];
        if (e.id != static_cast<int>(i) + 1)
            throw DomainError("tissue ids must be 1..13 in order, entry " + std::to_string(i) +
                              " has id " + std::to_string(e.id));
        if (e.rho <= 0.0) throw DomainError("tissue '" + e.name + "': rho must be > 0");
        for (int f = 0; f < 3; ++f) {
            if (!(e.sigma[f] > 0.0)) throw DomainError("tissue '" + e.name + "': sigma must be > 0");
            if (!(e.epsilon[f] >= 1.0)) throw DomainError("tissue '" + e.name + "': epsilon must be >= 1");
        }
        for (int f = 0; f < 2; ++f) {
            if (e.sigma[f] > e.sigma[f + 1])
                throw DomainError("tissue '" + e.name + "': sigma must be non-decreasing in frequency");
            if (e.epsilon[f] < e.epsilon[f + 1])
                throw DomainError("tissue '" + e.name + "': epsilon must be non-increasing in frequency");
        }
    }
}

const TissueTable& TissueTable::builtin() {
    static const TissueTable table(builtin_entries());
    return table;
}

TissueTable TissueTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open tissue table '" + path + "'");
    std::vector<TissueEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '|')) fields.push_back(field);
        if (fields.size() != 9)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected 9 |-separated fields, got " +
                          std::to_string(fields.size()));
        TissueEntry e;
        try {
            e.id = std::stoi(fields[0]);
            e.name = fields[1];
            e.rho = std::stod(fields[2]);
            e.sigma = {std::stod(fields[3]), std::stod(fields[5]), std::stod(fields[7])};
            e.epsilon = {std::stod(fields[4]), std::stod(fields[6]), std::stod(fields[8])};
        } catch (const std::exception&) {
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed numeric field");
        }
        entries.push_back(std::move(e));
    }
    return TissueTable(std::move(entries));
}

const TissueEntry& TissueTable::entry(int tissue_id) const {
    if (tissue_id < 1 || tissue_id > kNumTissues)
        throw DomainError("tissue id " + std::to_string(tissue_id) + " out of range 1..13");
    return entries_[static_cast<std::size_t>(tissue_id - 1)];
}

TissueProperties TissueTable::lookup(int tissue_id, Band band) const {
    const TissueEntry& e = entry(tissue_id);
    const auto f = static_cast<std::size_t>(band);
    return {e.sigma[f], e.epsilon[f], e.rho};
}

double TissueTable::max_sigma(Band band) const {
    const auto f = static_cast<std::size_t>(band);
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, e.sigma[f]);
    return m;
}

double TissueTable::max_epsilon(Band band) const {
    const auto f = static_cast<std::size_t>(band);
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, e.epsilon[f]);
    return m;
}

double TissueTable::max_rho() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, e.rho);
    return m;
}

TissueProperties lookup_properties(int tissue_id, Band band) {
    return TissueTable::builtin().lookup(tissue_id, band);
}

void validate_labels(const LabelVolume& labels) {
    if (labels.labels.empty()) throw DomainError("label volume is empty");
    if (labels.voxel_size_mm <= 0.0) throw DomainError("voxel size must be > 0");
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (labels.labels[i] > kNumTissues)
            throw DomainError("label " + std::to_string(int(labels.labels[i])) +
                              " out of range 0..13 at linear index " + std::to_string(i));
    }
}

PropertyMaps assign_properties(const LabelVolume& labels, Band band, const TissueTable& table) {
    validate_labels(labels);
    const auto& g = labels.labels;
    PropertyMaps maps;
    maps.band = band;
    maps.voxel_size_mm = labels.voxel_size_mm;
    maps.sigma = GridD(g.nx(), g.ny(), g.nz(), 0.0);
    maps.epsilon = GridD(g.nx(), g.ny(), g.nz(), 1.0);
    maps.rho = GridD(g.nx(), g.ny(), g.nz(), 0.0);

    std::array<TissueProperties, kNumTissues + 1> lut;
    lut[0] = {0.0, 1.0, 0.0};
    for (int id = 1; id <= kNumTissues; ++id) lut[static_cast<std::size_t>(id)] = table.lookup(id, band);

    for (std::size_t i = 0; i < g.size(); ++i) {
        const TissueProperties& p = lut[g[i]];
        maps.sigma[i] = p.sigma;
        maps.epsilon[i] = p.epsilon;
        maps.rho[i] = p.rho;
    }
    return maps;
}

std::vector<TissueStat> tissue_stats(const PropertyMaps& maps, const LabelVolume& labels) {
    if (!maps.sigma.same_shape(labels.labels) || !maps.epsilon.same_shape(labels.labels) ||
        !maps.rho.same_shape(labels.labels))
        throw DomainError("property maps and label volume have different dims");

    struct Acc {
        std::size_t n = 0;
        double s1 = 0, s2 = 0, e1 = 0, e2 = 0, r1 = 0, r2 = 0;
    };
    std::array<Acc, kNumTissues + 1> acc{};
    const auto& g = labels.labels;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Acc& a = acc[g[i]];
        ++a.n;
        const double s = maps.sigma[i], e = maps.epsilon[i], r = maps.rho[i];
        a.s1 += s; a.s2 += s * s;
        a.e1 += e; a.e2 += e * e;
        a.r1 += r; a.r2 += r * r;
    }

    auto pop_std = [](double sum, double sumsq, std::size_t n) {
        const double mean = sum / static_cast<double>(n);
        const double var = sumsq / static_cast<double>(n) - mean * mean;
        return std::sqrt(std::max(var, 0.0));
    };

    std::vector<TissueStat> out;
    for (int id = 1; id <= kNumTissues; ++id) {
        const Acc& a = acc[static_cast<std::size_t>(id)];
        TissueStat st;
        st.tissue_id = id;
        st.count = a.n;
        if (a.n > 0) {
            const auto n = static_cast<double>(a.n);
            st.mean_sigma = a.s1 / n;
            st.mean_epsilon = a.e1 / n;
            st.mean_rho = a.r1 / n;
            st.std_sigma = pop_std(a.s1, a.s2, a.n);
            st.std_epsilon = pop_std(a.e1, a.e2, a.n);
            st.std_rho = pop_std(a.r1, a.r2, a.n);
        }
        out.push_back(st);
    }
    return out;
}

} // namespace rfdose
