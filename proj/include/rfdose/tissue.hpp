#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfdose/errors.hpp"
#include "rfdose/grid3.hpp"

namespace rfdose {

// Working frequencies. Only these three exist in the tissue table; there is
// no dispersion model to interpolate between them.
enum class Band { f900MHz, f1800MHz, f3000MHz };

constexpr int kNumTissues = 13;

double band_hz(Band b);
double band_ghz(Band b);
Band parse_band(const std::string& text); // accepts "0.9", "1.8", "3.0" (GHz)
std::string band_name(Band b);

struct TissueEntry {
    int id = 0; // 1..13
    std::string name;
    double rho = 0.0;                  // kg/m^3
    std::array<double, 3> sigma{};     // S/m, indexed by Band
    std::array<double, 3> epsilon{};   // relative, indexed by Band
};

struct TissueProperties {
    double sigma = 0.0;
    double epsilon = 1.0;
    double rho = 0.0;
};

class TissueTable {
public:
    static const TissueTable& builtin();
    static TissueTable load(const std::string& path);

    const TissueEntry& entry(int tissue_id) const;
    TissueProperties lookup(int tissue_id, Band band) const;
    const std::vector<TissueEntry>& entries() const { return entries_; }

    double max_sigma(Band band) const;
    double max_epsilon(Band band) const; // max of epsilon itself, not epsilon-1
    double max_rho() const;

private:
    explicit TissueTable(std::vector<TissueEntry> entries);
    void validate() const;
    std::vector<TissueEntry> entries_;
};

TissueProperties lookup_properties(int tissue_id, Band band);

struct LabelVolume {
    GridU8 labels;
    double voxel_size_mm = 1.0;
};

struct MriVolume {
    GridD intensities;
    double voxel_size_mm = 1.0;
};

struct PropertyMaps {
    GridD sigma;   // S/m
    GridD epsilon; // relative
    GridD rho;     // kg/m^3
    Band band = Band::f900MHz;
    double voxel_size_mm = 1.0;
};

// Air voxels get (0, 1, 0). Rho 0 makes any SAR division on air blow up
// visibly instead of producing a plausible number.
PropertyMaps assign_properties(const LabelVolume& labels, Band band,
                               const TissueTable& table = TissueTable::builtin());

struct TissueStat {
    int tissue_id = 0;
    std::size_t count = 0;
    double mean_sigma = 0.0, std_sigma = 0.0;
    double mean_epsilon = 0.0, std_epsilon = 0.0;
    double mean_rho = 0.0, std_rho = 0.0;
};

// Population std (divide by N). Labels with zero voxels keep count == 0 and
// must be treated as absent, not as zero-valued.
std::vector<TissueStat> tissue_stats(const PropertyMaps& maps, const LabelVolume& labels);

void validate_labels(const LabelVolume& labels);

} // namespace rfdose
