#pragma once

#include <cstddef>
#include <cstdint>

#include "rfdose/fdtd.hpp"
#include "rfdose/grid3.hpp"
#include "rfdose/tissue.hpp"

namespace rfdose {

// Voxelwise absorption rate. Defined only on the tissue mask; air stays zero.
struct SarVolume {
    GridD sar;    // W/kg
    GridU8 mask;  // 1 where rho > 0
    double voxel_size_mm = 0.0;
    double freq_hz = 0.0;
};

// Result of 10 g cubic averaging. The cube side is the odd voxel count the
// search settled on; clipped marks cubes that crossed the domain boundary
// before collecting 10 g of tissue.
struct AveragedSar {
    GridD sar;  // W/kg, zero off mask
    Grid3<std::uint16_t> cube_side;
    GridU8 clipped;
    double pssar = 0.0;
    std::size_t pssar_x = 0, pssar_y = 0, pssar_z = 0;
    double voxel_size_mm = 0.0;
};

// sigma/rho * |E_rms|^2 from peak phasors at voxel centers. Phasor and map
// dims and voxel pitch must agree; a conductive voxel with zero density is
// rejected rather than divided through.
SarVolume point_sar(const PhasorField& phasors, const PropertyMaps& maps);

// Smallest odd voxel-centered cube holding at least 10 g of tissue, grown
// symmetrically; parts of the cube beyond the domain count as air. The
// average is mass-weighted over the tissue voxels inside. Ties for the peak
// go to the lowest linear index.
AveragedSar sar_10g_cubic(const SarVolume& sar, const GridD& rho);

// Mean absolute difference over the shared tissue mask.
double abs_error(const SarVolume& a, const SarVolume& b);

// |a - b| / a with a as the reference peak.
double rel_error_pssar(double pssar_std, double pssar_learned);

} // namespace rfdose
