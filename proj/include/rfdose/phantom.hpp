#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "rfdose/tissue.hpp"

namespace rfdose {

struct PhantomShell {
    int tissue_id = 0;     // 1..13
    double radius_mm = 0;  // outer semi-axis along x; y,z scaled by axis_ratio_y/z
    double t1_mean = 0, t2_mean = 0;
};

// Concentric-ellipsoid head stand-in. Shells are listed outermost first with
// strictly decreasing radii; a voxel takes the innermost shell containing it.
struct PhantomSpec {
    std::size_t nx = 64, ny = 64, nz = 64;
    double voxel_size_mm = 1.0;
    std::vector<PhantomShell> shells;
    double axis_ratio_y = 1.0, axis_ratio_z = 1.0;
    double noise_std = 0.0;
    double air_t1_mean = 0.0, air_t2_mean = 0.0;
    std::uint64_t seed = 0;

    static PhantomSpec default_head(std::size_t n = 64, double voxel_size_mm = 1.0);
};

struct Phantom {
    LabelVolume labels;
    MriVolume t1;
    MriVolume t2;
};

Phantom make_phantom(const PhantomSpec& spec);

} // namespace rfdose
