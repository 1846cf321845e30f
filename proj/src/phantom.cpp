#include "rfdose/phantom.hpp"

#include <cmath>

#include "rfdose/rng.hpp"

namespace rfdose {

PhantomSpec PhantomSpec::default_head(std::size_t n, double voxel_size_mm) {
    PhantomSpec spec;
    spec.nx = spec.ny = spec.nz = n;
    spec.voxel_size_mm = voxel_size_mm;
    const double half = 0.5 * static_cast<double>(n) * voxel_size_mm;
    spec.shells = {
        {12, 0.92 * half, 650, 280}, // skin
        {9, 0.86 * half, 900, 520},  // fat
        {3, 0.80 * half, 180, 80},   // cortical bone
        {7, 0.72 * half, 350, 950},  // CSF
        {4, 0.64 * half, 620, 420},  // grey matter
        {5, 0.42 * half, 480, 350},  // white matter
    };
    spec.axis_ratio_y = 1.0;
    spec.axis_ratio_z = 1.0;
    spec.noise_std = 20.0;
    return spec;
}

namespace {

void validate_spec(const PhantomSpec& spec) {
    if (spec.nx == 0 || spec.ny == 0 || spec.nz == 0)
        throw DomainError("phantom dims must be >= 1");
    if (spec.voxel_size_mm <= 0) throw DomainError("voxel size must be > 0");
    if (spec.shells.empty()) throw DomainError("phantom needs at least one shell");
    if (spec.noise_std < 0) throw DomainError("noise std must be >= 0");
    if (spec.axis_ratio_y <= 0 || spec.axis_ratio_z <= 0)
        throw DomainError("axis ratios must be > 0");
    for (std::size_t i = 0; i < spec.shells.size(); ++i) {
        const PhantomShell& sh = spec.shells[i];
        if (sh.tissue_id < 1 || sh.tissue_id > kNumTissues)
            throw DomainError("shell tissue id " + std::to_string(sh.tissue_id) + " out of range");
        if (sh.radius_mm <= 0) throw DomainError("shell radius must be > 0");
        if (i > 0 && !(sh.radius_mm < spec.shells[i - 1].radius_mm))
            throw DomainError("shell radii must be strictly decreasing inward");
    }
    const PhantomShell& outer = spec.shells.front();
    const double hx = 0.5 * static_cast<double>(spec.nx) * spec.voxel_size_mm;
    const double hy = 0.5 * static_cast<double>(spec.ny) * spec.voxel_size_mm;
    const double hz = 0.5 * static_cast<double>(spec.nz) * spec.voxel_size_mm;
    if (outer.radius_mm > hx || outer.radius_mm * spec.axis_ratio_y > hy ||
        outer.radius_mm * spec.axis_ratio_z > hz)
        throw DomainError("outer shell radius exceeds volume extent");
}

} // namespace

Phantom make_phantom(const PhantomSpec& spec) {
    validate_spec(spec);

    Phantom ph;
    ph.labels.voxel_size_mm = spec.voxel_size_mm;
    ph.t1.voxel_size_mm = spec.voxel_size_mm;
    ph.t2.voxel_size_mm = spec.voxel_size_mm;
    ph.labels.labels = GridU8(spec.nx, spec.ny, spec.nz, 0);
    ph.t1.intensities = GridD(spec.nx, spec.ny, spec.nz, 0.0);
    ph.t2.intensities = GridD(spec.nx, spec.ny, spec.nz, 0.0);

    const double cx = 0.5 * static_cast<double>(spec.nx);
    const double cy = 0.5 * static_cast<double>(spec.ny);
    const double cz = 0.5 * static_cast<double>(spec.nz);

    // A voxel takes the innermost shell whose ellipsoid contains its center.
    std::vector<int> shell_of(spec.nx * spec.ny * spec.nz, -1);
    for (std::size_t z = 0; z < spec.nz; ++z) {
        for (std::size_t y = 0; y < spec.ny; ++y) {
            for (std::size_t x = 0; x < spec.nx; ++x) {
                const double px = (static_cast<double>(x) + 0.5 - cx) * spec.voxel_size_mm;
                const double py = (static_cast<double>(y) + 0.5 - cy) * spec.voxel_size_mm;
                const double pz = (static_cast<double>(z) + 0.5 - cz) * spec.voxel_size_mm;
                int chosen = -1;
                for (std::size_t s = 0; s < spec.shells.size(); ++s) {
                    const double r = spec.shells[s].radius_mm;
                    const double dx = px / r;
                    const double dy = py / (r * spec.axis_ratio_y);
                    const double dz = pz / (r * spec.axis_ratio_z);
                    if (dx * dx + dy * dy + dz * dz <= 1.0) chosen = static_cast<int>(s);
                }
                const std::size_t i = ph.labels.labels.index(x, y, z);
                shell_of[i] = chosen;
                if (chosen >= 0)
                    ph.labels.labels[i] =
                        static_cast<std::uint8_t>(spec.shells[static_cast<std::size_t>(chosen)].tissue_id);
            }
        }
    }

    Rng rng_t1(derive_seed(spec.seed, "phantom.t1"));
    Rng rng_t2(derive_seed(spec.seed, "phantom.t2"));
    for (std::size_t i = 0; i < shell_of.size(); ++i) {
        double m1 = spec.air_t1_mean, m2 = spec.air_t2_mean;
        if (shell_of[i] >= 0) {
            const PhantomShell& sh = spec.shells[static_cast<std::size_t>(shell_of[i])];
            m1 = sh.t1_mean;
            m2 = sh.t2_mean;
        }
        ph.t1.intensities[i] = spec.noise_std > 0 ? rng_t1.normal(m1, spec.noise_std) : m1;
        ph.t2.intensities[i] = spec.noise_std > 0 ? rng_t2.normal(m2, spec.noise_std) : m2;
    }
    return ph;
}

} // namespace rfdose
