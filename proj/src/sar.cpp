#include "rfdose/sar.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "rfdose/errors.hpp"

namespace rfdose {

namespace {

constexpr double kAveragingMassKg = 0.010;

void require_same_dims(const GridD& a, const GridD& b, const char* what) {
    if (a.nx() != b.nx() || a.ny() != b.ny() || a.nz() != b.nz())
        throw DomainError(std::string(what) + " dimensions disagree");
}

} // namespace

SarVolume point_sar(const PhasorField& ph, const PropertyMaps& maps) {
    if (ph.ex.empty() || ph.ey.empty() || ph.ez.empty())
        throw DomainError("point SAR needs voxel-centered field phasors");
    if (ph.ex.nx() != maps.sigma.nx() || ph.ex.ny() != maps.sigma.ny() ||
        ph.ex.nz() != maps.sigma.nz())
        throw DomainError("field phasors and property maps have different dimensions");
    require_same_dims(maps.sigma, maps.rho, "property map");
    const double pitch_m = maps.voxel_size_mm * 1e-3;
    if (!(pitch_m > 0.0) || std::fabs(ph.delta - pitch_m) > 1e-9 * pitch_m)
        throw DomainError("field phasors and property maps have different voxel pitch");

    SarVolume out;
    out.sar = GridD(maps.sigma.nx(), maps.sigma.ny(), maps.sigma.nz(), 0.0);
    out.mask = GridU8(maps.sigma.nx(), maps.sigma.ny(), maps.sigma.nz(), 0);
    out.voxel_size_mm = maps.voxel_size_mm;
    out.freq_hz = ph.freq;

    for (std::size_t i = 0; i < out.sar.size(); ++i) {
        const double sigma = maps.sigma[i];
        const double rho = maps.rho[i];
        if (!std::isfinite(sigma) || !std::isfinite(rho) || sigma < 0.0 || rho < 0.0)
            throw DomainError("property maps carry a negative or non-finite value");
        if (rho > 0.0) {
            const double e_rms_sq =
                0.5 * (std::norm(ph.ex[i]) + std::norm(ph.ey[i]) + std::norm(ph.ez[i]));
            out.sar[i] = sigma / rho * e_rms_sq;
            out.mask[i] = 1;
        } else if (sigma > 0.0) {
            throw DomainError("conductive voxel with zero density at linear index " +
                              std::to_string(i));
        }
    }
    return out;
}

AveragedSar sar_10g_cubic(const SarVolume& sv, const GridD& rho) {
    require_same_dims(sv.sar, rho, "SAR and density");
    if (!(sv.voxel_size_mm > 0.0)) throw DomainError("SAR volume has no voxel pitch");
    const double pitch_m = sv.voxel_size_mm * 1e-3;
    const double cell_m3 = pitch_m * pitch_m * pitch_m;

    double total_kg = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const bool tissue = sv.mask[i] != 0;
        if (tissue != (rho[i] > 0.0))
            throw DomainError("tissue mask and density map disagree");
        if (tissue) total_kg += rho[i] * cell_m3;
    }
    if (total_kg < kAveragingMassKg)
        throw DomainError("total tissue mass " + std::to_string(total_kg * 1e3) +
                          " g is below the 10 g averaging window");

    const long long nx = static_cast<long long>(sv.sar.nx());
    const long long ny = static_cast<long long>(sv.sar.ny());
    const long long nz = static_cast<long long>(sv.sar.nz());

    AveragedSar out;
    out.sar = GridD(sv.sar.nx(), sv.sar.ny(), sv.sar.nz(), 0.0);
    out.cube_side = Grid3<std::uint16_t>(sv.sar.nx(), sv.sar.ny(), sv.sar.nz(), 0);
    out.clipped = GridU8(sv.sar.nx(), sv.sar.ny(), sv.sar.nz(), 0);
    out.voxel_size_mm = sv.voxel_size_mm;

    // The total-mass check above guarantees the growth below terminates.
    // Sums run over the in-domain cube in linear index order so results do
    // not depend on how the outer loop is scheduled.
#pragma omp parallel for collapse(2) schedule(static)
    for (long long cz = 0; cz < nz; ++cz)
        for (long long cy = 0; cy < ny; ++cy)
            for (long long cx = 0; cx < nx; ++cx) {
                if (!sv.mask(cx, cy, cz)) continue;
                for (long long s = 1;; s += 2) {
                    const long long h = (s - 1) / 2;
                    const long long x0 = std::max(cx - h, 0LL), x1 = std::min(cx + h, nx - 1);
                    const long long y0 = std::max(cy - h, 0LL), y1 = std::min(cy + h, ny - 1);
                    const long long z0 = std::max(cz - h, 0LL), z1 = std::min(cz + h, nz - 1);
                    double num = 0.0, den = 0.0;
                    for (long long k = z0; k <= z1; ++k)
                        for (long long j = y0; j <= y1; ++j)
                            for (long long i = x0; i <= x1; ++i) {
                                if (!sv.mask(i, j, k)) continue;
                                const double m = rho(i, j, k) * cell_m3;
                                num += sv.sar(i, j, k) * m;
                                den += m;
                            }
                    if (den >= kAveragingMassKg) {
                        out.sar(cx, cy, cz) = num / den;
                        out.cube_side(cx, cy, cz) = static_cast<std::uint16_t>(s);
                        out.clipped(cx, cy, cz) =
                            (cx - h < 0 || cx + h >= nx || cy - h < 0 || cy + h >= ny ||
                             cz - h < 0 || cz + h >= nz)
                                ? 1
                                : 0;
                        break;
                    }
                }
            }

    bool found = false;
    for (std::size_t i = 0; i < out.sar.size(); ++i) {
        if (!sv.mask[i]) continue;
        if (!found || out.sar[i] > out.pssar) {
            found = true;
            out.pssar = out.sar[i];
            const std::size_t plane = sv.sar.nx() * sv.sar.ny();
            out.pssar_z = i / plane;
            out.pssar_y = (i % plane) / sv.sar.nx();
            out.pssar_x = i % sv.sar.nx();
        }
    }
    return out;
}

double abs_error(const SarVolume& a, const SarVolume& b) {
    require_same_dims(a.sar, b.sar, "SAR volume");
    std::size_t count = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.sar.size(); ++i) {
        const bool ta = a.mask[i] != 0, tb = b.mask[i] != 0;
        if (ta != tb) throw DomainError("SAR volumes have different tissue masks");
        if (!ta) continue;
        sum += std::fabs(a.sar[i] - b.sar[i]);
        ++count;
    }
    if (count == 0) throw DomainError("SAR comparison over an empty tissue mask");
    return sum / static_cast<double>(count);
}

double rel_error_pssar(double pssar_std, double pssar_learned) {
    if (!(pssar_std > 0.0)) throw DomainError("reference peak SAR must be positive");
    return std::fabs(pssar_std - pssar_learned) / pssar_std;
}

} // namespace rfdose
