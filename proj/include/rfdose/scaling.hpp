#pragma once

#include "rfdose/tissue.hpp"

namespace rfdose {

// Forward map: s~ = (1-tau_s) * s / max_s
//              e~ = (1-tau_e) * (e - 1) / max_e
//              r~ = (1-tau_r) * r / max_r
// max_e stores the tissue-table maximum of epsilon itself, not epsilon - 1.
struct ScalingParams {
    double tau_sigma = 0.1, tau_epsilon = 0.1, tau_rho = 0.1;
    double max_sigma = 0.0, max_epsilon = 0.0, max_rho = 0.0;

    static ScalingParams for_band(Band band, double tau = 0.1,
                                  const TissueTable& table = TissueTable::builtin());
    void validate() const;
};

struct NormalizedMaps {
    GridD sigma;
    GridD epsilon;
    GridD rho;
    Band band = Band::f900MHz;
    double voxel_size_mm = 1.0;
};

NormalizedMaps normalize_properties(const PropertyMaps& maps, const ScalingParams& params);
PropertyMaps rescale_properties(const NormalizedMaps& norm, const ScalingParams& params);

// Z-score over all voxels, then affine min-max to [0,1]. Constant volumes
// have no defined scale and are rejected.
MriVolume normalize_mri(const MriVolume& volume);

} // namespace rfdose
