#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfdose/adam.hpp"
#include "rfdose/condnet.hpp"
#include "rfdose/scaling.hpp"

namespace rfdose {

enum class Orientation { axial, sagittal, coronal };

std::string orientation_name(Orientation o);

// Slice conventions, with V(x, y, z):
//   axial[k](r, c)    = V(c, r, k)
//   coronal[k](r, c)  = V(c, k, r)
//   sagittal[k](r, c) = V(k, c, r)
// so axial[k][i][j] == coronal[i][k][j] at shared voxels. Volumes must be
// cubes; slices come back stacked along the batch axis as [K,1,S,S].
Tensor extract_slices(const GridD& volume, Orientation o);
void restack_slices(const Tensor& slices, Orientation o, GridD& volume);

// Center pad/crop to an S-cube (zero fill), for volumes not natively 2^m.
GridD pad_crop_cube(const GridD& v, std::size_t S);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 4;
    AdamConfig adam; // lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8
    std::uint64_t seed = 0;
    Orientation orientation = Orientation::axial;
    long long max_steps = 0;   // 0 = no cap
    std::size_t max_slices = 0; // 0 = use every slice; else first N in dataset order
};

struct Subject {
    MriVolume t1; // normalized per normalize_mri
    MriVolume t2;
    NormalizedMaps targets;
};

struct TracePoint {
    int epoch = 0;
    long long step = 0;
    double loss = 0.0;
};

// Trains in place; returns the loss trace. Deterministic given (net, config).
// Divergence (non-finite loss) raises ConvergenceError.
std::vector<TracePoint> train(CondNet& net, const std::vector<Subject>& dataset,
                              const TrainConfig& config);

struct SubjectEstimate {
    NormalizedMaps averaged; // mean of the three orientation outputs, pre-rescale
    PropertyMaps rescaled;
};

SubjectEstimate estimate_subject(CondNet& net_axial, CondNet& net_sagittal, CondNet& net_coronal,
                                 const MriVolume& t1, const MriVolume& t2,
                                 const ScalingParams& params, Band band);

} // namespace rfdose
