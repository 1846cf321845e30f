#include "rfdose/scaling.hpp"

#include <algorithm>
#include <cmath>

namespace rfdose {

ScalingParams ScalingParams::for_band(Band band, double tau, const TissueTable& table) {
    ScalingParams p;
    p.tau_sigma = p.tau_epsilon = p.tau_rho = tau;
    p.max_sigma = table.max_sigma(band);
    p.max_epsilon = table.max_epsilon(band);
    p.max_rho = table.max_rho();
    p.validate();
    return p;
}

void ScalingParams::validate() const {
    auto check_tau = [](double t, const char* name) {
        if (!(t >= 0.0 && t < 1.0))
            throw DomainError(std::string(name) + " must lie in [0, 1)");
    };
    check_tau(tau_sigma, "tau_sigma");
    check_tau(tau_epsilon, "tau_epsilon");
    check_tau(tau_rho, "tau_rho");
    if (!(max_sigma > 0.0) || !(max_epsilon > 0.0) || !(max_rho > 0.0))
        throw DomainError("scaling maxima must be > 0");
}

NormalizedMaps normalize_properties(const PropertyMaps& maps, const ScalingParams& params) {
    params.validate();
    NormalizedMaps out;
    out.band = maps.band;
    out.voxel_size_mm = maps.voxel_size_mm;
    out.sigma = maps.sigma;
    out.epsilon = maps.epsilon;
    out.rho = maps.rho;

    const double ks = (1.0 - params.tau_sigma) / params.max_sigma;
    const double ke = (1.0 - params.tau_epsilon) / params.max_epsilon;
    const double kr = (1.0 - params.tau_rho) / params.max_rho;
    for (std::size_t i = 0; i < out.sigma.size(); ++i) {
        out.sigma[i] = maps.sigma[i] * ks;
        out.epsilon[i] = (maps.epsilon[i] - 1.0) * ke;
        out.rho[i] = maps.rho[i] * kr;
    }
    return out;
}

PropertyMaps rescale_properties(const NormalizedMaps& norm, const ScalingParams& params) {
    params.validate();
    PropertyMaps out;
    out.band = norm.band;
    out.voxel_size_mm = norm.voxel_size_mm;
    out.sigma = norm.sigma;
    out.epsilon = norm.epsilon;
    out.rho = norm.rho;

    const double ks = params.max_sigma / (1.0 - params.tau_sigma);
    const double ke = params.max_epsilon / (1.0 - params.tau_epsilon);
    const double kr = params.max_rho / (1.0 - params.tau_rho);
    for (std::size_t i = 0; i < out.sigma.size(); ++i) {
        if (!std::isfinite(norm.sigma[i]) || !std::isfinite(norm.epsilon[i]) ||
            !std::isfinite(norm.rho[i]))
            throw NumericError("non-finite value in normalized maps at index " + std::to_string(i));
        out.sigma[i] = norm.sigma[i] * ks;
        out.epsilon[i] = 1.0 + norm.epsilon[i] * ke;
        out.rho[i] = norm.rho[i] * kr;
    }
    return out;
}

MriVolume normalize_mri(const MriVolume& volume) {
    const GridD& v = volume.intensities;
    if (v.empty()) throw DomainError("mri volume is empty");

    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw NumericError("non-finite mri intensity");
        sum += v[i];
    }
    const double n = static_cast<double>(v.size());
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - mean;
        sq += d * d;
    }
    const double var = sq / n;
    if (var <= 0.0) throw DomainError("constant mri volume cannot be normalized");
    const double inv_std = 1.0 / std::sqrt(var);

    MriVolume out;
    out.voxel_size_mm = volume.voxel_size_mm;
    out.intensities = GridD(v.nx(), v.ny(), v.nz());
    double lo = (v[0] - mean) * inv_std, hi = lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double z = (v[i] - mean) * inv_std;
        out.intensities[i] = z;
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.intensities[i] = (out.intensities[i] - lo) / span;
    return out;
}

} // namespace rfdose
