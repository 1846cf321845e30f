#pragma once

#include <vector>

#include "rfdose/layers.hpp"

namespace rfdose {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected first and second moments per parameter element.
class AdamState {
public:
    explicit AdamState(const std::vector<Param*>& params);

    // Applies one update from the gradients currently stored in the params.
    void step(const std::vector<Param*>& params, const AdamConfig& cfg);

    long long t() const { return t_; }

private:
    std::vector<std::vector<double>> m_, v_;
    std::vector<std::size_t> sizes_;
    long long t_ = 0;
};

} // namespace rfdose
