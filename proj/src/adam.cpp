#include "rfdose/adam.hpp"

#include <cmath>

namespace rfdose {

AdamState::AdamState(const std::vector<Param*>& params) {
    for (const Param* p : params) {
        sizes_.push_back(p->value.size());
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void AdamState::step(const std::vector<Param*>& params, const AdamConfig& cfg) {
    if (params.size() != sizes_.size())
        throw DomainError("adam state built for a different parameter set");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        if (p.value.size() != sizes_[pi])
            throw DomainError("adam state shape mismatch for " + p.name);
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.v[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace rfdose
