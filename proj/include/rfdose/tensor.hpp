#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "rfdose/errors.hpp"

namespace rfdose {

// NCHW tensor of 64-bit reals. Layer math stays in doubles so the
// finite-difference gradient checks have headroom.
struct Tensor {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), v(n_ * c_ * h_ * w_, fill) {}

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    std::size_t index(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
        return ((in * c + ic) * h + ih) * w + iw;
    }
    double& at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) {
        return v[index(in, ic, ih, iw)];
    }
    double at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
        return v[index(in, ic, ih, iw)];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// Channel concatenation and its adjoint (used by the graph code, where a node
// may have several parents).
Tensor concat_channels(const std::vector<const Tensor*>& parts);
std::vector<Tensor> split_channels(const Tensor& whole, const std::vector<std::size_t>& channel_counts);

void check_finite(const Tensor& t, const std::string& where);

} // namespace rfdose
