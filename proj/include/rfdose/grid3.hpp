#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "rfdose/errors.hpp"

namespace rfdose {

// Dense 3-D array, x fastest, then y, then z. Linear index = x + nx*(y + ny*z).
template <typename T>
class Grid3 {
public:
    Grid3() : nx_(0), ny_(0), nz_(0) {}
    Grid3(std::size_t nx, std::size_t ny, std::size_t nz, T fill = T{})
        : nx_(nx), ny_(ny), nz_(nz), data_(nx * ny * nz, fill) {}

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + nx_ * (y + ny_ * z);
    }

    T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
    const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
        return data_[index(x, y, z)];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    bool same_shape(const Grid3<U>& o) const {
        return nx_ == o.nx() && ny_ == o.ny() && nz_ == o.nz();
    }

private:
    std::size_t nx_, ny_, nz_;
    std::vector<T> data_;
};

using GridF = Grid3<float>;
using GridD = Grid3<double>;
using GridU8 = Grid3<std::uint8_t>;
using GridC = Grid3<std::complex<double>>;

} // namespace rfdose
