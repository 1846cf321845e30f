#include "rfdose/tensor.hpp"

#include <cmath>

namespace rfdose {

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw DomainError("concat of zero tensors");
    const Tensor& first = *parts[0];
    std::size_t total_c = 0;
    for (const Tensor* p : parts) {
        if (p->n != first.n || p->h != first.h || p->w != first.w)
            throw DomainError("concat: mismatched shapes " + first.shape_str() + " vs " +
                              p->shape_str());
        total_c += p->c;
    }
    Tensor out(first.n, total_c, first.h, first.w);
    const std::size_t plane = first.h * first.w;
    for (std::size_t in = 0; in < first.n; ++in) {
        std::size_t oc = 0;
        for (const Tensor* p : parts) {
            const double* src = p->v.data() + in * p->c * plane;
            double* dst = out.v.data() + (in * total_c + oc) * plane;
            std::copy(src, src + p->c * plane, dst);
            oc += p->c;
        }
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& whole, const std::vector<std::size_t>& channel_counts) {
    std::size_t total = 0;
    for (std::size_t c : channel_counts) total += c;
    if (total != whole.c)
        throw DomainError("split: channel counts sum to " + std::to_string(total) + ", tensor has " +
                          std::to_string(whole.c));
    std::vector<Tensor> out;
    const std::size_t plane = whole.h * whole.w;
    std::size_t base = 0;
    for (std::size_t cc : channel_counts) {
        Tensor part(whole.n, cc, whole.h, whole.w);
        for (std::size_t in = 0; in < whole.n; ++in) {
            const double* src = whole.v.data() + (in * whole.c + base) * plane;
            std::copy(src, src + cc * plane, part.v.data() + in * cc * plane);
        }
        base += cc;
        out.push_back(std::move(part));
    }
    return out;
}

void check_finite(const Tensor& t, const std::string& where) {
    for (double x : t.v)
        if (!std::isfinite(x)) throw NumericError("non-finite activation in " + where);
}

} // namespace rfdose
