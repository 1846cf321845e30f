#include "rfdose/training.hpp"

#include <algorithm>
#include <cmath>

namespace rfdose {

std::string orientation_name(Orientation o) {
    switch (o) {
        case Orientation::axial: return "axial";
        case Orientation::sagittal: return "sagittal";
        case Orientation::coronal: return "coronal";
    }
    return "?";
}

namespace {

std::size_t cube_side(const GridD& v) {
    if (v.nx() != v.ny() || v.ny() != v.nz() || v.nx() == 0)
        throw DomainError("slicing needs a cube volume, got " + std::to_string(v.nx()) + "x" +
                          std::to_string(v.ny()) + "x" + std::to_string(v.nz()));
    return v.nx();
}

// Voxel hit by slice k at (row, col) for the given orientation.
inline void slice_coords(Orientation o, std::size_t k, std::size_t r, std::size_t c,
                         std::size_t& x, std::size_t& y, std::size_t& z) {
    switch (o) {
        case Orientation::axial: x = c; y = r; z = k; return;
        case Orientation::coronal: x = c; y = k; z = r; return;
        case Orientation::sagittal: x = k; y = c; z = r; return;
    }
    x = y = z = 0;
}

} // namespace

Tensor extract_slices(const GridD& volume, Orientation o) {
    const std::size_t S = cube_side(volume);
    Tensor out(S, 1, S, S);
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t r = 0; r < S; ++r)
            for (std::size_t c = 0; c < S; ++c) {
                std::size_t x, y, z;
                slice_coords(o, k, r, c, x, y, z);
                out.at(k, 0, r, c) = volume(x, y, z);
            }
    return out;
}

void restack_slices(const Tensor& slices, Orientation o, GridD& volume) {
    const std::size_t S = cube_side(volume);
    if (slices.n != S || slices.c != 1 || slices.h != S || slices.w != S)
        throw DomainError("restack expected " + std::to_string(S) + "x1x" + std::to_string(S) +
                          "x" + std::to_string(S) + " slices, got " + slices.shape_str());
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t r = 0; r < S; ++r)
            for (std::size_t c = 0; c < S; ++c) {
                std::size_t x, y, z;
                slice_coords(o, k, r, c, x, y, z);
                volume(x, y, z) = slices.at(k, 0, r, c);
            }
}

GridD pad_crop_cube(const GridD& v, std::size_t S) {
    GridD out(S, S, S, 0.0);
    for (std::size_t z = 0; z < S; ++z) {
        const long long sz = static_cast<long long>(z) -
                             (static_cast<long long>(S) - static_cast<long long>(v.nz())) / 2;
        if (sz < 0 || sz >= static_cast<long long>(v.nz())) continue;
        for (std::size_t y = 0; y < S; ++y) {
            const long long sy = static_cast<long long>(y) -
                                 (static_cast<long long>(S) - static_cast<long long>(v.ny())) / 2;
            if (sy < 0 || sy >= static_cast<long long>(v.ny())) continue;
            for (std::size_t x = 0; x < S; ++x) {
                const long long sx = static_cast<long long>(x) -
                                     (static_cast<long long>(S) - static_cast<long long>(v.nx())) / 2;
                if (sx < 0 || sx >= static_cast<long long>(v.nx())) continue;
                out(x, y, z) = v(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy),
                                 static_cast<std::size_t>(sz));
            }
        }
    }
    return out;
}

namespace {

Tensor gather_batch(const Tensor& slices, const std::vector<std::size_t>& rows) {
    Tensor out(rows.size(), slices.c, slices.h, slices.w);
    const std::size_t plane = slices.c * slices.h * slices.w;
    for (std::size_t b = 0; b < rows.size(); ++b)
        std::copy(slices.v.begin() + static_cast<std::ptrdiff_t>(rows[b] * plane),
                  slices.v.begin() + static_cast<std::ptrdiff_t>((rows[b] + 1) * plane),
                  out.v.begin() + static_cast<std::ptrdiff_t>(b * plane));
    return out;
}

struct SlicedSubject {
    Tensor t1, t2, sig, eps, rho;
};

} // namespace

std::vector<TracePoint> train(CondNet& net, const std::vector<Subject>& dataset,
                              const TrainConfig& config) {
    if (dataset.empty()) throw DomainError("training dataset is empty");
    if (config.epochs < 0) throw DomainError("epochs must be >= 0");
    if (config.batch_size < 1) throw DomainError("batch size must be >= 1");
    if (!(config.adam.lr > 0)) throw DomainError("learning rate must be > 0");

    const std::size_t S = net.input_size();
    auto all_finite = [](const GridD& g) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!std::isfinite(g[i])) return false;
        return true;
    };
    std::vector<SlicedSubject> sliced;
    for (const Subject& s : dataset) {
        if (s.t1.intensities.nx() != S || !s.t1.intensities.same_shape(s.t2.intensities) ||
            !s.t1.intensities.same_shape(s.targets.sigma))
            throw DomainError("subject volumes must be " + std::to_string(S) + "-cubes");
        // A NaN voxel would poison a batch-norm channel and then vanish behind
        // the ReLU, so data is vetted here rather than trusted to blow up.
        if (!all_finite(s.t1.intensities) || !all_finite(s.t2.intensities) ||
            !all_finite(s.targets.sigma) || !all_finite(s.targets.epsilon) ||
            !all_finite(s.targets.rho))
            throw DomainError("subject " + std::to_string(sliced.size()) +
                              " contains non-finite voxels");
        SlicedSubject ss;
        ss.t1 = extract_slices(s.t1.intensities, config.orientation);
        ss.t2 = extract_slices(s.t2.intensities, config.orientation);
        ss.sig = extract_slices(s.targets.sigma, config.orientation);
        ss.eps = extract_slices(s.targets.epsilon, config.orientation);
        ss.rho = extract_slices(s.targets.rho, config.orientation);
        sliced.push_back(std::move(ss));
    }

    std::vector<std::pair<std::size_t, std::size_t>> order; // (subject, slice)
    for (std::size_t si = 0; si < sliced.size(); ++si)
        for (std::size_t k = 0; k < S; ++k) order.emplace_back(si, k);
    if (config.max_slices > 0 && config.max_slices < order.size())
        order.resize(config.max_slices);

    AdamState adam(net.params());
    std::vector<TracePoint> trace;
    Rng shuffle_rng(derive_seed(config.seed, "train.shuffle"));
    long long step = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        for (std::size_t base = 0; base < order.size();
             base += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t take =
                std::min(order.size() - base, static_cast<std::size_t>(config.batch_size));
            // Batches are assembled per subject so slice tensors can be
            // gathered in one pass each.
            Tensor bt1(take, 1, S, S), bt2(take, 1, S, S);
            Tensor bsig(take, 1, S, S), beps(take, 1, S, S), brho(take, 1, S, S);
            const std::size_t plane = S * S;
            for (std::size_t b = 0; b < take; ++b) {
                const auto [si, k] = order[base + b];
                const SlicedSubject& ss = sliced[si];
                auto copy_row = [&](const Tensor& src, Tensor& dst) {
                    std::copy(src.v.begin() + static_cast<std::ptrdiff_t>(k * plane),
                              src.v.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane),
                              dst.v.begin() + static_cast<std::ptrdiff_t>(b * plane));
                };
                copy_row(ss.t1, bt1);
                copy_row(ss.t2, bt2);
                copy_row(ss.sig, bsig);
                copy_row(ss.eps, beps);
                copy_row(ss.rho, brho);
            }

            double loss;
            try {
                loss = net.loss_and_gradients(bt1, bt2, {bsig, beps, brho});
            } catch (const NumericError& e) {
                throw ConvergenceError("training diverged at epoch " + std::to_string(epoch) +
                                       " step " + std::to_string(step + 1) + ": " + e.what());
            }
            adam.step(net.params(), config.adam);
            ++step;
            trace.push_back({epoch, step, loss});
            if (config.max_steps > 0 && step >= config.max_steps) return trace;
        }
    }
    return trace;
}

SubjectEstimate estimate_subject(CondNet& net_axial, CondNet& net_sagittal, CondNet& net_coronal,
                                 const MriVolume& t1, const MriVolume& t2,
                                 const ScalingParams& params, Band band) {
    const std::size_t S = net_axial.input_size();
    if (net_sagittal.input_size() != S || net_coronal.input_size() != S)
        throw DomainError("orientation networks disagree on input size");
    if (t1.intensities.nx() != S || cube_side(t1.intensities) != S ||
        !t1.intensities.same_shape(t2.intensities))
        throw DomainError("estimate needs " + std::to_string(S) + "-cube T1/T2 volumes");

    NormalizedMaps acc;
    acc.band = band;
    acc.voxel_size_mm = t1.voxel_size_mm;
    acc.sigma = GridD(S, S, S, 0.0);
    acc.epsilon = GridD(S, S, S, 0.0);
    acc.rho = GridD(S, S, S, 0.0);

    struct OrientNet {
        CondNet* net;
        Orientation o;
    };
    const OrientNet runs[3] = {{&net_axial, Orientation::axial},
                               {&net_sagittal, Orientation::sagittal},
                               {&net_coronal, Orientation::coronal}};
    const std::size_t chunk = 8;
    for (const OrientNet& run : runs) {
        Tensor st1 = extract_slices(t1.intensities, run.o);
        Tensor st2 = extract_slices(t2.intensities, run.o);
        Tensor osig(S, 1, S, S), oeps(S, 1, S, S), orho(S, 1, S, S);
        const std::size_t plane = S * S;
        for (std::size_t base = 0; base < S; base += chunk) {
            std::vector<std::size_t> rows;
            for (std::size_t k = base; k < std::min(S, base + chunk); ++k) rows.push_back(k);
            Tensor bt1 = gather_batch(st1, rows);
            Tensor bt2 = gather_batch(st2, rows);
            std::vector<Tensor> outs = run.net->forward(bt1, bt2, false);
            for (std::size_t b = 0; b < rows.size(); ++b) {
                auto scatter = [&](const Tensor& src, Tensor& dst) {
                    std::copy(src.v.begin() + static_cast<std::ptrdiff_t>(b * plane),
                              src.v.begin() + static_cast<std::ptrdiff_t>((b + 1) * plane),
                              dst.v.begin() + static_cast<std::ptrdiff_t>(rows[b] * plane));
                };
                scatter(outs[0], osig);
                scatter(outs[1], oeps);
                scatter(outs[2], orho);
            }
        }
        GridD vsig(S, S, S), veps(S, S, S), vrho(S, S, S);
        restack_slices(osig, run.o, vsig);
        restack_slices(oeps, run.o, veps);
        restack_slices(orho, run.o, vrho);
        for (std::size_t i = 0; i < acc.sigma.size(); ++i) {
            acc.sigma[i] += vsig[i] / 3.0;
            acc.epsilon[i] += veps[i] / 3.0;
            acc.rho[i] += vrho[i] / 3.0;
        }
    }

    SubjectEstimate est;
    est.rescaled = rescale_properties(acc, params);
    est.averaged = std::move(acc);
    return est;
}

} // namespace rfdose
