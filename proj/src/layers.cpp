#include "rfdose/layers.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rfdose {

namespace {

void init_fan_in(Tensor& w, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w.v) x = rng.uniform(-bound, bound);
}

// s is unsigned thoughout; "ih = oh*stride + kh - pad" taps are guarded by
// computing in signed space.
inline bool in_range(long long v, std::size_t n) {
    return v >= 0 && v < static_cast<long long>(n);
}

} // namespace

Conv2d::Conv2d(std::string name, std::size_t in_ch_, std::size_t out_ch_, std::size_t kernel_,
               std::size_t stride_, std::size_t pad_, Rng& rng)
    : in_ch(in_ch_), out_ch(out_ch_), kernel(kernel_), stride(stride_), pad(pad_) {
    weight.name = name + ".weight";
    weight.value = Tensor(out_ch, in_ch, kernel, kernel);
    weight.grad = Tensor(out_ch, in_ch, kernel, kernel);
    bias.name = name + ".bias";
    bias.value = Tensor(1, out_ch, 1, 1);
    bias.grad = Tensor(1, out_ch, 1, 1);
    init_fan_in(weight.value, in_ch * kernel * kernel, rng);
}

std::string Conv2d::describe() const {
    return "conv " + std::to_string(in_ch) + "->" + std::to_string(out_ch) + " k" +
           std::to_string(kernel) + " s" + std::to_string(stride) + " p" + std::to_string(pad);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    if (x.c != in_ch)
        throw DomainError("conv " + weight.name + ": expected " + std::to_string(in_ch) +
                          " channels, got " + x.shape_str());
    x_ = x;
    const std::size_t oh = (x.h + 2 * pad - kernel) / stride + 1;
    const std::size_t ow = (x.w + 2 * pad - kernel) / stride + 1;
    Tensor out(x.n, out_ch, oh, ow);

    const long long total = static_cast<long long>(x.n * out_ch);
#pragma omp parallel for schedule(static)
    for (long long ni = 0; ni < total; ++ni) {
        const std::size_t in = static_cast<std::size_t>(ni) / out_ch;
        const std::size_t oc = static_cast<std::size_t>(ni) % out_ch;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xw = 0; xw < ow; ++xw) {
                double acc = bias.value.v[oc];
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t kh = 0; kh < kernel; ++kh) {
                        const long long ih = static_cast<long long>(y * stride + kh) -
                                             static_cast<long long>(pad);
                        if (!in_range(ih, x.h)) continue;
                        for (std::size_t kw = 0; kw < kernel; ++kw) {
                            const long long iw = static_cast<long long>(xw * stride + kw) -
                                                 static_cast<long long>(pad);
                            if (!in_range(iw, x.w)) continue;
                            acc += weight.value.at(oc, ic, kh, kw) *
                                   x.at(in, ic, static_cast<std::size_t>(ih),
                                        static_cast<std::size_t>(iw));
                        }
                    }
                }
                out.at(in, oc, y, xw) = acc;
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& g) {
    const Tensor& x = x_;
    Tensor gin(x.n, x.c, x.h, x.w);

    // Bias and weight gradients: one thread owns one output channel, inner
    // sums run in a fixed order, so results do not depend on thread count.
#pragma omp parallel for schedule(static)
    for (long long occ = 0; occ < static_cast<long long>(out_ch); ++occ) {
        const auto oc = static_cast<std::size_t>(occ);
        double db = 0.0;
        for (std::size_t in = 0; in < g.n; ++in)
            for (std::size_t y = 0; y < g.h; ++y)
                for (std::size_t xw = 0; xw < g.w; ++xw) db += g.at(in, oc, y, xw);
        bias.grad.v[oc] += db;

        for (std::size_t ic = 0; ic < in_ch; ++ic) {
            for (std::size_t kh = 0; kh < kernel; ++kh) {
                for (std::size_t kw = 0; kw < kernel; ++kw) {
                    double dw = 0.0;
                    for (std::size_t in = 0; in < g.n; ++in) {
                        for (std::size_t y = 0; y < g.h; ++y) {
                            const long long ih = static_cast<long long>(y * stride + kh) -
                                                 static_cast<long long>(pad);
                            if (!in_range(ih, x.h)) continue;
                            for (std::size_t xw = 0; xw < g.w; ++xw) {
                                const long long iw = static_cast<long long>(xw * stride + kw) -
                                                     static_cast<long long>(pad);
                                if (!in_range(iw, x.w)) continue;
                                dw += g.at(in, oc, y, xw) *
                                      x.at(in, ic, static_cast<std::size_t>(ih),
                                           static_cast<std::size_t>(iw));
                            }
                        }
                    }
                    weight.grad.at(oc, ic, kh, kw) += dw;
                }
            }
        }
    }

    // Input gradient, gathered per input element.
    const long long total = static_cast<long long>(x.n * in_ch);
#pragma omp parallel for schedule(static)
    for (long long ni = 0; ni < total; ++ni) {
        const std::size_t in = static_cast<std::size_t>(ni) / in_ch;
        const std::size_t ic = static_cast<std::size_t>(ni) % in_ch;
        for (std::size_t ih = 0; ih < x.h; ++ih) {
            for (std::size_t iw = 0; iw < x.w; ++iw) {
                double acc = 0.0;
                for (std::size_t oc = 0; oc < out_ch; ++oc) {
                    for (std::size_t kh = 0; kh < kernel; ++kh) {
                        const long long num_h = static_cast<long long>(ih + pad) -
                                                static_cast<long long>(kh);
                        if (num_h < 0 || num_h % static_cast<long long>(stride) != 0) continue;
                        const long long oh = num_h / static_cast<long long>(stride);
                        if (!in_range(oh, g.h)) continue;
                        for (std::size_t kw = 0; kw < kernel; ++kw) {
                            const long long num_w = static_cast<long long>(iw + pad) -
                                                    static_cast<long long>(kw);
                            if (num_w < 0 || num_w % static_cast<long long>(stride) != 0) continue;
                            const long long ow = num_w / static_cast<long long>(stride);
                            if (!in_range(ow, g.w)) continue;
                            acc += g.at(in, oc, static_cast<std::size_t>(oh),
                                        static_cast<std::size_t>(ow)) *
                                   weight.value.at(oc, ic, kh, kw);
                        }
                    }
                }
                gin.at(in, ic, ih, iw) = acc;
            }
        }
    }
    return gin;
}

Deconv2d::Deconv2d(std::string name, std::size_t in_ch_, std::size_t out_ch_, std::size_t kernel_,
                   std::size_t stride_, std::size_t pad_, Rng& rng)
    : in_ch(in_ch_), out_ch(out_ch_), kernel(kernel_), stride(stride_), pad(pad_) {
    weight.name = name + ".weight";
    weight.value = Tensor(in_ch, out_ch, kernel, kernel);
    weight.grad = Tensor(in_ch, out_ch, kernel, kernel);
    bias.name = name + ".bias";
    bias.value = Tensor(1, out_ch, 1, 1);
    bias.grad = Tensor(1, out_ch, 1, 1);
    init_fan_in(weight.value, in_ch * kernel * kernel, rng);
}

std::string Deconv2d::describe() const {
    return "deconv " + std::to_string(in_ch) + "->" + std::to_string(out_ch) + " k" +
           std::to_string(kernel) + " s" + std::to_string(stride) + " p" + std::to_string(pad);
}

Tensor Deconv2d::forward(const Tensor& x, bool) {
    if (x.c != in_ch)
        throw DomainError("deconv " + weight.name + ": expected " + std::to_string(in_ch) +
                          " channels, got " + x.shape_str());
    x_ = x;
    const std::size_t oh = (x.h - 1) * stride + kernel - 2 * pad;
    const std::size_t ow = (x.w - 1) * stride + kernel - 2 * pad;
    Tensor out(x.n, out_ch, oh, ow);

    // Gather form: out(oh) sums x(ih) where ih*stride + kh - pad == oh.
    const long long total = static_cast<long long>(x.n * out_ch);
#pragma omp parallel for schedule(static)
    for (long long ni = 0; ni < total; ++ni) {
        const std::size_t in = static_cast<std::size_t>(ni) / out_ch;
        const std::size_t oc = static_cast<std::size_t>(ni) % out_ch;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xw = 0; xw < ow; ++xw) {
                double acc = bias.value.v[oc];
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t kh = 0; kh < kernel; ++kh) {
                        const long long num_h = static_cast<long long>(y + pad) -
                                                static_cast<long long>(kh);
                        if (num_h < 0 || num_h % static_cast<long long>(stride) != 0) continue;
                        const long long ih = num_h / static_cast<long long>(stride);
                        if (!in_range(ih, x.h)) continue;
                        for (std::size_t kw = 0; kw < kernel; ++kw) {
                            const long long num_w = static_cast<long long>(xw + pad) -
                                                    static_cast<long long>(kw);
                            if (num_w < 0 || num_w % static_cast<long long>(stride) != 0) continue;
                            const long long iw = num_w / static_cast<long long>(stride);
                            if (!in_range(iw, x.w)) continue;
                            acc += weight.value.at(ic, oc, kh, kw) *
                                   x.at(in, ic, static_cast<std::size_t>(ih),
                                        static_cast<std::size_t>(iw));
                        }
                    }
                }
                out.at(in, oc, y, xw) = acc;
            }
        }
    }
    return out;
}

Tensor Deconv2d::backward(const Tensor& g) {
    const Tensor& x = x_;
    Tensor gin(x.n, x.c, x.h, x.w);

#pragma omp parallel for schedule(static)
    for (long long occ = 0; occ < static_cast<long long>(out_ch); ++occ) {
        const auto oc = static_cast<std::size_t>(occ);
        double db = 0.0;
        for (std::size_t in = 0; in < g.n; ++in)
            for (std::size_t y = 0; y < g.h; ++y)
                for (std::size_t xw = 0; xw < g.w; ++xw) db += g.at(in, oc, y, xw);
        bias.grad.v[oc] += db;

        for (std::size_t ic = 0; ic < in_ch; ++ic) {
            for (std::size_t kh = 0; kh < kernel; ++kh) {
                for (std::size_t kw = 0; kw < kernel; ++kw) {
                    double dw = 0.0;
                    for (std::size_t in = 0; in < x.n; ++in) {
                        for (std::size_t ih = 0; ih < x.h; ++ih) {
                            const long long oh = static_cast<long long>(ih * stride + kh) -
                                                 static_cast<long long>(pad);
                            if (!in_range(oh, g.h)) continue;
                            for (std::size_t iw = 0; iw < x.w; ++iw) {
                                const long long ow = static_cast<long long>(iw * stride + kw) -
                                                     static_cast<long long>(pad);
                                if (!in_range(ow, g.w)) continue;
                                dw += x.at(in, ic, ih, iw) *
                                      g.at(in, oc, static_cast<std::size_t>(oh),
                                           static_cast<std::size_t>(ow));
                            }
                        }
                    }
                    weight.grad.at(ic, oc, kh, kw) += dw;
                }
            }
        }
    }

    // dL/dx is an ordinary strided convolution of g with the kernel.
    const long long total = static_cast<long long>(x.n * in_ch);
#pragma omp parallel for schedule(static)
    for (long long ni = 0; ni < total; ++ni) {
        const std::size_t in = static_cast<std::size_t>(ni) / in_ch;
        const std::size_t ic = static_cast<std::size_t>(ni) % in_ch;
        for (std::size_t ih = 0; ih < x.h; ++ih) {
            for (std::size_t iw = 0; iw < x.w; ++iw) {
                double acc = 0.0;
                for (std::size_t oc = 0; oc < out_ch; ++oc) {
                    for (std::size_t kh = 0; kh < kernel; ++kh) {
                        const long long oh = static_cast<long long>(ih * stride + kh) -
                                             static_cast<long long>(pad);
                        if (!in_range(oh, (x.h - 1) * stride + kernel - 2 * pad)) continue;
                        for (std::size_t kw = 0; kw < kernel; ++kw) {
                            const long long ow = static_cast<long long>(iw * stride + kw) -
                                                 static_cast<long long>(pad);
                            if (!in_range(ow, (x.w - 1) * stride + kernel - 2 * pad)) continue;
                            acc += g.at(in, oc, static_cast<std::size_t>(oh),
                                        static_cast<std::size_t>(ow)) *
                                   weight.value.at(ic, oc, kh, kw);
                        }
                    }
                }
                gin.at(in, ic, ih, iw) = acc;
            }
        }
    }
    return gin;
}

BatchNorm2d::BatchNorm2d(std::string name_, std::size_t channels_)
    : name(std::move(name_)), channels(channels_) {
    gamma.name = name + ".gamma";
    gamma.value = Tensor(1, channels, 1, 1, 1.0);
    gamma.grad = Tensor(1, channels, 1, 1);
    beta.name = name + ".beta";
    beta.value = Tensor(1, channels, 1, 1, 0.0);
    beta.grad = Tensor(1, channels, 1, 1);
    running_mean = Tensor(1, channels, 1, 1, 0.0);
    running_var = Tensor(1, channels, 1, 1, 1.0);
}

std::string BatchNorm2d::describe() const { return "bn c" + std::to_string(channels); }

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    if (x.c != channels)
        throw DomainError("bn " + gamma.name + ": expected " + std::to_string(channels) +
                          " channels, got " + x.shape_str());
    Tensor out(x.n, x.c, x.h, x.w);
    trained_forward_ = training;
    const std::size_t plane = x.h * x.w;
    const double m = static_cast<double>(x.n * plane);

    if (training) {
        xhat_ = Tensor(x.n, x.c, x.h, x.w);
        batch_mean_.assign(channels, 0.0);
        batch_inv_std_.assign(channels, 0.0);
#pragma omp parallel for schedule(static)
        for (long long cc = 0; cc < static_cast<long long>(channels); ++cc) {
            const auto ch = static_cast<std::size_t>(cc);
            double sum = 0.0;
            for (std::size_t in = 0; in < x.n; ++in) {
                const double* p = x.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double mean = sum / m;
            double sq = 0.0;
            for (std::size_t in = 0; in < x.n; ++in) {
                const double* p = x.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            const double var = sq / m;
            const double inv = 1.0 / std::sqrt(var + eps);
            batch_mean_[ch] = mean;
            batch_inv_std_[ch] = inv;
            running_mean.v[ch] = (1.0 - momentum) * running_mean.v[ch] + momentum * mean;
            running_var.v[ch] = (1.0 - momentum) * running_var.v[ch] + momentum * var;

            const double gm = gamma.value.v[ch], bt = beta.value.v[ch];
            for (std::size_t in = 0; in < x.n; ++in) {
                const double* p = x.v.data() + (in * channels + ch) * plane;
                double* xh = xhat_.v.data() + (in * channels + ch) * plane;
                double* o = out.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    xh[i] = (p[i] - mean) * inv;
                    o[i] = gm * xh[i] + bt;
                }
            }
        }
    } else {
#pragma omp parallel for schedule(static)
        for (long long cc = 0; cc < static_cast<long long>(channels); ++cc) {
            const auto ch = static_cast<std::size_t>(cc);
            const double inv = 1.0 / std::sqrt(running_var.v[ch] + eps);
            const double gm = gamma.value.v[ch], bt = beta.value.v[ch];
            const double mean = running_mean.v[ch];
            for (std::size_t in = 0; in < x.n; ++in) {
                const double* p = x.v.data() + (in * channels + ch) * plane;
                double* o = out.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) o[i] = gm * (p[i] - mean) * inv + bt;
            }
        }
        xhat_ = x; // inference backward only needs the affine slope
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& g) {
    Tensor gin(g.n, g.c, g.h, g.w);
    const std::size_t plane = g.h * g.w;
    const double m = static_cast<double>(g.n * plane);

#pragma omp parallel for schedule(static)
    for (long long cc = 0; cc < static_cast<long long>(channels); ++cc) {
        const auto ch = static_cast<std::size_t>(cc);
        if (trained_forward_) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t in = 0; in < g.n; ++in) {
                const double* gp = g.v.data() + (in * channels + ch) * plane;
                const double* xh = xhat_.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_g += gp[i];
                    sum_gx += gp[i] * xh[i];
                }
            }
            beta.grad.v[ch] += sum_g;
            gamma.grad.v[ch] += sum_gx;

            const double gm = gamma.value.v[ch];
            const double inv = batch_inv_std_[ch];
            const double mean_g = sum_g / m;
            const double mean_gx = sum_gx / m;
            for (std::size_t in = 0; in < g.n; ++in) {
                const double* gp = g.v.data() + (in * channels + ch) * plane;
                const double* xh = xhat_.v.data() + (in * channels + ch) * plane;
                double* gi = gin.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    gi[i] = gm * inv * (gp[i] - mean_g - xh[i] * mean_gx);
            }
        } else {
            const double slope = gamma.value.v[ch] / std::sqrt(running_var.v[ch] + eps);
            double sum_g = 0.0, sum_gx = 0.0;
            const double inv = 1.0 / std::sqrt(running_var.v[ch] + eps);
            const double mean = running_mean.v[ch];
            for (std::size_t in = 0; in < g.n; ++in) {
                const double* gp = g.v.data() + (in * channels + ch) * plane;
                const double* xp = xhat_.v.data() + (in * channels + ch) * plane;
                double* gi = gin.v.data() + (in * channels + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_g += gp[i];
                    sum_gx += gp[i] * (xp[i] - mean) * inv;
                    gi[i] = gp[i] * slope;
                }
            }
            beta.grad.v[ch] += sum_g;
            gamma.grad.v[ch] += sum_gx;
        }
    }
    return gin;
}

Tensor ReLU::forward(const Tensor& x, bool) {
    shape_ref_ = Tensor(x.n, x.c, x.h, x.w);
    mask_.assign(x.size(), 0);
    Tensor out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.v[i] > 0.0) {
            out.v[i] = x.v[i];
            mask_[i] = 1;
        }
    }
    return out;
}

Tensor ReLU::backward(const Tensor& g) {
    Tensor gin(g.n, g.c, g.h, g.w);
    for (std::size_t i = 0; i < g.size(); ++i) gin.v[i] = mask_[i] ? g.v[i] : 0.0;
    return gin;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
    Tensor out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
    y_ = out;
    return out;
}

Tensor Sigmoid::backward(const Tensor& g) {
    Tensor gin(g.n, g.c, g.h, g.w);
    for (std::size_t i = 0; i < g.size(); ++i) gin.v[i] = g.v[i] * y_.v[i] * (1.0 - y_.v[i]);
    return gin;
}

Tensor MaxPool2x2::forward(const Tensor& x, bool) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw DomainError("maxpool needs even spatial dims, got " + x.shape_str());
    in_n = x.n; in_c = x.c; in_h = x.h; in_w = x.w;
    const std::size_t oh = x.h / 2, ow = x.w / 2;
    Tensor out(x.n, x.c, oh, ow);
    argmax_.assign(out.size(), 0);
    for (std::size_t in = 0; in < x.n; ++in) {
        for (std::size_t ch = 0; ch < x.c; ++ch) {
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t xw = 0; xw < ow; ++xw) {
                    std::size_t best = x.index(in, ch, 2 * y, 2 * xw);
                    double bv = x.v[best];
                    for (int kh = 0; kh < 2; ++kh) {
                        for (int kw = 0; kw < 2; ++kw) {
                            const std::size_t idx =
                                x.index(in, ch, 2 * y + static_cast<std::size_t>(kh),
                                        2 * xw + static_cast<std::size_t>(kw));
                            if (x.v[idx] > bv) {
                                bv = x.v[idx];
                                best = idx;
                            }
                        }
                    }
                    const std::size_t oidx = out.index(in, ch, y, xw);
                    out.v[oidx] = bv;
                    argmax_[oidx] = best;
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2x2::backward(const Tensor& g) {
    Tensor gin(in_n, in_c, in_h, in_w);
    for (std::size_t i = 0; i < g.size(); ++i) gin.v[argmax_[i]] += g.v[i];
    return gin;
}

} // namespace rfdose
