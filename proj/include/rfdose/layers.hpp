#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rfdose/rng.hpp"
#include "rfdose/tensor.hpp"

namespace rfdose {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Every layer instance owns its forward cache, so each graph position needs
// its own instance. backward() must be called after forward() on the same
// input and accumulates parameter gradients (call zero_grads between batches).
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string describe() const = 0;
};

class Conv2d final : public Layer {
public:
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
           std::size_t stride, std::size_t pad, Rng& rng);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override { return {&weight, &bias}; }
    std::string describe() const override;

    Param weight; // [out_ch, in_ch, k, k]
    Param bias;   // [out_ch]
    std::size_t in_ch, out_ch, kernel, stride, pad;

private:
    Tensor x_;
};

// Transposed convolution. Output spatial size = (in - 1) * stride - 2 * pad + kernel.
class Deconv2d final : public Layer {
public:
    Deconv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
             std::size_t stride, std::size_t pad, Rng& rng);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override { return {&weight, &bias}; }
    std::string describe() const override;

    Param weight; // [in_ch, out_ch, k, k]
    Param bias;   // [out_ch]
    std::size_t in_ch, out_ch, kernel, stride, pad;

private:
    Tensor x_;
};

// Per-channel batch norm over (N, H, W). Training uses biased batch variance;
// running stats updated with momentum 0.1 and used verbatim in inference,
// where the layer is a fixed affine map.
class BatchNorm2d final : public Layer {
public:
    BatchNorm2d(std::string name, std::size_t channels);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override { return {&gamma, &beta}; }
    std::string describe() const override;

    Param gamma, beta;
    Tensor running_mean, running_var;
    std::string name;
    std::size_t channels;
    double eps = 1e-5;
    double momentum = 0.1;

private:
    bool trained_forward_ = false;
    Tensor xhat_;
    std::vector<double> batch_mean_, batch_inv_std_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "relu"; }

private:
    std::vector<unsigned char> mask_;
    Tensor shape_ref_;
};

class Sigmoid final : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "sigmoid"; }

private:
    Tensor y_;
};

// 2x2 stride-2 max pool; input H and W must be even. Ties resolve to the
// first element in (kh, kw) scan order so backward is deterministic.
class MaxPool2x2 final : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "maxpool2x2"; }

private:
    std::vector<std::size_t> argmax_;
    std::size_t in_n = 0, in_c = 0, in_h = 0, in_w = 0;
};

} // namespace rfdose
