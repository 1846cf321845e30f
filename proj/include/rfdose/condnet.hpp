#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rfdose/layers.hpp"

namespace rfdose {

// Dual-encoder, V-branch decoder with skip connections and reinjection of the
// per-level map outputs. The reference configuration is m = 8 (256x256
// slices); smaller m gives the same topology at desk scale (m >= 4).
// Branch order is fixed: v=0 sigma, v=1 epsilon, v=2 rho.
struct CondNetConfig {
    int m = 8;
    int V = 3;
    std::uint64_t seed = 0;
};

class CondNet {
public:
    explicit CondNet(const CondNetConfig& cfg);

    const CondNetConfig& config() const { return cfg_; }
    std::size_t input_size() const { return std::size_t(1) << cfg_.m; }
    int depth() const { return cfg_.m - 2; }    // encoder levels 1..D
    int top_level() const { return cfg_.m - 3; } // decoder levels i_top..1

    // t1, t2: [N,1,S,S]; returns V tensors [N,1,S,S] in (0,1).
    std::vector<Tensor> forward(const Tensor& t1, const Tensor& t2, bool training);

    // MSE over (batch, V outputs, pixels). Gradients are zeroed first, then
    // filled by one reverse pass. Targets: V tensors shaped like the outputs.
    double loss_and_gradients(const Tensor& t1, const Tensor& t2,
                              const std::vector<Tensor>& targets);

    void zero_grads();
    std::vector<Param*> params();
    // Parameters plus batch-norm running statistics, for checkpointing.
    std::vector<std::pair<std::string, Tensor*>> state_tensors();
    std::size_t param_count();

    struct AuditRow {
        std::string module;
        std::string layer;
        std::size_t c = 0, h = 0, w = 0; // 0x8x8 channel field means "2x64" hub
        bool hub = false;
    };
    // Runs a real forward pass on a zero batch and reports every module's
    // produced shape.
    std::vector<AuditRow> audit();

private:
    struct EncLevel {
        std::unique_ptr<Conv2d> conv;
        std::unique_ptr<BatchNorm2d> bn;
        ReLU relu;
        MaxPool2x2 pool;
    };
    struct EncHead {
        std::unique_ptr<Deconv2d> dec;
        std::unique_ptr<BatchNorm2d> bn;
        ReLU relu;
    };
    struct BranchLevel { // decoder level i
        std::unique_ptr<Deconv2d> dec;
        std::unique_ptr<BatchNorm2d> dec_bn;
        ReLU dec_relu;
        std::unique_ptr<Conv2d> map_conv;
        Sigmoid map_sig;
        // Present when i > 1: reinjection and the next fused conv stage.
        std::unique_ptr<Conv2d> proj;
        std::unique_ptr<Conv2d> cnv;
        std::unique_ptr<BatchNorm2d> cnv_bn;
        ReLU cnv_relu;
    };
    struct Branch {
        std::unique_ptr<Conv2d> top_cnv;
        std::unique_ptr<BatchNorm2d> top_bn;
        ReLU top_relu;
        std::vector<BranchLevel> levels; // ordered i_top .. 1
    };

    struct ForwardCache {
        std::vector<std::vector<Tensor>> enc_act; // [u][level-1], pre-pool
        std::vector<Tensor> enc_pooled_top;       // [u]
        std::vector<Tensor> head_out;             // [u]
        Tensor hub;
        // per branch, per level (ordered i_top..1): dec_out and map_out
        std::vector<std::vector<Tensor>> dec_out;
        std::vector<std::vector<Tensor>> map_out;
        std::vector<Tensor> outputs;
    };

    Tensor run_encoder(std::size_t u, const Tensor& x, bool training);
    void validate_input(const Tensor& t) const;

    CondNetConfig cfg_;
    std::vector<std::vector<EncLevel>> enc_; // [u][level-1]
    std::vector<EncHead> head_;              // [u]
    std::vector<Branch> branches_;
    ForwardCache cache_;
};

std::size_t channels_at(int i); // encoder conv output channels at level i

} // namespace rfdose
