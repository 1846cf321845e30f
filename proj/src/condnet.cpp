#include "rfdose/condnet.hpp"

#include <cmath>

namespace rfdose {

std::size_t channels_at(int i) { return std::size_t(1) << (i + 1); }

CondNet::CondNet(const CondNetConfig& cfg) : cfg_(cfg) {
    if (cfg.m < 4) throw DomainError("network input size must be at least 2^4");
    if (cfg.V < 1) throw DomainError("network needs at least one output branch");
    Rng rng(derive_seed(cfg.seed, "condnet.init"));
    const int D = depth();
    const int i_top = top_level();

    enc_.resize(2);
    head_.resize(2);
    for (std::size_t u = 0; u < 2; ++u) {
        const std::string eu = "enc" + std::to_string(u + 1);
        for (int i = 1; i <= D; ++i) {
            EncLevel lvl;
            const std::size_t out_c = channels_at(i);
            const std::size_t in_c = (i == 1) ? 1 : channels_at(i - 1);
            const std::size_t stride = (i == 1) ? 2 : 1;
            const std::string name = eu + ".l" + std::to_string(i);
            lvl.conv = std::make_unique<Conv2d>(name + ".conv", in_c, out_c, 3, stride, 1, rng);
            lvl.bn = std::make_unique<BatchNorm2d>(name + ".bn", out_c);
            enc_[u].push_back(std::move(lvl));
        }
        const std::size_t top_c = channels_at(D);
        head_[u].dec = std::make_unique<Deconv2d>(eu + ".head.deconv", top_c, top_c / 2, 4, 4, 0, rng);
        head_[u].bn = std::make_unique<BatchNorm2d>(eu + ".head.bn", top_c / 2);
    }

    const std::size_t hub_c = channels_at(D); // 2 * 2^D
    branches_.resize(static_cast<std::size_t>(cfg.V));
    for (int v = 0; v < cfg.V; ++v) {
        Branch& br = branches_[static_cast<std::size_t>(v)];
        const std::string bv = "br" + std::to_string(v);
        br.top_cnv = std::make_unique<Conv2d>(bv + ".top.conv", hub_c,
                                              std::size_t(1) << (i_top + 2), 3, 1, 1, rng);
        br.top_bn = std::make_unique<BatchNorm2d>(bv + ".top.bn", std::size_t(1) << (i_top + 2));
        for (int i = i_top; i >= 1; --i) {
            BranchLevel lvl;
            const std::string name = bv + ".l" + std::to_string(i);
            const std::size_t in_c = std::size_t(1) << (i + 2);
            const std::size_t dec_c = std::size_t(1) << (i + 1);
            const std::size_t map_c = (i > 1) ? (std::size_t(1) << i) : 1;
            lvl.dec = std::make_unique<Deconv2d>(name + ".dec", in_c, dec_c, 4, 2, 1, rng);
            lvl.dec_bn = std::make_unique<BatchNorm2d>(name + ".dec_bn", dec_c);
            lvl.map_conv = std::make_unique<Conv2d>(name + ".map", dec_c, map_c, 3, 1, 1, rng);
            if (i > 1) {
                const int j = i - 1;
                const std::size_t cat_c = 3 * (std::size_t(1) << (j + 2));
                lvl.proj = std::make_unique<Conv2d>(bv + ".l" + std::to_string(j) + ".proj",
                                                    map_c, std::size_t(1) << (j + 2), 1, 1, 0, rng);
                lvl.cnv = std::make_unique<Conv2d>(bv + ".l" + std::to_string(j) + ".cnv", cat_c,
                                                   std::size_t(1) << (j + 2), 3, 1, 1, rng);
                lvl.cnv_bn = std::make_unique<BatchNorm2d>(bv + ".l" + std::to_string(j) + ".cnv_bn",
                                                           std::size_t(1) << (j + 2));
            }
            br.levels.push_back(std::move(lvl));
        }
    }
}

void CondNet::validate_input(const Tensor& t) const {
    const std::size_t S = input_size();
    if (t.c != 1 || t.h != S || t.w != S || t.n == 0)
        throw DomainError("network input must be Nx1x" + std::to_string(S) + "x" +
                          std::to_string(S) + ", got " + t.shape_str());
}

Tensor CondNet::run_encoder(std::size_t u, const Tensor& x, bool training) {
    Tensor cur = x;
    cache_.enc_act[u].clear();
    for (EncLevel& lvl : enc_[u]) {
        Tensor a = lvl.relu.forward(lvl.bn->forward(lvl.conv->forward(cur, training), training),
                                    training);
        cache_.enc_act[u].push_back(a);
        cur = lvl.pool.forward(a, training);
    }
    cache_.enc_pooled_top[u] = cur;
    Tensor h = head_[u].relu.forward(
        head_[u].bn->forward(head_[u].dec->forward(cur, training), training), training);
    check_finite(h, "encoder " + std::to_string(u + 1) + " head");
    cache_.head_out[u] = h;
    return h;
}

std::vector<Tensor> CondNet::forward(const Tensor& t1, const Tensor& t2, bool training) {
    validate_input(t1);
    validate_input(t2);
    if (!t1.same_shape(t2)) throw DomainError("T1/T2 batch shapes differ");

    const int i_top = top_level();
    cache_ = ForwardCache{};
    cache_.enc_act.resize(2);
    cache_.enc_pooled_top.resize(2);
    cache_.head_out.resize(2);
    cache_.dec_out.assign(branches_.size(), {});
    cache_.map_out.assign(branches_.size(), {});

    Tensor h1 = run_encoder(0, t1, training);
    Tensor h2 = run_encoder(1, t2, training);
    cache_.hub = concat_channels({&h1, &h2});

    std::vector<Tensor> outputs;
    for (std::size_t v = 0; v < branches_.size(); ++v) {
        Branch& br = branches_[v];
        Tensor t = br.top_relu.forward(
            br.top_bn->forward(br.top_cnv->forward(cache_.hub, training), training), training);
        for (std::size_t li = 0; li < br.levels.size(); ++li) {
            const int i = i_top - static_cast<int>(li);
            BranchLevel& lvl = br.levels[li];
            Tensor dec_out = lvl.dec_relu.forward(
                lvl.dec_bn->forward(lvl.dec->forward(t, training), training), training);
            Tensor map_out = lvl.map_sig.forward(lvl.map_conv->forward(dec_out, training), training);
            check_finite(map_out, "branch " + std::to_string(v) + " level " + std::to_string(i));
            cache_.dec_out[v].push_back(dec_out);
            cache_.map_out[v].push_back(map_out);
            if (i > 1) {
                Tensor proj_out = lvl.proj->forward(map_out, training);
                const std::size_t j = static_cast<std::size_t>(i - 1);
                Tensor cat = concat_channels({&dec_out, &cache_.enc_act[0][j - 1],
                                              &cache_.enc_act[1][j - 1], &proj_out});
                t = lvl.cnv_relu.forward(
                    lvl.cnv_bn->forward(lvl.cnv->forward(cat, training), training), training);
            }
        }
        outputs.push_back(cache_.map_out[v].back());
    }
    cache_.outputs = outputs;
    return outputs;
}

double CondNet::loss_and_gradients(const Tensor& t1, const Tensor& t2,
                                   const std::vector<Tensor>& targets) {
    if (targets.size() != branches_.size())
        throw DomainError("expected " + std::to_string(branches_.size()) + " target maps, got " +
                          std::to_string(targets.size()));
    zero_grads();
    std::vector<Tensor> outs = forward(t1, t2, true);

    const int i_top = top_level();
    double loss = 0.0;
    const double denom =
        static_cast<double>(outs[0].size()) * static_cast<double>(branches_.size());
    std::vector<Tensor> g_out;
    for (std::size_t v = 0; v < outs.size(); ++v) {
        if (!outs[v].same_shape(targets[v]))
            throw DomainError("target " + std::to_string(v) + " shape " + targets[v].shape_str() +
                              " does not match output " + outs[v].shape_str());
        Tensor g(outs[v].n, outs[v].c, outs[v].h, outs[v].w);
        for (std::size_t i = 0; i < outs[v].size(); ++i) {
            const double d = outs[v].v[i] - targets[v].v[i];
            loss += d * d;
            g.v[i] = 2.0 * d / denom;
        }
        g_out.push_back(std::move(g));
    }
    loss /= denom;
    if (!std::isfinite(loss)) throw NumericError("training loss is non-finite");

    // Gradients w.r.t. the pre-pool encoder activations accumulate across
    // branches (skip connections) before the encoder backward pass runs.
    std::vector<std::vector<Tensor>> g_enc_act(2);
    for (std::size_t u = 0; u < 2; ++u)
        for (const Tensor& a : cache_.enc_act[u]) g_enc_act[u].emplace_back(a.n, a.c, a.h, a.w);
    Tensor g_hub(cache_.hub.n, cache_.hub.c, cache_.hub.h, cache_.hub.w);

    for (std::size_t v = 0; v < branches_.size(); ++v) {
        Branch& br = branches_[v];
        // Walk decoder levels from 1 back up to i_top. Level i lives at
        // cache index i_top - i.
        Tensor g_map = g_out[v];
        Tensor g_dec_extra; // concat contribution to dec_out at the next level up
        for (int i = 1; i <= i_top; ++i) {
            const std::size_t li = static_cast<std::size_t>(i_top - i);
            BranchLevel& lvl = br.levels[li];
            Tensor g_dec = lvl.map_conv->backward(lvl.map_sig.backward(g_map));
            if (i > 1) {
                for (std::size_t k = 0; k < g_dec.size(); ++k) g_dec.v[k] += g_dec_extra.v[k];
            }
            Tensor g_t = lvl.dec->backward(lvl.dec_bn->backward(lvl.dec_relu.backward(g_dec)));
            if (i < i_top) {
                // g_t is the gradient w.r.t. the CnvMod_i output. The cnv that
                // produced it is owned by the level-(i+1) entry, one slot
                // earlier in the i_top..1 ordering.
                BranchLevel& producer = br.levels[li - 1];
                Tensor g_cat = producer.cnv->backward(
                    producer.cnv_bn->backward(producer.cnv_relu.backward(g_t)));
                const Tensor& a1 = cache_.enc_act[0][static_cast<std::size_t>(i - 1)];
                const Tensor& a2 = cache_.enc_act[1][static_cast<std::size_t>(i - 1)];
                const std::size_t dec_c = cache_.dec_out[v][li - 1].c;
                auto parts = split_channels(g_cat, {dec_c, a1.c, a2.c, dec_c});
                g_dec_extra = std::move(parts[0]);
                for (std::size_t k = 0; k < a1.size(); ++k) {
                    g_enc_act[0][static_cast<std::size_t>(i - 1)].v[k] += parts[1].v[k];
                    g_enc_act[1][static_cast<std::size_t>(i - 1)].v[k] += parts[2].v[k];
                }
                g_map = producer.proj->backward(parts[3]);
            } else {
                Tensor gh = br.top_cnv->backward(br.top_bn->backward(br.top_relu.backward(g_t)));
                for (std::size_t k = 0; k < gh.size(); ++k) g_hub.v[k] += gh.v[k];
            }
        }
    }

    auto g_heads = split_channels(g_hub, {cache_.head_out[0].c, cache_.head_out[1].c});
    for (std::size_t u = 0; u < 2; ++u) {
        Tensor g_pooled = head_[u].dec->backward(
            head_[u].bn->backward(head_[u].relu.backward(g_heads[u])));
        for (int i = depth(); i >= 1; --i) {
            EncLevel& lvl = enc_[u][static_cast<std::size_t>(i - 1)];
            Tensor g_act = lvl.pool.backward(g_pooled);
            Tensor& skip = g_enc_act[u][static_cast<std::size_t>(i - 1)];
            for (std::size_t k = 0; k < g_act.size(); ++k) g_act.v[k] += skip.v[k];
            g_pooled = lvl.conv->backward(lvl.bn->backward(lvl.relu.backward(g_act)));
        }
    }
    return loss;
}

void CondNet::zero_grads() {
    for (Param* p : params()) p->grad.zero();
}

std::vector<Param*> CondNet::params() {
    std::vector<Param*> out;
    auto add = [&out](Layer& l) {
        for (Param* p : l.params()) out.push_back(p);
    };
    for (std::size_t u = 0; u < 2; ++u) {
        for (EncLevel& lvl : enc_[u]) {
            add(*lvl.conv);
            add(*lvl.bn);
        }
        add(*head_[u].dec);
        add(*head_[u].bn);
    }
    for (Branch& br : branches_) {
        add(*br.top_cnv);
        add(*br.top_bn);
        for (BranchLevel& lvl : br.levels) {
            add(*lvl.dec);
            add(*lvl.dec_bn);
            add(*lvl.map_conv);
            if (lvl.proj) {
                add(*lvl.proj);
                add(*lvl.cnv);
                add(*lvl.cnv_bn);
            }
        }
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> CondNet::state_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (Param* p : params()) out.emplace_back(p->name, &p->value);
    auto add_bn = [&out](BatchNorm2d& bn) {
        out.emplace_back(bn.name + ".running_mean", &bn.running_mean);
        out.emplace_back(bn.name + ".running_var", &bn.running_var);
    };
    for (std::size_t u = 0; u < 2; ++u) {
        for (EncLevel& lvl : enc_[u]) add_bn(*lvl.bn);
        add_bn(*head_[u].bn);
    }
    for (Branch& br : branches_) {
        add_bn(*br.top_bn);
        for (BranchLevel& lvl : br.levels) {
            add_bn(*lvl.dec_bn);
            if (lvl.cnv_bn) add_bn(*lvl.cnv_bn);
        }
    }
    return out;
}

std::size_t CondNet::param_count() {
    std::size_t n = 0;
    for (Param* p : params()) n += p->value.size();
    return n;
}

std::vector<CondNet::AuditRow> CondNet::audit() {
    const std::size_t S = input_size();
    Tensor zero(1, 1, S, S);
    forward(zero, zero, false);

    std::vector<AuditRow> rows;
    auto push = [&rows](const std::string& module, const std::string& layer, const Tensor& t,
                        bool hub = false) {
        rows.push_back({module, layer, t.c, t.h, t.w, hub});
    };

    const int D = depth();
    const int i_top = top_level();
    for (std::size_t u = 0; u < 2; ++u) {
        for (int i = 1; i <= D; ++i) {
            const std::string name =
                "EncMod_{" + std::to_string(u + 1) + "," + std::to_string(i) + "}";
            const Tensor& act = cache_.enc_act[u][static_cast<std::size_t>(i - 1)];
            push(name, "Convolution", act);
            push(name, "BN & ReLU", act);
            // Re-derive the pooled shape rather than caching every pool output.
            Tensor pooled_shape(1, act.c, act.h / 2, act.w / 2);
            push(name, "Pooling (Max)", pooled_shape);
        }
        const std::string hname = "DecMod_{" + std::to_string(u + 1) + "}";
        push(hname, "Deconvolution", cache_.head_out[u]);
        push(hname, "BN & ReLU", cache_.head_out[u]);
    }
    push("Hub", "Concatenation", cache_.hub, true);

    for (std::size_t v = 0; v < branches_.size(); ++v) {
        for (int i = i_top; i >= 1; --i) {
            const std::size_t li = static_cast<std::size_t>(i_top - i);
            const std::string sv = std::to_string(v + 1), si = std::to_string(i);
            const Tensor& dec_out = cache_.dec_out[v][li];
            const Tensor& map_out = cache_.map_out[v][li];
            // CnvMod_{v,i} output: for i_top it is the hub-fed stage; below it
            // the fused stage stored as input to this level's deconv.
            Tensor cnv_shape(1, std::size_t(1) << (i + 2), dec_out.h / 2, dec_out.w / 2);
            push("CnvMod_{" + sv + "," + si + "}", "Convolution", cnv_shape);
            push("CnvMod_{" + sv + "," + si + "}", "BN & ReLU", cnv_shape);
            push("DecMod_{" + sv + "," + si + "}", "Deconvolution", dec_out);
            push("DecMod_{" + sv + "," + si + "}", "BN & ReLU", dec_out);
            push("Map_{" + sv + "," + si + "}", "Convolution + Sigmoid", map_out);
            if (i > 1) {
                Tensor cat_shape(1, 3 * (std::size_t(1) << (i + 1)), dec_out.h, dec_out.w);
                push("Concat_{" + sv + "," + std::to_string(i - 1) + "}", "Concatenation",
                     cat_shape);
            }
        }
    }
    return rows;
}

} // namespace rfdose
