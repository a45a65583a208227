#ifndef IPKP_OPTIM_HPP
#define IPKP_OPTIM_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ipkp/model.hpp"
#include "ipkp/ops.hpp"

namespace ipkp {

enum class OptimizerKind { SGD, SGDMomentum, Adam };

inline const char* optimizer_kind_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::SGDMomentum: return "sgd_momentum";
        case OptimizerKind::Adam: return "adam";
    }
    return "?";
}

inline OptimizerKind optimizer_kind_from(const std::string& s) {
    if (s == "sgd") return OptimizerKind::SGD;
    if (s == "sgd_momentum") return OptimizerKind::SGDMomentum;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd, sgd_momentum, or adam)");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGDMomentum;
    double lr = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0)) throw ConfigError(strprintf("optimizer: lr must be positive, got %g", lr));
        if (kind == OptimizerKind::SGDMomentum && (momentum < 0 || momentum >= 1)) {
            throw ConfigError(strprintf("optimizer: momentum must be in [0, 1), got %g", momentum));
        }
        if (kind == OptimizerKind::Adam) {
            if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
                throw ConfigError(strprintf("optimizer: betas must be in [0, 1), got %g / %g",
                                            beta1, beta2));
            }
            if (!(eps > 0)) throw ConfigError(strprintf("optimizer: eps must be positive, got %g", eps));
        }
    }
};

// Per-parameter-tensor slots for velocity (momentum) or first/second moments
// (Adam). Sized lazily to the model it first steps.
template <typename T>
struct OptStateT {
    std::vector<TensorT<T>> vel_w, vel_b;    // SGDMomentum
    std::vector<TensorT<T>> m_w, m_b, v_w, v_b;  // Adam
    long step = 0;

    void match(const ModelT<T>& m, OptimizerKind kind) {
        auto fit = [&](std::vector<TensorT<T>>& w, std::vector<TensorT<T>>& b) {
            w.resize(m.layers.size());
            b.resize(m.layers.size());
            for (size_t i = 0; i < m.layers.size(); ++i) {
                if (!m.layers[i].has_params()) continue;
                if (w[i].shape != m.layers[i].weight.shape) {
                    w[i] = TensorT<T>(m.layers[i].weight.shape);
                    b[i] = TensorT<T>(m.layers[i].bias.shape);
                }
            }
        };
        if (kind == OptimizerKind::SGDMomentum) fit(vel_w, vel_b);
        if (kind == OptimizerKind::Adam) {
            fit(m_w, m_b);
            fit(v_w, v_b);
        }
    }
};

using OptState = OptStateT<float>;

// One in-place parameter update from the accumulated gradients.
template <typename T>
inline void optimizer_step(ModelT<T>& model, const GradientsT<T>& grads, OptStateT<T>& state,
                           const OptimizerConfig& cfg) {
    cfg.validate();
    state.match(model, cfg.kind);
    state.step += 1;
    auto update = [&](TensorT<T>& p, const TensorT<T>& g, TensorT<T>* vel, TensorT<T>* m1,
                      TensorT<T>* m2) {
        T lr = static_cast<T>(cfg.lr);
        switch (cfg.kind) {
            case OptimizerKind::SGD:
                for (size_t j = 0; j < p.data.size(); ++j) p.data[j] -= lr * g.data[j];
                break;
            case OptimizerKind::SGDMomentum: {
                T mu = static_cast<T>(cfg.momentum);
                for (size_t j = 0; j < p.data.size(); ++j) {
                    vel->data[j] = mu * vel->data[j] + g.data[j];
                    p.data[j] -= lr * vel->data[j];
                }
                break;
            }
            case OptimizerKind::Adam: {
                T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
                T corr1 = static_cast<T>(1.0 - std::pow(cfg.beta1, state.step));
                T corr2 = static_cast<T>(1.0 - std::pow(cfg.beta2, state.step));
                T eps = static_cast<T>(cfg.eps);
                for (size_t j = 0; j < p.data.size(); ++j) {
                    m1->data[j] = b1 * m1->data[j] + (T(1) - b1) * g.data[j];
                    m2->data[j] = b2 * m2->data[j] + (T(1) - b2) * g.data[j] * g.data[j];
                    T mh = m1->data[j] / corr1;
                    T vh = m2->data[j] / corr2;
                    p.data[j] -= lr * mh / (std::sqrt(vh) + eps);
                }
                break;
            }
        }
    };
    for (size_t i = 0; i < model.layers.size(); ++i) {
        auto& l = model.layers[i];
        if (!l.has_params()) continue;
        TensorT<T>* vw = nullptr;
        TensorT<T>* vb = nullptr;
        TensorT<T>* mw = nullptr;
        TensorT<T>* mb = nullptr;
        TensorT<T>* sw = nullptr;
        TensorT<T>* sb = nullptr;
        if (cfg.kind == OptimizerKind::SGDMomentum) {
            vw = &state.vel_w[i];
            vb = &state.vel_b[i];
        } else if (cfg.kind == OptimizerKind::Adam) {
            mw = &state.m_w[i];
            mb = &state.m_b[i];
            sw = &state.v_w[i];
            sb = &state.v_b[i];
        }
        update(l.weight, grads.weight[i], vw, mw, sw);
        update(l.bias, grads.bias[i], vb, mb, sb);
    }
}

}  // namespace ipkp

#endif
