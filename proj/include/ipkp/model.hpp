#ifndef IPKP_MODEL_HPP
#define IPKP_MODEL_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ipkp/rng.hpp"
#include "ipkp/tensor.hpp"

namespace ipkp {

enum class LayerKind { Conv2D, MaxPool, ReLU, Tanh, Flatten, Dense };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Tanh: return "Tanh";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Dense: return "Dense";
    }
    return "?";
}

template <typename T>
struct LayerT {
    LayerKind kind = LayerKind::ReLU;
    // Conv2D
    int out_channels = 0, kernel_h = 0, kernel_w = 0, stride = 1, padding = 0;
    // MaxPool
    int window = 0, pool_stride = 0;
    // Dense
    int out_features = 0;
    // Empty for parameterless kinds; bound by bind_params().
    TensorT<T> weight, bias;

    bool has_params() const { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }

    static LayerT conv2d(int out_channels, int kernel, int stride = 1, int padding = 0) {
        LayerT l;
        l.kind = LayerKind::Conv2D;
        l.out_channels = out_channels;
        l.kernel_h = l.kernel_w = kernel;
        l.stride = stride;
        l.padding = padding;
        return l;
    }
    static LayerT max_pool(int window, int stride) {
        LayerT l;
        l.kind = LayerKind::MaxPool;
        l.window = window;
        l.pool_stride = stride;
        return l;
    }
    static LayerT relu() {
        LayerT l;
        l.kind = LayerKind::ReLU;
        return l;
    }
    static LayerT tanh() {
        LayerT l;
        l.kind = LayerKind::Tanh;
        return l;
    }
    static LayerT flatten() {
        LayerT l;
        l.kind = LayerKind::Flatten;
        return l;
    }
    static LayerT dense(int out_features) {
        LayerT l;
        l.kind = LayerKind::Dense;
        l.out_features = out_features;
        return l;
    }
};

// Ordered layer stack with a fixed per-item input shape [channels, height,
// width]. The parameterized layers (Conv2D, Dense), in order, define the
// truncation range for transfer experiments: k in [0, L].
template <typename T>
struct ModelT {
    std::vector<LayerT<T>> layers;
    std::array<int, 3> input_shape{1, 28, 28};
    int num_classes = 10;

    std::vector<int> param_layer_indices() const {
        std::vector<int> idx;
        for (size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].has_params()) idx.push_back(static_cast<int>(i));
        }
        return idx;
    }
    int param_layer_count() const { return static_cast<int>(param_layer_indices().size()); }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
};

using Layer = LayerT<float>;
using Model = ModelT<float>;

// Per-item (batch-free) shape of each layer boundary: result[0] is the input
// shape, result[i+1] the output of layer i. Throws ShapeError naming the
// offending layer and both shapes.
template <typename T>
inline std::vector<std::vector<int>> propagate_shapes(const ModelT<T>& m) {
    std::vector<std::vector<int>> shapes;
    shapes.push_back({m.input_shape[0], m.input_shape[1], m.input_shape[2]});
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        const auto& in = shapes.back();
        auto fail = [&](const std::string& why) {
            throw ShapeError(strprintf("layer %zu (%s): %s, input shape %s", i,
                                       layer_kind_name(l.kind), why.c_str(),
                                       Tensor::shape_str(in).c_str()));
        };
        std::vector<int> out;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                if (in.size() != 3) fail("expects a [C, H, W] input");
                int oh = (in[1] + 2 * l.padding - l.kernel_h) / l.stride + 1;
                int ow = (in[2] + 2 * l.padding - l.kernel_w) / l.stride + 1;
                if (oh < 1 || ow < 1) fail("kernel larger than padded input");
                out = {l.out_channels, oh, ow};
                break;
            }
            case LayerKind::MaxPool: {
                if (in.size() != 3) fail("expects a [C, H, W] input");
                int oh = (in[1] - l.window) / l.pool_stride + 1;
                int ow = (in[2] - l.window) / l.pool_stride + 1;
                if (oh < 1 || ow < 1) fail("window larger than input");
                out = {in[0], oh, ow};
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Tanh:
                out = in;
                break;
            case LayerKind::Flatten: {
                int64_t n = 1;
                for (int e : in) n *= e;
                out = {static_cast<int>(n)};
                break;
            }
            case LayerKind::Dense: {
                if (in.size() != 1) fail("expects a flat input; add a Flatten layer");
                out = {l.out_features};
                break;
            }
        }
        shapes.push_back(std::move(out));
    }
    return shapes;
}

// Allocates weight/bias tensors to match the propagated shapes. Weights are
// zero until init_params runs.
template <typename T>
inline void bind_params(ModelT<T>& m) {
    auto shapes = propagate_shapes(m);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        const auto& in = shapes[i];
        if (l.kind == LayerKind::Conv2D) {
            l.weight = TensorT<T>({l.out_channels, in[0], l.kernel_h, l.kernel_w});
            l.bias = TensorT<T>({l.out_channels});
        } else if (l.kind == LayerKind::Dense) {
            l.weight = TensorT<T>({l.out_features, in[0]});
            l.bias = TensorT<T>({l.out_features});
        }
    }
    const auto& final_shape = shapes.back();
    if (final_shape.size() != 1 || final_shape[0] != m.num_classes) {
        throw ShapeError(strprintf("model output shape %s does not match num_classes %d",
                                   Tensor::shape_str(final_shape).c_str(), m.num_classes));
    }
}

// Conv(1->6, 5x5, pad 2), Tanh, pool 2x2, Conv(6->16, 5x5), Tanh, pool 2x2,
// Flatten, Dense 400->120, Tanh, Dense 120->84, Tanh, Dense 84->classes.
template <typename T = float>
inline ModelT<T> lenet5(int num_classes = 10, std::array<int, 3> input_shape = {1, 28, 28}) {
    ModelT<T> m;
    m.input_shape = input_shape;
    m.num_classes = num_classes;
    using L = LayerT<T>;
    m.layers = {L::conv2d(6, 5, 1, 2), L::tanh(),  L::max_pool(2, 2),
                L::conv2d(16, 5, 1, 0), L::tanh(), L::max_pool(2, 2),
                L::flatten(),           L::dense(120), L::tanh(),
                L::dense(84),           L::tanh(),     L::dense(num_classes)};
    bind_params(m);
    return m;
}

template <typename U, typename T>
inline ModelT<U> model_cast(const ModelT<T>& m) {
    ModelT<U> out;
    out.input_shape = m.input_shape;
    out.num_classes = m.num_classes;
    out.layers.reserve(m.layers.size());
    for (const auto& l : m.layers) {
        LayerT<U> c;
        c.kind = l.kind;
        c.out_channels = l.out_channels;
        c.kernel_h = l.kernel_h;
        c.kernel_w = l.kernel_w;
        c.stride = l.stride;
        c.padding = l.padding;
        c.window = l.window;
        c.pool_stride = l.pool_stride;
        c.out_features = l.out_features;
        c.weight = l.weight.template cast<U>();
        c.bias = l.bias.template cast<U>();
        out.layers.push_back(std::move(c));
    }
    return out;
}

struct InitScheme {
    enum class Kind { GlorotUniform, HeNormal };
    Kind kind = Kind::GlorotUniform;
    uint64_t seed = 0;
};

// Fills every parameter tensor from a single splitmix64 stream walked over the
// layers in order, so a given (scheme, seed, architecture) always produces the
// same bits. Biases are zero.
template <typename T>
inline void init_params(ModelT<T>& m, const InitScheme& scheme) {
    Rng rng(scheme.seed);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        if (!l.has_params()) continue;
        int fan_in = 0, fan_out = 0;
        switch (l.kind) {
            case LayerKind::Conv2D:
                fan_in = l.weight.dim(1) * l.kernel_h * l.kernel_w;
                fan_out = l.out_channels * l.kernel_h * l.kernel_w;
                break;
            case LayerKind::Dense:
                fan_in = l.weight.dim(1);
                fan_out = l.out_features;
                break;
            default:
                throw Error(strprintf("init_params: unsupported parameterized layer kind at index %zu", i));
        }
        if (scheme.kind == InitScheme::Kind::GlorotUniform) {
            float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
            for (auto& w : l.weight.data) w = static_cast<T>(rng.uniform(-a, a));
        } else {
            float s = std::sqrt(2.0f / static_cast<float>(fan_in));
            for (auto& w : l.weight.data) w = static_cast<T>(rng.normal() * s);
        }
        for (auto& b : l.bias.data) b = T(0);
    }
}

}  // namespace ipkp

#endif
