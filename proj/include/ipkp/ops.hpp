#ifndef IPKP_OPS_HPP
#define IPKP_OPS_HPP

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ipkp/gemm.hpp"
#include "ipkp/mathkernels.hpp"
#include "ipkp/model.hpp"

namespace ipkp {

// acts[0] is the input batch, acts[i+1] the output of layer i. Tensors are
// resized in place so a reused Activations stops allocating after the first
// pass.
template <typename T>
struct ActivationsT {
    std::vector<TensorT<T>> acts;
};

using Activations = ActivationsT<float>;

// Scratch reused across iterations: im2col buffers, transposed operands, and
// the ping-pong activation-gradient tensors (keeping these here avoids a
// large allocation on every backward pass).
template <typename T>
struct WorkspaceT {
    std::vector<T> cols, colst, dcols, wt, packed;
    TensorT<T> dcur, dprev;
};

using Workspace = WorkspaceT<float>;

namespace detail {

template <typename T>
inline void resize_to(TensorT<T>& t, std::vector<int> shape) {
    t.shape = std::move(shape);
    t.data.resize(static_cast<size_t>(TensorT<T>::count(t.shape)));
}

// Unpacks one image [C, H, W] into columns [C*kh*kw, OH*OW]. `cols` points at
// this image's first column inside a row-strided buffer (stride `ld` columns),
// so a whole batch can share one [C*kh*kw, B*OH*OW] matrix. Out-of-bounds
// reads are zero. Stride-1 rows are contiguous runs and copied wholesale.
template <typename T>
inline void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride,
                   int padding, int OH, int OW, T* cols, size_t ld) {
    for (int c = 0; c < C; ++c) {
        const T* chan = img + static_cast<size_t>(c) * H * W;
        for (int kr = 0; kr < kh; ++kr) {
            for (int kc = 0; kc < kw; ++kc) {
                T* row = cols + (static_cast<size_t>(c) * kh * kw + kr * kw + kc) * ld;
                for (int oh = 0; oh < OH; ++oh) {
                    int ih = oh * stride - padding + kr;
                    T* dst = row + static_cast<size_t>(oh) * OW;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + OW, T(0));
                        continue;
                    }
                    const T* src = chan + static_cast<size_t>(ih) * W;
                    if (stride == 1) {
                        int lo = std::max(0, padding - kc);
                        int hi = std::min(OW, W + padding - kc);
                        std::fill(dst, dst + lo, T(0));
                        if (hi > lo) {
                            std::copy(src + (lo - padding + kc), src + (hi - padding + kc),
                                      dst + lo);
                        }
                        std::fill(dst + std::max(lo, hi), dst + OW, T(0));
                    } else {
                        for (int ow = 0; ow < OW; ++ow) {
                            int iw = ow * stride - padding + kc;
                            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of columns back into an image; inverse of im2col, with the same
// strided-buffer convention.
template <typename T>
inline void col2im(const T* cols, int C, int H, int W, int kh, int kw, int stride,
                   int padding, int OH, int OW, T* img, size_t ld) {
    for (int c = 0; c < C; ++c) {
        T* chan = img + static_cast<size_t>(c) * H * W;
        for (int kr = 0; kr < kh; ++kr) {
            for (int kc = 0; kc < kw; ++kc) {
                const T* row = cols + (static_cast<size_t>(c) * kh * kw + kr * kw + kc) * ld;
                for (int oh = 0; oh < OH; ++oh) {
                    int ih = oh * stride - padding + kr;
                    if (ih < 0 || ih >= H) continue;
                    const T* src = row + static_cast<size_t>(oh) * OW;
                    T* dst = chan + static_cast<size_t>(ih) * W;
                    if (stride == 1) {
                        int lo = std::max(0, padding - kc);
                        int hi = std::min(OW, W + padding - kc);
                        T* d = dst - padding + kc;
                        for (int ow = lo; ow < hi; ++ow) d[ow] += src[ow];
                    } else {
                        for (int ow = 0; ow < OW; ++ow) {
                            int iw = ow * stride - padding + kc;
                            if (iw >= 0 && iw < W) dst[iw] += src[ow];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Production convolution: im2col + matrix multiply, one image at a time so
// the column buffer stays cache resident (a batch-wide buffer measurably
// thrashes L2 at these shapes).
// input [B, C, H, W], weight [OC, C, kh, kw], bias [OC] -> [B, OC, OH, OW].
template <typename T>
inline TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                         const TensorT<T>& bias, int stride, int padding,
                         WorkspaceT<T>* ws = nullptr) {
    if (input.ndim() != 4 || weight.ndim() != 4) {
        throw ShapeError("conv2d: input must be [B, C, H, W] and weight [OC, C, kh, kw], got " +
                         input.shape_str() + " and " + weight.shape_str());
    }
    int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    int OC = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != C) {
        throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, input has " + std::to_string(C));
    }
    int OH = (H + 2 * padding - kh) / stride + 1;
    int OW = (W + 2 * padding - kw) / stride + 1;
    if (OH < 1 || OW < 1) throw ShapeError("conv2d: kernel larger than padded input");
    TensorT<T> out({B, OC, OH, OW});
    int K = C * kh * kw, N = OH * OW;
    WorkspaceT<T> local;
    WorkspaceT<T>& w = ws ? *ws : local;
    w.cols.resize(static_cast<size_t>(K) * N);
    for (int b = 0; b < B; ++b) {
        const T* img = input.ptr() + static_cast<size_t>(b) * C * H * W;
        T* dst = out.ptr() + static_cast<size_t>(b) * OC * N;
        detail::im2col(img, C, H, W, kh, kw, stride, padding, OH, OW, w.cols.data(),
                       static_cast<size_t>(N));
        gemm_nn(OC, N, K, weight.ptr(), w.cols.data(), dst, false);
        for (int oc = 0; oc < OC; ++oc) {
            T bv = bias.ptr()[oc];
            T* o = dst + static_cast<size_t>(oc) * N;
            for (int j = 0; j < N; ++j) o[j] += bv;
        }
    }
    return out;
}

// Direct 7-nested-loop convolution; the reference the production path is
// checked against.
template <typename T>
inline TensorT<T> conv2d_oracle(const TensorT<T>& input, const TensorT<T>& weight,
                                const TensorT<T>& bias, int stride, int padding) {
    if (input.ndim() != 4 || weight.ndim() != 4) {
        throw ShapeError("conv2d_oracle: input must be [B, C, H, W] and weight [OC, C, kh, kw], got " +
                         input.shape_str() + " and " + weight.shape_str());
    }
    int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    int OC = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != C) {
        throw ShapeError("conv2d_oracle: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, input has " + std::to_string(C));
    }
    int OH = (H + 2 * padding - kh) / stride + 1;
    int OW = (W + 2 * padding - kw) / stride + 1;
    if (OH < 1 || OW < 1) throw ShapeError("conv2d_oracle: kernel larger than padded input");
    TensorT<T> out({B, OC, OH, OW});
    for (int b = 0; b < B; ++b) {
        for (int oc = 0; oc < OC; ++oc) {
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = bias.ptr()[oc];
                    for (int c = 0; c < C; ++c) {
                        for (int kr = 0; kr < kh; ++kr) {
                            int ih = oh * stride - padding + kr;
                            if (ih < 0 || ih >= H) continue;
                            for (int kc = 0; kc < kw; ++kc) {
                                int iw = ow * stride - padding + kc;
                                if (iw < 0 || iw >= W) continue;
                                acc += input.data[((static_cast<size_t>(b) * C + c) * H + ih) * W + iw] *
                                       weight.data[((static_cast<size_t>(oc) * C + c) * kh + kr) * kw + kc];
                            }
                        }
                    }
                    out.data[((static_cast<size_t>(b) * OC + oc) * OH + oh) * OW + ow] = acc;
                }
            }
        }
    }
    return out;
}

// Forward pass over the whole stack; fills acts with the input plus every
// layer output. Pure in (params, batch). Shape mismatches name the layer.
template <typename T>
inline void forward(const ModelT<T>& m, const TensorT<T>& batch, ActivationsT<T>& out,
                    WorkspaceT<T>* ws = nullptr) {
    if (batch.ndim() != 4 || batch.dim(1) != m.input_shape[0] ||
        batch.dim(2) != m.input_shape[1] || batch.dim(3) != m.input_shape[2]) {
        throw ShapeError(strprintf("forward: batch shape %s does not match input shape [B, %d, %d, %d]",
                                   batch.shape_str().c_str(), m.input_shape[0], m.input_shape[1],
                                   m.input_shape[2]));
    }
    int B = batch.dim(0);
    out.acts.resize(m.layers.size() + 1);
    out.acts[0] = batch;
    WorkspaceT<T> local;
    WorkspaceT<T>& w = ws ? *ws : local;
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        const TensorT<T>& x = out.acts[i];
        TensorT<T>& y = out.acts[i + 1];
        switch (l.kind) {
            case LayerKind::Conv2D: {
                if (x.ndim() != 4 || x.dim(1) != l.weight.dim(1)) {
                    throw ShapeError(strprintf("layer %zu (Conv2D): weight %s cannot consume input %s",
                                               i, l.weight.shape_str().c_str(),
                                               x.shape_str().c_str()));
                }
                y = conv2d(x, l.weight, l.bias, l.stride, l.padding, &w);
                break;
            }
            case LayerKind::MaxPool: {
                int C = x.dim(1), H = x.dim(2), W = x.dim(3);
                int OH = (H - l.window) / l.pool_stride + 1;
                int OW = (W - l.window) / l.pool_stride + 1;
                detail::resize_to(y, {B, C, OH, OW});
                for (int b = 0; b < B; ++b) {
                    for (int c = 0; c < C; ++c) {
                        const T* src = x.ptr() + (static_cast<size_t>(b) * C + c) * H * W;
                        T* dst = y.ptr() + (static_cast<size_t>(b) * C + c) * OH * OW;
                        for (int oh = 0; oh < OH; ++oh) {
                            for (int ow = 0; ow < OW; ++ow) {
                                T best = src[static_cast<size_t>(oh * l.pool_stride) * W +
                                             ow * l.pool_stride];
                                for (int r = 0; r < l.window; ++r) {
                                    const T* row = src + static_cast<size_t>(oh * l.pool_stride + r) * W +
                                                   ow * l.pool_stride;
                                    for (int q = 0; q < l.window; ++q) {
                                        best = std::max(best, row[q]);
                                    }
                                }
                                dst[static_cast<size_t>(oh) * OW + ow] = best;
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::ReLU: {
                detail::resize_to(y, x.shape);
                for (size_t j = 0; j < x.data.size(); ++j) {
                    y.data[j] = x.data[j] > T(0) ? x.data[j] : T(0);
                }
                break;
            }
            case LayerKind::Tanh: {
                detail::resize_to(y, x.shape);
                tanh_forward(x.ptr(), y.ptr(), x.data.size());
                break;
            }
            case LayerKind::Flatten: {
                int64_t per_item = x.size() / B;
                detail::resize_to(y, {B, static_cast<int>(per_item)});
                y.data = x.data;
                break;
            }
            case LayerKind::Dense: {
                if (x.ndim() != 2) {
                    throw ShapeError(strprintf("layer %zu (Dense): expects [B, F] input, got %s", i,
                                               x.shape_str().c_str()));
                }
                int F = x.dim(1), O = l.out_features;
                if (l.weight.dim(1) != F) {
                    throw ShapeError(strprintf("layer %zu (Dense): weight shape %s does not match input %s",
                                               i, l.weight.shape_str().c_str(), x.shape_str().c_str()));
                }
                detail::resize_to(y, {B, O});
                w.wt.resize(static_cast<size_t>(F) * O);
                transpose(O, F, l.weight.ptr(), w.wt.data());
                gemm_nn(B, O, F, x.ptr(), w.wt.data(), y.ptr(), false);
                for (int b = 0; b < B; ++b) {
                    T* row = y.ptr() + static_cast<size_t>(b) * O;
                    for (int o = 0; o < O; ++o) row[o] += l.bias.ptr()[o];
                }
                break;
            }
        }
    }
}

template <typename T>
inline ActivationsT<T> forward(const ModelT<T>& m, const TensorT<T>& batch) {
    ActivationsT<T> acts;
    forward(m, batch, acts);
    return acts;
}

// Mean softmax cross-entropy over the batch, log-sum-exp stabilized, plus
// dlogits = (softmax - one_hot) / B.
template <typename T>
inline std::pair<double, TensorT<T>> loss_softmax_ce(const TensorT<T>& logits,
                                                     std::span<const int> labels) {
    if (logits.ndim() != 2) {
        throw ShapeError("loss_softmax_ce: logits must be [B, C], got " + logits.shape_str());
    }
    int B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != B) {
        throw ShapeError(strprintf("loss_softmax_ce: %zu labels for batch of %d", labels.size(), B));
    }
    TensorT<T> dlogits({B, C});
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
        int label = labels[static_cast<size_t>(b)];
        if (label < 0 || label >= C) {
            throw Error(strprintf("loss_softmax_ce: label %d at batch index %d outside [0, %d)",
                                  label, b, C));
        }
        const T* row = logits.ptr() + static_cast<size_t>(b) * C;
        T* drow = dlogits.ptr() + static_cast<size_t>(b) * C;
        T m = row[0];
        for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (int j = 0; j < C; ++j) sum += std::exp(static_cast<double>(row[j] - m));
        double lse = static_cast<double>(m) + std::log(sum);
        total += lse - static_cast<double>(row[label]);
        for (int j = 0; j < C; ++j) {
            double p = std::exp(static_cast<double>(row[j] - m)) / sum;
            drow[j] = static_cast<T>((p - (j == label ? 1.0 : 0.0)) / B);
        }
    }
    return {total / B, std::move(dlogits)};
}

// Per-layer parameter gradients; slots for parameterless layers stay empty.
template <typename T>
struct GradientsT {
    std::vector<TensorT<T>> weight, bias;

    void match(const ModelT<T>& m) {
        weight.resize(m.layers.size());
        bias.resize(m.layers.size());
        for (size_t i = 0; i < m.layers.size(); ++i) {
            if (!m.layers[i].has_params()) continue;
            if (weight[i].shape != m.layers[i].weight.shape) {
                weight[i] = TensorT<T>(m.layers[i].weight.shape);
                bias[i] = TensorT<T>(m.layers[i].bias.shape);
            }
        }
    }
};

using Gradients = GradientsT<float>;

// Exact reverse-mode gradients for every parameter, from the activations the
// forward pass produced. Max-pool routes gradient to the first maximal
// element in row-major window order. The input gradient of the first layer is
// never materialized.
template <typename T>
inline void backward(const ModelT<T>& m, const ActivationsT<T>& acts, const TensorT<T>& dlogits,
                     GradientsT<T>& grads, WorkspaceT<T>* ws = nullptr) {
    if (acts.acts.size() != m.layers.size() + 1) {
        throw Error(strprintf("backward: %zu activations for %zu layers; run forward first",
                              acts.acts.size(), m.layers.size()));
    }
    grads.match(m);
    WorkspaceT<T> local;
    WorkspaceT<T>& w = ws ? *ws : local;
    TensorT<T>& dcur = w.dcur;
    TensorT<T>& dprev = w.dprev;
    detail::resize_to(dcur, dlogits.shape);
    dcur.data.assign(dlogits.data.begin(), dlogits.data.end());
    int B = acts.acts[0].dim(0);
    for (size_t ii = m.layers.size(); ii-- > 0;) {
        const auto& l = m.layers[ii];
        const TensorT<T>& x = acts.acts[ii];
        const TensorT<T>& y = acts.acts[ii + 1];
        if (!dcur.same_shape(y)) {
            throw ShapeError(strprintf("backward: layer %zu (%s) got gradient %s for output %s", ii,
                                       layer_kind_name(l.kind), dcur.shape_str().c_str(),
                                       y.shape_str().c_str()));
        }
        bool need_input_grad = ii > 0;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                int C = x.dim(1), H = x.dim(2), W = x.dim(3);
                int OC = l.out_channels, OH = y.dim(2), OW = y.dim(3);
                int K = C * l.kernel_h * l.kernel_w, N = OH * OW;
                w.cols.resize(static_cast<size_t>(K) * N);
                w.colst.resize(static_cast<size_t>(K) * N);
                if (need_input_grad) {
                    w.dcols.resize(static_cast<size_t>(K) * N);
                    w.wt.resize(static_cast<size_t>(K) * OC);
                    transpose(OC, K, l.weight.ptr(), w.wt.data());
                    detail::resize_to(dprev, x.shape);
                    std::fill(dprev.data.begin(), dprev.data.end(), T(0));
                }
                TensorT<T>& wg = grads.weight[ii];
                TensorT<T>& bg = grads.bias[ii];
                std::fill(wg.data.begin(), wg.data.end(), T(0));
                std::fill(bg.data.begin(), bg.data.end(), T(0));
                for (int b = 0; b < B; ++b) {
                    const T* img = x.ptr() + static_cast<size_t>(b) * C * H * W;
                    const T* dy = dcur.ptr() + static_cast<size_t>(b) * OC * N;
                    detail::im2col(img, C, H, W, l.kernel_h, l.kernel_w, l.stride, l.padding, OH,
                                   OW, w.cols.data(), static_cast<size_t>(N));
                    // Contract over the spatial axis with the j-inner kernel;
                    // gemm_nt's dot products would serialize on the FP adds.
                    transpose(K, N, w.cols.data(), w.colst.data());
                    gemm_nn(OC, K, N, dy, w.colst.data(), wg.ptr(), true);
                    for (int oc = 0; oc < OC; ++oc) {
                        const T* row = dy + static_cast<size_t>(oc) * N;
                        // Four partial sums keep the reduction off one serial add chain.
                        T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
                        int j = 0;
                        for (; j + 4 <= N; j += 4) {
                            acc0 += row[j];
                            acc1 += row[j + 1];
                            acc2 += row[j + 2];
                            acc3 += row[j + 3];
                        }
                        for (; j < N; ++j) acc0 += row[j];
                        bg.data[static_cast<size_t>(oc)] += acc0 + acc1 + acc2 + acc3;
                    }
                    if (need_input_grad) {
                        gemm_nn(K, N, OC, w.wt.data(), dy, w.dcols.data(), false);
                        detail::col2im(w.dcols.data(), C, H, W, l.kernel_h, l.kernel_w, l.stride,
                                       l.padding, OH, OW,
                                       dprev.ptr() + static_cast<size_t>(b) * C * H * W,
                                       static_cast<size_t>(N));
                    }
                }
                break;
            }
            case LayerKind::MaxPool: {
                int C = x.dim(1), H = x.dim(2), W = x.dim(3);
                int OH = y.dim(2), OW = y.dim(3);
                detail::resize_to(dprev, x.shape);
                std::fill(dprev.data.begin(), dprev.data.end(), T(0));
                for (int b = 0; b < B; ++b) {
                    for (int c = 0; c < C; ++c) {
                        const T* src = x.ptr() + (static_cast<size_t>(b) * C + c) * H * W;
                        const T* ymax = y.ptr() + (static_cast<size_t>(b) * C + c) * OH * OW;
                        const T* dy = dcur.ptr() + (static_cast<size_t>(b) * C + c) * OH * OW;
                        T* dx = dprev.ptr() + (static_cast<size_t>(b) * C + c) * H * W;
                        for (int oh = 0; oh < OH; ++oh) {
                            for (int ow = 0; ow < OW; ++ow) {
                                // The forward output is the window max; route the
                                // gradient to its first occurrence in row-major order.
                                T best = ymax[static_cast<size_t>(oh) * OW + ow];
                                int base_r = oh * l.pool_stride, base_c = ow * l.pool_stride;
                                for (int r = 0; r < l.window; ++r) {
                                    const T* row = src + static_cast<size_t>(base_r + r) * W +
                                                   base_c;
                                    int q = 0;
                                    for (; q < l.window; ++q) {
                                        if (row[q] == best) break;
                                    }
                                    if (q < l.window) {
                                        dx[static_cast<size_t>(base_r + r) * W + base_c + q] +=
                                            dy[static_cast<size_t>(oh) * OW + ow];
                                        break;
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::ReLU: {
                detail::resize_to(dprev, x.shape);
                for (size_t j = 0; j < x.data.size(); ++j) {
                    dprev.data[j] = y.data[j] > T(0) ? dcur.data[j] : T(0);
                }
                break;
            }
            case LayerKind::Tanh: {
                detail::resize_to(dprev, x.shape);
                for (size_t j = 0; j < x.data.size(); ++j) {
                    dprev.data[j] = dcur.data[j] * (T(1) - y.data[j] * y.data[j]);
                }
                break;
            }
            case LayerKind::Flatten: {
                detail::resize_to(dprev, x.shape);
                dprev.data = dcur.data;
                break;
            }
            case LayerKind::Dense: {
                int F = x.dim(1), O = l.out_features;
                TensorT<T>& wg = grads.weight[ii];
                TensorT<T>& bg = grads.bias[ii];
                // dW[O,F] = dY^T * X; dY is [B,O], X is [B,F]
                w.wt.resize(static_cast<size_t>(O) * B);
                transpose(B, O, dcur.ptr(), w.wt.data());
                gemm_nn(O, F, B, w.wt.data(), x.ptr(), wg.ptr(), false);
                for (int o = 0; o < O; ++o) bg.data[static_cast<size_t>(o)] = T(0);
                for (int b = 0; b < B; ++b) {
                    const T* row = dcur.ptr() + static_cast<size_t>(b) * O;
                    for (int o = 0; o < O; ++o) bg.data[static_cast<size_t>(o)] += row[o];
                }
                if (need_input_grad) {
                    detail::resize_to(dprev, x.shape);
                    gemm_nn(B, F, O, dcur.ptr(), l.weight.ptr(), dprev.ptr(), false);
                }
                break;
            }
        }
        if (need_input_grad) std::swap(dcur, dprev);
    }
}

}  // namespace ipkp

#endif
